#include "nss/features/trace_io.hpp"
#include "nss/lab/agent.hpp"
#include "nss/lab/scenario.hpp"
#include "nss/service/api.hpp"
#include "nss/service/config.hpp"
#include "nss/service/service.hpp"
#include "nss/service/training.hpp"
#include "nss/store/model_store.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

namespace {

namespace cls = nss::classifier;
namespace lab = nss::lab;
namespace feat = nss::features;
namespace svc = nss::service;
namespace store = nss::store;
using nlohmann::json;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Bad flags or unreadable input files.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(text);
    while (std::getline(in, cell, sep)) out.push_back(cell);
    if (!text.empty() && text.back() == sep) out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw UsageError(where + ": not a finite number: '" + text + "'");
    }
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

Csv read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read " + path);
    Csv csv;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (trim(line).empty()) continue;
        auto cells = split(line, ',');
        for (auto& c : cells) c = trim(c);
        if (csv.header.empty()) {
            csv.header = std::move(cells);
            continue;
        }
        if (cells.size() != csv.header.size()) {
            throw UsageError(path + ":" + std::to_string(number) + ": expected " +
                             std::to_string(csv.header.size()) + " columns, got " + std::to_string(cells.size()));
        }
        csv.rows.push_back(std::move(cells));
        csv.line_numbers.push_back(number);
    }
    if (csv.header.empty()) throw UsageError(path + ": empty file");
    return csv;
}

/// Flattens nested objects into `a.b=value` lines.
void print_flat(std::ostream& out, const json& value, const std::string& prefix = "") {
    if (value.is_object()) {
        for (const auto& [k, v] : value.items()) print_flat(out, v, prefix.empty() ? k : prefix + "." + k);
    } else if (value.is_string()) {
        out << prefix << "=" << value.get<std::string>() << "\n";
    } else {
        out << prefix << "=" << value.dump() << "\n";
    }
}

store::ModelArtifact load_model_file(const std::string& path) {
    std::string bytes;
    try {
        bytes = store::read_file(path);
    } catch (const std::exception& e) {
        throw UsageError(std::string("cannot read model: ") + e.what());
    }
    try {
        return store::parse_artifact(bytes);
    } catch (const std::exception& e) {
        throw UsageError(path + ": " + e.what());
    }
}

/// Blocks SIGINT and SIGTERM in every thread so wait_for_signal can take them.
sigset_t block_stop_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    return set;
}

void wait_for_signal(const sigset_t& set) {
    int sig = 0;
    sigwait(&set, &sig);
}

// serve

struct ServeOpts {
    std::string config;
    std::string listen;
    std::string data_dir;
};

int run_serve(const ServeOpts& o) {
    svc::ServiceConfig config;
    try {
        config = o.config.empty() ? svc::ServiceConfig{} : svc::load_config(o.config);
        if (o.config.empty()) svc::apply_env_overrides(config, svc::process_env());
        if (!o.listen.empty()) config.listen = o.listen;
        if (!o.data_dir.empty()) config.data_dir = o.data_dir;
        config.validate();
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    const auto [host, port] = svc::split_listen(config.listen);
    const auto signals = block_stop_signals();
    svc::Service service(config);
    svc::ApiServer api(service);
    const int bound = api.bind(host, port);
    service.start();
    api.start();
    std::cerr << "nss: serving on " << host << ":" << bound << " data_dir=" << config.data_dir.string() << "\n";
    wait_for_signal(signals);
    std::cerr << "nss: shutting down\n";
    api.stop();
    service.stop();
    return 0;
}

// train

struct TrainOpts {
    std::string samples;
    std::string out;
    double delta = 1.0;
    double alpha = 1.0;
    double epsilon = 0.0;
    int max_passes = 20;
    std::string variant = "a";
    bool no_normalize = false;
    bool json_out = false;
};

svc::TrainingInput read_training_csv(const std::string& path, bool normalize) {
    const Csv csv = read_csv(path);
    if (csv.header.size() < 2 || csv.header.back() != "label") {
        throw UsageError(path + ": header must be f1,...,fn,label");
    }
    svc::TrainingInput input;
    input.normalize = normalize;
    input.feature_order.assign(csv.header.begin(), csv.header.end() - 1);
    std::map<std::string, cls::ClassId> ids;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& cells = csv.rows[r];
        const std::string where = path + ":" + std::to_string(csv.line_numbers[r]);
        std::vector<double> row;
        for (std::size_t i = 0; i + 1 < cells.size(); ++i) row.push_back(parse_number(cells[i], where));
        const std::string& name = cells.back();
        if (name.empty()) throw UsageError(where + ": empty label");
        const auto [it, inserted] = ids.emplace(name, static_cast<cls::ClassId>(ids.size()));
        input.rows.push_back(std::move(row));
        input.labels.push_back({it->second, name});
        input.source_ids.push_back("row-" + std::to_string(csv.line_numbers[r]));
    }
    if (input.rows.empty()) throw UsageError(path + ": no sample rows");
    return input;
}

int run_train(const TrainOpts& o) {
    const auto input = read_training_csv(o.samples, !o.no_normalize);
    cls::TrainParams params;
    params.delta = o.delta;
    params.epsilon = o.epsilon;
    params.max_passes = o.max_passes;
    params.variant = o.variant == "b" ? cls::UpdateVariant::B : cls::UpdateVariant::A;
    cls::KernelParams kernel{o.alpha};
    try {
        cls::validate(params);
        cls::validate(kernel);
    } catch (const cls::ClassifierError& e) {
        throw UsageError(e.what());
    }
    auto [artifact, report] = svc::train_model(input, params, kernel, 0);
    const std::string bytes = store::serialize_artifact(artifact);
    store::atomic_write_file(o.out, bytes);
    report["model_id"] = store::model_id_for(bytes);
    report["out"] = o.out;
    if (o.json_out) {
        std::cout << report.dump() << "\n";
    } else {
        print_flat(std::cout, report);
    }
    return 0;
}

// classify

struct ClassifyOpts {
    std::string model;
    std::string input;
    bool no_normalize = false;
    bool json_out = false;
};

int run_classify(const ClassifyOpts& o) {
    const auto artifact = load_model_file(o.model);
    const auto& model = artifact.model;
    const auto& order = artifact.feature_order();
    const Csv csv = read_csv(o.input);

    std::vector<std::string> columns = csv.header;
    const bool has_label = !columns.empty() && columns.back() == "label";
    if (has_label) columns.pop_back();
    if (columns.size() != order.size()) {
        throw UsageError(o.input + ": has " + std::to_string(columns.size()) + " feature columns, model expects dim " +
                         std::to_string(order.size()));
    }
    if (columns != order) {
        std::string expected;
        for (const auto& n : order) expected += (expected.empty() ? "" : ",") + n;
        throw UsageError(o.input + ": feature columns do not match the model (dim " + std::to_string(order.size()) +
                         "), expected " + expected);
    }

    const nss::NormParams identity = nss::NormParams::identity(order);
    if (!o.json_out) {
        std::cout << "row,label,margin";
        for (const auto& c : model.classes) std::cout << ",potential_" << c.name;
        std::cout << "\n";
    }
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const std::string where = o.input + ":" + std::to_string(csv.line_numbers[r]);
        std::vector<double> raw;
        for (std::size_t i = 0; i < order.size(); ++i) raw.push_back(parse_number(csv.rows[r][i], where));
        const auto vector = feat::normalize_values(raw, o.no_normalize ? identity : model.norm);
        const auto d = cls::classify(model, vector);
        const std::string label = d.label ? model.class_name(*d.label) : "Unidentified";
        if (o.json_out) {
            json potentials = json::object();
            for (std::size_t c = 0; c < model.classes.size(); ++c) potentials[model.classes[c].name] = d.potentials[c];
            json line{{"row", r}, {"label", label}, {"margin", d.margin}, {"potentials", potentials}};
            if (has_label) line["expected"] = csv.rows[r].back();
            std::cout << line.dump() << "\n";
        } else {
            std::cout << r << "," << label << "," << feat::format_double(d.margin);
            for (double p : d.potentials) std::cout << "," << feat::format_double(p);
            std::cout << "\n";
        }
    }
    return 0;
}

// synth

struct SynthOpts {
    std::string scenario;
    std::uint64_t seed = 0;
    int duration = 300;
    int poll = 10;
    std::uint32_t counter_base = 0;
    std::string target = "lab";
    int if_index = 1;
    std::string out;
    bool json_out = false;
};

lab::ScenarioKind scenario_kind(const std::string& text) {
    try {
        return lab::parse_scenario_kind(text);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
}

int run_synth(const SynthOpts& o) {
    auto scenario = lab::make_scenario(scenario_kind(o.scenario), o.duration, o.seed);
    scenario.counter_base = o.counter_base;
    scenario.target_id = o.target;
    scenario.if_index = o.if_index;
    try {
        scenario.validate();
    } catch (const lab::LabError& e) {
        throw UsageError(e.what());
    }
    if (o.poll < 1) throw UsageError("--poll must be >= 1");
    const auto trace = lab::generate_trace(scenario, o.poll);
    if (o.out == "-") {
        feat::write_trace(std::cout, trace.snapshots);
        return 0;
    }
    lab::write_trace_files(o.out, trace);
    const json summary{{"out", o.out}, {"snapshots", trace.snapshots.size()}, {"meta", lab::to_json(trace.meta)}};
    if (o.json_out) {
        std::cout << summary.dump() << "\n";
    } else {
        print_flat(std::cout, summary);
    }
    return 0;
}

// dataset

struct DatasetOpts {
    int duration = 500;
    std::uint64_t seed = 100;
    int poll = 10;
    std::string out;
};

int run_dataset(const DatasetOpts& o) {
    if (o.poll < 1 || o.duration < o.poll) throw UsageError("--duration must be >= --poll >= 1");
    const auto data = lab::labeled_dataset(lab::reference_scenarios(o.duration, o.seed), o.poll);
    std::ostringstream csv;
    const auto order = feat::default_feature_order();
    for (const auto& name : order) csv << name << ",";
    csv << "label\n";
    for (std::size_t i = 0; i < data.raw.size(); ++i) {
        for (double v : data.raw[i]) csv << feat::format_double(v) << ",";
        csv << data.samples[i].label.name << "\n";
    }
    if (o.out == "-") {
        std::cout << csv.str();
    } else {
        store::atomic_write_file(o.out, csv.str());
    }
    return 0;
}

// agent

struct AgentOpts {
    std::string bind = "127.0.0.1:1161";
    std::string scenario = "normal";
    std::vector<std::string> phases;
    std::uint64_t seed = 0;
    double speed = 1.0;
    bool cycle = false;
    std::string community = "public";
    std::vector<int> if_indexes{1};
    bool json_out = false;
};

/// "kind:seconds", for example "congestion:300".
lab::Scenario parse_phase(const std::string& text, std::uint64_t seed) {
    const auto parts = split(text, ':');
    if (parts.size() != 2) throw UsageError("phase must be kind:seconds, got '" + text + "'");
    const double seconds = parse_number(parts[1], "phase " + text);
    if (seconds < 1 || seconds != static_cast<int>(seconds)) {
        throw UsageError("phase duration must be a whole number of seconds >= 1: '" + text + "'");
    }
    return lab::make_scenario(scenario_kind(parts[0]), static_cast<int>(seconds), seed);
}

int run_agent(const AgentOpts& o) {
    if (!(o.speed > 0)) throw UsageError("--speed must be > 0");
    lab::AgentOptions options;
    try {
        options.bind = nss::snmp::Endpoint::parse(o.bind);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    options.community = o.community;
    options.cycle = o.cycle;
    options.if_indexes = o.if_indexes;
    if (o.phases.empty()) {
        options.phases.push_back(lab::make_scenario(scenario_kind(o.scenario), 3600, o.seed));
    } else {
        for (std::size_t i = 0; i < o.phases.size(); ++i) options.phases.push_back(parse_phase(o.phases[i], o.seed + i));
    }
    if (o.speed != 1.0) options.clock = std::make_shared<nss::ScaledClock>(o.speed);

    const auto signals = block_stop_signals();
    lab::SyntheticAgent agent(options);
    const json info{{"endpoint", agent.endpoint().to_string()}, {"community", o.community}, {"speed", o.speed}};
    if (o.json_out) {
        std::cout << info.dump() << std::endl;
    } else {
        print_flat(std::cout, info);
        std::cout.flush();
    }
    wait_for_signal(signals);
    agent.stop();
    return 0;
}

// replay

struct ReplayOpts {
    std::string trace;
    std::string sink = "stdout";
    std::string token;
    std::size_t batch = 500;
};

int run_replay(const ReplayOpts& o) {
    std::vector<feat::CounterSnapshot> snapshots;
    try {
        snapshots = feat::read_trace_file(o.trace);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    if (o.sink == "stdout" || o.sink == "-") {
        feat::write_trace(std::cout, snapshots);
        return 0;
    }

    const auto scheme = o.sink.find("://");
    if (scheme == std::string::npos || o.sink.compare(0, scheme, "http") != 0) {
        throw UsageError("--sink must be stdout or an http:// URL");
    }
    const auto slash = o.sink.find('/', scheme + 3);
    const std::string origin = o.sink.substr(0, slash);
    std::string path = slash == std::string::npos ? "" : o.sink.substr(slash);
    if (path.empty() || path == "/") path = "/api/v1/snapshots";

    httplib::Client client(origin);
    client.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (!o.token.empty()) headers.emplace("Authorization", "Bearer " + o.token);

    std::size_t accepted = 0;
    const std::size_t batch = std::max<std::size_t>(o.batch, 1);
    for (std::size_t start = 0; start < snapshots.size(); start += batch) {
        json body = json::array();
        for (std::size_t i = start; i < std::min(snapshots.size(), start + batch); ++i) {
            body.push_back(feat::snapshot_to_json(snapshots[i]));
        }
        const auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) throw std::runtime_error("POST " + o.sink + " failed: " + httplib::to_string(res.error()));
        if (res->status / 100 != 2) {
            throw std::runtime_error("POST " + path + " returned " + std::to_string(res->status) + ": " + res->body);
        }
        accepted += json::parse(res->body).value("accepted", std::size_t{0});
    }
    std::cerr << "nss: replayed " << snapshots.size() << " snapshots, accepted " << accepted << "\n";
    return 0;
}

// export-model / import-model

struct ExportOpts {
    std::string data_dir = "nss-data";
    std::string id;
    std::string out;
};

int run_export(const ExportOpts& o) {
    store::ModelStore models(std::filesystem::path(o.data_dir) / "models");
    std::string id = o.id;
    if (id.empty()) {
        const auto active = models.active_id();
        if (!active) throw UsageError("no active model in " + o.data_dir + "; pass --id");
        id = *active;
    }
    if (!models.contains(id)) throw UsageError("no model " + id + " in " + o.data_dir);
    models.export_model(id, o.out);
    std::cout << id << "\n";
    return 0;
}

struct ImportOpts {
    std::string data_dir = "nss-data";
    std::string in;
    bool activate = false;
};

int run_import(const ImportOpts& o) {
    load_model_file(o.in);
    store::ModelStore models(std::filesystem::path(o.data_dir) / "models");
    const std::string id = models.import_model(o.in);
    if (o.activate) models.activate(id);
    std::cout << id << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Network state identification service"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "nss 0.1.0");

    ServeOpts serve;
    auto* serve_cmd = app.add_subcommand("serve", "Run the monitoring service");
    serve_cmd->add_option("--config", serve.config, "Config file")->check(CLI::ExistingFile);
    serve_cmd->add_option("--listen", serve.listen, "host:port, overrides the config");
    serve_cmd->add_option("--data-dir", serve.data_dir, "Data directory, overrides the config");

    TrainOpts train;
    auto* train_cmd = app.add_subcommand("train", "Train a model from a labeled sample CSV");
    train_cmd->add_option("--samples", train.samples, "CSV with header f1,...,fn,label")->required();
    train_cmd->add_option("--out", train.out, "Model file to write")->required();
    train_cmd->add_option("--delta", train.delta, "Stage-1 step");
    train_cmd->add_option("--alpha", train.alpha, "Kernel scale");
    train_cmd->add_option("--epsilon", train.epsilon, "Unidentified margin");
    train_cmd->add_option("--max-passes", train.max_passes, "Pass cap per stage");
    train_cmd->add_option("--variant", train.variant, "Stage-1 update rule")->check(CLI::IsMember({"a", "b"}));
    train_cmd->add_flag("--no-normalize", train.no_normalize, "Rows are already normalized");
    train_cmd->add_flag("--json", train.json_out, "JSON output");

    ClassifyOpts classify;
    auto* classify_cmd = app.add_subcommand("classify", "Classify feature CSV rows with a model");
    classify_cmd->add_option("--model", classify.model, "Model file")->required();
    classify_cmd->add_option("--input", classify.input, "CSV with the model's feature columns")->required();
    classify_cmd->add_flag("--no-normalize", classify.no_normalize, "Rows are already normalized");
    classify_cmd->add_flag("--json", classify.json_out, "JSON Lines output");

    SynthOpts synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic counter trace");
    synth_cmd->add_option("--scenario", synth.scenario, "normal|congestion|error-burst|broadcast-storm")->required();
    synth_cmd->add_option("--seed", synth.seed, "RNG seed");
    synth_cmd->add_option("--duration", synth.duration, "Seconds of scenario time");
    synth_cmd->add_option("--poll", synth.poll, "Poll interval in seconds");
    synth_cmd->add_option("--counter-base", synth.counter_base, "Initial counter value");
    synth_cmd->add_option("--target", synth.target, "Target id");
    synth_cmd->add_option("--if-index", synth.if_index, "Interface index");
    synth_cmd->add_option("--out", synth.out, "Trace file, or - for stdout")->required();
    synth_cmd->add_flag("--json", synth.json_out, "JSON output");

    DatasetOpts dataset;
    auto* dataset_cmd = app.add_subcommand("dataset", "Write the reference labeled sample CSV");
    dataset_cmd->add_option("--duration", dataset.duration, "Seconds per scenario");
    dataset_cmd->add_option("--seed", dataset.seed, "RNG seed");
    dataset_cmd->add_option("--poll", dataset.poll, "Poll interval in seconds");
    dataset_cmd->add_option("--out", dataset.out, "CSV file, or - for stdout")->required();

    AgentOpts agent;
    auto* agent_cmd = app.add_subcommand("agent", "Run a synthetic SNMP agent");
    agent_cmd->add_option("--bind", agent.bind, "host:port");
    agent_cmd->add_option("--scenario", agent.scenario, "Single scenario");
    agent_cmd->add_option("--phases", agent.phases, "kind:seconds list played in order")->delimiter(',');
    agent_cmd->add_flag("--cycle", agent.cycle, "Repeat the phases");
    agent_cmd->add_option("--seed", agent.seed, "RNG seed");
    agent_cmd->add_option("--speed", agent.speed, "Scenario clock multiplier");
    agent_cmd->add_option("--community", agent.community, "SNMP community");
    agent_cmd->add_option("--if-indexes", agent.if_indexes, "Interfaces to serve")->delimiter(',');
    agent_cmd->add_flag("--json", agent.json_out, "JSON output");

    ReplayOpts replay;
    auto* replay_cmd = app.add_subcommand("replay", "Replay a trace to stdout or a service");
    replay_cmd->add_option("--trace", replay.trace, "Trace file")->required();
    replay_cmd->add_option("--sink", replay.sink, "stdout or http://host:port[/path]");
    replay_cmd->add_option("--token", replay.token, "API token");
    replay_cmd->add_option("--batch", replay.batch, "Snapshots per request");

    ExportOpts exp;
    auto* export_cmd = app.add_subcommand("export-model", "Copy a stored model to a file");
    export_cmd->add_option("--data-dir", exp.data_dir, "Service data directory");
    export_cmd->add_option("--id", exp.id, "Model id, default the active model");
    export_cmd->add_option("--out", exp.out, "Destination file")->required();

    ImportOpts imp;
    auto* import_cmd = app.add_subcommand("import-model", "Add a model file to the store");
    import_cmd->add_option("--data-dir", imp.data_dir, "Service data directory");
    import_cmd->add_option("--in", imp.in, "Model file")->required();
    import_cmd->add_flag("--activate", imp.activate, "Make it the active model");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "nss: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*serve_cmd) return run_serve(serve);
        if (*train_cmd) return run_train(train);
        if (*classify_cmd) return run_classify(classify);
        if (*synth_cmd) return run_synth(synth);
        if (*dataset_cmd) return run_dataset(dataset);
        if (*agent_cmd) return run_agent(agent);
        if (*replay_cmd) return run_replay(replay);
        if (*export_cmd) return run_export(exp);
        if (*import_cmd) return run_import(imp);
    } catch (const UsageError& e) {
        std::cerr << "nss: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "nss: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
