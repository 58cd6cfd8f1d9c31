#include "nss/service/api.hpp"

#include "nss/features/trace_io.hpp"

#include <charconv>
#include <iostream>
#include <sstream>
#include <thread>

#include <httplib.h>

namespace nss::service {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), kJson);
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, status, json{{"code", code}, {"message", message}});
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return nullptr;
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw ServiceError(400, "invalid_json", std::string("request body is not JSON: ") + e.what());
    }
}

template <typename T>
std::optional<T> query_number(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    const std::string v = req.get_param_value(name);
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ServiceError(400, "invalid_query", std::string("query parameter ") + name + " must be an integer");
    }
    return out;
}

std::uint64_t path_id(const httplib::Request& req) {
    const std::string v = req.matches[1];
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ServiceError(400, "invalid_id", "'" + v + "' is not a record id");
    }
    return out;
}

store::LabeledSample sample_from_request(const json& j) {
    if (!j.is_object()) throw ServiceError(400, "invalid_sample", "sample must be a JSON object");
    try {
        store::LabeledSample s;
        s.raw_features = j.at("raw_features").get<std::vector<double>>();
        s.feature_order = j.at("feature_order").get<std::vector<std::string>>();
        const auto& label = j.at("label");
        s.label.name = label.is_object() ? label.at("name").get<std::string>() : label.get<std::string>();
        if (j.contains("source_id") && !j.at("source_id").is_null()) s.source_id = j.at("source_id").get<std::string>();
        return s;
    } catch (const json::exception& e) {
        throw ServiceError(400, "invalid_sample", std::string("sample needs raw_features, feature_order, label: ") +
                                                      e.what());
    }
}

std::string sse_frame(const Event& e) {
    return "id: " + std::to_string(e.seq) + "\nevent: " + e.type + "\ndata: " +
           e.data.dump(-1, ' ', false, json::error_handler_t::replace) + "\n\n";
}

}  // namespace

struct ApiServer::Impl {
    Service& service;
    httplib::Server server;
    std::thread thread;
    int port = -1;
    std::atomic<bool> stopping{false};

    explicit Impl(Service& s) : service(s) {
        server.new_task_queue = [] { return new httplib::ThreadPool(32); };
        install_handlers();
        install_routes();
        if (const auto& ui = service.config().ui_dir) {
            if (!server.set_mount_point("/ui", ui->string())) {
                std::cerr << "nss: ui_dir " << ui->string() << " is not a directory; /ui disabled\n";
            }
        }
    }

    void install_handlers() {
        server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
            const auto& token = service.config().api_token;
            if (!token || req.path.rfind("/api/", 0) != 0) return httplib::Server::HandlerResponse::Unhandled;
            const std::string header = req.get_header_value("Authorization");
            const bool ok = header == "Bearer " + *token || (req.has_param("token") && req.get_param_value("token") == *token);
            if (ok) return httplib::Server::HandlerResponse::Unhandled;
            send_error(res, 401, "unauthorized", "missing or wrong API token");
            return httplib::Server::HandlerResponse::Handled;
        });
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const ServiceError& e) {
                send_error(res, e.status(), e.code(), e.what());
            } catch (const features::FeatureError& e) {
                send_error(res, 400, "invalid_snapshot", e.what());
            } catch (const store::StoreError& e) {
                send_error(res, 500, "store_error", e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "internal", e.what());
            } catch (...) {
                send_error(res, 500, "internal", "unknown error");
            }
        });
        server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
            if (!res.body.empty()) return;
            if (res.status == 404) {
                send_error(res, 404, "not_found", "no route for " + req.method + " " + req.path);
            } else {
                send_error(res, res.status, "http_error", httplib::status_message(res.status));
            }
        });
    }

    void install_routes() {
        const std::string p = "/api/v1";

        server.Get(p + "/targets", [this](const httplib::Request&, httplib::Response& res) {
            json arr = json::array();
            for (const auto& t : service.targets()) arr.push_back(snmp::to_json(t));
            send_json(res, 200, json{{"targets", arr}});
        });
        server.Post(p + "/targets", [this](const httplib::Request& req, httplib::Response& res) {
            snmp::Target target;
            try {
                target = snmp::target_from_json(parse_body(req));
            } catch (const ServiceError&) {
                throw;
            } catch (const std::exception& e) {
                throw ServiceError(400, "invalid_target", e.what());
            }
            const bool created = service.upsert_target(target);
            send_json(res, created ? 201 : 200, snmp::to_json(target));
        });
        server.Delete(p + R"(/targets/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            if (!service.remove_target(id)) throw ServiceError(404, "target_not_found", "no target " + id);
            res.status = 204;
        });

        server.Get(p + "/state", [this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, service.state_json());
        });
        server.Get(p + "/classes", [this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, service.classes_json());
        });

        server.Get(p + "/history", [this](const httplib::Request& req, httplib::Response& res) {
            store::HistoryQuery q;
            if (req.has_param("target")) q.target_id = req.get_param_value("target");
            q.if_index = query_number<int>(req, "if_index");
            q.from_ms = query_number<std::int64_t>(req, "from");
            q.to_ms = query_number<std::int64_t>(req, "to");
            if (req.has_param("label")) q.label = req.get_param_value("label");
            q.offset = query_number<std::size_t>(req, "offset").value_or(0);
            q.limit = query_number<std::size_t>(req, "limit").value_or(100);
            if (q.limit < 1 || q.limit > 1000) throw ServiceError(400, "invalid_query", "limit must be in [1, 1000]");
            const auto page = service.history(q);
            json records = json::array();
            for (const auto& r : page.records) records.push_back(store::to_json(r));
            send_json(res, 200, json{{"records", records}, {"total", page.total}, {"offset", q.offset}, {"limit", q.limit}});
        });
        server.Get(p + R"(/records/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
            const auto id = path_id(req);
            const auto rec = service.record(id);
            if (!rec) throw ServiceError(404, "record_not_found", "no record " + std::to_string(id));
            send_json(res, 200, store::to_json(*rec));
        });
        server.Post(p + R"(/records/([^/]+)/label)", [this](const httplib::Request& req, httplib::Response& res) {
            const auto id = path_id(req);
            const json body = parse_body(req);
            if (!body.is_object() || !body.contains("label") || !body.at("label").is_string()) {
                throw ServiceError(400, "invalid_request", "body must be {\"label\": name}");
            }
            const auto sample = service.label_record(id, body.at("label").get<std::string>());
            send_json(res, 200, json{{"sample", store::to_json(sample)}});
        });

        server.Get(p + "/samples", [this](const httplib::Request&, httplib::Response& res) {
            json arr = json::array();
            for (const auto& s : service.samples()) arr.push_back(store::to_json(s));
            send_json(res, 200, json{{"samples", arr}});
        });
        server.Post(p + "/samples", [this](const httplib::Request& req, httplib::Response& res) {
            const json body = parse_body(req);
            std::vector<store::LabeledSample> batch;
            if (body.is_object() && body.contains("samples")) {
                if (!body.at("samples").is_array()) throw ServiceError(400, "invalid_sample", "samples must be an array");
                for (const auto& s : body.at("samples")) batch.push_back(sample_from_request(s));
            } else {
                batch.push_back(sample_from_request(body));
            }
            for (auto& s : batch) service.add_sample(std::move(s));
            send_json(res, 201, json{{"stored", batch.size()}, {"total", service.samples().size()}});
        });

        server.Post(p + "/snapshots", [this](const httplib::Request& req, httplib::Response& res) {
            std::vector<features::CounterSnapshot> snapshots;
            const auto first = req.body.find_first_not_of(" \t\r\n");
            if (first != std::string::npos && req.body[first] == '[') {
                for (const auto& s : parse_body(req)) snapshots.push_back(features::snapshot_from_json(s));
            } else {
                std::istringstream in(req.body);
                snapshots = features::read_trace(in);
            }
            json ids = json::array();
            for (const auto& s : snapshots) {
                if (const auto rec = service.process_snapshot(s)) ids.push_back(rec->id);
            }
            send_json(res, 200, json{{"accepted", snapshots.size()}, {"records", ids}});
        });

        server.Post(p + "/train", [this](const httplib::Request& req, httplib::Response& res) {
            const auto request = train_request_from_json(parse_body(req));
            send_json(res, 200, service.trigger_training(request));
        });
        server.Get(p + "/train/status", [this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, to_json(service.training_status()));
        });

        server.Get(p + "/model", [this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, json{{"model", service.model_json()}});
        });
        server.Get(p + "/models", [this](const httplib::Request&, httplib::Response& res) {
            json arr = json::array();
            for (const auto& m : service.models()) arr.push_back(store::to_json(m));
            send_json(res, 200, json{{"models", arr}});
        });
        server.Post(p + R"(/models/([^/]+)/activate)", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            send_json(res, 200, json{{"model", store::to_json(service.activate_model(id))}});
        });

        server.Get(p + "/stream", [this](const httplib::Request&, httplib::Response& res) {
            auto sub = service.events().subscribe();
            auto greeted = std::make_shared<bool>(false);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider(
                "text/event-stream", [this, sub, greeted](std::size_t, httplib::DataSink& sink) {
                    if (!*greeted) {
                        *greeted = true;
                        // Current state first, so a subscriber never starts blank.
                        std::string hello;
                        for (const auto& s : service.live_state()) {
                            hello += sse_frame(Event{0, "state", to_json(s)});
                        }
                        hello += ": connected\n\n";
                        return sink.write(hello.data(), hello.size());
                    }
                    if (stopping || sub->closed()) {
                        sink.done();
                        return true;
                    }
                    const auto e = sub->next(std::chrono::milliseconds(250));
                    const std::string frame = e ? sse_frame(*e) : std::string(": keepalive\n\n");
                    if (!e && !sink.is_writable()) return false;
                    return sink.write(frame.data(), frame.size());
                },
                [sub](bool) { sub->close(); });
        });

        server.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_redirect("/ui/"); });
    }
};

ApiServer::ApiServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

ApiServer::~ApiServer() {
    stop();
}

int ApiServer::bind(const std::string& host, int port) {
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
    } else {
        impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
    }
    if (impl_->port < 0) {
        throw ServiceError(500, "bind_failed", "cannot listen on " + host + ":" + std::to_string(port));
    }
    return impl_->port;
}

void ApiServer::start() {
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void ApiServer::stop() {
    if (!impl_) return;
    impl_->stopping = true;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

int ApiServer::port() const {
    return impl_->port;
}

}  // namespace nss::service
