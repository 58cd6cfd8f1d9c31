#include "nss/features/trace_io.hpp"
#include "nss/lab/agent.hpp"
#include "nss/lab/scenario.hpp"
#include "nss/snmp/poller.hpp"

#include "../support/test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

using namespace nss::lab;
using nss::features::CounterSnapshot;

namespace {

// Independent recomputation from raw counters: (b - a) mod 2^32.
std::uint64_t oracle_delta(std::uint32_t a, std::uint32_t b) {
    return (static_cast<std::uint64_t>(b) + (1ULL << 32) - a) % (1ULL << 32);
}

struct OracleRates {
    double in_octets, out_octets, pkts, error, discard, broadcast;
};

OracleRates oracle_rates(const CounterSnapshot& a, const CounterSnapshot& b) {
    const double dt = static_cast<double>(b.ts_ms - a.ts_ms) / 1000.0;
    auto d = [&](const char* name) { return static_cast<double>(oracle_delta(a.counters.at(name), b.counters.at(name))); };
    const double pkts = d("in_ucast_pkts") + d("in_nucast_pkts");
    return OracleRates{d("in_octets") / dt,      d("out_octets") / dt,     pkts / dt,
                       (d("in_errors") + d("out_errors")) / pkts, (d("in_discards") + d("out_discards")) / pkts,
                       d("in_nucast_pkts") / pkts};
}

std::vector<OracleRates> all_rates(const Trace& t) {
    std::vector<OracleRates> out;
    for (std::size_t i = 1; i < t.snapshots.size(); ++i) out.push_back(oracle_rates(t.snapshots[i - 1], t.snapshots[i]));
    return out;
}

std::string trace_text(const Trace& t) {
    std::ostringstream out;
    nss::features::write_trace(out, t.snapshots);
    return out.str();
}

const RateParams kNormal = default_params(ScenarioKind::Normal);

}  // namespace

TEST_CASE("Normal, seed 42, 60 s at 5 s polls: 12 snapshots within Normal bounds") {
    const Trace t = generate_trace(make_scenario(ScenarioKind::Normal, 60, 42), 5);
    REQUIRE(t.snapshots.size() == 12);
    for (std::size_t i = 1; i < t.snapshots.size(); ++i) {
        CHECK(t.snapshots[i].ts_ms - t.snapshots[i - 1].ts_ms == 5000);
        CHECK(t.snapshots[i].uptime_ticks - t.snapshots[i - 1].uptime_ticks == 500);
        CHECK(t.snapshots[i].counters.size() == 8);
    }
    for (const auto& r : all_rates(t)) {
        CHECK(r.error < 0.001);
        CHECK(r.broadcast < 0.05);
        CHECK(r.in_octets > 0);
    }
    CHECK(t.meta.kind == ScenarioKind::Normal);
    CHECK(t.meta.seed == 42);
    CHECK(t.meta.generator_version == kGeneratorVersion);
}

TEST_CASE("generate_trace is byte-identical for the same scenario and differs by seed") {
    const auto s = make_scenario(ScenarioKind::Congestion, 120, 7);
    CHECK(trace_text(generate_trace(s, 5)) == trace_text(generate_trace(s, 5)));
    CHECK(trace_text(generate_trace(s, 5)) != trace_text(generate_trace(make_scenario(ScenarioKind::Congestion, 120, 8), 5)));
}

TEST_CASE("scenario envelopes hold for every snapshot across seeds") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        CAPTURE(seed);
        for (const auto& r : all_rates(generate_trace(make_scenario(ScenarioKind::Normal, 300, seed), 5))) {
            CHECK(r.error < 0.001);
            CHECK(r.broadcast < 0.05);
        }
        const auto congestion = all_rates(generate_trace(make_scenario(ScenarioKind::Congestion, 300, seed), 5));
        for (const auto& r : congestion) {
            CHECK(r.in_octets >= 5 * kNormal.in_octets_rate);
            CHECK(r.out_octets >= 5 * kNormal.out_octets_rate);
        }
        double early = 0, late = 0;
        const std::size_t third = congestion.size() / 3;
        for (std::size_t i = 0; i < third; ++i) {
            early += congestion[i].discard;
            late += congestion[congestion.size() - 1 - i].discard;
        }
        CHECK(late > 2 * early);
        for (const auto& r : all_rates(generate_trace(make_scenario(ScenarioKind::ErrorBurst, 300, seed), 5))) {
            CHECK(r.error >= 0.05);
            CHECK(r.error <= 0.3);
        }
        for (const auto& r : all_rates(generate_trace(make_scenario(ScenarioKind::BroadcastStorm, 300, seed), 5))) {
            CHECK(r.broadcast >= 0.6);
            CHECK(r.pkts >= 3 * kNormal.in_pkts_rate);
        }
    }
}

TEST_CASE("feature pipeline agrees with the raw-counter oracle") {
    const Trace t = generate_trace(make_scenario(ScenarioKind::ErrorBurst, 100, 3), 5);
    nss::features::StreamCursor cursor;
    const auto oracle = all_rates(t);
    std::size_t i = 0;
    for (const auto& snap : t.snapshots) {
        const auto out = cursor.push(snap);
        if (const auto* r = std::get_if<nss::features::RateVector>(&out)) {
            CHECK(r->error_ratio == doctest::Approx(oracle[i].error).epsilon(1e-12));
            CHECK(r->broadcast_ratio == doctest::Approx(oracle[i].broadcast).epsilon(1e-12));
            CHECK(*r->feature("in_pkts_rate") == doctest::Approx(oracle[i].pkts).epsilon(1e-12));
            ++i;
        }
    }
    CHECK(i == oracle.size());
}

TEST_CASE("long high-rate trace contains a genuine Counter32 wrap") {
    const Trace t = generate_trace(make_scenario(ScenarioKind::Congestion, 900, 11), 10);
    bool wrapped = false;
    for (std::size_t i = 1; i < t.snapshots.size(); ++i) {
        wrapped |= t.snapshots[i].counters.at("in_octets") < t.snapshots[i - 1].counters.at("in_octets");
    }
    CHECK(wrapped);
}

TEST_CASE("wrap twin: offset counters wrap and yield identical rate vectors") {
    auto plain = make_scenario(ScenarioKind::Normal, 120, 5);
    auto twin = plain;
    twin.counter_base = 0xFFFFFFFFu - 50'000'000u;
    const Trace a = generate_trace(plain, 5);
    const Trace b = generate_trace(twin, 5);
    bool wrapped = false;
    for (std::size_t i = 1; i < b.snapshots.size(); ++i) {
        wrapped |= b.snapshots[i].counters.at("in_octets") < b.snapshots[i - 1].counters.at("in_octets");
    }
    REQUIRE(wrapped);
    nss::features::StreamCursor ca, cb;
    for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
        const auto ra = ca.push(a.snapshots[i]);
        const auto rb = cb.push(b.snapshots[i]);
        CHECK(ra.index() == rb.index());
        if (const auto* x = std::get_if<nss::features::RateVector>(&ra)) {
            CHECK(*x == std::get<nss::features::RateVector>(rb));
        }
    }
}

TEST_CASE("scenario validation") {
    auto s = make_scenario(ScenarioKind::Normal, 0, 1);
    CHECK_THROWS_AS(s.validate(), LabError);
    s.duration_s = 10;
    s.params.in_octets_rate = -1;
    CHECK_THROWS_AS(s.validate(), LabError);
    s = make_scenario(ScenarioKind::Custom, 10, 1);
    s.params.broadcast_ratio = 1.5;
    CHECK_THROWS_AS(generate_trace(s, 5), LabError);
    CHECK_THROWS_AS(generate_trace(make_scenario(ScenarioKind::Normal, 3, 1), 5), LabError);
    CHECK_THROWS_AS(parse_scenario_kind("storm"), LabError);
    CHECK(parse_scenario_kind("broadcast_storm") == ScenarioKind::BroadcastStorm);
    CHECK(parse_scenario_kind("Error-Burst") == ScenarioKind::ErrorBurst);
}

TEST_CASE("scenario and trace metadata JSON round-trip") {
    auto s = make_scenario(ScenarioKind::Congestion, 77, 1234567890123ULL);
    s.counter_base = 99;
    s.if_index = 3;
    CHECK(scenario_from_json(to_json(s)) == s);
    const TraceMeta m{ScenarioKind::ErrorBurst, 9, std::string(kGeneratorVersion), 5, 60, 4};
    CHECK(trace_meta_from_json(to_json(m)) == m);
}

TEST_CASE("trace files carry a metadata sidecar") {
    nss::testing::TempDir dir;
    const Trace t = generate_trace(make_scenario(ScenarioKind::BroadcastStorm, 30, 8), 5);
    const std::string path = (dir.path / "storm.jsonl").string();
    write_trace_files(path, t);
    const Trace back = read_trace_files(path);
    CHECK(back.snapshots == t.snapshots);
    CHECK(back.meta == t.meta);
}

TEST_CASE("labeled_dataset: 4 scenarios x 50 snapshots gives 200 samples in 4 classes") {
    const auto ds = labeled_dataset(reference_scenarios(250, 100), 5);
    CHECK(ds.samples.size() == 200);
    CHECK(ds.raw.size() == 200);
    std::set<std::uint32_t> classes;
    std::map<std::uint32_t, int> counts;
    for (const auto& s : ds.samples) {
        classes.insert(s.label.id);
        ++counts[s.label.id];
        CHECK(s.source_id.has_value());
    }
    CHECK(classes.size() == 4);
    for (const auto& [id, n] : counts) CHECK(n == 50);

    const std::size_t dim = ds.norm.dim();
    REQUIRE(dim == 6);
    for (std::size_t f = 0; f < dim; ++f) {
        double mean = 0, sq = 0;
        for (const auto& s : ds.samples) mean += s.vector.values()[f];
        mean /= static_cast<double>(ds.samples.size());
        for (const auto& s : ds.samples) sq += (s.vector.values()[f] - mean) * (s.vector.values()[f] - mean);
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::sqrt(sq / static_cast<double>(ds.samples.size())) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("labeled_dataset is deterministic and validates its input") {
    const auto a = labeled_dataset(reference_scenarios(60, 1), 5);
    const auto b = labeled_dataset(reference_scenarios(60, 1), 5);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].vector.bit_equal(b.samples[i].vector));
        CHECK(a.samples[i].label == b.samples[i].label);
    }
    CHECK(a.norm == b.norm);

    auto one_label = reference_scenarios(60, 1);
    for (auto& ls : one_label) ls.label = {0, "Normal"};
    CHECK_THROWS_AS(labeled_dataset(one_label, 5), LabError);

    auto flat = make_scenario(ScenarioKind::Custom, 30, 1);
    flat.params = RateParams{};
    flat.params.jitter = 0;
    CHECK_THROWS_AS(labeled_dataset({{flat, {0, "A"}}, {flat, {1, "B"}}}, 5), LabError);
}

namespace {

nss::snmp::Message get_request(int if_index, std::int32_t id) {
    nss::snmp::Message m;
    m.community = "public";
    m.pdu.request_id = id;
    for (auto& oid : nss::snmp::poll_oids(if_index)) m.pdu.varbinds.push_back({oid, nss::snmp::Null{}});
    return m;
}

AgentOptions manual_options(std::shared_ptr<nss::ManualClock> clock, std::vector<Scenario> phases, bool cycle = false) {
    AgentOptions o;
    o.phases = std::move(phases);
    o.cycle = cycle;
    o.clock = clock;
    return o;
}

CounterSnapshot snapshot_from(const nss::snmp::Message& reply, std::int64_t ts) {
    CounterSnapshot s;
    s.target_id = "lab";
    s.if_index = 1;
    s.ts_ms = ts;
    for (const auto& vb : reply.pdu.varbinds) {
        if (const auto* t = std::get_if<nss::snmp::TimeTicks>(&vb.value)) s.uptime_ticks = t->value;
        if (const auto* c = std::get_if<nss::snmp::Counter32>(&vb.value)) {
            s.counters[std::string(*nss::snmp::counter_for_column(vb.oid.arcs()[9]))] = c->value;
        }
    }
    return s;
}

}  // namespace

TEST_CASE("agent replies echo request ids and mark unknown OIDs noSuchInstance") {
    auto clock = std::make_shared<nss::ManualClock>(1'000'000);
    SyntheticAgent agent(manual_options(clock, {make_scenario(ScenarioKind::Normal, 60, 1)}));
    auto req = get_request(1, 777);
    req.pdu.varbinds.push_back({nss::snmp::Oid::parse("1.3.6.1.2.1.1.5.0"), nss::snmp::Null{}});
    req.pdu.varbinds.push_back({nss::snmp::counter_column("in_octets")->child(9), nss::snmp::Null{}});
    const auto reply = agent.respond(req, clock->now_ms());
    REQUIRE(reply.has_value());
    CHECK(reply->pdu.kind == nss::snmp::PduKind::Response);
    CHECK(reply->pdu.request_id == 777);
    CHECK(std::holds_alternative<nss::snmp::TimeTicks>(reply->pdu.varbinds[0].value));
    for (std::size_t i = 1; i < 9; ++i) CHECK(std::holds_alternative<nss::snmp::Counter32>(reply->pdu.varbinds[i].value));
    CHECK(std::holds_alternative<nss::snmp::NoSuchInstance>(reply->pdu.varbinds[9].value));
    CHECK(std::holds_alternative<nss::snmp::NoSuchInstance>(reply->pdu.varbinds[10].value));
    const auto wire = nss::snmp::encode_message(*reply);
    CHECK(nss::snmp::decode_message(wire) == *reply);

    auto wrong = req;
    wrong.community = "private";
    CHECK_FALSE(agent.respond(wrong, clock->now_ms()).has_value());
}

TEST_CASE("agent counters follow the scenario clock and switch phases when cycling") {
    auto clock = std::make_shared<nss::ManualClock>(0);
    SyntheticAgent agent(manual_options(
        clock, {make_scenario(ScenarioKind::Normal, 30, 1), make_scenario(ScenarioKind::BroadcastStorm, 30, 2)}, true));
    std::vector<CounterSnapshot> snaps;
    for (int i = 0; i <= 24; ++i) {
        clock->set(i * 5000);
        snaps.push_back(snapshot_from(*agent.respond(get_request(1, i), clock->now_ms()), clock->now_ms()));
    }
    for (std::size_t i = 1; i < snaps.size(); ++i) {
        CAPTURE(i);
        const auto r = oracle_rates(snaps[i - 1], snaps[i]);
        const auto kind = agent.kind_at(snaps[i - 1].ts_ms);
        REQUIRE(kind.has_value());
        CHECK(*kind == agent.kind_at(snaps[i].ts_ms - 1));
        if (*kind == ScenarioKind::Normal) {
            CHECK(r.broadcast < 0.05);
            CHECK(r.error < 0.001);
        } else {
            CHECK(r.broadcast >= 0.6);
        }
    }
    const auto history = agent.phase_history();
    REQUIRE(history.size() >= 5);
    CHECK(history[1].start_ms == 30'000);
    CHECK(history[2].kind == ScenarioKind::Normal);
}

TEST_CASE("agent reboot resets uptime and the pipeline reports a counter reset") {
    auto clock = std::make_shared<nss::ManualClock>(0);
    SyntheticAgent agent(manual_options(clock, {make_scenario(ScenarioKind::Normal, 60, 1)}));
    nss::features::StreamCursor cursor;
    clock->set(10'000);
    auto first = snapshot_from(*agent.respond(get_request(1, 1), clock->now_ms()), clock->now_ms());
    CHECK(std::holds_alternative<nss::features::StreamCursor::NoBaseline>(cursor.push(first)));
    clock->set(15'000);
    agent.reboot_now();
    clock->set(20'000);
    auto second = snapshot_from(*agent.respond(get_request(1, 2), clock->now_ms()), clock->now_ms());
    CHECK(second.uptime_ticks < first.uptime_ticks);
    CHECK(std::holds_alternative<nss::features::CounterReset>(cursor.push(second)));
}

TEST_CASE("set_scenario switches the live state and keeps counters continuous") {
    auto clock = std::make_shared<nss::ManualClock>(0);
    SyntheticAgent agent(manual_options(clock, {make_scenario(ScenarioKind::Normal, 60, 1)}));
    clock->set(5'000);
    const auto a = snapshot_from(*agent.respond(get_request(1, 1), clock->now_ms()), clock->now_ms());
    agent.set_scenario(make_scenario(ScenarioKind::ErrorBurst, 60, 3));
    CHECK(agent.current_kind() == ScenarioKind::ErrorBurst);
    clock->set(10'000);
    const auto b = snapshot_from(*agent.respond(get_request(1, 2), clock->now_ms()), clock->now_ms());
    const auto r = oracle_rates(a, b);
    CHECK(r.error >= 0.05);
    CHECK(r.in_octets > 0);
}

TEST_CASE("poll_once against the UDP agent: healthy, then drop_all") {
    auto clock = std::make_shared<nss::ScaledClock>(1.0);
    AgentOptions o;
    o.phases = {make_scenario(ScenarioKind::Normal, 60, 1)};
    o.clock = clock;
    o.if_indexes = {1, 2};
    SyntheticAgent agent(o);

    nss::snmp::Target target;
    target.id = "lab";
    target.host = "127.0.0.1";
    target.port = agent.endpoint().port;
    target.if_indexes = {2};
    nss::snmp::SnmpPoller poller(clock);
    const auto snap = poller.poll_once(target, 2, {std::chrono::milliseconds(500), 3});
    CHECK(snap.counters.size() == 8);
    CHECK_FALSE(snap.degraded());
    CHECK(snap.uptime_ticks >= kInitialUptimeTicks);

    agent.set_drop_all(true);
    CHECK_THROWS_AS(poller.poll_once(target, 2, {std::chrono::milliseconds(100), 3}), nss::snmp::TargetUnreachable);
    CHECK(agent.requests_seen() >= 4);

    agent.set_drop_all(false);
    agent.set_delay_ms(50);
    const auto t0 = std::chrono::steady_clock::now();
    CHECK_NOTHROW(poller.poll_once(target, 2, {std::chrono::milliseconds(500), 1}));
    CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::milliseconds(50));
}
