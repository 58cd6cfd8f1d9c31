#include "nss/snmp/ber.hpp"
#include "nss/snmp/poller.hpp"
#include "nss/snmp/scheduler.hpp"
#include "nss/snmp/transport.hpp"

#include "../support/snmp_gen.hpp"
#include "../support/test_support.hpp"

#include <doctest.h>

#include <atomic>
#include <chrono>
#include <functional>
#include <thread>

using namespace nss::snmp;
using nss::testing::frozen_vectors;
using nss::testing::load_snmp_fixture;
using nss::testing::Rng;

namespace {

const std::string kFixtureDir = NSS_FIXTURE_DIR;

std::vector<std::uint8_t> bytes(std::initializer_list<int> list) {
    std::vector<std::uint8_t> out;
    for (int b : list) out.push_back(static_cast<std::uint8_t>(b));
    return out;
}

std::size_t decode_error_offset(const std::vector<std::uint8_t>& wire) {
    try {
        decode_message(wire);
    } catch (const DecodeError& e) {
        return e.offset();
    }
    FAIL("expected a decode error");
    return 0;
}

std::string decode_error_text(const std::vector<std::uint8_t>& wire) {
    try {
        decode_message(wire);
    } catch (const DecodeError& e) {
        return e.what();
    }
    FAIL("expected a decode error");
    return {};
}

Message sample_request() {
    Message m;
    m.community = "public";
    m.pdu.kind = PduKind::GetRequest;
    m.pdu.request_id = 42;
    for (auto& oid : poll_oids(2)) m.pdu.varbinds.push_back({oid, Null{}});
    return m;
}

/// UDP responder on 127.0.0.1 driven by a handler that maps a request to
/// zero or more reply messages.
class FakeAgent {
public:
    using Handler = std::function<std::vector<Message>(const Message&)>;

    explicit FakeAgent(Handler handler)
        : socket_(UdpSocket::bind(Endpoint{"127.0.0.1", 0})), handler_(std::move(handler)) {
        thread_ = std::thread([this] { run(); });
    }
    ~FakeAgent() {
        stop_ = true;
        thread_.join();
    }
    std::uint16_t port() const { return socket_.local_endpoint().port; }
    int requests() const { return requests_.load(); }

private:
    void run() {
        while (!stop_) {
            auto d = socket_.receive(std::chrono::milliseconds(20));
            if (!d) continue;
            ++requests_;
            const Message request = decode_message(d->bytes);
            for (const auto& reply : handler_(request)) {
                socket_.send_to(encode_message(reply), d->from);
            }
        }
    }

    UdpSocket socket_;
    Handler handler_;
    std::atomic<bool> stop_{false};
    std::atomic<int> requests_{0};
    std::thread thread_;
};

Message counters_reply(const Message& request, std::uint32_t base) {
    Message r = request;
    r.pdu.kind = PduKind::Response;
    std::uint32_t n = 0;
    for (auto& vb : r.pdu.varbinds) {
        if (vb.oid == sys_uptime_oid()) {
            vb.value = TimeTicks{123456};
        } else {
            vb.value = Counter32{base + n++};
        }
    }
    return r;
}

Target local_target(std::uint16_t port) {
    Target t;
    t.id = "sw1";
    t.host = "127.0.0.1";
    t.port = port;
    t.if_indexes = {2};
    return t;
}

}  // namespace

TEST_CASE("element vectors: INTEGER 5 and sysUpTime OID") {
    CHECK(to_hex(encode_value(Integer{5})) == "020105");
    CHECK(to_hex(encode_oid(Oid::parse("1.3.6.1.2.1.1.3.0"))) == "06082b06010201010300");

    const auto fixture = load_snmp_fixture(kFixtureDir);
    CHECK(fixture.at("elements").at("integer-5") == "020105");
    CHECK(fixture.at("elements").at("oid-sysuptime") == "06082b06010201010300");
}

TEST_CASE("varbind value 02 01 05 decodes as Integer 5") {
    Message m = sample_request();
    m.pdu.varbinds = {{sys_uptime_oid(), Integer{5}}};
    const auto wire = encode_message(m);
    const std::string hex = to_hex(wire);
    CHECK(hex.find("06082b06010201010300020105") != std::string::npos);
    const Message back = decode_message(wire);
    REQUIRE(back.pdu.varbinds.size() == 1);
    CHECK(std::get<Integer>(back.pdu.varbinds[0].value).value == 5);
}

TEST_CASE("frozen vectors decode and re-encode byte-exactly") {
    const auto vectors = frozen_vectors(kFixtureDir);
    REQUIRE(vectors.size() >= 10);
    for (const auto& v : vectors) {
        CAPTURE(v.name);
        CHECK(decode_message(v.bytes) == v.message);
        CHECK(encode_message(v.message) == v.bytes);
    }
}

TEST_CASE("frozen vectors include an opaque application value") {
    bool found = false;
    for (const auto& v : frozen_vectors(kFixtureDir)) {
        for (const auto& vb : v.message.pdu.varbinds) {
            if (const auto* o = std::get_if<Opaque>(&vb.value)) {
                CHECK(o->tag == 0x40);
                found = true;
            }
        }
    }
    CHECK(found);
}

TEST_CASE("request layout: sysUpTime plus eight interface counter columns") {
    const auto oids = poll_oids(7);
    REQUIRE(oids.size() == 9);
    CHECK(oids[0].to_string() == "1.3.6.1.2.1.1.3.0");
    const std::vector<std::string> want = {
        "1.3.6.1.2.1.2.2.1.10.7", "1.3.6.1.2.1.2.2.1.16.7", "1.3.6.1.2.1.2.2.1.14.7", "1.3.6.1.2.1.2.2.1.20.7",
        "1.3.6.1.2.1.2.2.1.13.7", "1.3.6.1.2.1.2.2.1.19.7", "1.3.6.1.2.1.2.2.1.12.7", "1.3.6.1.2.1.2.2.1.11.7",
    };
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(oids[i + 1].to_string() == want[i]);
    CHECK(counter_column("in_octets")->to_string() == "1.3.6.1.2.1.2.2.1.10");
    CHECK(*counter_for_column(11) == "in_ucast_pkts");
    CHECK_FALSE(counter_for_column(15).has_value());
}

TEST_CASE("empty input is a decode error at offset 0") {
    CHECK(decode_error_offset({}) == 0);
}

TEST_CASE("trailing byte after a valid message is rejected") {
    auto wire = encode_message(sample_request());
    const std::size_t end = wire.size();
    wire.push_back(0x00);
    CHECK(decode_error_offset(wire) == end);
    CHECK(decode_error_text(wire).find("trailing bytes") != std::string::npos);
}

TEST_CASE("strictness: truncation, indefinite and non-minimal forms") {
    const auto good = encode_message(sample_request());

    SUBCASE("every proper prefix fails") {
        for (std::size_t n = 0; n < good.size(); ++n) {
            std::vector<std::uint8_t> cut(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(n));
            CHECK_THROWS_AS(decode_message(cut), DecodeError);
        }
    }
    SUBCASE("indefinite length") {
        CHECK(decode_error_text(bytes({0x30, 0x80, 0x00, 0x00})).find("indefinite") != std::string::npos);
    }
    SUBCASE("non-minimal length") {
        Message small = sample_request();
        small.pdu.varbinds.resize(1);
        auto wire = encode_message(small);
        // Re-encode the outer length in long form 0x81 NN although NN < 128.
        REQUIRE(wire[1] < 0x80);
        wire.insert(wire.begin() + 1, 0x81);
        CHECK(decode_error_offset(wire) == 1);
    }
    SUBCASE("non-minimal integer version") {
        // SEQUENCE { INTEGER 00 01 ... }
        auto wire = bytes({0x30, 0x04, 0x02, 0x02, 0x00, 0x01});
        CHECK(decode_error_offset(wire) == 4);
    }
    SUBCASE("length beyond the buffer") {
        CHECK(decode_error_offset(bytes({0x30, 0x05, 0x02, 0x01, 0x01})) == 1);
    }
    SUBCASE("unsupported version") {
        auto wire = encode_message(sample_request());
        // 30 81 LL 02 01 VV
        REQUIRE(wire[5] == kVersion2c);
        wire[5] = 0;
        CHECK(decode_error_offset(wire) == 5);
        CHECK(decode_error_text(wire).find("unsupported version") != std::string::npos);
        auto m = sample_request();
        m.version = 0;
        CHECK_THROWS_AS(encode_message(m), EncodeError);
    }
}

TEST_CASE("encoder rejects OIDs with arcs above 2^32-1 or bad leading arcs") {
    CHECK_THROWS(Oid::parse("1.3.6.4294967296"));
    CHECK_NOTHROW(Oid::parse("1.3.6.4294967295"));
    Message m = sample_request();
    m.pdu.varbinds = {{Oid{1}, Null{}}};
    CHECK_THROWS_AS(encode_message(m), EncodeError);
    m.pdu.varbinds = {{Oid{1, 40}, Null{}}};
    CHECK_THROWS_AS(encode_message(m), EncodeError);
    m.pdu.varbinds = {{Oid{3, 1}, Null{}}};
    CHECK_THROWS_AS(encode_message(m), EncodeError);
}

TEST_CASE("INT32_MIN encodes minimally and the padded form is rejected") {
    CHECK(to_hex(encode_value(Integer{std::numeric_limits<std::int32_t>::min()})) == "020480000000");
    CHECK(to_hex(encode_value(Integer{-128})) == "020180");

    auto tlv = [](int tag, std::vector<std::uint8_t> content) {
        std::vector<std::uint8_t> out{static_cast<std::uint8_t>(tag), static_cast<std::uint8_t>(content.size())};
        out.insert(out.end(), content.begin(), content.end());
        return out;
    };
    auto cat = [](std::initializer_list<std::vector<std::uint8_t>> parts) {
        std::vector<std::uint8_t> out;
        for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
        return out;
    };
    auto message_with = [&](std::vector<std::uint8_t> value) {
        const auto varbind = tlv(0x30, cat({tlv(0x06, bytes({0x2b, 0x06, 0x01})), value}));
        const auto pdu = tlv(0xA2, cat({tlv(0x02, bytes({0x01})), tlv(0x02, bytes({0x00})), tlv(0x02, bytes({0x00})),
                                        tlv(0x30, varbind)}));
        return tlv(0x30, cat({tlv(0x02, bytes({0x01})), tlv(0x04, bytes({'p'})), pdu}));
    };

    const auto minimal = decode_message(message_with(tlv(0x02, bytes({0x80, 0x00, 0x00, 0x00}))));
    CHECK(std::get<Integer>(minimal.pdu.varbinds.at(0).value).value == std::numeric_limits<std::int32_t>::min());
    // Leading nine bits all ones.
    CHECK(decode_error_text(message_with(tlv(0x02, bytes({0xFF, 0x80, 0x00, 0x00, 0x00}))))
              .find("non-minimal integer") != std::string::npos);
}

TEST_CASE("unknown value tag surfaces as Opaque and round-trips") {
    Message m = sample_request();
    m.pdu.kind = PduKind::Response;
    m.pdu.varbinds = {{sys_uptime_oid(), Opaque{0x46, {0x01, 0x02, 0x03}}}};
    const auto back = decode_message(encode_message(m));
    CHECK(back == m);
    m.pdu.varbinds = {{sys_uptime_oid(), Opaque{0x41, {0x01}}}};
    CHECK_THROWS_AS(encode_message(m), EncodeError);
}

TEST_CASE("round-trip: 1000 randomized messages") {
    Rng rng(20240611);
    for (int i = 0; i < 1000; ++i) {
        const Message m = nss::testing::random_message(rng);
        const auto wire = encode_message(m);
        const Message back = decode_message(wire);
        REQUIRE(back == m);
        REQUIRE(encode_message(back) == wire);
    }
}

TEST_CASE("fuzz: random and mutated inputs yield decode errors or valid messages") {
    Rng rng(77);
    const auto seed_wire = encode_message(sample_request());
    std::size_t errors = 0;
    for (int i = 0; i < 20000; ++i) {
        std::vector<std::uint8_t> input;
        if (i % 2 == 0) {
            input.resize(rng.below(64));
            for (auto& b : input) b = static_cast<std::uint8_t>(rng.below(256));
        } else {
            input = seed_wire;
            const auto flips = 1 + rng.below(4);
            for (std::uint64_t k = 0; k < flips; ++k) input[rng.below(input.size())] = static_cast<std::uint8_t>(rng.below(256));
        }
        try {
            const Message m = decode_message(input);
            CHECK(decode_message(encode_message(m)) == m);
        } catch (const DecodeError& e) {
            ++errors;
            CHECK(e.offset() <= input.size());
        }
    }
    CHECK(errors > 0);
}

TEST_CASE("poll_once against a healthy agent returns uptime and 8 counters") {
    FakeAgent agent([](const Message& req) { return std::vector<Message>{counters_reply(req, 1000)}; });
    SnmpPoller poller;
    const auto before = nss::system_clock()->now_ms();
    const auto snap = poller.poll_once(local_target(agent.port()), 2, {std::chrono::milliseconds(500), 3});
    CHECK(snap.target_id == "sw1");
    CHECK(snap.if_index == 2);
    CHECK(snap.uptime_ticks == 123456);
    CHECK(snap.counters.size() == 8);
    CHECK(snap.counters.at("in_octets") == 1000);
    CHECK(snap.counters.at("in_ucast_pkts") == 1007);
    CHECK_FALSE(snap.degraded());
    CHECK(snap.ts_ms >= before);
}

TEST_CASE("poll_once ignores a mismatched request id and keeps waiting") {
    FakeAgent agent([](const Message& req) {
        Message wrong = counters_reply(req, 1);
        wrong.pdu.request_id = req.pdu.request_id + 1000;
        return std::vector<Message>{wrong, counters_reply(req, 5000)};
    });
    SnmpPoller poller;
    const auto snap = poller.poll_once(local_target(agent.port()), 2, {std::chrono::milliseconds(500), 3});
    CHECK(snap.counters.at("in_octets") == 5000);
}

TEST_CASE("poll_once retries after a stale reply until the matching one arrives") {
    std::atomic<int> calls{0};
    FakeAgent agent([&](const Message& req) {
        Message r = counters_reply(req, 9);
        if (calls++ == 0) r.pdu.request_id = req.pdu.request_id - 1;
        return std::vector<Message>{r};
    });
    SnmpPoller poller;
    const auto snap = poller.poll_once(local_target(agent.port()), 2, {std::chrono::milliseconds(150), 3});
    CHECK(snap.counters.at("in_octets") == 9);
    CHECK(agent.requests() == 2);
}

TEST_CASE("poll_once against a silent agent fails after attempts x timeout") {
    FakeAgent agent([](const Message&) { return std::vector<Message>{}; });
    SnmpPoller poller;
    const auto t0 = std::chrono::steady_clock::now();
    CHECK_THROWS_AS(poller.poll_once(local_target(agent.port()), 2, {std::chrono::milliseconds(100), 3}),
                    TargetUnreachable);
    const auto elapsed = std::chrono::steady_clock::now() - t0;
    CHECK(elapsed >= std::chrono::milliseconds(300));
    CHECK(elapsed < std::chrono::milliseconds(1000));
    CHECK(agent.requests() == 3);
}

TEST_CASE("poll_once default options are 3 attempts of 2 s") {
    const PollOptions defaults;
    CHECK(defaults.attempts == 3);
    CHECK(defaults.timeout == std::chrono::milliseconds(2000));
}

TEST_CASE("error status surfaces as SnmpError") {
    FakeAgent agent([](const Message& req) {
        Message r = counters_reply(req, 0);
        r.pdu.error_status = 2;
        r.pdu.error_index = 3;
        return std::vector<Message>{r};
    });
    SnmpPoller poller;
    try {
        poller.poll_once(local_target(agent.port()), 2, {std::chrono::milliseconds(300), 1});
        FAIL("expected SnmpError");
    } catch (const SnmpError& e) {
        CHECK(e.status() == 2);
        CHECK(e.index() == 3);
    }
}

TEST_CASE("noSuchInstance counter is omitted and marks the snapshot degraded") {
    FakeAgent agent([](const Message& req) {
        Message r = counters_reply(req, 10);
        r.pdu.varbinds[4].value = NoSuchInstance{};
        return std::vector<Message>{r};
    });
    SnmpPoller poller;
    const auto snap = poller.poll_once(local_target(agent.port()), 2, {std::chrono::milliseconds(300), 1});
    CHECK(snap.counters.size() == 7);
    CHECK(snap.counters.count("out_errors") == 0);
    CHECK(snap.degraded());
}

TEST_CASE("target validation and JSON") {
    Target t = local_target(1161);
    CHECK_NOTHROW(t.validate());
    CHECK(target_from_json(to_json(t)) == t);

    auto j = nlohmann::json::parse(R"({"id":"a","host":"10.0.0.1","if_indexes":[1,2]})");
    const Target d = target_from_json(j);
    CHECK(d.port == 161);
    CHECK(d.community == "public");
    CHECK(d.poll_interval_s == 10);

    j["poll_interval_s"] = 0;
    CHECK_THROWS_AS(target_from_json(j), std::invalid_argument);
    j["poll_interval_s"] = 301;
    CHECK_THROWS_AS(target_from_json(j), std::invalid_argument);
    j["poll_interval_s"] = 300;
    CHECK_NOTHROW(target_from_json(j));
    j["if_indexes"] = nlohmann::json::array();
    CHECK_THROWS_AS(target_from_json(j), std::invalid_argument);
}

namespace {

Target sim_target(const std::string& id, int interval_s, std::vector<int> ifs = {1}) {
    Target t;
    t.id = id;
    t.host = "192.0.2.1";
    t.if_indexes = std::move(ifs);
    t.poll_interval_s = interval_s;
    return t;
}

}  // namespace

TEST_CASE("scheduler: two targets at 5 s over 60 s yield 12 +/- 1 snapshots each") {
    const auto report = simulate_schedule({sim_target("a", 5), sim_target("b", 5)}, 60'000,
                                          [](const Target&, int, std::int64_t) { return SimulatedPoll{true, 30}; });
    for (const auto& s : report.streams) {
        CAPTURE(s.key.to_string());
        CHECK(s.snapshots >= 11);
        CHECK(s.snapshots <= 13);
        CHECK(s.failures == 0);
    }
}

TEST_CASE("scheduler: every inter-poll gap lies within [0.9, 1.1] x interval") {
    std::vector<Target> targets;
    for (int i = 0; i < 10; ++i) targets.push_back(sim_target("t" + std::to_string(i), 1 + i * 7, {1, 2}));
    const auto report = simulate_schedule(targets, 3'600'000,
                                          [](const Target&, int, std::int64_t) { return SimulatedPoll{true, 5}; });
    for (const auto& s : report.streams) {
        CAPTURE(s.key.to_string());
        REQUIRE(s.dispatch_ms.size() > 2);
        for (std::size_t i = 1; i < s.dispatch_ms.size(); ++i) {
            const auto gap = s.dispatch_ms[i] - s.dispatch_ms[i - 1];
            CHECK(gap >= s.interval_ms * 9 / 10);
            CHECK(gap <= s.interval_ms * 11 / 10);
        }
    }
}

TEST_CASE("scheduler: jitter is deterministic for a seed and differs across seeds") {
    const std::vector<Target> targets = {sim_target("a", 10, {1, 2, 3})};
    auto run = [&](std::uint64_t seed) {
        SchedulerOptions o;
        o.seed = seed;
        return simulate_schedule(targets, 600'000,
                                 [](const Target&, int, std::int64_t) { return SimulatedPoll{true, 1}; }, o);
    };
    const auto a = run(1), b = run(1), c = run(2);
    for (std::size_t i = 0; i < a.streams.size(); ++i) {
        CHECK(a.streams[i].dispatch_ms == b.streams[i].dispatch_ms);
    }
    CHECK(a.streams[0].dispatch_ms != c.streams[0].dispatch_ms);
    CHECK(a.streams[0].dispatch_ms != a.streams[1].dispatch_ms);
}

TEST_CASE("scheduler: an unreachable target does not change the other target's count") {
    const std::vector<Target> targets = {sim_target("good", 5), sim_target("dead", 5)};
    auto healthy = simulate_schedule(targets, 60'000,
                                     [](const Target&, int, std::int64_t) { return SimulatedPoll{true, 20}; });
    auto mixed = simulate_schedule(targets, 60'000, [](const Target& t, int, std::int64_t) {
        return t.id == "dead" ? SimulatedPoll{false, 6000} : SimulatedPoll{true, 20};
    });
    CHECK(mixed.stream("good", 1).snapshots == healthy.stream("good", 1).snapshots);
    CHECK(mixed.stream("dead", 1).snapshots == 0);
    CHECK(mixed.stream("dead", 1).failures > 0);
}

TEST_CASE("scheduler fairness: lateness stays under one interval at the in-flight cap") {
    std::vector<Target> targets;
    for (int i = 0; i < 50; ++i) targets.push_back(sim_target("t" + std::to_string(i), 1, {1, 2, 3, 4}));
    SchedulerOptions o;
    o.max_in_flight = 64;
    Rng rng(5);
    const auto report = simulate_schedule(targets, 120'000, [&](const Target&, int, std::int64_t) {
        return SimulatedPoll{true, 100 + rng.uniform(0, 150)};
    }, o);
    CHECK(report.peak_in_flight <= 64);
    CHECK(report.peak_in_flight > 1);
    for (const auto& s : report.streams) {
        CAPTURE(s.key.to_string());
        CHECK(s.max_lateness_ms < s.interval_ms);
        CHECK(s.snapshots >= 100);
    }
}

TEST_CASE("live scheduler delivers ordered per-stream events and isolates failures") {
    auto clock = std::make_shared<nss::ScaledClock>(50.0, 0);
    std::mutex mu;
    std::map<std::string, std::vector<std::int64_t>> seen;
    std::map<std::string, int> failures;
    PollFn poll = [clock](const Target& t, int if_index) {
        if (t.id == "dead") throw TargetUnreachable("dead");
        nss::features::CounterSnapshot s;
        s.target_id = t.id;
        s.if_index = if_index;
        s.ts_ms = clock->now_ms();
        return s;
    };
    PollSink sink = [&](const PollEvent& e) {
        std::lock_guard lock(mu);
        if (const auto* s = std::get_if<SnapshotEvent>(&e)) {
            seen[s->snapshot.target_id + "/" + std::to_string(s->snapshot.if_index)].push_back(s->snapshot.ts_ms);
        } else {
            const auto& f = std::get<PollFailure>(e);
            CHECK(f.kind == "unreachable");
            ++failures[f.stream.target_id];
        }
    };
    PollScheduler scheduler(poll, sink, clock);
    scheduler.set_targets({sim_target("a", 1, {1, 2}), sim_target("dead", 1)});
    scheduler.start();
    std::this_thread::sleep_for(std::chrono::milliseconds(600));  // ~30 s of scaled time
    scheduler.stop();

    std::lock_guard lock(mu);
    for (const auto& key : {"a/1", "a/2"}) {
        CAPTURE(key);
        const auto& ts = seen[key];
        CHECK(ts.size() >= 20);
        CHECK(std::is_sorted(ts.begin(), ts.end()));
    }
    CHECK(failures["dead"] >= 20);
}

TEST_CASE("scheduler rejects invalid targets") {
    PollScheduler scheduler([](const Target&, int) { return nss::features::CounterSnapshot{}; },
                            [](const PollEvent&) {});
    CHECK_THROWS_AS(scheduler.set_targets({sim_target("x", 0)}), std::invalid_argument);
}
