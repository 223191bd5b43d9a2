#include "dscore/error.hpp"
#include "dscore/taxonomy.hpp"
#include "dscore/traffic.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace dscore;
using namespace std::chrono_literals;

namespace {

const std::string kDevice = "10.0.0.2";
const std::string kHeader = "start_time,duration_s,src_ip,dst_ip,src_port,dst_port,protocol,packets,bytes\n";

traffic::FlowLoad load(const std::string& body) {
    std::istringstream in(kHeader + body);
    return traffic::load_flows(in, kDevice);
}

traffic::FlowRecord flow(Timestamp t, traffic::Direction d, const std::string& peer, std::uint16_t port,
                         traffic::Protocol p = traffic::Protocol::TCP, std::uint64_t packets = 1,
                         std::uint64_t bytes = 100) {
    traffic::FlowRecord f;
    f.start_time = t;
    f.direction = d;
    f.peer_ip = peer;
    f.peer_port = port;
    f.device_port = 40000;
    f.protocol = p;
    f.packets = packets;
    f.bytes = bytes;
    return f;
}

const Timestamp t0 = parse_iso8601("2024-03-01T00:00:00Z");

}  // namespace

TEST_SUITE("traffic") {

TEST_CASE("flow loading") {
    const auto l = load(
        "2024-03-01T10:00:00Z,1.5,10.0.0.2,1.1.1.1,5000,443,TCP,3,300\n"
        "2024-03-01T10:00:05.250Z,0,1.1.1.1,10.0.0.2,443,5000,17,2,100\n"
        "2024-03-01T10:00:07Z,0,9.9.9.9,8.8.8.8,1,2,TCP,1,1\n");
    REQUIRE(l.flows.size() == 2);
    CHECK(l.skipped == 1);
    CHECK(l.flows[0].direction == traffic::Direction::Outbound);
    CHECK(l.flows[0].peer_ip == "1.1.1.1");
    CHECK(l.flows[0].peer_port == 443);
    CHECK(l.flows[0].device_port == 5000);
    CHECK(l.flows[1].direction == traffic::Direction::Inbound);
    CHECK(l.flows[1].protocol == traffic::Protocol::UDP);
    CHECK(l.flows[1].peer_port == 443);
    CHECK(l.flows[1].start_time - l.flows[0].start_time == 5250ms);

    CHECK(load("").flows.empty());
    std::istringstream empty("");
    CHECK(traffic::load_flows(empty, kDevice).flows.empty());
}

TEST_CASE("flow loading errors") {
    CHECK_THROWS_AS(load("2024-03-01T10:00:00Z,1,10.0.0.2,1.1.1.1,5000,443,TCP,0,0\n"), InputError);
    CHECK_THROWS_AS(load("2024-03-01T10:00:00Z,1,10.0.0.2,1.1.1.1,5000,443,TCP,5,4\n"), InputError);
    CHECK_THROWS_AS(load("2024-03-01T10:00:00Z,-1,10.0.0.2,1.1.1.1,5000,443,TCP,1,1\n"), InputError);
    CHECK_THROWS_AS(load("not-a-time,1,10.0.0.2,1.1.1.1,5000,443,TCP,1,1\n"), InputError);
    CHECK_THROWS_AS(load("2024-03-01T10:00:00Z,1,10.0.0.2,1.1.1.1,5000,99999,TCP,1,1\n"), InputError);
    CHECK_THROWS_AS(load("2024-03-01T10:00:00Z,1,10.0.0.2\n"), InputError);
    std::istringstream bad("a,b,c\n");
    CHECK_THROWS_AS(traffic::load_flows(bad, kDevice), InputError);
}

TEST_CASE("three-flow fixture") {
    const auto l = traffic::load_flows(testing::fixture("three_flows.csv"), "192.168.1.20");
    const auto x = traffic::extract_dynamic_features(l.flows);
    CHECK(x.values.at("IATO") == 20.0);
    CHECK(x.values.at("UDPO") == 1.0);
    CHECK(x.values.at("ENCO") == 1.0);
    CHECK(x.values.at("WLPR") == 1.0);
    CHECK(x.values.at("PCKO") == 6.0);
    CHECK(x.values.at("PCSO") == doctest::Approx(2300.0 / 3.0));
    // packet-weighted: mean 115, variance (10*15^2 + 6*35^2 + 4*15^2) / 20 = 525
    CHECK(x.values.at("PCVO") == doctest::Approx(std::sqrt(525.0)));
    CHECK(x.values.at("DSIP") == 3.0);
    CHECK(x.values.at("DSPR") == 1.0);
    for (const char* code : {"IATI", "PCKI", "PCSI", "PCVI", "ENCI", "UDPI", "CCOM"}) {
        CHECK(x.values.count(code) == 0);
        CHECK(x.missing.count(code) == 1);
    }
}

TEST_CASE("port rules") {
    std::vector<traffic::FlowRecord> flows;
    for (int i = 0; i < 99; ++i) flows.push_back(flow(t0 + std::chrono::seconds(i), traffic::Direction::Outbound, "a", 8443));
    flows.push_back(flow(t0 + 100s, traffic::Direction::Outbound, "a", 53, traffic::Protocol::UDP));
    auto x = traffic::extract_dynamic_features(flows);
    CHECK(x.values.at("ENCO") == doctest::Approx(0.99));
    CHECK(x.values.at("UDPO") == doctest::Approx(0.01));
    CHECK(x.values.at("WLPR") == 0.0);  // 8443 is above 1024

    for (auto& f : flows) f.peer_port = 80;
    flows.back().peer_port = 5000;
    x = traffic::extract_dynamic_features(flows);
    CHECK(x.values.at("WLPR") == 1.0);  // exactly 0.99 below 1025
    CHECK(x.values.at("ENCO") == 0.0);
}

TEST_CASE("order invariance") {
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> sec(0, 3 * 24 * 3600);
    std::uniform_int_distribution<int> port(1, 9000);
    std::uniform_int_distribution<int> pk(1, 50);
    std::vector<traffic::FlowRecord> flows;
    for (int i = 0; i < 400; ++i) {
        const auto dir = i % 3 ? traffic::Direction::Outbound : traffic::Direction::Inbound;
        const auto packets = static_cast<std::uint64_t>(pk(rng));
        flows.push_back(flow(t0 + std::chrono::seconds(sec(rng)), dir, "p" + std::to_string(i % 17),
                             static_cast<std::uint16_t>(port(rng)),
                             i % 5 ? traffic::Protocol::TCP : traffic::Protocol::UDP, packets, packets * 90));
    }
    const auto base = traffic::extract_dynamic_features(flows);
    CHECK(base.values.size() == traffic::extracted_feature_codes().size());
    const auto kpis = traffic::compute_kpis(flows);
    for (int i = 0; i < 20; ++i) {
        std::shuffle(flows.begin(), flows.end(), rng);
        CHECK(traffic::extract_dynamic_features(flows).values == base.values);
        const auto k = traffic::compute_kpis(flows);
        for (std::size_t j = 0; j < k.size(); ++j) CHECK(k[j].values == kpis[j].values);
    }
}

TEST_CASE("CCOM") {
    std::vector<traffic::FlowRecord> flows;
    // 48 hours: 2 packets per night hour, 10 per day hour at most
    for (int h = 0; h < 48; ++h) {
        const int hour = h % 24;
        const std::uint64_t packets = hour < 6 ? 2 : (hour == 12 ? 10 : 4);
        flows.push_back(flow(t0 + std::chrono::hours(h) + 30min, traffic::Direction::Outbound, "a", 443,
                             traffic::Protocol::TCP, packets, packets * 100));
    }
    const auto x = traffic::extract_dynamic_features(flows);
    CHECK(x.values.at("CCOM") == doctest::Approx(0.2));

    traffic::ExtractionConfig shifted;
    shifted.utc_offset_minutes = 6 * 60;  // local night is 18:00-24:00 UTC, all 4-packet hours
    CHECK(traffic::extract_dynamic_features(flows, shifted).values.at("CCOM") == doctest::Approx(0.4));

    std::vector<traffic::FlowRecord> night_only;
    for (int h = 0; h < 30; ++h) {
        if (h % 24 < 6) night_only.push_back(flow(t0 + std::chrono::hours(h), traffic::Direction::Outbound, "a", 1));
    }
    CHECK(traffic::extract_dynamic_features(night_only).values.at("CCOM") == 1.0);

    flows.resize(10);
    const auto short_capture = traffic::extract_dynamic_features(flows);
    CHECK(short_capture.values.count("CCOM") == 0);
    CHECK(short_capture.missing.at("CCOM").find("24") != std::string::npos);

    const auto none = traffic::extract_dynamic_features({});
    CHECK(none.values.empty());
    CHECK(none.missing.size() == traffic::extracted_feature_codes().size());
}

TEST_CASE("KPIs") {
    SUBCASE("single inbound flow") {
        const auto k = traffic::compute_kpis({flow(t0, traffic::Direction::Inbound, "a", 80, traffic::Protocol::TCP, 7, 700)});
        CHECK(k[0].kpi == traffic::Kpi::FlowIncomingPackets);
        CHECK(k[0].values == std::vector<double>{7});
    }
    SUBCASE("one hour, three peers") {
        const auto k = traffic::compute_kpis({flow(t0, traffic::Direction::Outbound, "a", 80),
                                              flow(t0 + 1min, traffic::Direction::Outbound, "b", 80),
                                              flow(t0 + 2min, traffic::Direction::Outbound, "c", 81)});
        CHECK(k[1].values == std::vector<double>{3});
        CHECK(k[2].values == std::vector<double>{3});
        CHECK(k[3].values == std::vector<double>{2});
        CHECK(k[0].values.empty());
    }
    SUBCASE("empty hours count zero") {
        std::vector<traffic::FlowRecord> flows;
        for (int i = 0; i < 5; ++i) flows.push_back(flow(t0 + std::chrono::minutes(i), traffic::Direction::Outbound, "a", 80));
        flows.push_back(flow(t0 + 90min, traffic::Direction::Inbound, "b", 80));
        const auto k = traffic::compute_kpis(flows);
        CHECK(k[1].values == std::vector<double>{5, 0});
    }
    CHECK(traffic::to_string(traffic::Kpi::HourlyUniqueDstPorts) == "hourly_unique_dst_ports");
}

TEST_CASE("profiles") {
    const Taxonomy t = default_taxonomy();
    const auto declared = traffic::static_profile_from_json(
        R"({"model_id":"m","type":"camera","values":{"NSNS":5}})", t);
    const auto l = traffic::load_flows(testing::fixture("three_flows.csv"), "192.168.1.20");
    const auto p = traffic::build_profile(declared, traffic::extract_dynamic_features(l.flows), t, l.flows);
    CHECK(p.values().at("NSNS") == 5);
    CHECK(p.values().at("UDPO") == 1.0);
    CHECK(p.missing.count("CCOM") == 1);
    CHECK(p.missing.count("CPUS") == 1);
    CHECK(p.capture_window.has_value());

    CHECK_THROWS_AS(traffic::static_profile_from_json(R"({"model_id":"m","values":{"IATO":3}})", t), InputError);
    CHECK_THROWS_AS(traffic::static_profile_from_json(R"({"model_id":"m","values":{"XXXX":3}})", t), InputError);
    CHECK_THROWS_AS(traffic::static_profile_from_json(R"({"model_id":"m","values":{"NSNS":-1}})", t), InputError);
    try {
        traffic::static_profile_from_json(R"({"model_id":"m","values":{"IATO":3}})", t);
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("conflict") != std::string::npos);
    }

    testing::TempDir dir;
    traffic::save_profile(p, dir / "p.json");
    CHECK(traffic::load_profile(dir / "p.json", t) == p);
}

}
