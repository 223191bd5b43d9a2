#include "dscore/cli.hpp"
#include "dscore/util.hpp"
#include "test_helpers.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <random>
#include <sstream>

using namespace dscore;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

bool contains(const std::string& s, const std::string& what) { return s.find(what) != std::string::npos; }

/// Hourly outbound flows for `hours` hours plus a few inbound ones, seeded.
void write_flows(const std::filesystem::path& path, const std::string& device, int hours, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> count(1, 6), port(1, 3), minute(0, 59), pk(1, 40);
    std::ofstream f(path);
    f << "start_time,duration_s,src_ip,dst_ip,src_port,dst_port,protocol,packets,bytes\n";
    const Timestamp t0 = parse_iso8601("2024-05-01T00:00:00Z");
    for (int h = 0; h < hours; ++h) {
        const int n = count(rng);
        for (int i = 0; i < n; ++i) {
            const auto t = t0 + std::chrono::hours(h) + std::chrono::minutes(minute(rng));
            const int packets = pk(rng);
            f << format_iso8601(t) << ",1," << device << ",198.51.100." << port(rng) << ",40000,"
              << 440 + port(rng) << ",TCP," << packets << ',' << packets * 80 << '\n';
        }
        const int packets = pk(rng);
        f << format_iso8601(t0 + std::chrono::hours(h) + std::chrono::minutes(minute(rng))) << ",1,198.51.100.9,"
          << device << ",443,40001,TCP," << packets << ',' << packets * 60 << '\n';
    }
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help, version and usage errors") {
    CHECK(run({"--help"}).code == 0);
    const auto v = run({"--version"});
    CHECK(v.code == 0);
    CHECK(contains(v.out, kToolVersion));
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"--format", "xml", "validate-taxonomy"}).code == 1);
}

TEST_CASE("validate-taxonomy") {
    const auto r = run({"validate-taxonomy"});
    CHECK(r.code == 0);
    CHECK(contains(r.out, "valid"));
    CHECK(contains(r.out, "hierarchical total 65"));
    const auto j = nlohmann::json::parse(run({"validate-taxonomy", "--format", "json"}).out);
    CHECK(j["features"] == 30);
    CHECK(j["pairs"]["features"] == 57);

    testing::TempDir dir;
    std::ofstream(dir / "bad.json") << "{}";
    CHECK(run({"--taxonomy", (dir / "bad.json").string(), "validate-taxonomy"}).code == 1);
}

TEST_CASE("filtering-stats") {
    const auto r = run({"filtering-stats", testing::fixture("responses_40.csv").string()});
    CHECK(r.code == 0);
    CHECK(contains(r.out, "EXFIL"));
    CHECK(contains(r.out, "0%"));
    CHECK(run({"filtering-stats", "/nonexistent.csv"}).code == 1);
}

TEST_CASE("weights") {
    testing::TempDir dir;
    const auto responses = testing::fixture("responses_40.csv").string();
    const auto r = run({"--out-dir", dir.path().string(), "--cr-threshold", "0.1", "weights", responses, "--scenario",
                        "DDOS"});
    CHECK(r.code == 0);
    CHECK(contains(r.out, "cohort: 11 of 13"));
    CHECK(contains(r.out, "dropped"));
    CHECK(contains(r.out, "sub-categories: "));
    CHECK(std::filesystem::exists(dir / "model_DDOS.json"));

    const auto again = run({"--out-dir", dir.path().string(), "--cr-threshold", "0.1", "weights", responses,
                            "--scenario", "DDOS"});
    CHECK(again.out == r.out);

    std::ofstream(dir / "one.csv") << "response_id,scenario,record_kind,left_code,right_code,value\n"
                                      "r1,SCAN,keep_category,NT,,1\n"
                                      "r1,SCAN,keep_subcategory,OUT,,1\n";
    const auto single = run({"--out-dir", dir.path().string(), "weights", (dir / "one.csv").string(), "--scenario",
                             "SCAN"});
    CHECK(single.code == 0);
    CHECK(contains(single.out, "n/a (fewer than 2 responses)"));

    std::ofstream(dir / "partial.csv") << "response_id,scenario,record_kind,left_code,right_code,value\n"
                                          "r1,SCAN,demographic,status,,partial\n"
                                          "r1,SCAN,keep_category,NT,,1\n";
    const auto partial = run({"--out-dir", dir.path().string(), "weights", (dir / "partial.csv").string(),
                              "--scenario", "SCAN"});
    CHECK(contains(partial.out, "r1: submission marked partial"));

    const auto empty = run({"--out-dir", dir.path().string(), "weights", (dir / "one.csv").string(), "--scenario",
                            "DDOS"});
    CHECK(empty.code == 1);
    CHECK(contains(empty.err, "empty cohort"));

    CHECK(run({"weights", responses, "--scenario", "NOPE"}).code == 1);
    CHECK(run({"--out-dir", dir.path().string(), "weights", responses, "--scenario", "CNC", "--method",
               "geometric-mean"})
              .code == 0);
}

TEST_CASE("extract and score") {
    testing::TempDir dir;
    const auto out = dir.path().string();
    REQUIRE(run({"--out-dir", out, "weights", testing::fixture("responses_40.csv").string(), "--scenario", "DDOS"})
                .code == 0);
    REQUIRE(run({"--out-dir", out, "weights", testing::fixture("responses_40.csv").string(), "--scenario", "CNC"})
                .code == 0);

    const auto x = run({"--out-dir", out, "extract", "--flows", testing::fixture("three_flows.csv").string(),
                        "--device-ip", "192.168.1.20", "--static", testing::fixture("camera_static.json").string()});
    CHECK(x.code == 0);
    CHECK(contains(x.out, "CCOM: "));
    const auto profile = (dir / "profile_cam-demo.json").string();
    REQUIRE(std::filesystem::exists(profile));

    const auto one = run({"--out-dir", out, "score", "--model", (dir / "model_DDOS.json").string(), "--profile",
                          profile});
    CHECK(one.code == 0);
    CHECK(contains(one.out, "cam-demo DDOS "));
    CHECK_FALSE(contains(one.out, "D-Score matrix"));
    CHECK(std::filesystem::exists(dir / "scores.csv"));

    // a second device with the same declared values under a different id
    nlohmann::json p = nlohmann::json::parse(std::ifstream(profile));
    p["model_id"] = "cam-two";
    p["dynamic_values"]["IATO"] = 90.0;
    std::ofstream(dir / "p2.json") << p.dump();
    const auto many = run({"--out-dir", out, "--format", "json", "score", "--model",
                           (dir / "model_DDOS.json").string(), "--model", (dir / "model_CNC.json").string(),
                           "--profile", profile, "--profile", (dir / "p2.json").string()});
    CHECK(many.code == 0);
    const auto j = nlohmann::json::parse(many.out);
    CHECK(j["scorecards"].size() == 4);
    CHECK(j["maximin"].size() == 2);

    p["taxonomy_version"] = "0.9";
    std::ofstream(dir / "old.json") << p.dump();
    const auto mismatch = run({"score", "--model", (dir / "model_DDOS.json").string(), "--profile",
                               (dir / "old.json").string()});
    CHECK(mismatch.code == 1);

    nlohmann::json sparse = nlohmann::json::parse(std::ifstream(profile));
    sparse["static_values"] = nlohmann::json::object();
    sparse["dynamic_values"] = {{"UDPO", 1.0}};
    std::ofstream(dir / "sparse.json") << sparse.dump();
    const auto refused = run({"score", "--model", (dir / "model_DDOS.json").string(), "--profile",
                              (dir / "sparse.json").string()});
    CHECK(refused.code == 3);

    std::ofstream(dir / "conflict.json") << R"({"model_id":"c","values":{"IATO":3}})";
    const auto conflict = run({"--out-dir", out, "extract", "--flows", testing::fixture("three_flows.csv").string(),
                               "--device-ip", "192.168.1.20", "--static", (dir / "conflict.json").string()});
    CHECK(conflict.code == 1);
    CHECK(contains(conflict.err, "conflict"));
}

TEST_CASE("score from a published table") {
    const auto r = run({"score", "--from-scores", testing::fixture("published_scores.csv").string()});
    CHECK(r.code == 0);
    CHECK(contains(r.out, "0.460 <maximin"));
    CHECK(contains(r.out, "0.429 <maximin"));
    CHECK(contains(r.out, "0.398 <maximin"));
    CHECK(run({"score"}).code == 1);
}

TEST_CASE("predictability") {
    testing::TempDir dir;
    write_flows(dir / "a.csv", "10.0.0.5", 150, 1);
    write_flows(dir / "b.csv", "10.0.0.6", 150, 2);
    std::ofstream(dir / "cam.json") << R"({"model_id":"a","values":{"NSNS":2}})";

    SUBCASE("single device") {
        std::ofstream(dir / "m.csv") << "model_id,group,flows,device_ip,profile\na,camera,a.csv,10.0.0.5,\n";
        const auto r = run({"predictability", (dir / "m.csv").string()});
        CHECK(r.code == 0);
        CHECK(contains(r.out, "Hurst exponent"));
        CHECK(contains(r.out, "flow_incoming_packets"));
        CHECK(contains(r.out, "group tests skipped"));
    }
    SUBCASE("identical data in two groups") {
        std::ofstream(dir / "m.csv") << "model_id,group,flows,device_ip,profile\n"
                                        "a,camera,a.csv,10.0.0.5,cam.json\n"
                                        "a2,doorbell,a.csv,10.0.0.5,\n";
        const auto r = run({"--format", "json", "predictability", (dir / "m.csv").string()});
        CHECK(r.code == 0);
        const auto j = nlohmann::json::parse(r.out);
        int anova_rows = 0;
        for (const auto& t : j["group_tests"]) {
            if (t["test"] == "anova") {
                CHECK(t["p_value"] == 1.0);
                ++anova_rows;
            }
        }
        CHECK(anova_rows == 4);
        CHECK(j["hurst"]["devices"].size() == 2);
    }
    SUBCASE("two groups") {
        std::ofstream(dir / "m.csv") << "model_id,group,flows,device_ip,profile\n"
                                        "a,camera,a.csv,10.0.0.5,\n"
                                        "b,doorbell,b.csv,10.0.0.6,\n";
        const auto r = run({"predictability", (dir / "m.csv").string()});
        CHECK(r.code == 0);
        CHECK(contains(r.out, "welch-t"));
        CHECK(contains(r.out, "average"));
    }
    std::ofstream(dir / "bad.csv") << "model,flows\n";
    CHECK(run({"predictability", (dir / "bad.csv").string()}).code == 1);
}

}
