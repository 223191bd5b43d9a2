#include "dscore/ahp.hpp"
#include "dscore/error.hpp"
#include "dscore/scoring.hpp"
#include "dscore/taxonomy.hpp"
#include "dscore/traffic.hpp"
#include "test_helpers.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

using namespace dscore;

namespace {

ahp::ScenarioWeights uniform_model(const Taxonomy& t, const std::string& scenario = "DDOS") {
    ahp::ScenarioWeights m;
    m.scenario = scenario;
    m.taxonomy_version = t.version();
    m.feature_weights.labels = t.feature_codes();
    m.feature_weights.weights.assign(t.count_features(), 1.0 / static_cast<double>(t.count_features()));
    return m;
}

traffic::DeviceProfile profile_at(const Taxonomy& t, const scoring::NormalizationParams& params, bool best) {
    traffic::DeviceProfile p;
    p.model_id = best ? "best" : "worst";
    p.taxonomy_version = t.version();
    for (const auto& code : t.feature_codes()) {
        const bool high = (params.at(code).delta > 0) == best;
        p.static_values[code] = high ? 1e9 : 0.0;
    }
    return p;
}

}  // namespace

TEST_SUITE("scoring") {

TEST_CASE("alpha") {
    CHECK(scoring::alpha(1, 5) == 2.0);
    CHECK(scoring::alpha(10, 5) == 0.2);
    CHECK(scoring::alpha(100, 5) == 0.02);
    CHECK(scoring::alpha(1000, 5) == 0.002);
    CHECK(scoring::alpha(10, 2) == 0.5);
    CHECK_THROWS_AS(scoring::alpha(0, 5), InputError);
    CHECK_THROWS_AS(scoring::alpha(10, 0), InputError);
}

TEST_CASE("normalize") {
    CHECK(scoring::normalize(0.0, 2.0, 1) == 0.0);
    CHECK(scoring::normalize(0.0, 2.0, -1) == 1.0);
    CHECK(scoring::normalize(1.0, 2.0, 1) == doctest::Approx(0.964027580075817).epsilon(1e-14));
    CHECK(scoring::normalize(1.0, 2.0, -1) == doctest::Approx(1 - 0.964027580075817).epsilon(1e-12));
    CHECK_THROWS_AS(scoring::normalize(1.0, 2.0, 0), InputError);
}

TEST_CASE("parameters from the scenario config") {
    const Taxonomy t = default_taxonomy();
    const auto cfg = scoring::default_scenario_config();
    CHECK(cfg.codes() == std::vector<std::string>{"CNC", "DDOS", "EXFIL", "SCAN"});
    scoring::check_scenario_config(cfg, t);
    auto spec = cfg.scenario("DDOS");
    const auto params = scoring::make_params(spec, t);
    CHECK(params.size() == 30);
    CHECK(params.at("IATI").alpha == 0.002);
    CHECK(params.at("ENCI").alpha == 2.0);
    CHECK(params.at("IATI").delta == 1);
    CHECK(params.at("ENCO").delta == -1);

    spec.beta_by_feature["IATI"] = 2.0;
    CHECK(scoring::make_params(spec, t).at("IATI").alpha == doctest::Approx(0.005));
    CHECK_THROWS_AS(cfg.scenario("NOPE"), InputError);
}

TEST_CASE("scenario config validation and files") {
    const Taxonomy t = default_taxonomy();
    CHECK(scoring::load_scenario_config(testing::source("config/scenarios.json"), t).codes() ==
          scoring::default_scenario_config().codes());

    nlohmann::ordered_json j;
    to_json(j, scoring::default_scenario_config());
    testing::TempDir dir;
    {
        auto bad = j;
        bad["scenarios"][0]["delta"].erase("NSNS");
        std::ofstream(dir / "a.json") << bad.dump();
        CHECK_THROWS_AS(scoring::load_scenario_config(dir / "a.json", t), InputError);
    }
    {
        auto bad = j;
        bad["scenarios"][1]["delta"]["NSNS"] = 0;
        std::ofstream(dir / "b.json") << bad.dump();
        CHECK_THROWS_AS(scoring::load_scenario_config(dir / "b.json", t), InputError);
    }
    {
        auto bad = j;
        bad["scenarios"][2]["beta_by_range"]["10"] = -1.0;
        std::ofstream(dir / "c.json") << bad.dump();
        CHECK_THROWS_AS(scoring::load_scenario_config(dir / "c.json", t), InputError);
    }
    {
        std::ofstream(dir / "d.json") << j.dump();
        const auto back = scoring::load_scenario_config(dir / "d.json", t);
        CHECK(back.scenario("SCAN").delta == scoring::default_scenario_config().scenario("SCAN").delta);
    }
}

TEST_CASE("D-Score extremes and missing features") {
    const Taxonomy t = default_taxonomy();
    const auto spec = scoring::default_scenario_config().scenario("DDOS");
    const auto params = scoring::make_params(spec, t);
    const auto model = uniform_model(t);

    const auto top = scoring::d_score(model, profile_at(t, params, true), params);
    CHECK(top.d_score == doctest::Approx(1.0));
    CHECK(top.label == 'A');
    const auto bottom = scoring::d_score(model, profile_at(t, params, false), params);
    CHECK(bottom.d_score == doctest::Approx(0.0));
    CHECK(bottom.label == 'G');

    auto partial = profile_at(t, params, true);
    for (const char* code : {"IATI", "PCKI", "PCSI"}) {
        partial.static_values.erase(code);
        partial.missing[code] = "no inbound flows";
    }
    const auto card = scoring::d_score(model, partial, params);
    CHECK(card.d_score == doctest::Approx(1.0));
    CHECK(card.present_weight_mass == doctest::Approx(27.0 / 30.0));
    CHECK(card.missing_features.size() == 3);

    auto sparse = profile_at(t, params, true);
    for (const auto& code : t.feature_codes()) {
        if (t.subcategory_of(code)->code != "OUT") sparse.static_values.erase(code);
    }
    CHECK_THROWS_AS(scoring::d_score(model, sparse, params), PolicyError);

    auto other = partial;
    other.taxonomy_version = "2.0";
    CHECK_THROWS_AS(scoring::d_score(model, other, params), InputError);
}

TEST_CASE("D-Score engineered to a published value") {
    const Taxonomy t = default_taxonomy();
    const auto params = scoring::make_params(scoring::default_scenario_config().scenario("DDOS"), t);
    // weight 0.477 on a feature at its best extreme, the rest on features at their worst
    ahp::ScenarioWeights model = uniform_model(t);
    auto& w = model.feature_weights.weights;
    std::fill(w.begin(), w.end(), (1.0 - 0.477) / 29.0);
    w[0] = 0.477;
    auto p = profile_at(t, params, false);
    p.static_values[t.feature_codes()[0]] = params.at(t.feature_codes()[0]).delta > 0 ? 1e9 : 0.0;
    const auto card = scoring::d_score(model, p, params);
    CHECK(card.d_score == doctest::Approx(0.477).epsilon(1e-12));
    CHECK(card.label == 'D');
    CHECK(card.summary_line() == "worst DDOS 0.477 D");
}

TEST_CASE("D-Score ignores feature enumeration order") {
    const Taxonomy t = default_taxonomy();
    const auto params = scoring::make_params(scoring::default_scenario_config().scenario("EXFIL"), t);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ahp::ScenarioWeights model = uniform_model(t, "EXFIL");
    for (auto& w : model.feature_weights.weights) w = u(rng);
    traffic::DeviceProfile p;
    p.model_id = "m";
    p.taxonomy_version = t.version();
    for (const auto& code : t.feature_codes()) p.static_values[code] = params.at(code).x_max * u(rng);
    const double base = scoring::d_score(model, p, params).d_score;

    std::vector<std::size_t> idx(model.feature_weights.labels.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (int k = 0; k < 10; ++k) {
        std::shuffle(idx.begin(), idx.end(), rng);
        ahp::ScenarioWeights shuffled = model;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            shuffled.feature_weights.labels[i] = model.feature_weights.labels[idx[i]];
            shuffled.feature_weights.weights[i] = model.feature_weights.weights[idx[i]];
        }
        CHECK(scoring::d_score(shuffled, p, params).d_score == doctest::Approx(base).epsilon(1e-14));
    }
}

TEST_CASE("labels") {
    CHECK(scoring::label(0.90) == 'A');
    CHECK(scoring::label(1.0) == 'A');
    CHECK(scoring::label(0.0) == 'G');
    CHECK(scoring::label(0.477) == 'D');
    CHECK(scoring::label(0.429) == 'D');  // edge 3/7 goes up
    CHECK(scoring::label(3.0 / 7.0) == 'D');
    CHECK(scoring::label(0.428) == 'E');
    CHECK(scoring::label(6.0 / 7.0) == 'A');
    for (int k = 0; k < 7; ++k) CHECK(scoring::bin_index((k + 0.5) / 7.0) == k);
    CHECK(scoring::label(0.5, 2) == 'A');
    CHECK(scoring::label(0.49, 2) == 'B');
    CHECK_THROWS_AS(scoring::label(1.5), InputError);
}

TEST_CASE("maximin") {
    SUBCASE("single model") {
        const auto table = scoring::maximin_rank({{"m", "t", "DDOS", 0.4}});
        REQUIRE(table.rows.size() == 1);
        CHECK(table.rows[0].min == 0.4);
        CHECK(table.rows[0].rank == 1);
    }
    SUBCASE("published matrix") {
        const auto entries = scoring::load_score_table(testing::fixture("published_scores.csv"));
        const auto table = scoring::maximin_rank(entries);
        CHECK(table.scenarios == std::vector<std::string>{"DDOS", "SCAN", "EXFIL", "CNC"});
        const auto winners = table.winners_by_type();
        CHECK(winners.at("camera")->model_id == "XCS7-1002");
        CHECK(winners.at("camera")->min == 0.460);
        CHECK(winners.at("doorbell")->model_id == "Ennio Bell");
        CHECK(winners.at("doorbell")->min == 0.429);
        CHECK(winners.at("baby_monitor")->model_id == "Philips B120N/10");
        CHECK(winners.at("baby_monitor")->min == 0.398);
        CHECK(table.rows.front().model_id == "XCS7-1002");
        CHECK(table.rows.back().model_id == "Philips B120N/10");
    }
    SUBCASE("ties fall back to the mean, then the id") {
        const auto table = scoring::maximin_rank({{"b", "", "S1", 0.3}, {"b", "", "S2", 0.5},
                                                  {"a", "", "S1", 0.3}, {"a", "", "S2", 0.5},
                                                  {"c", "", "S1", 0.3}, {"c", "", "S2", 0.6}});
        CHECK(table.rows[0].model_id == "c");
        CHECK(table.rows[1].model_id == "a");
        CHECK(table.rows[2].model_id == "b");
    }
    CHECK_THROWS_AS(scoring::maximin_rank({{"a", "", "S1", 0.3}, {"b", "", "S2", 0.3}}), InputError);
    CHECK_THROWS_AS(scoring::maximin_rank({}), InputError);
}

TEST_CASE("score table round trip") {
    const auto entries = scoring::load_score_table(testing::fixture("published_scores.csv"));
    std::stringstream buf;
    scoring::write_score_table(buf, entries);
    testing::TempDir dir;
    std::ofstream(dir / "s.csv") << buf.str();
    const auto back = scoring::load_score_table(dir / "s.csv");
    REQUIRE(back.size() == entries.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].model_id == entries[i].model_id);
        CHECK(back[i].d_score == entries[i].d_score);
    }
}

}
