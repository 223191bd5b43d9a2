#include "dscore/error.hpp"
#include "dscore/responses.hpp"
#include "dscore/taxonomy.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <sstream>

using namespace dscore;

namespace {

const std::string kHeader = "response_id,scenario,record_kind,left_code,right_code,value\n";

std::vector<ExpertResponse> parse(const std::string& body) {
    std::istringstream in(kHeader + body);
    return parse_responses(in, default_taxonomy());
}

std::string parse_error(const std::string& body) {
    try {
        parse(body);
    } catch (const InputError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_SUITE("responses") {

TEST_CASE("single well-formed response") {
    const auto r = parse(
        "r1,DDOS,demographic,role,,industry\n"
        "r1,DDOS,keep_category,NT,,1\n"
        "r1,DDOS,keep_subcategory,INB,,1\n"
        "r1,DDOS,keep_subcategory,OUT,,1\n"
        "r1,DDOS,judgment_subcat,INB,OUT,-2\n"
        "r1,DDOS,judgment_feature,IATI,PCKI,4\n");
    REQUIRE(r.size() == 1);
    CHECK(r[0].response_id == "r1");
    CHECK(r[0].scenario == "DDOS");
    CHECK(r[0].kept_categories == std::set<std::string>{"NT"});
    CHECK(r[0].kept_subcategories == std::set<std::string>{"INB", "OUT"});
    CHECK(r[0].subcategory_judgments.at({"INB", "OUT"}) == -2);
    CHECK(r[0].feature_judgments.at({"IATI", "PCKI"}) == 4);
    CHECK(r[0].demographics.at("role") == "industry");
    CHECK_FALSE(r[0].partial());
}

TEST_CASE("reversed pairs are canonicalized with the sign flipped") {
    const auto r = parse(
        "r1,DDOS,keep_category,NT,,1\n"
        "r1,DDOS,judgment_subcat,OUT,INB,3\n"
        "r1,DDOS,judgment_feature,PCKI,IATI,-5\n");
    CHECK(r[0].subcategory_judgments.at({"INB", "OUT"}) == -3);
    CHECK(r[0].feature_judgments.at({"IATI", "PCKI"}) == 5);
}

TEST_CASE("schema errors name the field and line") {
    const auto e = parse_error("r1,DDOS,judgment_feature,IATI,PCKI,7\n");
    CHECK(e.find("line 2") != std::string::npos);
    CHECK(e.find("7") != std::string::npos);
    CHECK(e.find("IATI") != std::string::npos);
    CHECK(e.find("PCKI") != std::string::npos);
    CHECK(e.find("out of range") != std::string::npos);

    CHECK(parse_error("r1,DDOS,judgment_feature,IATI,IATO,1\n").find("different sub-categories") != std::string::npos);
    CHECK(parse_error("r1,DDOS,judgment_feature,IATI,XXXX,1\n").find("right_code") != std::string::npos);
    CHECK(parse_error("r1,DDOS,frobnicate,IATI,PCKI,1\n").find("record_kind") != std::string::npos);
    CHECK(parse_error("r1,DDOS,judgment_feature,IATI,PCKI,x\n").find("value") != std::string::npos);
    CHECK(parse_error("r1,DDOS,judgment_feature,IATI,PCKI,1\nr1,DDOS,judgment_feature,PCKI,IATI,1\n")
              .find("duplicate") != std::string::npos);
    CHECK(parse_error("r1,DDOS,keep_category,NT,,1\nr1,SCAN,keep_category,HW,,1\n").find("scenario") !=
          std::string::npos);
    CHECK(parse_error("r1,DDOS,keep_subcategory,INB,,1\n").find("INB") != std::string::npos);
    CHECK(parse_error("r1,DDOS,keep_category,NT,,0\n").find("value") != std::string::npos);

    std::istringstream bad_header("id,scenario,kind,a,b,v\n");
    CHECK_THROWS_AS(parse_responses(bad_header, default_taxonomy()), ParseError);
}

TEST_CASE("unknown scenario is rejected when a list is given") {
    std::istringstream in(kHeader + "r1,XYZ,keep_category,NT,,1\n");
    CHECK_THROWS_AS(parse_responses(in, default_taxonomy(), std::vector<std::string>{"DDOS", "SCAN"}), InputError);
}

TEST_CASE("partial submissions are flagged") {
    const auto r = parse("r1,DDOS,demographic,status,,partial\nr1,DDOS,keep_category,NT,,1\n");
    CHECK(r[0].partial());
}

TEST_CASE("write then parse round-trips") {
    const Taxonomy t = default_taxonomy();
    const auto original = load_responses(testing::fixture("responses_40.csv"), t);
    std::stringstream buf;
    write_responses(buf, original, t);
    const auto again = parse_responses(buf, t);
    CHECK(again == original);
}

TEST_CASE("fixture partitions by scenario") {
    const auto r = load_responses(testing::fixture("responses_40.csv"), default_taxonomy());
    CHECK(r.size() == 40);
    std::map<std::string, int> counts;
    for (const auto& x : r) ++counts[x.scenario];
    CHECK(counts == std::map<std::string, int>{{"CNC", 10}, {"DDOS", 13}, {"EXFIL", 12}, {"SCAN", 5}});
}

TEST_CASE("fill-in rule") {
    const Taxonomy t = default_taxonomy();
    ExpertResponse r;
    r.response_id = "r";
    r.scenario = "DDOS";
    r.kept_categories = {"SB", "NT"};
    r.kept_subcategories = {"INB", "OUT", "INT"};
    r.subcategory_judgments[{"INB", "OUT"}] = 3;
    r.feature_judgments[{"IATI", "PCKI"}] = -2;

    const auto done = complete(r, t);
    const auto& sj = done.response.subcategory_judgments;
    const auto& fj = done.response.feature_judgments;
    CHECK(sj.size() == 21);
    CHECK(fj.size() == 57);
    CHECK(sj.at({"SNA", "INB"}) == 5);   // kept INB on the right
    CHECK(sj.at({"INT", "SRD"}) == -5);  // kept INT on the left
    CHECK(sj.at({"SNA", "FNC"}) == 0);   // both dropped
    CHECK(sj.at({"INB", "OUT"}) == 3);   // preserved
    CHECK(fj.at({"IATI", "PCKI"}) == -2);
    CHECK(fj.at({"NSNS", "NACT"}) == 0);  // features of a dropped sub-category

    // INT vs INB / OUT are kept on both sides but never judged
    CHECK(sj.at({"INT", "INB"}) == 0);
    CHECK_FALSE(done.quality_notes.empty());
    CHECK(done.filled_pairs == 21 + 57 - 2);

    const auto again = complete(done.response, t);
    CHECK(again.response == done.response);
    CHECK(again.filled_pairs == 0);
}

TEST_CASE("filtering statistics") {
    const Taxonomy t = default_taxonomy();
    SUBCASE("single response keeping HW only") {
        const auto r = parse("r1,DDOS,keep_category,HW,,1\n");
        const auto table = filtering_stats(r, t);
        REQUIRE(table.rows.size() == 1);
        REQUIRE(table.columns.size() == 10);
        CHECK(table.columns[0] == "HW");
        CHECK(table.rows[0].percent[0] == 100.0);
        CHECK(table.rows[0].percent[1] == 0.0);
        CHECK(table.rows[0].percent[2] == 0.0);
    }
    SUBCASE("synthetic 40-response fixture reproduces the keep counts") {
        const auto table = filtering_stats(load_responses(testing::fixture("responses_40.csv"), t), t);
        const std::map<std::string, std::pair<int, std::vector<int>>> expected = {
            {"CNC", {10, {4, 6, 9, 1, 2, 3, 2, 7, 9, 8}}},
            {"DDOS", {13, {7, 8, 13, 2, 4, 6, 5, 6, 11, 11}}},
            {"EXFIL", {12, {6, 6, 12, 4, 4, 3, 3, 0, 9, 10}}},
            {"SCAN", {5, {2, 4, 4, 0, 2, 4, 1, 3, 4, 4}}},
        };
        CHECK(table.columns ==
              std::vector<std::string>{"HW", "SB", "NT", "SNA", "RSR", "FNC", "INT", "INB", "OUT", "SRD"});
        REQUIRE(table.rows.size() == 4);
        for (const auto& row : table.rows) {
            const auto& [n, counts] = expected.at(row.scenario);
            CHECK(row.respondents == static_cast<std::size_t>(n));
            for (std::size_t i = 0; i < counts.size(); ++i) {
                CHECK(row.percent[i] == doctest::Approx(100.0 * counts[i] / n));
            }
        }
    }
    CHECK_THROWS_AS(filtering_stats({}, t), InputError);
}

}
