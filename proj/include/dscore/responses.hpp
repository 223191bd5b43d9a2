#pragma once

#include "dscore/taxonomy.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace dscore {

/// Unordered pair of taxonomy elements, stored with `left` earlier in taxonomy order.
using ElementPair = std::pair<std::string, std::string>;

/// Judgment on the -5..+5 scale: negative favors the left element, positive the
/// right one, 0 means equal importance.
using Judgment = int;
inline constexpr Judgment kMaxJudgment = 5;

using JudgmentMap = std::map<ElementPair, Judgment>;

struct ExpertResponse {
    std::string response_id;
    std::string scenario;
    std::set<std::string> kept_categories;
    std::set<std::string> kept_subcategories;
    JudgmentMap subcategory_judgments;
    JudgmentMap feature_judgments;
    std::map<std::string, std::string> demographics;

    /// Set when the exporter marked the submission partial (demographic key "status").
    bool partial() const;

    bool operator==(const ExpertResponse&) const = default;
};

/// A response whose judgment maps are total over the taxonomy's pair sets.
struct CompletedResponse {
    ExpertResponse response;
    std::size_t filled_pairs = 0;
    std::vector<std::string> quality_notes;

    bool operator==(const CompletedResponse&) const = default;
};

/// Reads the response CSV (header: response_id,scenario,record_kind,left_code,right_code,value).
/// Responses come back in order of first appearance. When `scenarios` is given, any
/// other scenario code is rejected. Throws ParseError (with line number) on schema or
/// range violations.
std::vector<ExpertResponse> parse_responses(std::istream& in, const Taxonomy& taxonomy,
                                            const std::optional<std::vector<std::string>>& scenarios = std::nullopt);

std::vector<ExpertResponse> load_responses(const std::filesystem::path& path, const Taxonomy& taxonomy,
                                           const std::optional<std::vector<std::string>>& scenarios = std::nullopt);

/// Writes responses in the same schema, canonical pair orientation, stable row order.
void write_responses(std::ostream& out, const std::vector<ExpertResponse>& responses, const Taxonomy& taxonomy);

/// Checks pair membership, kept-set nesting and judgment bounds. Throws InputError.
void check_response(const ExpertResponse& response, const Taxonomy& taxonomy);

/// Fills every missing sub-category pair (over all sub-categories) and every missing
/// within-sub-category feature pair:
///   one side kept, other dropped -> magnitude 5 toward the kept side
///   neither kept                 -> 0
///   both kept but unjudged       -> 0, recorded as a quality note
/// A feature counts as kept when its sub-category is kept. Existing judgments are untouched.
CompletedResponse complete(const ExpertResponse& response, const Taxonomy& taxonomy);

/// Keep-percentages per scenario for every category and sub-category.
struct FilteringTable {
    std::vector<std::string> columns;  // category codes, then sub-category codes
    struct Row {
        std::string scenario;
        std::size_t respondents = 0;
        std::vector<double> percent;  // parallel to columns, in [0, 100]
    };
    std::vector<Row> rows;  // scenario order of first appearance
};

/// Throws InputError on an empty list.
FilteringTable filtering_stats(const std::vector<ExpertResponse>& responses, const Taxonomy& taxonomy);

}  // namespace dscore
