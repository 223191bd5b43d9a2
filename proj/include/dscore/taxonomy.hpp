#pragma once

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dscore {

enum class Unit { Count, CountPerHour, MHz, MB, Seconds, Bytes, Percent, Binary };

/// Where a feature value comes from: a spec sheet, an operator declaration
/// (scan results, expected usage), or extraction from captured traffic.
enum class Source { Static, Dynamic, Declared };

std::string_view to_string(Unit unit);
std::string_view to_string(Source source);
Unit parse_unit(std::string_view text);
Source parse_source(std::string_view text);

struct FeatureDef {
    std::string code;
    std::string name;
    Unit unit = Unit::Count;
    Source source = Source::Static;
    double x_min = 0.0;
    double x_max = 1.0;
    std::string range_note;  // why this expected range was chosen

    bool operator==(const FeatureDef&) const = default;
};

struct SubCategory {
    std::string code;
    std::string name;
    std::vector<FeatureDef> features;

    bool operator==(const SubCategory&) const = default;
};

struct Category {
    std::string code;
    std::string name;
    std::vector<SubCategory> sub_categories;

    bool operator==(const Category&) const = default;
};

/// Comparison counts implied by a taxonomy.
struct PairCounts {
    std::size_t categories = 0;
    std::size_t subcategories_within_categories = 0;  // one matrix per category
    std::size_t subcategories_global = 0;             // one matrix over every sub-category
    std::size_t features_total = 0;                   // one matrix per sub-category

    /// Category + within-category sub-category + feature comparisons.
    std::size_t hierarchical_total() const {
        return categories + subcategories_within_categories + features_total;
    }
};

std::size_t pairwise_count(std::size_t n);

/// Hierarchical feature taxonomy. Immutable once built; lookups are by code.
class Taxonomy {
public:
    Taxonomy() = default;
    Taxonomy(std::string version, std::vector<Category> categories);

    const std::string& version() const { return version_; }
    const std::vector<Category>& categories() const { return categories_; }

    std::size_t count_features() const;
    std::vector<const SubCategory*> subcategories() const;
    std::vector<const FeatureDef*> features() const;
    std::vector<std::string> subcategory_codes() const;
    std::vector<std::string> feature_codes() const;

    const FeatureDef& feature(std::string_view code) const;
    const FeatureDef* find_feature(std::string_view code) const;
    const SubCategory* find_subcategory(std::string_view code) const;
    const Category* find_category(std::string_view code) const;

    /// Category owning a sub-category, or nullptr.
    const Category* category_of(std::string_view subcategory_code) const;
    /// Sub-category owning a feature, or nullptr.
    const SubCategory* subcategory_of(std::string_view feature_code) const;

    /// Position of a sub-category / feature in taxonomy order; used to canonicalize pairs.
    std::optional<std::size_t> subcategory_index(std::string_view code) const;
    std::optional<std::size_t> feature_index(std::string_view code) const;

    PairCounts pair_counts() const;

    bool operator==(const Taxonomy&) const = default;

private:
    std::string version_;
    std::vector<Category> categories_;
};

/// The 3-category / 7-sub-category / 30-feature default taxonomy.
Taxonomy default_taxonomy();

/// Every invariant violation, each naming the offending code. Empty means valid.
std::vector<std::string> validate(const Taxonomy& taxonomy);

void to_json(nlohmann::ordered_json& j, const Taxonomy& taxonomy);
Taxonomy taxonomy_from_json(const nlohmann::ordered_json& j);

/// Loads and validates a taxonomy config file. Throws InputError listing violations.
Taxonomy load_taxonomy(const std::filesystem::path& path);
void save_taxonomy(const Taxonomy& taxonomy, const std::filesystem::path& path);

}  // namespace dscore
