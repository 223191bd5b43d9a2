#pragma once

#include "dscore/responses.hpp"
#include "dscore/taxonomy.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dscore::ahp {

/// Maps judgment magnitude 0..5 onto Saaty's 1..9 ratio scale.
using SaatyScale = std::array<double, 6>;
inline constexpr SaatyScale kDefaultSaatyScale = {1.0, 2.0, 3.0, 5.0, 7.0, 9.0};

/// Square positive reciprocal matrix with labelled rows/columns.
class ComparisonMatrix {
public:
    /// All-ones matrix over `labels`.
    explicit ComparisonMatrix(std::vector<std::string> labels);

    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }

    double operator()(std::size_t i, std::size_t j) const { return entries_[i * size() + j]; }

    /// Sets entry (i, j) and its reciprocal (j, i). Requires i != j and value > 0.
    void set(std::size_t i, std::size_t j, double value);

    /// Checks reciprocity, unit diagonal and the [1/9, 9] bound. Throws InputError.
    void check() const;

private:
    std::vector<std::string> labels_;
    std::vector<double> entries_;
};

struct WeightVector {
    std::vector<std::string> labels;
    std::vector<double> weights;

    double at(std::string_view label) const;
};

struct ConsistencyReport {
    double lambda_max = 0.0;
    double consistency_index = 0.0;
    double consistency_ratio = 0.0;
    std::size_t n = 0;
};

/// Saaty's random consistency index for orders 1..10.
double random_index(std::size_t n);

/// Builds a matrix from judgments that are total over `labels` (pairs keyed with the
/// earlier label on the left). Throws InputError naming the first missing pair.
ComparisonMatrix to_matrix(const std::vector<std::string>& labels, const JudgmentMap& judgments,
                           const SaatyScale& scale = kDefaultSaatyScale);

struct PowerIterationOptions {
    double tolerance = 1e-10;
    std::size_t max_iterations = 10'000;
};

/// Principal right eigenvector by power iteration, normalized to sum 1, with the
/// Rayleigh-quotient lambda_max and the consistency ratio. Throws NumericError on
/// non-convergence.
std::pair<WeightVector, ConsistencyReport> principal_weights(const ComparisonMatrix& matrix,
                                                             const PowerIterationOptions& options = {});

/// Normalized row geometric means. Exact for consistent matrices.
WeightVector geometric_mean_weights(const ComparisonMatrix& matrix);

/// Consistency report for a given weight vector (used with the geometric-mean method).
ConsistencyReport consistency(const ComparisonMatrix& matrix, std::span<const double> weights);

enum class Method { Eigenvector, GeometricMean };

struct WeightingOptions {
    Method method = Method::Eigenvector;
    SaatyScale scale = kDefaultSaatyScale;
    /// Also average the sub-category matrix CR into each response's mean CR.
    bool include_subcategory_cr = false;
};

/// Per-expert weights derived from one completed response.
struct ResponseWeights {
    std::string response_id;
    std::string scenario;
    WeightVector subcategory_weights;
    WeightVector feature_weights;  // global: sub-category weight x within-sub-category weight
    double subcategory_cr = 0.0;
    std::map<std::string, double> feature_matrix_cr;  // per sub-category
    double mean_cr = 0.0;
};

ResponseWeights response_weights(const CompletedResponse& response, const Taxonomy& taxonomy,
                                 const WeightingOptions& options = {});

/// Cohort-averaged weights for one scenario.
struct ScenarioWeights {
    std::string scenario;
    std::string taxonomy_version;
    WeightVector feature_weights;
    WeightVector subcategory_weights;
    std::vector<std::string> contributing_responses;
    std::map<std::string, double> mean_cr_per_response;  // contributing responses only
    std::vector<std::string> dropped_responses;           // filtered out by the CR threshold
    std::optional<double> cr_threshold;
};

/// Drops responses whose mean CR exceeds `cr_threshold` (when given), then averages
/// the survivors component-wise and renormalizes. Summation runs in response_id
/// order so the result does not depend on input order.
/// Throws InputError on mixed scenarios or an empty cohort.
ScenarioWeights aggregate(const std::vector<ResponseWeights>& responses, std::optional<double> cr_threshold,
                          const std::string& taxonomy_version = "");

/// Mean pairwise cosine similarity. Needs at least two vectors over identical labels;
/// throws NumericError on a zero-norm vector.
double agreement(const std::vector<WeightVector>& vectors);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

void save_model(const ScenarioWeights& model, const std::filesystem::path& path);
ScenarioWeights load_model(const std::filesystem::path& path, const Taxonomy& taxonomy);

}  // namespace dscore::ahp
