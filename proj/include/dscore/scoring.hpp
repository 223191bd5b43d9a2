#pragma once

#include "dscore/ahp.hpp"
#include "dscore/taxonomy.hpp"
#include "dscore/traffic.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dscore::scoring {

inline constexpr double kDefaultBeta = 5.0;
inline constexpr int kDefaultBins = 7;
inline constexpr double kMinPresentWeightMass = 0.5;

/// Per-scenario normalization and labelling settings.
struct ScenarioSpec {
    std::string code;
    std::string name;
    int bins = kDefaultBins;
    std::map<std::string, double> beta_by_range;  // keyed by x_max ("1", "10", ...)
    std::map<std::string, double> beta_by_feature;  // overrides beta_by_range
    std::map<std::string, int> delta;               // +1 / -1 for every taxonomy feature
};

struct ScenarioConfig {
    std::string version;
    std::string advisory;
    std::vector<ScenarioSpec> scenarios;

    const ScenarioSpec& scenario(std::string_view code) const;
    std::vector<std::string> codes() const;
};

/// The four shipped scenarios. Their delta tables are advisory defaults.
ScenarioConfig default_scenario_config();

void to_json(nlohmann::ordered_json& j, const ScenarioConfig& config);
ScenarioConfig scenario_config_from_json(const nlohmann::ordered_json& j);
/// Loads and checks the config against the taxonomy (every feature needs a delta,
/// deltas are +/-1, betas positive, bins in [2, 26], x_min = 0).
ScenarioConfig load_scenario_config(const std::filesystem::path& path, const Taxonomy& taxonomy);
void check_scenario_config(const ScenarioConfig& config, const Taxonomy& taxonomy);

struct FeatureParams {
    double beta = kDefaultBeta;
    int delta = 1;
    double alpha = 0.0;
    double x_min = 0.0;
    double x_max = 1.0;
};

using NormalizationParams = std::map<std::string, FeatureParams>;

/// alpha = 1 / (beta * 10^(log10(x_max) - 1)). Throws InputError on non-positive input.
double alpha(double x_max, double beta);

/// tanh(alpha x) for delta = +1; 1 + tanh(-alpha x) for delta = -1.
double normalize(double x, double alpha, int delta);
double normalize(double x, const FeatureParams& params);

NormalizationParams make_params(const ScenarioSpec& spec, const Taxonomy& taxonomy);

struct ScoreCard {
    std::string scenario;
    std::string model_id;
    std::string device_type;
    std::map<std::string, double> normalized_values;
    double d_score = 0.0;
    char label = 'G';
    double present_weight_mass = 1.0;
    std::vector<std::pair<std::string, std::string>> missing_features;  // code, handling note

    /// "model scenario d_score label"
    std::string summary_line() const;
};

/// Weighted sum of normalized present features with weights renormalized over the
/// present ones. Throws PolicyError when less than half the weight mass is present.
ScoreCard d_score(const ahp::ScenarioWeights& weights, const traffic::DeviceProfile& profile,
                  const NormalizationParams& params, int bins = kDefaultBins);

/// Equal-width letter grade: the top bin is 'A'. Values on a bin edge go to the
/// higher (more detectable) bin.
char label(double d, int bins = kDefaultBins);

/// Index from the bottom (0) to the top (bins - 1) used by label().
int bin_index(double d, int bins = kDefaultBins);

struct ScoreEntry {
    std::string model_id;
    std::string device_type;
    std::string scenario;
    double d_score = 0.0;
};

struct MaximinRow {
    std::string model_id;
    std::string device_type;
    std::map<std::string, double> scores;  // scenario -> d_score
    double min = 0.0;
    double mean = 0.0;
    double max = 0.0;
    std::size_t rank = 0;        // overall, 1-based
    std::size_t group_rank = 0;  // within device_type, 1-based
};

struct MaximinTable {
    std::vector<std::string> scenarios;  // order of first appearance
    std::vector<MaximinRow> rows;        // overall ranking order

    /// Best row per device type, keyed by type.
    std::map<std::string, const MaximinRow*> winners_by_type() const;
};

/// Ranks models by worst-case score (min descending), then mean descending, then
/// model_id. Throws InputError if models were scored on different scenario sets.
MaximinTable maximin_rank(const std::vector<ScoreEntry>& entries);

/// CSV with header model_id,type,scenario,d_score.
std::vector<ScoreEntry> load_score_table(const std::filesystem::path& path);
void write_score_table(std::ostream& out, const std::vector<ScoreEntry>& entries);

}  // namespace dscore::scoring
