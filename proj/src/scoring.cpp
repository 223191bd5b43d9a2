#include "dscore/scoring.hpp"

#include "dscore/error.hpp"
#include "dscore/util.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

namespace dscore::scoring {

namespace {

std::string range_key(double x_max) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x_max);
    return std::string(buf, ptr);
}

std::string shortest(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

const ScenarioSpec& ScenarioConfig::scenario(std::string_view code) const {
    for (const auto& s : scenarios) {
        if (s.code == code) return s;
    }
    throw InputError("scenario '" + std::string(code) + "' is not configured");
}

std::vector<std::string> ScenarioConfig::codes() const {
    std::vector<std::string> out;
    for (const auto& s : scenarios) out.push_back(s.code);
    return out;
}

ScenarioConfig default_scenario_config() {
    // Larger values of these features mean sparser, more regular traffic, so an
    // attack stands out more; every other feature is treated as adding noise.
    const std::set<std::string> positive = {"BATT", "IATI", "IATO", "WLPR"};
    std::map<std::string, int> delta;
    for (const auto& code : default_taxonomy().feature_codes()) delta[code] = positive.count(code) ? 1 : -1;

    const std::map<std::string, double> beta = {{"1", 5.0}, {"10", 5.0}, {"100", 5.0}, {"1000", 5.0}};
    ScenarioConfig config;
    config.version = "1.0";
    config.advisory =
        "Direction (delta) values are advisory defaults, not published ground truth. Review them per scenario "
        "before relying on scores.";
    config.scenarios = {
        ScenarioSpec{"CNC", "C&C communication", kDefaultBins, beta, {}, delta},
        ScenarioSpec{"DDOS", "DDoS flooding", kDefaultBins, beta, {}, delta},
        ScenarioSpec{"EXFIL", "Data exfiltration", kDefaultBins, beta, {}, delta},
        ScenarioSpec{"SCAN", "Bot scanning", kDefaultBins, beta, {}, delta},
    };
    return config;
}

void to_json(nlohmann::ordered_json& j, const ScenarioConfig& config) {
    j = nlohmann::ordered_json::object();
    j["format"] = "dscore-scenarios";
    j["version"] = config.version;
    j["advisory"] = config.advisory;
    auto& arr = j["scenarios"] = nlohmann::ordered_json::array();
    for (const auto& s : config.scenarios) {
        nlohmann::ordered_json js;
        js["code"] = s.code;
        js["name"] = s.name;
        js["bins"] = s.bins;
        js["beta_by_range"] = nlohmann::ordered_json::object();
        for (const auto& [k, v] : s.beta_by_range) js["beta_by_range"][k] = v;
        js["beta_by_feature"] = nlohmann::ordered_json::object();
        for (const auto& [k, v] : s.beta_by_feature) js["beta_by_feature"][k] = v;
        js["delta"] = nlohmann::ordered_json::object();
        for (const auto& [k, v] : s.delta) js["delta"][k] = v;
        arr.push_back(std::move(js));
    }
}

ScenarioConfig scenario_config_from_json(const nlohmann::ordered_json& j) {
    try {
        ScenarioConfig config;
        config.version = j.at("version").get<std::string>();
        config.advisory = j.value("advisory", "");
        for (const auto& js : j.at("scenarios")) {
            ScenarioSpec s;
            s.code = js.at("code").get<std::string>();
            s.name = js.value("name", s.code);
            s.bins = js.value("bins", kDefaultBins);
            const auto by_range = js.value("beta_by_range", nlohmann::ordered_json::object());
            for (const auto& [k, v] : by_range.items()) {
                s.beta_by_range[k] = v.get<double>();
            }
            const auto by_feature = js.value("beta_by_feature", nlohmann::ordered_json::object());
            for (const auto& [k, v] : by_feature.items()) {
                s.beta_by_feature[k] = v.get<double>();
            }
            for (const auto& [k, v] : js.at("delta").items()) s.delta[k] = v.get<int>();
            config.scenarios.push_back(std::move(s));
        }
        return config;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("scenario config: ") + e.what());
    }
}

void check_scenario_config(const ScenarioConfig& config, const Taxonomy& taxonomy) {
    if (config.scenarios.empty()) throw InputError("scenario config defines no scenarios");
    std::set<std::string> seen;
    for (const auto& s : config.scenarios) {
        const std::string where = "scenario '" + s.code + "': ";
        if (!seen.insert(s.code).second) throw InputError("duplicate scenario code '" + s.code + "'");
        if (s.bins < 2 || s.bins > 26) throw InputError(where + "bins must be between 2 and 26");
        for (const auto& [k, v] : s.beta_by_range) {
            if (!(v > 0.0)) throw InputError(where + "beta for range " + k + " must be positive");
        }
        for (const auto& [k, v] : s.beta_by_feature) {
            if (!taxonomy.find_feature(k)) throw InputError(where + "beta for unknown feature '" + k + "'");
            if (!(v > 0.0)) throw InputError(where + "beta for '" + k + "' must be positive");
        }
        for (const auto& [k, v] : s.delta) {
            if (!taxonomy.find_feature(k)) throw InputError(where + "delta for unknown feature '" + k + "'");
            if (v != 1 && v != -1) throw InputError(where + "delta for '" + k + "' must be +1 or -1");
        }
        for (const auto* f : taxonomy.features()) {
            if (!s.delta.count(f->code)) throw InputError(where + "no delta for feature '" + f->code + "'");
            if (f->x_min != 0.0) {
                throw InputError(where + "feature '" + f->code +
                                 "' has a nonzero x_min; normalization assumes ranges starting at 0");
            }
        }
    }
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path, const Taxonomy& taxonomy) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open scenario config " + path.string());
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    auto config = scenario_config_from_json(j);
    check_scenario_config(config, taxonomy);
    return config;
}

double alpha(double x_max, double beta) {
    if (!(x_max > 0.0) || !(beta > 0.0)) throw InputError("alpha needs x_max > 0 and beta > 0");
    return 1.0 / (beta * std::pow(10.0, std::log10(x_max) - 1.0));
}

double normalize(double x, double alpha_value, int delta) {
    if (delta == 1) return std::tanh(alpha_value * x);
    if (delta == -1) return 1.0 + std::tanh(-alpha_value * x);
    throw InputError("delta must be +1 or -1, got " + std::to_string(delta));
}

double normalize(double x, const FeatureParams& params) { return normalize(x, params.alpha, params.delta); }

NormalizationParams make_params(const ScenarioSpec& spec, const Taxonomy& taxonomy) {
    NormalizationParams params;
    for (const auto* f : taxonomy.features()) {
        if (f->x_min != 0.0) {
            throw InputError("feature '" + f->code + "' has a nonzero x_min; normalization assumes ranges from 0");
        }
        FeatureParams p;
        if (auto it = spec.beta_by_feature.find(f->code); it != spec.beta_by_feature.end()) {
            p.beta = it->second;
        } else if (auto jt = spec.beta_by_range.find(range_key(f->x_max)); jt != spec.beta_by_range.end()) {
            p.beta = jt->second;
        }
        auto dt = spec.delta.find(f->code);
        if (dt == spec.delta.end()) {
            throw InputError("scenario '" + spec.code + "' has no delta for feature '" + f->code + "'");
        }
        p.delta = dt->second;
        p.x_min = f->x_min;
        p.x_max = f->x_max;
        p.alpha = alpha(f->x_max, p.beta);
        params[f->code] = p;
    }
    return params;
}

std::string ScoreCard::summary_line() const {
    return model_id + " " + scenario + " " + format_fixed(d_score, 3) + " " + std::string(1, label);
}

ScoreCard d_score(const ahp::ScenarioWeights& weights, const traffic::DeviceProfile& profile,
                  const NormalizationParams& params, int bins) {
    if (!weights.taxonomy_version.empty() && !profile.taxonomy_version.empty() &&
        weights.taxonomy_version != profile.taxonomy_version) {
        throw InputError("version mismatch: model for '" + weights.scenario + "' uses taxonomy " +
                         weights.taxonomy_version + " but profile '" + profile.model_id + "' uses taxonomy " +
                         profile.taxonomy_version);
    }
    ScoreCard card;
    card.scenario = weights.scenario;
    card.model_id = profile.model_id;
    card.device_type = profile.device_type;
    const auto values = profile.values();

    double weighted = 0.0;
    double mass = 0.0;
    double total_mass = 0.0;
    std::vector<std::string> missing_codes;
    for (std::size_t i = 0; i < weights.feature_weights.labels.size(); ++i) {
        const auto& code = weights.feature_weights.labels[i];
        const double w = weights.feature_weights.weights[i];
        total_mass += w;
        auto it = values.find(code);
        if (it == values.end()) {
            std::string note = "weight redistributed over present features";
            if (auto m = profile.missing.find(code); m != profile.missing.end()) note = m->second + "; " + note;
            card.missing_features.emplace_back(code, std::move(note));
            missing_codes.push_back(code);
            continue;
        }
        auto p = params.find(code);
        if (p == params.end()) throw InputError("no normalization parameters for feature '" + code + "'");
        const double xn = normalize(it->second, p->second);
        card.normalized_values[code] = xn;
        weighted += w * xn;
        mass += w;
    }
    card.present_weight_mass = total_mass > 0.0 ? mass / total_mass : 0.0;
    if (card.present_weight_mass < kMinPresentWeightMass) {
        std::string msg = "insufficient profile for '" + profile.model_id + "': only " +
                          format_fixed(100.0 * card.present_weight_mass, 1) +
                          "% of the weight mass is on present features; missing:";
        for (const auto& c : missing_codes) msg += " " + c;
        throw PolicyError(msg);
    }
    card.d_score = std::clamp(weighted / mass, 0.0, 1.0);
    card.label = label(card.d_score, bins);
    return card;
}

int bin_index(double d, int bins) {
    if (bins < 2 || bins > 26) throw InputError("bins must be between 2 and 26");
    if (!(d >= 0.0 && d <= 1.0)) throw InputError("D-Score must lie in [0, 1]");
    const double width = static_cast<double>(bins);
    int k = std::clamp(static_cast<int>(std::floor(d * width)), 0, bins - 1);
    // Settle edge cases against the edges themselves, not the product d * bins.
    while (k + 1 < bins && static_cast<double>(k + 1) / width <= d) ++k;
    while (k > 0 && static_cast<double>(k) / width > d) --k;
    return k;
}

char label(double d, int bins) { return static_cast<char>('A' + (bins - 1 - bin_index(d, bins))); }

std::map<std::string, const MaximinRow*> MaximinTable::winners_by_type() const {
    std::map<std::string, const MaximinRow*> out;
    for (const auto& row : rows) {
        if (row.group_rank == 1) out[row.device_type] = &row;
    }
    return out;
}

MaximinTable maximin_rank(const std::vector<ScoreEntry>& entries) {
    if (entries.empty()) throw InputError("no scores to rank");
    MaximinTable table;
    std::map<std::string, std::size_t> row_of;
    for (const auto& e : entries) {
        if (std::find(table.scenarios.begin(), table.scenarios.end(), e.scenario) == table.scenarios.end()) {
            table.scenarios.push_back(e.scenario);
        }
        auto [it, inserted] = row_of.try_emplace(e.model_id, table.rows.size());
        if (inserted) table.rows.push_back(MaximinRow{e.model_id, e.device_type, {}, 0, 0, 0, 0, 0});
        auto& row = table.rows[it->second];
        if (!row.scores.emplace(e.scenario, e.d_score).second) {
            throw InputError("model '" + e.model_id + "' scored twice on scenario '" + e.scenario + "'");
        }
    }
    for (auto& row : table.rows) {
        if (row.scores.size() != table.scenarios.size()) {
            throw InputError("coverage error: model '" + row.model_id + "' is scored on " +
                             std::to_string(row.scores.size()) + " of " + std::to_string(table.scenarios.size()) +
                             " scenarios");
        }
        row.min = 1.0;
        row.max = 0.0;
        double sum = 0.0;
        for (const auto& s : table.scenarios) {
            const double v = row.scores.at(s);
            row.min = std::min(row.min, v);
            row.max = std::max(row.max, v);
            sum += v;
        }
        row.mean = sum / static_cast<double>(table.scenarios.size());
    }
    std::sort(table.rows.begin(), table.rows.end(), [](const MaximinRow& a, const MaximinRow& b) {
        if (a.min != b.min) return a.min > b.min;
        if (a.mean != b.mean) return a.mean > b.mean;
        return a.model_id < b.model_id;
    });
    std::map<std::string, std::size_t> group_counts;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        table.rows[i].rank = i + 1;
        table.rows[i].group_rank = ++group_counts[table.rows[i].device_type];
    }
    return table;
}

std::vector<ScoreEntry> load_score_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open score table " + path.string());
    std::vector<ScoreEntry> out;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (!header_seen) {
            if (fields != std::vector<std::string>{"model_id", "type", "scenario", "d_score"}) {
                throw InputError(path.string() + ": line " + std::to_string(line_no) +
                                 ": header must be 'model_id,type,scenario,d_score'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 4) {
            throw InputError(path.string() + ": line " + std::to_string(line_no) + ": expected 4 fields");
        }
        double d = 0.0;
        auto [ptr, ec] = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), d);
        if (ec != std::errc{} || ptr != fields[3].data() + fields[3].size() || d < 0.0 || d > 1.0) {
            throw InputError(path.string() + ": line " + std::to_string(line_no) + ": field 'd_score' is not in [0, 1]");
        }
        out.push_back(ScoreEntry{fields[0], fields[1], fields[2], d});
    }
    return out;
}

void write_score_table(std::ostream& out, const std::vector<ScoreEntry>& entries) {
    out << "model_id,type,scenario,d_score\n";
    for (const auto& e : entries) {
        out << e.model_id << ',' << e.device_type << ',' << e.scenario << ',' << shortest(e.d_score) << '\n';
    }
}

}  // namespace dscore::scoring
