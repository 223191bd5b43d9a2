#include "dscore/cli.hpp"

#include "dscore/ahp.hpp"
#include "dscore/error.hpp"
#include "dscore/responses.hpp"
#include "dscore/scoring.hpp"
#include "dscore/stats.hpp"
#include "dscore/taxonomy.hpp"
#include "dscore/traffic.hpp"
#include "dscore/util.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace dscore::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct GlobalOptions {
    std::string taxonomy_path;
    std::string scenario_path;
    std::string out_dir = ".";
    std::optional<double> cr_threshold;
    std::string format = "table";
    int verbosity = 0;
};

struct Context {
    GlobalOptions opts;
    Taxonomy taxonomy;
    scoring::ScenarioConfig scenarios;
    std::ostream& out;
    std::ostream& err;

    bool json() const { return opts.format == "json"; }
    fs::path out_path(const std::string& name) const { return fs::path(opts.out_dir) / name; }
};

/// Left-aligned text columns sized to their widest cell.
class TextTable {
public:
    explicit TextTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

    void print(std::ostream& out, const std::string& indent = "  ") const {
        std::vector<std::size_t> widths(header_.size(), 0);
        const auto grow = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size() && i < widths.size(); ++i) widths[i] = std::max(widths[i], r[i].size());
        };
        grow(header_);
        for (const auto& r : rows_) grow(r);
        const auto line = [&](const std::vector<std::string>& r) {
            std::string s = indent;
            for (std::size_t i = 0; i < r.size(); ++i) {
                s += r[i];
                if (i + 1 < r.size()) s += std::string(widths[i] - r[i].size() + 2, ' ');
            }
            while (!s.empty() && s.back() == ' ') s.pop_back();
            out << s << '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

std::string fmt(double v, int precision = 3) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    return format_fixed(v, precision);
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (const char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_');
    return out;
}

void ensure_out_dir(const Context& ctx) {
    std::error_code ec;
    fs::create_directories(ctx.opts.out_dir, ec);
    if (ec) throw InputError("cannot create output directory " + ctx.opts.out_dir + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// validate-taxonomy
// ---------------------------------------------------------------------------

struct ValidateArgs {
    std::string dump_taxonomy;
    std::string dump_scenarios;
};

int cmd_validate_taxonomy(Context& ctx, const ValidateArgs& args) {
    const auto violations = validate(ctx.taxonomy);
    const auto counts = ctx.taxonomy.pair_counts();
    if (!args.dump_taxonomy.empty()) save_taxonomy(ctx.taxonomy, args.dump_taxonomy);
    if (!args.dump_scenarios.empty()) {
        ojson j;
        to_json(j, ctx.scenarios);
        std::ofstream f(args.dump_scenarios);
        if (!f) throw InputError("cannot write " + args.dump_scenarios);
        f << j.dump(2) << '\n';
    }
    if (ctx.json()) {
        ojson j;
        j["version"] = ctx.taxonomy.version();
        j["valid"] = violations.empty();
        j["violations"] = violations;
        j["categories"] = ctx.taxonomy.categories().size();
        j["sub_categories"] = ctx.taxonomy.subcategories().size();
        j["features"] = ctx.taxonomy.count_features();
        j["pairs"] = {{"categories", counts.categories},
                      {"sub_categories_within_categories", counts.subcategories_within_categories},
                      {"sub_categories_global", counts.subcategories_global},
                      {"features", counts.features_total},
                      {"hierarchical_total", counts.hierarchical_total()}};
        ctx.out << j.dump(2) << '\n';
    } else {
        ctx.out << "taxonomy " << ctx.taxonomy.version() << ": " << ctx.taxonomy.categories().size()
                << " categories, " << ctx.taxonomy.subcategories().size() << " sub-categories, "
                << ctx.taxonomy.count_features() << " features\n";
        ctx.out << "pairwise comparisons: categories " << counts.categories << ", sub-categories "
                << counts.subcategories_global << " (single matrix) / " << counts.subcategories_within_categories
                << " (per category), features " << counts.features_total << ", hierarchical total "
                << counts.hierarchical_total() << '\n';
        if (violations.empty()) {
            ctx.out << "valid\n";
        } else {
            for (const auto& v : violations) ctx.out << "violation: " << v << '\n';
        }
    }
    return violations.empty() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// filtering-stats
// ---------------------------------------------------------------------------

int cmd_filtering_stats(Context& ctx, const std::string& responses_file) {
    const auto responses = load_responses(responses_file, ctx.taxonomy, ctx.scenarios.codes());
    const auto table = filtering_stats(responses, ctx.taxonomy);
    if (ctx.json()) {
        ojson j = ojson::array();
        for (const auto& row : table.rows) {
            ojson jr;
            jr["scenario"] = row.scenario;
            jr["respondents"] = row.respondents;
            for (std::size_t i = 0; i < table.columns.size(); ++i) jr["percent"][table.columns[i]] = row.percent[i];
            j.push_back(std::move(jr));
        }
        ctx.out << j.dump(2) << '\n';
        return 0;
    }
    std::vector<std::string> header = {"scenario", "n"};
    header.insert(header.end(), table.columns.begin(), table.columns.end());
    TextTable t(header);
    for (const auto& row : table.rows) {
        std::vector<std::string> cells = {row.scenario, std::to_string(row.respondents)};
        for (const double p : row.percent) cells.push_back(fmt(p, 0) + "%");
        t.add(std::move(cells));
    }
    ctx.out << "percentage of respondents keeping each category / sub-category\n";
    t.print(ctx.out);
    return 0;
}

// ---------------------------------------------------------------------------
// weights
// ---------------------------------------------------------------------------

struct WeightsArgs {
    std::string responses_file;
    std::string scenario;
    std::string method = "eigenvector";
    bool include_subcategory_cr = false;
};

int cmd_weights(Context& ctx, const WeightsArgs& args) {
    ctx.scenarios.scenario(args.scenario);
    const auto all = load_responses(args.responses_file, ctx.taxonomy, ctx.scenarios.codes());

    ahp::WeightingOptions options;
    options.method = args.method == "geometric-mean" ? ahp::Method::GeometricMean : ahp::Method::Eigenvector;
    options.include_subcategory_cr = args.include_subcategory_cr;

    std::vector<ahp::ResponseWeights> per_response;
    std::vector<std::pair<std::string, std::string>> notes;
    for (const auto& r : all) {
        if (r.scenario != args.scenario) continue;
        const auto completed = complete(r, ctx.taxonomy);
        if (r.partial()) notes.emplace_back(r.response_id, "submission marked partial");
        for (const auto& n : completed.quality_notes) notes.emplace_back(r.response_id, n);
        per_response.push_back(ahp::response_weights(completed, ctx.taxonomy, options));
    }
    if (per_response.empty()) {
        throw InputError("empty cohort: no responses for scenario '" + args.scenario + "'");
    }
    const auto model = ahp::aggregate(per_response, ctx.opts.cr_threshold, ctx.taxonomy.version());

    std::vector<ahp::WeightVector> sub_vectors;
    std::vector<ahp::WeightVector> feat_vectors;
    for (const auto& r : per_response) {
        if (std::find(model.contributing_responses.begin(), model.contributing_responses.end(), r.response_id) ==
            model.contributing_responses.end()) {
            continue;
        }
        sub_vectors.push_back(r.subcategory_weights);
        feat_vectors.push_back(r.feature_weights);
    }
    std::optional<double> sub_agreement;
    std::optional<double> feat_agreement;
    if (sub_vectors.size() >= 2) {
        sub_agreement = ahp::agreement(sub_vectors);
        feat_agreement = ahp::agreement(feat_vectors);
    }

    ensure_out_dir(ctx);
    const fs::path model_path = ctx.out_path("model_" + sanitize(args.scenario) + ".json");
    ahp::save_model(model, model_path);

    if (ctx.json()) {
        ojson j;
        j["scenario"] = args.scenario;
        j["responses"] = per_response.size();
        j["cr_threshold"] = ctx.opts.cr_threshold ? ojson(*ctx.opts.cr_threshold) : ojson();
        j["cohort"] = model.contributing_responses.size();
        auto& jr = j["mean_cr"] = ojson::array();
        for (const auto& r : per_response) {
            const bool kept = model.mean_cr_per_response.count(r.response_id) > 0;
            jr.push_back({{"response_id", r.response_id},
                          {"mean_cr", r.mean_cr},
                          {"subcategory_cr", r.subcategory_cr},
                          {"status", kept ? "kept" : "dropped"}});
        }
        for (std::size_t i = 0; i < model.subcategory_weights.labels.size(); ++i) {
            j["subcategory_weights"][model.subcategory_weights.labels[i]] = model.subcategory_weights.weights[i];
        }
        for (std::size_t i = 0; i < model.feature_weights.labels.size(); ++i) {
            j["feature_weights"][model.feature_weights.labels[i]] = model.feature_weights.weights[i];
        }
        j["agreement"]["sub_categories"] = sub_agreement ? ojson(*sub_agreement) : ojson("n/a");
        j["agreement"]["features"] = feat_agreement ? ojson(*feat_agreement) : ojson("n/a");
        j["quality_notes"] = ojson::array();
        for (const auto& [id, n] : notes) j["quality_notes"].push_back({{"response_id", id}, {"note", n}});
        j["model_file"] = model_path.string();
        ctx.out << j.dump(2) << '\n';
        return 0;
    }

    ctx.out << "scenario " << args.scenario << ": " << per_response.size() << " response(s)";
    if (ctx.opts.cr_threshold) ctx.out << ", mean CR threshold " << fmt(*ctx.opts.cr_threshold, 3);
    ctx.out << "\n\nmean consistency ratio per response\n";
    TextTable crs({"response", "mean_cr", "subcat_cr", "status"});
    for (const auto& r : per_response) {
        const bool kept = model.mean_cr_per_response.count(r.response_id) > 0;
        crs.add({r.response_id, fmt(r.mean_cr, 4), fmt(r.subcategory_cr, 4), kept ? "kept" : "dropped"});
    }
    crs.print(ctx.out);
    ctx.out << "\ncohort: " << model.contributing_responses.size() << " of " << per_response.size()
            << " response(s) after filtering\n";
    if (!notes.empty()) {
        ctx.out << "\nquality report\n";
        for (const auto& [id, n] : notes) ctx.out << "  " << id << ": " << n << '\n';
    }
    ctx.out << "\nsub-category weights\n";
    TextTable sub({"code", "weight"});
    for (std::size_t i = 0; i < model.subcategory_weights.labels.size(); ++i) {
        sub.add({model.subcategory_weights.labels[i], fmt(model.subcategory_weights.weights[i], 4)});
    }
    sub.print(ctx.out);
    ctx.out << "\nfeature weights\n";
    TextTable feat({"code", "sub-category", "weight"});
    for (std::size_t i = 0; i < model.feature_weights.labels.size(); ++i) {
        const auto& code = model.feature_weights.labels[i];
        feat.add({code, ctx.taxonomy.subcategory_of(code)->code, fmt(model.feature_weights.weights[i], 4)});
    }
    feat.print(ctx.out);
    ctx.out << "\nagreement (mean pairwise cosine similarity)\n";
    if (sub_agreement) {
        ctx.out << "  sub-categories: " << fmt(*sub_agreement, 4) << '\n';
        ctx.out << "  features: " << fmt(*feat_agreement, 4) << '\n';
    } else {
        ctx.out << "  n/a (fewer than 2 responses)\n";
    }
    ctx.out << "\nmodel written to " << model_path.string() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

struct ExtractArgs {
    std::string flows_file;
    std::string device_ip;
    std::string static_file;
    std::string output;
    int utc_offset_minutes = 0;
};

int cmd_extract(Context& ctx, const ExtractArgs& args) {
    const auto declared = traffic::load_static_profile(args.static_file, ctx.taxonomy);
    const auto load = traffic::load_flows(args.flows_file, args.device_ip);
    traffic::ExtractionConfig config;
    config.utc_offset_minutes = args.utc_offset_minutes;
    const auto extraction = traffic::extract_dynamic_features(load.flows, config);
    const auto profile = traffic::build_profile(declared, extraction, ctx.taxonomy, load.flows);

    ensure_out_dir(ctx);
    const fs::path path =
        args.output.empty() ? ctx.out_path("profile_" + sanitize(profile.model_id) + ".json") : fs::path(args.output);
    traffic::save_profile(profile, path);

    if (ctx.json()) {
        ojson j;
        j["model_id"] = profile.model_id;
        j["flows"] = load.flows.size();
        j["skipped_records"] = load.skipped;
        for (const auto& [k, v] : profile.values()) j["values"][k] = v;
        j["missing"] = ojson::object();
        for (const auto& [k, v] : profile.missing) j["missing"][k] = v;
        j["profile_file"] = path.string();
        ctx.out << j.dump(2) << '\n';
        return 0;
    }
    ctx.out << "model " << profile.model_id << ": " << load.flows.size() << " flow(s)";
    if (load.skipped) ctx.out << ", " << load.skipped << " record(s) skipped (device not an endpoint)";
    ctx.out << "\n\nvalues\n";
    TextTable vals({"code", "source", "value"});
    for (const auto* f : ctx.taxonomy.features()) {
        const auto all = profile.values();
        auto it = all.find(f->code);
        if (it == all.end()) continue;
        vals.add({f->code, profile.dynamic_values.count(f->code) ? "traffic" : "declared", fmt(it->second, 4)});
    }
    vals.print(ctx.out);
    if (!profile.missing.empty()) {
        ctx.out << "\nmissing\n";
        for (const auto* f : ctx.taxonomy.features()) {
            auto it = profile.missing.find(f->code);
            if (it != profile.missing.end()) ctx.out << "  " << f->code << ": " << it->second << '\n';
        }
    }
    ctx.out << "\nprofile written to " << path.string() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreArgs {
    std::vector<std::string> models;
    std::vector<std::string> profiles;
    std::string from_scores;
};

void print_maximin(Context& ctx, const scoring::MaximinTable& table, ojson* json) {
    // Best value per (type, scenario) column, for highlighting.
    std::map<std::pair<std::string, std::string>, double> best;
    for (const auto& row : table.rows) {
        for (const auto& [s, v] : row.scores) {
            auto key = std::make_pair(row.device_type, s);
            auto it = best.find(key);
            if (it == best.end() || v > it->second) best[key] = v;
        }
    }
    if (json) {
        ojson arr = ojson::array();
        for (const auto& row : table.rows) {
            ojson jr;
            jr["model_id"] = row.model_id;
            jr["type"] = row.device_type;
            for (const auto& s : table.scenarios) jr["scores"][s] = row.scores.at(s);
            jr["mean"] = row.mean;
            jr["min"] = row.min;
            jr["max"] = row.max;
            jr["rank"] = row.rank;
            jr["type_rank"] = row.group_rank;
            jr["maximin_winner"] = row.group_rank == 1;
            arr.push_back(std::move(jr));
        }
        (*json)["maximin"] = std::move(arr);
        return;
    }
    std::vector<std::string> header = {"type", "model"};
    header.insert(header.end(), table.scenarios.begin(), table.scenarios.end());
    for (const char* h : {"max", "mean", "min", "rank"}) header.emplace_back(h);
    TextTable t(header);
    std::vector<const scoring::MaximinRow*> rows;
    for (const auto& r : table.rows) rows.push_back(&r);
    std::stable_sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) {
        if (a->device_type != b->device_type) return a->device_type < b->device_type;
        return a->group_rank < b->group_rank;
    });
    for (const auto* row : rows) {
        std::vector<std::string> cells = {row->device_type.empty() ? "-" : row->device_type, row->model_id};
        for (const auto& s : table.scenarios) {
            const double v = row->scores.at(s);
            cells.push_back(fmt(v) + (v == best[{row->device_type, s}] ? "*" : ""));
        }
        cells.push_back(fmt(row->max));
        cells.push_back(fmt(row->mean));
        cells.push_back(fmt(row->min) + (row->group_rank == 1 ? " <maximin" : ""));
        cells.push_back(std::to_string(row->group_rank));
        t.add(std::move(cells));
    }
    ctx.out << "\nD-Score matrix ('*' best per type and scenario, '<maximin' best worst case per type)\n";
    t.print(ctx.out);
}

int cmd_score(Context& ctx, const ScoreArgs& args) {
    std::vector<scoring::ScoreEntry> entries;
    ojson json;
    if (!args.from_scores.empty()) {
        entries = scoring::load_score_table(args.from_scores);
        const auto table = scoring::maximin_rank(entries);
        if (ctx.json()) {
            print_maximin(ctx, table, &json);
            ctx.out << json.dump(2) << '\n';
        } else {
            ctx.out << "ingested " << entries.size() << " score(s) from " << args.from_scores << '\n';
            print_maximin(ctx, table, nullptr);
        }
        return 0;
    }
    if (args.models.empty() || args.profiles.empty()) {
        throw InputError("score needs at least one --model and one --profile (or --from-scores)");
    }

    std::vector<ahp::ScenarioWeights> models;
    for (const auto& m : args.models) models.push_back(ahp::load_model(m, ctx.taxonomy));
    std::vector<traffic::DeviceProfile> profiles;
    for (const auto& p : args.profiles) profiles.push_back(traffic::load_profile(p, ctx.taxonomy));

    std::vector<scoring::ScoreCard> cards;
    for (const auto& profile : profiles) {
        for (const auto& model : models) {
            const auto& spec = ctx.scenarios.scenario(model.scenario);
            const auto params = scoring::make_params(spec, ctx.taxonomy);
            cards.push_back(scoring::d_score(model, profile, params, spec.bins));
            entries.push_back({profile.model_id, profile.device_type, model.scenario, cards.back().d_score});
        }
    }

    ensure_out_dir(ctx);
    const fs::path table_path = ctx.out_path("scores.csv");
    {
        std::ofstream f(table_path);
        if (!f) throw InputError("cannot write " + table_path.string());
        scoring::write_score_table(f, entries);
    }
    const bool matrix = profiles.size() >= 2 && models.size() >= 2;

    if (ctx.json()) {
        json["tool_version"] = kToolVersion;
        json["taxonomy_version"] = ctx.taxonomy.version();
        auto& arr = json["scorecards"] = ojson::array();
        for (const auto& c : cards) {
            ojson jc;
            jc["model_id"] = c.model_id;
            jc["type"] = c.device_type;
            jc["scenario"] = c.scenario;
            jc["d_score"] = c.d_score;
            jc["label"] = std::string(1, c.label);
            jc["present_weight_mass"] = c.present_weight_mass;
            jc["normalized_values"] = ojson::object();
            for (const auto& [k, v] : c.normalized_values) jc["normalized_values"][k] = v;
            jc["missing_features"] = ojson::object();
            for (const auto& [k, v] : c.missing_features) jc["missing_features"][k] = v;
            arr.push_back(std::move(jc));
        }
        if (matrix) print_maximin(ctx, scoring::maximin_rank(entries), &json);
        ctx.out << json.dump(2) << '\n';
        return 0;
    }
    ctx.out << "tool " << kToolVersion << ", taxonomy " << ctx.taxonomy.version() << '\n';
    for (const auto& c : cards) {
        ctx.out << c.summary_line() << '\n';
        if (ctx.opts.verbosity > 0) {
            for (const auto& [k, v] : c.normalized_values) ctx.out << "  " << k << " x'=" << fmt(v, 4) << '\n';
        }
        for (const auto& [k, v] : c.missing_features) ctx.out << "  missing " << k << ": " << v << '\n';
    }
    if (matrix) print_maximin(ctx, scoring::maximin_rank(entries), nullptr);
    return 0;
}

// ---------------------------------------------------------------------------
// predictability
// ---------------------------------------------------------------------------

struct DeviceTraffic {
    std::string model_id;
    std::string group;
    std::vector<traffic::KpiSeries> kpis;
    std::map<std::string, double> static_values;
};

std::vector<DeviceTraffic> load_manifest(const Context& ctx, const std::string& manifest) {
    std::ifstream in(manifest);
    if (!in) throw InputError("cannot open manifest " + manifest);
    const fs::path base = fs::path(manifest).parent_path();
    const auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

    std::vector<DeviceTraffic> devices;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (!header_seen) {
            const std::vector<std::string> expected = {"model_id", "group", "flows", "device_ip", "profile"};
            if (fields != expected) {
                throw InputError(manifest + ": line " + std::to_string(line_no) +
                                 ": header must be 'model_id,group,flows,device_ip,profile'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 5) {
            throw InputError(manifest + ": line " + std::to_string(line_no) + ": expected 5 fields");
        }
        DeviceTraffic d;
        d.model_id = fields[0];
        d.group = fields[1];
        const auto load = traffic::load_flows(resolve(fields[2]), fields[3]);
        d.kpis = traffic::compute_kpis(load.flows, d.model_id);
        if (!fields[4].empty()) d.static_values = traffic::load_static_profile(resolve(fields[4]), ctx.taxonomy).values;
        devices.push_back(std::move(d));
    }
    if (devices.empty()) throw InputError(manifest + ": no devices listed");
    return devices;
}

std::string range_text(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return "[" + fmt(*lo) + ", " + fmt(*hi) + "]";
}

int cmd_predictability(Context& ctx, const std::string& manifest) {
    const auto devices = load_manifest(ctx, manifest);
    std::vector<std::string> groups;
    for (const auto& d : devices) {
        if (std::find(groups.begin(), groups.end(), d.group) == groups.end()) groups.push_back(d.group);
    }
    std::vector<std::string> kpi_names;
    for (const auto k : traffic::kAllKpis) kpi_names.emplace_back(traffic::to_string(k));
    const bool as_json = ctx.json();
    ojson json;
    std::vector<std::string> notices;

    // KPI summaries
    TextTable summary({"device", "group", "kpi", "n", "mean", "sd", "median"});
    for (const auto& d : devices) {
        for (const auto& s : d.kpis) {
            const auto name = std::string(traffic::to_string(s.kpi));
            if (s.values.empty()) {
                summary.add({d.model_id, d.group, name, "0", "-", "-", "-"});
                if (as_json) json["kpi_summary"].push_back({{"device", d.model_id}, {"kpi", name}, {"n", 0}});
                continue;
            }
            const double m = stats::mean(s.values);
            const double sd = s.values.size() > 1 ? std::sqrt(stats::variance(s.values)) : 0.0;
            const double med = median(s.values);
            summary.add({d.model_id, d.group, name, std::to_string(s.values.size()), fmt(m), fmt(sd), fmt(med)});
            if (as_json) {
                json["kpi_summary"].push_back({{"device", d.model_id},
                                               {"group", d.group},
                                               {"kpi", name},
                                               {"n", s.values.size()},
                                               {"mean", m},
                                               {"sd", sd},
                                               {"median", med}});
            }
        }
    }

    // Hurst table
    std::vector<std::string> hurst_header = {"device", "group"};
    hurst_header.insert(hurst_header.end(), kpi_names.begin(), kpi_names.end());
    TextTable hurst_table(hurst_header);
    std::map<std::string, std::vector<std::vector<double>>> group_h;  // group -> per kpi H values
    for (const auto& g : groups) group_h[g].resize(kpi_names.size());
    for (const auto& d : devices) {
        std::vector<std::string> cells = {d.model_id, d.group};
        ojson jrow;
        jrow["device"] = d.model_id;
        jrow["group"] = d.group;
        for (std::size_t k = 0; k < d.kpis.size(); ++k) {
            try {
                const auto est = stats::hurst(d.kpis[k].values);
                cells.push_back(fmt(est.h));
                group_h[d.group][k].push_back(est.h);
                jrow["h"][kpi_names[k]] = est.h;
            } catch (const Error& e) {
                cells.push_back("n/a");
                jrow["h"][kpi_names[k]] = nullptr;
                notices.push_back("Hurst " + d.model_id + " " + kpi_names[k] + ": " + e.what());
            }
        }
        hurst_table.add(std::move(cells));
        if (as_json) json["hurst"]["devices"].push_back(std::move(jrow));
    }
    for (const auto& g : groups) {
        std::vector<std::string> avg = {"average", g};
        std::vector<std::string> rng = {"range", g};
        for (std::size_t k = 0; k < kpi_names.size(); ++k) {
            const auto& hs = group_h[g][k];
            avg.push_back(hs.empty() ? "n/a" : fmt(stats::mean(hs)));
            rng.push_back(hs.empty() ? "n/a" : range_text(hs));
            if (as_json && !hs.empty()) {
                const auto [lo, hi] = std::minmax_element(hs.begin(), hs.end());
                json["hurst"]["groups"][g][kpi_names[k]] = {{"mean", stats::mean(hs)}, {"min", *lo}, {"max", *hi}};
            }
        }
        hurst_table.add(std::move(avg));
        hurst_table.add(std::move(rng));
    }

    // Group tests
    TextTable group_tests({"kpi", "test", "groups", "statistic", "df", "p_value", "ci_95"});
    bool ran_group_tests = false;
    if (groups.size() < 2) {
        notices.push_back("group tests skipped: need at least two groups");
    } else {
        for (std::size_t k = 0; k < kpi_names.size(); ++k) {
            std::vector<std::vector<double>> pooled(groups.size());
            for (const auto& d : devices) {
                const auto gi = static_cast<std::size_t>(std::find(groups.begin(), groups.end(), d.group) - groups.begin());
                pooled[gi].insert(pooled[gi].end(), d.kpis[k].values.begin(), d.kpis[k].values.end());
            }
            try {
                const auto res = stats::anova_oneway(pooled);
                ran_group_tests = true;
                group_tests.add({kpi_names[k], "anova", "all", fmt(res.statistic, 4),
                                 fmt(res.df1, 0) + "," + fmt(*res.df2, 0), fmt(res.p_value, 4), "-"});
                if (as_json) {
                    json["group_tests"].push_back({{"kpi", kpi_names[k]},
                                                   {"test", "anova"},
                                                   {"F", res.statistic},
                                                   {"df", {res.df1, *res.df2}},
                                                   {"p_value", res.p_value}});
                }
            } catch (const Error& e) {
                notices.push_back("ANOVA " + kpi_names[k] + " skipped: " + e.what());
            }
            for (std::size_t a = 0; a < groups.size(); ++a) {
                for (std::size_t b = a + 1; b < groups.size(); ++b) {
                    try {
                        const auto res = stats::t_test_two_sided(pooled[a], pooled[b]);
                        ran_group_tests = true;
                        const std::string ci = "[" + fmt(res.ci_95->first) + ", " + fmt(res.ci_95->second) + "]";
                        group_tests.add({kpi_names[k], "welch-t", groups[a] + " - " + groups[b],
                                         fmt(res.statistic, 4), fmt(res.df1, 2), fmt(res.p_value, 4), ci});
                        if (as_json) {
                            json["group_tests"].push_back({{"kpi", kpi_names[k]},
                                                           {"test", "welch-t"},
                                                           {"groups", {groups[a], groups[b]}},
                                                           {"t", res.statistic},
                                                           {"df", res.df1},
                                                           {"p_value", res.p_value},
                                                           {"ci_95", {res.ci_95->first, res.ci_95->second}}});
                        }
                    } catch (const Error& e) {
                        notices.push_back("t test " + kpi_names[k] + " " + groups[a] + "/" + groups[b] +
                                          " skipped: " + e.what());
                    }
                }
            }
        }
    }

    // Differences among devices of the same group
    TextTable device_tests({"group", "kpi", "F", "df", "p_value"});
    bool ran_device_tests = false;
    for (const auto& g : groups) {
        std::vector<const DeviceTraffic*> members;
        for (const auto& d : devices) {
            if (d.group == g) members.push_back(&d);
        }
        if (members.size() < 2) continue;
        for (std::size_t k = 0; k < kpi_names.size(); ++k) {
            std::vector<std::vector<double>> samples;
            for (const auto* d : members) samples.push_back(d->kpis[k].values);
            try {
                const auto res = stats::anova_oneway(samples);
                ran_device_tests = true;
                device_tests.add({g, kpi_names[k], fmt(res.statistic, 4), fmt(res.df1, 0) + "," + fmt(*res.df2, 0),
                                  fmt(res.p_value, 4)});
                if (as_json) {
                    json["device_tests"].push_back({{"group", g},
                                                    {"kpi", kpi_names[k]},
                                                    {"F", res.statistic},
                                                    {"df", {res.df1, *res.df2}},
                                                    {"p_value", res.p_value}});
                }
            } catch (const Error& e) {
                notices.push_back("device ANOVA " + g + " " + kpi_names[k] + " skipped: " + e.what());
            }
        }
    }

    // Static features vs KPI means
    TextTable correlations({"feature", "kpi", "devices", "pearson_r"});
    bool ran_correlations = false;
    for (const auto* f : ctx.taxonomy.features()) {
        for (std::size_t k = 0; k < kpi_names.size(); ++k) {
            std::vector<double> xs;
            std::vector<double> ys;
            for (const auto& d : devices) {
                auto it = d.static_values.find(f->code);
                if (it == d.static_values.end() || d.kpis[k].values.empty()) continue;
                xs.push_back(it->second);
                ys.push_back(stats::mean(d.kpis[k].values));
            }
            if (xs.size() < 3) continue;
            try {
                const double r = stats::pearson(xs, ys);
                ran_correlations = true;
                correlations.add({f->code, kpi_names[k], std::to_string(xs.size()), fmt(r, 3)});
                if (as_json) {
                    json["correlations"].push_back(
                        {{"feature", f->code}, {"kpi", kpi_names[k]}, {"devices", xs.size()}, {"r", r}});
                }
            } catch (const NumericError&) {
                // zero variance across devices: nothing to correlate
            }
        }
    }

    if (as_json) {
        json["notices"] = notices;
        ctx.out << json.dump(2) << '\n';
        return 0;
    }
    ctx.out << "KPI summaries\n";
    summary.print(ctx.out);
    ctx.out << "\nHurst exponent per device and KPI\n";
    hurst_table.print(ctx.out);
    ctx.out << "\ngroup comparisons\n";
    if (ran_group_tests) {
        group_tests.print(ctx.out);
    } else {
        ctx.out << "  none\n";
    }
    ctx.out << "\ndifferences among devices within a group\n";
    if (ran_device_tests) {
        device_tests.print(ctx.out);
    } else {
        ctx.out << "  none\n";
    }
    ctx.out << "\ncorrelation of static features with KPI means\n";
    if (ran_correlations) {
        correlations.print(ctx.out);
    } else {
        ctx.out << "  none (needs a static feature with variance across at least 3 devices)\n";
    }
    if (!notices.empty()) {
        ctx.out << "\nnotices\n";
        for (const auto& n : notices) ctx.out << "  " << n << '\n';
    }
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Expert-weighted attack detectability scoring for IoT devices", "dscore"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions opts;
    app.add_option("--taxonomy", opts.taxonomy_path, "Taxonomy config file (default: built-in)");
    app.add_option("--scenario-config", opts.scenario_path, "Scenario config file (default: built-in)");
    app.add_option("--out-dir", opts.out_dir, "Directory for written artifacts")->capture_default_str();
    app.add_option("--cr-threshold", opts.cr_threshold, "Drop responses whose mean CR exceeds this");
    app.add_option("--format", opts.format, "Output format")
        ->check(CLI::IsMember({"table", "json"}))
        ->capture_default_str();
    app.add_flag("-v,--verbose", opts.verbosity, "More detail");

    ValidateArgs validate_args;
    auto* validate_cmd = app.add_subcommand("validate-taxonomy", "Check the taxonomy and report pair counts");
    validate_cmd->add_option("--dump", validate_args.dump_taxonomy, "Write the loaded taxonomy to this file");
    validate_cmd->add_option("--dump-scenarios", validate_args.dump_scenarios,
                             "Write the loaded scenario config to this file");

    std::string filtering_file;
    auto* filtering_cmd = app.add_subcommand("filtering-stats", "Keep-percentages of the preliminary filtering");
    filtering_cmd->add_option("responses", filtering_file, "Response CSV")->required();

    WeightsArgs weights_args;
    auto* weights_cmd = app.add_subcommand("weights", "Derive a scenario model from expert responses");
    weights_cmd->add_option("responses", weights_args.responses_file, "Response CSV")->required();
    weights_cmd->add_option("--scenario", weights_args.scenario, "Scenario code")->required();
    weights_cmd->add_option("--method", weights_args.method, "Weighting method")
        ->check(CLI::IsMember({"eigenvector", "geometric-mean"}))
        ->capture_default_str();
    weights_cmd->add_flag("--include-subcategory-cr", weights_args.include_subcategory_cr,
                          "Average the sub-category matrix CR into each response's mean CR");

    ExtractArgs extract_args;
    auto* extract_cmd = app.add_subcommand("extract", "Build a device profile from flows and declared values");
    extract_cmd->add_option("--flows", extract_args.flows_file, "Flow CSV")->required();
    extract_cmd->add_option("--device-ip", extract_args.device_ip, "Address of the device")->required();
    extract_cmd->add_option("--static", extract_args.static_file, "Static/declared profile JSON")->required();
    extract_cmd->add_option("--output", extract_args.output, "Profile path (default: <out-dir>/profile_<model>.json)");
    extract_cmd->add_option("--utc-offset-minutes", extract_args.utc_offset_minutes,
                            "Device-local offset used for night/day hours");

    ScoreArgs score_args;
    auto* score_cmd = app.add_subcommand("score", "Compute D-Scores and labels");
    score_cmd->add_option("--model", score_args.models, "Model file (repeatable)");
    score_cmd->add_option("--profile", score_args.profiles, "Device profile (repeatable)");
    score_cmd->add_option("--from-scores", score_args.from_scores,
                          "Rank a score table (model_id,type,scenario,d_score) instead of scoring");

    std::string manifest;
    auto* predict_cmd = app.add_subcommand("predictability", "Traffic predictability report");
    predict_cmd->add_option("manifest", manifest, "CSV: model_id,group,flows,device_ip,profile")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        Taxonomy taxonomy = opts.taxonomy_path.empty() ? default_taxonomy() : load_taxonomy(opts.taxonomy_path);
        scoring::ScenarioConfig scenarios;
        if (opts.scenario_path.empty()) {
            scenarios = scoring::default_scenario_config();
            scoring::check_scenario_config(scenarios, taxonomy);
        } else {
            scenarios = scoring::load_scenario_config(opts.scenario_path, taxonomy);
        }
        Context ctx{opts, std::move(taxonomy), std::move(scenarios), out, err};

        if (*validate_cmd) return cmd_validate_taxonomy(ctx, validate_args);
        if (*filtering_cmd) return cmd_filtering_stats(ctx, filtering_file);
        if (*weights_cmd) return cmd_weights(ctx, weights_args);
        if (*extract_cmd) return cmd_extract(ctx, extract_args);
        if (*score_cmd) return cmd_score(ctx, score_args);
        if (*predict_cmd) return cmd_predictability(ctx, manifest);
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::Input);
    }
}

}  // namespace dscore::cli
