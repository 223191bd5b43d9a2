#include "dscore/ahp.hpp"

#include "dscore/error.hpp"
#include "dscore/util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace dscore::ahp {

ComparisonMatrix::ComparisonMatrix(std::vector<std::string> labels)
    : labels_(std::move(labels)), entries_(labels_.size() * labels_.size(), 1.0) {}

void ComparisonMatrix::set(std::size_t i, std::size_t j, double value) {
    if (i == j || i >= size() || j >= size() || !(value > 0.0)) {
        throw InputError("invalid comparison matrix assignment");
    }
    entries_[i * size() + j] = value;
    entries_[j * size() + i] = 1.0 / value;
}

void ComparisonMatrix::check() const {
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
        if ((*this)(i, i) != 1.0) throw InputError("diagonal entry of '" + labels_[i] + "' is not 1");
        for (std::size_t j = 0; j < n; ++j) {
            const double v = (*this)(i, j);
            if (v < 1.0 / 9.0 - 1e-12 || v > 9.0 + 1e-12) {
                throw InputError("entry (" + labels_[i] + ", " + labels_[j] + ") outside [1/9, 9]");
            }
            if (std::abs(v * (*this)(j, i) - 1.0) > 1e-12) {
                throw InputError("entries (" + labels_[i] + ", " + labels_[j] + ") are not reciprocal");
            }
        }
    }
}

double WeightVector::at(std::string_view label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return weights[i];
    }
    throw InputError("no weight for '" + std::string(label) + "'");
}

double random_index(std::size_t n) {
    static constexpr double kRandomIndex[] = {0.0, 0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49};
    if (n == 0 || n > 10) throw InputError("no random index for matrix order " + std::to_string(n));
    return kRandomIndex[n];
}

ComparisonMatrix to_matrix(const std::vector<std::string>& labels, const JudgmentMap& judgments,
                           const SaatyScale& scale) {
    ComparisonMatrix m(labels);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (std::size_t j = i + 1; j < labels.size(); ++j) {
            auto it = judgments.find({labels[i], labels[j]});
            if (it == judgments.end()) {
                throw InputError("incomplete judgments: pair (" + labels[i] + ", " + labels[j] + ") is missing");
            }
            const int v = it->second;
            const auto mag = static_cast<std::size_t>(std::abs(v));
            if (mag >= scale.size()) {
                throw InputError("judgment magnitude " + std::to_string(mag) + " exceeds the scale");
            }
            // Store the integer-valued side directly; its mirror gets the reciprocal.
            if (v < 0) {
                m.set(i, j, scale[mag]);
            } else if (v > 0) {
                m.set(j, i, scale[mag]);
            }
        }
    }
    return m;
}

namespace {

std::vector<double> multiply(const ComparisonMatrix& m, std::span<const double> w) {
    const std::size_t n = m.size();
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += m(i, j) * w[j];
        y[i] = acc;
    }
    return y;
}

}  // namespace

ConsistencyReport consistency(const ComparisonMatrix& matrix, std::span<const double> w) {
    ConsistencyReport report;
    const std::size_t n = matrix.size();
    report.n = n;
    const auto aw = multiply(matrix, w);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += w[i] * aw[i];
        den += w[i] * w[i];
    }
    report.lambda_max = num / den;
    if (n <= 2) return report;

    // lambda_max >= n holds for every positive reciprocal matrix; anything below,
    // or within rounding of n, is floating-point noise.
    double excess = report.lambda_max - static_cast<double>(n);
    if (excess < 1e-12 * static_cast<double>(n)) excess = 0.0;
    report.consistency_index = excess / static_cast<double>(n - 1);
    report.consistency_ratio = report.consistency_index / random_index(n);
    return report;
}

std::pair<WeightVector, ConsistencyReport> principal_weights(const ComparisonMatrix& matrix,
                                                             const PowerIterationOptions& options) {
    const std::size_t n = matrix.size();
    if (n == 0) throw InputError("empty comparison matrix");
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    bool converged = n == 1;
    std::size_t iter = 0;
    while (!converged && iter < options.max_iterations) {
        ++iter;
        auto y = multiply(matrix, w);
        const double total = std::accumulate(y.begin(), y.end(), 0.0);
        double delta = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            y[i] /= total;
            delta = std::max(delta, std::abs(y[i] - w[i]));
        }
        w = std::move(y);
        converged = delta < options.tolerance;
    }
    if (!converged) {
        throw NumericError("power iteration did not converge after " + std::to_string(iter) + " iterations");
    }
    auto report = consistency(matrix, w);
    return {WeightVector{matrix.labels(), std::move(w)}, report};
}

WeightVector geometric_mean_weights(const ComparisonMatrix& matrix) {
    const std::size_t n = matrix.size();
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        double log_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) log_sum += std::log(matrix(i, j));
        g[i] = std::exp(log_sum / static_cast<double>(n));
    }
    const double total = std::accumulate(g.begin(), g.end(), 0.0);
    for (auto& v : g) v /= total;
    return WeightVector{matrix.labels(), std::move(g)};
}

namespace {

std::pair<WeightVector, ConsistencyReport> weigh(const ComparisonMatrix& m, Method method) {
    if (method == Method::GeometricMean) {
        auto w = geometric_mean_weights(m);
        auto report = consistency(m, w.weights);
        return {std::move(w), report};
    }
    return principal_weights(m);
}

}  // namespace

ResponseWeights response_weights(const CompletedResponse& completed, const Taxonomy& taxonomy,
                                 const WeightingOptions& options) {
    const ExpertResponse& r = completed.response;
    ResponseWeights out;
    out.response_id = r.response_id;
    out.scenario = r.scenario;

    const auto sub_labels = taxonomy.subcategory_codes();
    auto [sub_w, sub_report] = weigh(to_matrix(sub_labels, r.subcategory_judgments, options.scale), options.method);
    out.subcategory_weights = sub_w;
    out.subcategory_cr = sub_report.consistency_ratio;

    double cr_sum = 0.0;
    std::size_t cr_count = 0;
    for (std::size_t k = 0; k < sub_labels.size(); ++k) {
        const SubCategory* s = taxonomy.find_subcategory(sub_labels[k]);
        std::vector<std::string> labels;
        for (const auto& f : s->features) labels.push_back(f.code);
        auto [fw, report] = weigh(to_matrix(labels, r.feature_judgments, options.scale), options.method);
        out.feature_matrix_cr[s->code] = report.consistency_ratio;
        cr_sum += report.consistency_ratio;
        ++cr_count;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            out.feature_weights.labels.push_back(labels[i]);
            out.feature_weights.weights.push_back(sub_w.weights[k] * fw.weights[i]);
        }
    }
    if (options.include_subcategory_cr) {
        cr_sum += out.subcategory_cr;
        ++cr_count;
    }
    out.mean_cr = cr_sum / static_cast<double>(cr_count);
    return out;
}

namespace {

WeightVector average(const std::vector<const WeightVector*>& vectors) {
    WeightVector out{vectors.front()->labels, std::vector<double>(vectors.front()->weights.size(), 0.0)};
    for (const auto* v : vectors) {
        if (v->labels != out.labels) throw InputError("weight vectors have different labels");
        for (std::size_t i = 0; i < v->weights.size(); ++i) out.weights[i] += v->weights[i];
    }
    const double total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
    for (auto& w : out.weights) w /= total;
    return out;
}

}  // namespace

ScenarioWeights aggregate(const std::vector<ResponseWeights>& responses, std::optional<double> cr_threshold,
                          const std::string& taxonomy_version) {
    if (responses.empty()) throw InputError("empty cohort: no responses to aggregate");
    ScenarioWeights out;
    out.scenario = responses.front().scenario;
    out.taxonomy_version = taxonomy_version;
    out.cr_threshold = cr_threshold;

    std::vector<const ResponseWeights*> sorted;
    for (const auto& r : responses) {
        if (r.scenario != out.scenario) {
            throw InputError("cannot aggregate scenarios '" + out.scenario + "' and '" + r.scenario + "' together");
        }
        sorted.push_back(&r);
    }
    std::sort(sorted.begin(), sorted.end(),
              [](const auto* a, const auto* b) { return a->response_id < b->response_id; });

    std::vector<const WeightVector*> features;
    std::vector<const WeightVector*> subs;
    for (const auto* r : sorted) {
        if (cr_threshold && r->mean_cr > *cr_threshold) {
            out.dropped_responses.push_back(r->response_id);
            continue;
        }
        out.contributing_responses.push_back(r->response_id);
        out.mean_cr_per_response[r->response_id] = r->mean_cr;
        features.push_back(&r->feature_weights);
        subs.push_back(&r->subcategory_weights);
    }
    if (features.empty()) {
        throw InputError("empty cohort: all " + std::to_string(responses.size()) +
                         " response(s) exceed the mean CR threshold");
    }
    out.feature_weights = average(features);
    out.subcategory_weights = average(subs);
    return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InputError("cosine similarity of vectors with different lengths");
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw NumericError("cosine similarity undefined for a zero-norm vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double agreement(const std::vector<WeightVector>& vectors) {
    if (vectors.size() < 2) throw InputError("agreement needs at least two weight vectors");
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        for (std::size_t j = i + 1; j < vectors.size(); ++j) {
            if (vectors[i].labels != vectors[j].labels) throw InputError("weight vectors have different labels");
            sum += cosine_similarity(vectors[i].weights, vectors[j].weights);
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

namespace {

nlohmann::ordered_json weights_json(const WeightVector& w) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < w.labels.size(); ++i) j[w.labels[i]] = w.weights[i];
    return j;
}

WeightVector weights_from_json(const nlohmann::ordered_json& j, const std::vector<std::string>& expected,
                               const std::string& what) {
    WeightVector w;
    for (const auto& code : expected) {
        if (!j.contains(code)) throw InputError("model file: " + what + " lacks a weight for '" + code + "'");
        w.labels.push_back(code);
        w.weights.push_back(j.at(code).get<double>());
    }
    if (j.size() != expected.size()) throw InputError("model file: " + what + " has codes outside the taxonomy");
    const double total = std::accumulate(w.weights.begin(), w.weights.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) throw InputError("model file: " + what + " do not sum to 1");
    return w;
}

}  // namespace

void save_model(const ScenarioWeights& model, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["format"] = "dscore-model";
    j["tool_version"] = kToolVersion;
    j["taxonomy_version"] = model.taxonomy_version;
    j["scenario"] = model.scenario;
    j["cr_threshold"] = model.cr_threshold ? nlohmann::ordered_json(*model.cr_threshold) : nlohmann::ordered_json();
    j["subcategory_weights"] = weights_json(model.subcategory_weights);
    j["feature_weights"] = weights_json(model.feature_weights);
    auto& prov = j["provenance"];
    prov["contributing_responses"] = model.contributing_responses;
    prov["dropped_responses"] = model.dropped_responses;
    prov["mean_cr"] = nlohmann::ordered_json::object();
    for (const auto& id : model.contributing_responses) prov["mean_cr"][id] = model.mean_cr_per_response.at(id);

    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

ScenarioWeights load_model(const std::filesystem::path& path, const Taxonomy& taxonomy) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open model file " + path.string());
    try {
        nlohmann::ordered_json j;
        in >> j;
        if (j.value("format", "") != "dscore-model") throw InputError(path.string() + ": not a model file");
        ScenarioWeights m;
        m.taxonomy_version = j.at("taxonomy_version").get<std::string>();
        if (m.taxonomy_version != taxonomy.version()) {
            throw InputError(path.string() + ": taxonomy version mismatch (model " + m.taxonomy_version +
                             ", taxonomy " + taxonomy.version() + ")");
        }
        m.scenario = j.at("scenario").get<std::string>();
        if (!j.at("cr_threshold").is_null()) m.cr_threshold = j.at("cr_threshold").get<double>();
        m.subcategory_weights =
            weights_from_json(j.at("subcategory_weights"), taxonomy.subcategory_codes(), "sub-category weights");
        m.feature_weights = weights_from_json(j.at("feature_weights"), taxonomy.feature_codes(), "feature weights");
        const auto& prov = j.at("provenance");
        m.contributing_responses = prov.at("contributing_responses").get<std::vector<std::string>>();
        m.dropped_responses = prov.value("dropped_responses", std::vector<std::string>{});
        for (const auto& [id, cr] : prov.at("mean_cr").items()) m.mean_cr_per_response[id] = cr.get<double>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

}  // namespace dscore::ahp
