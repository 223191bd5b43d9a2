#include "dscore/stats.hpp"

#include "dscore/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace dscore::stats {

namespace {

constexpr double kBetaTolerance = 1e-12;
constexpr int kBetaMaxIterations = 10'000;
constexpr double kTiny = 1e-300;

/// Continued fraction for I_x(a, b), modified Lentz.
double beta_fraction(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kBetaMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kBetaTolerance) return h;
    }
    throw NumericError("incomplete beta continued fraction did not converge (a=" + std::to_string(a) +
                       ", b=" + std::to_string(b) + ", x=" + std::to_string(x) + ")");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw InputError("incomplete beta needs a > 0 and b > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw InputError("incomplete beta needs x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    // The fraction converges fastest below the mean; use the reflection otherwise.
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
    return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double f_survival(double f, double d1, double d2) {
    if (!(d1 > 0.0) || !(d2 > 0.0)) throw InputError("F distribution needs positive degrees of freedom");
    if (std::isnan(f)) throw NumericError("F statistic is NaN");
    if (f <= 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    return incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

double t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) throw InputError("t distribution needs positive degrees of freedom");
    if (std::isnan(t)) throw NumericError("t statistic is NaN");
    if (std::isinf(t)) return 0.0;
    return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

double t_quantile(double prob, double df) {
    if (!(prob > 0.0 && prob < 1.0)) throw InputError("t quantile needs prob in (0, 1)");
    if (prob == 0.5) return 0.0;
    const double tail = prob < 0.5 ? 2.0 * prob : 2.0 * (1.0 - prob);
    double lo = 0.0;
    double hi = 1.0;
    while (t_two_sided_p(hi, df) > tail) {
        hi *= 2.0;
        if (hi > 1e12) throw NumericError("t quantile search diverged");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (t_two_sided_p(mid, df) > tail) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double q = 0.5 * (lo + hi);
    return prob < 0.5 ? -q : q;
}

std::string_view to_string(HurstClass c) {
    switch (c) {
        case HurstClass::AntiPersistent: return "anti-persistent";
        case HurstClass::RandomWalk: return "random-walk";
        case HurstClass::Persistent: return "persistent";
    }
    return "random-walk";
}

HurstClass classify_hurst(double h, double band) {
    if (h < 0.5 - band) return HurstClass::AntiPersistent;
    if (h > 0.5 + band) return HurstClass::Persistent;
    return HurstClass::RandomWalk;
}

namespace {

/// Mean-adjusted range over population standard deviation; nullopt when S or R is 0.
std::optional<double> rescaled_range(std::span<const double> w) {
    const double m = mean(w);
    double cum = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double ss = 0.0;
    for (const double v : w) {
        cum += v - m;
        lo = std::min(lo, cum);
        hi = std::max(hi, cum);
        ss += (v - m) * (v - m);
    }
    const double s = std::sqrt(ss / static_cast<double>(w.size()));
    const double r = hi - lo;
    if (s == 0.0 || r == 0.0) return std::nullopt;
    return r / s;
}

/// Anis-Lloyd expected R/S of i.i.d. noise for window n (Peters' small-sample factor).
double expected_rs(std::size_t n) {
    const double nn = static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 1; i < n; ++i) sum += std::sqrt((nn - static_cast<double>(i)) / static_cast<double>(i));
    double front;
    if (n <= 340) {
        front = std::exp(std::lgamma((nn - 1.0) / 2.0) - std::lgamma(nn / 2.0)) / std::sqrt(std::numbers::pi);
    } else {
        front = 1.0 / std::sqrt(nn * std::numbers::pi / 2.0);
    }
    return (nn - 0.5) / nn * front * sum;
}

std::vector<std::size_t> window_sizes(std::size_t n, std::size_t min_window) {
    std::vector<std::size_t> sizes;
    const std::size_t max_window = n / 2;
    const double start = std::log10(static_cast<double>(min_window));
    for (int k = 0;; ++k) {
        const auto w = static_cast<std::size_t>(std::floor(std::pow(10.0, start + 0.25 * k) + 1e-9));
        if (w > max_window) break;
        if (sizes.empty() || sizes.back() != w) sizes.push_back(w);
    }
    return sizes;
}

}  // namespace

HurstEstimate hurst(std::span<const double> series, const HurstOptions& options) {
    const std::size_t n = series.size();
    if (n < options.min_length || n < 2 * options.min_window) {
        throw InputError("Hurst estimation needs at least " + std::to_string(options.min_length) +
                         " observations, got " + std::to_string(n));
    }
    if (std::all_of(series.begin(), series.end(), [&](double v) { return v == series.front(); })) {
        throw NumericError("degenerate series: constant values have zero range");
    }

    HurstEstimate est;
    est.n = n;
    std::vector<double> xs;
    std::vector<double> ys;
    for (const std::size_t w : window_sizes(n, options.min_window)) {
        double total = 0.0;
        std::size_t count = 0;
        for (std::size_t start = 0; start + w <= n; start += w) {
            if (auto rs = rescaled_range(series.subspan(start, w))) {
                total += *rs;
                ++count;
            }
        }
        if (count == 0) continue;
        const double rs = total / static_cast<double>(count);
        est.rs_by_window.emplace_back(w, rs);
        xs.push_back(std::log10(static_cast<double>(w)));
        ys.push_back(options.anis_lloyd ? std::log10(rs) - std::log10(expected_rs(w)) : std::log10(rs));
    }
    if (xs.size() < 2) throw NumericError("degenerate series: fewer than two usable window sizes");

    const double mx = mean(xs);
    const double my = mean(ys);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    const double slope = sxy / sxx;
    est.h = options.anis_lloyd ? 0.5 + slope : slope;
    est.classification = classify_hurst(est.h, options.random_walk_band);
    return est;
}

double mean(std::span<const double> x) {
    if (x.empty()) throw InputError("mean of an empty series");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
    if (x.size() < 2) throw InputError("variance needs at least two observations");
    const double m = mean(x);
    double ss = 0.0;
    for (const double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

TestResult anova_oneway(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw InputError("ANOVA needs at least two groups");
    std::size_t total_n = 0;
    double grand = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].size() < 2) {
            throw InputError("ANOVA group " + std::to_string(g) + " has fewer than two observations");
        }
        total_n += groups[g].size();
        grand += std::accumulate(groups[g].begin(), groups[g].end(), 0.0);
    }
    grand /= static_cast<double>(total_n);

    double ss_between = 0.0;
    double ss_within = 0.0;
    for (const auto& g : groups) {
        const double m = mean(g);
        ss_between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
        for (const double v : g) ss_within += (v - m) * (v - m);
    }
    const double df_between = static_cast<double>(groups.size() - 1);
    const double df_within = static_cast<double>(total_n - groups.size());

    TestResult result;
    result.df1 = df_between;
    result.df2 = df_within;
    const double ms_between = ss_between / df_between;
    const double ms_within = ss_within / df_within;
    if (ms_within == 0.0) {
        // No within-group spread: identical groups carry no evidence, distinct ones are certain.
        result.statistic = ms_between == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        result.p_value = ms_between == 0.0 ? 1.0 : 0.0;
        return result;
    }
    result.statistic = ms_between / ms_within;
    result.p_value = f_survival(result.statistic, df_between, df_within);
    return result;
}

TestResult t_test_two_sided(std::span<const double> a, std::span<const double> b, TTestVariant variant) {
    if (a.size() < 2 || b.size() < 2) throw InputError("t test needs at least two observations per series");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = variance(a);
    const double vb = variance(b);
    const double diff = mean(a) - mean(b);

    double se = 0.0;
    double df = 0.0;
    if (variant == TTestVariant::Pooled) {
        df = na + nb - 2.0;
        const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
        se = std::sqrt(pooled * (1.0 / na + 1.0 / nb));
    } else {
        const double qa = va / na;
        const double qb = vb / nb;
        se = std::sqrt(qa + qb);
        df = se == 0.0 ? na + nb - 2.0 : (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    }

    TestResult result;
    result.df1 = df;
    if (se == 0.0) {
        result.statistic = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
        result.p_value = diff == 0.0 ? 1.0 : 0.0;
        result.ci_95 = std::make_pair(diff, diff);
        return result;
    }
    result.statistic = diff / se;
    result.p_value = t_two_sided_p(result.statistic, df);
    const double half = t_quantile(0.975, df) * se;
    result.ci_95 = std::make_pair(diff - half, diff + half);
    return result;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InputError("pearson needs series of equal length");
    if (x.size() < 2) throw InputError("pearson needs at least two observations");
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw NumericError("correlation undefined: a series has zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace dscore::stats
