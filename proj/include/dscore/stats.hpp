#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace dscore::stats {

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction
/// (relative tolerance 1e-12). Throws NumericError if the fraction fails to converge.
double incomplete_beta(double a, double b, double x);

/// Upper tail P(F > f) of the F distribution with (d1, d2) degrees of freedom.
double f_survival(double f, double d1, double d2);

/// Two-sided tail P(|T| > |t|) of Student's t with `df` degrees of freedom.
double t_two_sided_p(double t, double df);

/// Quantile of Student's t: returns q with P(T <= q) = prob, for prob in (0, 1).
double t_quantile(double prob, double df);

enum class HurstClass { AntiPersistent, RandomWalk, Persistent };

std::string_view to_string(HurstClass c);

struct HurstOptions {
    std::size_t min_length = 100;
    std::size_t min_window = 10;
    double random_walk_band = 0.05;
    /// Subtract the Anis-Lloyd expected R/S before fitting (h = 0.5 + slope).
    bool anis_lloyd = false;
};

struct HurstEstimate {
    double h = 0.0;
    HurstClass classification = HurstClass::RandomWalk;
    std::size_t n = 0;
    std::vector<std::pair<std::size_t, double>> rs_by_window;  // window size, mean R/S
};

/// Rescaled-range estimate over non-overlapping windows of log-spaced sizes in
/// [min_window, n/2]; h is the least-squares slope of log(R/S) on log(window).
/// The series is treated as increments (each window is mean-adjusted and summed).
/// Throws InputError when shorter than min_length and NumericError when degenerate.
HurstEstimate hurst(std::span<const double> series, const HurstOptions& options = {});

HurstClass classify_hurst(double h, double band = 0.05);

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::optional<std::pair<double, double>> ci_95;
    double df1 = 0.0;
    std::optional<double> df2;  // second degrees of freedom (F tests only)
};

/// One-way ANOVA F test. Needs >= 2 groups with >= 2 observations each.
TestResult anova_oneway(const std::vector<std::vector<double>>& groups);

enum class TTestVariant { Welch, Pooled };

/// Two-sided two-sample t test with a 95% CI of mean(a) - mean(b).
TestResult t_test_two_sided(std::span<const double> a, std::span<const double> b,
                            TTestVariant variant = TTestVariant::Welch);

/// Sample Pearson correlation. Throws InputError on length mismatch or n < 2 and
/// NumericError when either series has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> x);
/// Sample variance (n - 1 denominator).
double variance(std::span<const double> x);

}  // namespace dscore::stats
