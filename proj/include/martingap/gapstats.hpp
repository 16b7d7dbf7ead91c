#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "martingap/bitseq.hpp"
#include "martingap/predictors.hpp"

namespace martingap {

// One aggregated measurement row: `count` sequences of length `length`,
// summarised by the mean and sample variance of the per-sequence gap.
struct GapRecord {
    std::size_t length = 0;
    double mean_gap = 0.0;  // bits
    double var_gap = 0.0;   // bits^2, ddof=1
    std::size_t count = 0;
};

struct GapSeries {
    std::vector<GapRecord> records;
    std::string predictor;
    std::string mode;  // "prefix" or "permutation"
    std::uint64_t seed = 0;
    // Bootstrap resamples repeat lengths; this flag relaxes the
    // strictly-increasing-lengths validation in fit_scaling.
    bool resampled = false;
    // Set when count == 1 forced the per-length variance to 0.
    bool degenerate_variance = false;
};

// |log2 P(x_n | x_1..x_{n-1}) - log2 P(x_n | x_1..x_{n-2})|, the drop-one
// prefix sensitivity of the log-probability assigned to the symbol at
// 1-based position n.  Throws std::domain_error unless 3 <= n <= x.size().
// Nonzero even for exchangeable predictors.
double prefix_gap(const Predictor& pred, const BitSequence& x, std::size_t n);

// |log2 P(next=1 | x) - log2 P(next=1 | perm(x))| for one explicit
// rearrangement of the full sequence.  Exactly zero for predictors that see
// the context only through its counts.
double permutation_gap(const Predictor& pred, const BitSequence& x,
                       const PermutationSpec& perm);

// Mean of the single-permutation gap over `trials` seeded uniform
// permutations; trials >= 1.
double permutation_gap(const Predictor& pred, const BitSequence& x,
                       std::size_t trials, std::uint64_t seed);

// Tower-property residual |log2 sum_v P(v|x) P(1|x.v) - log2 P(1|x)|.
// Zero (to rounding) for any predictor whose one-step forecasts form a
// martingale, e.g. every posterior-predictive rule; position-dependent
// predictors violate it.
double martingale_residual(const Predictor& pred, const BitSequence& prefix);

struct GapScanConfig {
    std::vector<std::size_t> lengths;  // even, strictly increasing
    std::size_t per_length = 100;
    std::string mode = "permutation";  // or "prefix"
    std::size_t perm_trials = 8;       // permutations averaged per sequence
    std::uint64_t seed = 0;
    unsigned threads = 0;  // 0 -> hardware concurrency
};

// Measures the gap statistic over balanced random sequences at each length.
// All randomness is derived from (seed, item index), so results are
// independent of thread count and schedule.  Item failures are rethrown
// tagged with the (length, sequence index) that failed.  The predictor must
// be stateless across calls (all library predictors are).
GapSeries gap_scan(const Predictor& pred, const GapScanConfig& cfg);

enum class ScalingForm {
    lognn,  // mean = a * log2(n)/n + b
    invn,   // mean = a / n + b
};

std::string scaling_form_name(ScalingForm form);
ScalingForm scaling_form_from_name(const std::string& name);

struct ScalingFitResult {
    ScalingForm form = ScalingForm::lognn;
    double a = 0.0;
    double b = 0.0;
    double se_a = 0.0;
    double se_b = 0.0;
    double r2 = 0.0;
    double adj_r2 = 0.0;
    double loglik = 0.0;  // Gaussian log-likelihood (natural log)
    double rss = 0.0;     // weighted residual sum of squares
    std::size_t n_records = 0;
    bool unweighted = false;  // zero-mean records forced equal weights
    std::uint64_t series_seed = 0;
    std::string series_digest;
};

// Weighted least squares with w_n = count_n / mean_n^2, the inverse of the
// per-record variance proxy sigma_n^2 = mean_n^2 / count_n.  Any
// non-positive mean makes the weights undefined; the fit then falls back to
// unweighted OLS with a pooled residual variance and sets `unweighted`.
ScalingFitResult fit_scaling(const GapSeries& series, ScalingForm form);

struct ModelComparison {
    double llr = 0.0;      // 2 * (loglik_first - loglik_second)
    double p_value = 1.0;  // erfc(sqrt(|llr|/2))
    ScalingForm preferred = ScalingForm::lognn;
    // The two forms are not nested, so the chi-square(1) tail is a
    // heuristic calibration, not an exact test.
    bool non_nested = true;
};

// Both fits must come from the same series (checked via series_digest) and
// must use different forms.
ModelComparison compare_models(const ScalingFitResult& first,
                               const ScalingFitResult& second);

enum class FitParam { a, b };

struct BootstrapCi {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t replicates = 0;  // successful refits kept
    std::size_t discarded = 0;   // degenerate resamples dropped
};

// Percentile bootstrap over record resamples at the given confidence level.
// Replicates whose refit fails (e.g. a resample with fewer than two distinct
// lengths) are discarded and counted; more than 10% discards is an error.
// resamples >= 100.
BootstrapCi bootstrap_ci(const GapSeries& series, ScalingForm form,
                         FitParam param, std::size_t resamples,
                         double level, std::uint64_t seed);

// Envelope (lf^2 * sigma2_pe / 2) * log2(n) / n; requires n >= 2.
double theory_bound(double lf, double sigma2_pe, std::size_t n);

// Mean of P(next=1 | pi_j(x)) over k independent uniformly random
// permutations pi_j of the full sequence.
double averaged_predict(const Predictor& pred, const BitSequence& x,
                        std::size_t k, std::uint64_t seed);

struct PermAvgPoint {
    std::size_t k = 0;
    double std_dev = 0.0;  // std of averaged_predict across trials
};

struct PermAvgCurve {
    std::vector<PermAvgPoint> points;
    double exponent = 0.0;  // slope of log2(std) on log2(k)
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    // Some k had zero spread across trials (exchangeable behaviour); the
    // exponent is then undefined and left at 0.
    bool exchangeable = false;
    std::size_t trials = 0;
};

struct VarianceCurveConfig {
    std::size_t length = 64;        // balanced-sequence length, even
    std::vector<std::size_t> ks;    // >= 2 strictly increasing counts
    std::size_t trials = 64;        // independent sequence draws per k
    std::size_t n_boot = 1000;      // bootstrap replicates for the CI
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

// Spread of the permutation-averaged forecast as a function of the number of
// averaged permutations, over freshly drawn balanced sequences (one per
// trial, shared across k).  The exponent CI is a percentile bootstrap over
// trial resamples.
PermAvgCurve variance_curve(const Predictor& pred,
                            const VarianceCurveConfig& cfg);

// Canonical digest of the measurement rows, used to pair fits in
// compare_models.
std::string gap_series_digest(const GapSeries& series);

std::string gap_series_csv(const GapSeries& series);
GapSeries gap_series_from_csv(const std::string& text);

std::string scaling_fit_json(const ScalingFitResult& fit);
std::string comparison_json(const ModelComparison& cmp);

}  // namespace martingap
