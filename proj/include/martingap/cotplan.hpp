#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace martingap {

// Inputs for chain-length planning. beta is the positional coefficient
// lf^2 * sigma2_pe / 2; it is stored explicitly so a plan can be driven
// without committing to particular architecture constants.
struct CotParams {
    double n = 100.0;          // context length, tokens
    double eps = 0.1;          // target error, (0, 1)
    double delta = 0.06;       // confidence, (0, 1)
    double h_cot = 1.0;        // reasoning entropy, bits/token
    double alpha = 1.0;        // benefit scale, bits
    double k0 = 1.0;           // benefit saturation scale, tokens
    double b0 = 1.0;           // benefit at k = 0, bits
    double b_opt = 0.0;        // asymptotic benefit, bits
    double beta = 0.0;         // positional penalty coefficient, bits
    double v_max = 2.0;        // vocabulary size, >= 2
    double rho = 0.5;          // mixing rate, (0, 1)
    double m_b = 0.0;          // benefit curvature bound, bits
    double lf = 1.0;           // feature-map Lipschitz constant
    double sigma2_pe = 0.0;    // positional-encoding dispersion
    long rope_period = 64;     // rotary period, tokens
    double sample_budget = 1e5;
};

double positional_coefficient(double lf, double sigma2_pe);

struct Admissibility {
    bool eps_ok = false;  // eps in [max(n^-1/4, 1/v_max), 1/2]
    bool n_ok = false;    // n >= 4 beta log2(n) / h_cot
    double eps_min = 0.0;
};

// Checked, not assumed: inadmissible parameters flag the plan but never
// stop it.
Admissibility check_admissibility(const CotParams& params);

struct EntropyEstimate {
    double h_cot = 0.0;       // bits/token
    double half_width = 0.0;  // bits/token
    std::size_t m = 0;        // samples consumed
};

// Stream entries are per-token log2-probabilities (all <= 0), M >= 2.
// half_width = C1 * log2(v_max) * sqrt(ln(2/delta)) / sqrt(M) with
// C1 = 2*sqrt(2)/(1 - rho).
EntropyEstimate estimate_entropy(const std::vector<double>& log2_probs,
                                 double delta, double v_max, double rho);

// The half-width formula alone, for planning before any samples exist.
double entropy_half_width(double delta, double v_max, double rho,
                          double m);

struct SamplePlan {
    double m_required = 0.0;       // ceil(16 C1^2 log2^2(v_max) ln(6/delta))
    bool feasible = true;          // m_required <= budget
    double budget = 0.0;
    double half_width_at_budget = 0.0;
};

SamplePlan required_samples(double delta, double v_max, double rho,
                            double budget = 1e5);

struct BenefitPoint {
    double k = 0.0;
    double value = 0.0;  // measured benefit, bits
};

struct BenefitFit {
    double alpha = 0.0;
    double k0 = 1.0;
    double b0 = 0.0;
    double b_opt = 0.0;
    double se_alpha = 0.0;
    double se_k0 = 0.0;
    double se_b0 = 0.0;
    double se_b_opt = 0.0;
    double residual_norm = 0.0;
    std::size_t j = 0;  // number of fit points
    bool converged = false;
    bool degenerate = false;  // flat data: alpha ~ 0
};

// b0 - alpha*log2(1 + k/k0), floored at b_opt. The law is only meaningful
// pre-saturation; the floor keeps the grid scan out of negative-benefit
// territory.
double benefit_model(double k, const BenefitFit& fit);

// Least squares over (alpha, k0, b_opt, b0) with ridge 1e-6 on the
// parameter vector. Multi-start over k0 seeds {1, k_max/10, (k_max/10)^2}
// (equal to {1, sqrt(n), n} when the points span the standard [0, 10 sqrt n]
// grid). Non-convergence returns the flagged best iterate.
BenefitFit fit_benefit(const std::vector<BenefitPoint>& points);

// beta * k * log2(n + k) / (n + k)
double positional_penalty(double k, double n, double beta);

// F(k) = k*h_cot + raw benefit law + positional penalty, integers only.
// The raw (unfloored) law is used here: the floored model makes the scan
// saturate at the floor knee, which contradicts the closed form it is
// meant to cross-check. See remainder_envelope for the terms F excludes.
double total_cost(double k, const CotParams& params, const BenefitFit& fit);

// Worst-case envelope of the terms total_cost leaves out: they are bounds
// on unknown quantities, never added into F, only reported alongside.
// C1 log2(v_max) sqrt(k ln(2/delta)) + 2 m_b/(k+k0)^2 + beta/(n+k)
double remainder_envelope(double k, const CotParams& params);

struct ClosedForm {
    double k_closed = 0.0;          // sqrt(alpha n / (h (b0-b_opt))) log2(1/eps)
    double k_closed_natural = 0.0;  // same prefactor, ln(1/eps) reading
    double k_closed_log10 = 0.0;    // same prefactor, log10(1/eps) reading
    double xi_n = 0.0;              // C2 sqrt(ln n / n)
    double xi_n_base2 = 0.0;        // conservative base-2 reading
    double c2 = 0.0;                // 4 (1 + m_b/alpha + beta/h_cot)
    Admissibility admissibility;
};

// Singular-parameter error when h_cot = 0 or b0 = b_opt.
ClosedForm closed_form_kstar(const CotParams& params);

struct GridResult {
    long k_grid = 0;
    double f_grid = 0.0;
    bool boundary = false;  // argmin sits at k_max
    long k_max = 0;
};

// Exhaustive integer scan of total_cost over [0, k_max], ties toward
// smaller k.
GridResult grid_optimize(const CotParams& params, const BenefitFit& fit,
                         long k_max);

// k+1 when k is a positive multiple of p, else k.
long rope_adjust(long k, long p);

// ceil(20 ln n), or ceil(20 log2 n) under the base-2 reading.
std::size_t benefit_point_count(double n, bool base2 = false);

// {0} followed by j-1 log-spaced points in [1, 10 sqrt(n)]. A log grid
// cannot contain 0, so it is added explicitly.
std::vector<double> benefit_grid(double n, std::size_t j);

// Floored-model evaluations at the given k values, optionally with
// multiplicative Gaussian noise (value *= 1 + noise_level * z).
std::vector<BenefitPoint> synthetic_benefit_points(
    const BenefitFit& truth, const std::vector<double>& ks,
    double noise_level = 0.0, std::uint64_t seed = 0);

struct CotPlan {
    CotParams params;
    BenefitFit fit;
    EntropyEstimate entropy;   // h_cot actually used + its half-width
    SamplePlan samples;        // M planning (budget aware)
    std::size_t j = 0;         // benefit points consumed
    ClosedForm closed;
    GridResult grid;
    long k_closed_round = 0;
    long k_final = 0;
    double f_closed = 0.0;     // F(round(k_closed))
    double f_grid = 0.0;
    double f_final = 0.0;
    double c3 = 0.0;           // log2(v_max) * max(h_cot, alpha, beta)
    double stability_bound = 0.0;  // C3 sqrt(ln(n/delta)/n)(M^-1/2 + J^-1/2)
    double cost_projection = 0.0;  // (n + k_final) / n
    bool budget_warning = false;
    bool admissible = false;
};

// End-to-end plan: entropy from params.h_cot (or the stream overload),
// benefit fit from the points, closed form, grid refinement over
// [0, max(2 k_closed, 10 sqrt n)], rope adjustment, stability report.
CotPlan plan(const CotParams& params, const std::vector<BenefitPoint>& points);
CotPlan plan_with_stream(const std::vector<double>& log2_probs,
                         const std::vector<BenefitPoint>& points,
                         const CotParams& params);

std::string cot_plan_json(const CotPlan& plan);
// One line: chosen k, F, and the context-growth projection (n+k)/n.
std::string cot_plan_summary(const CotPlan& plan);

}  // namespace martingap
