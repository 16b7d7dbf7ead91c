#include "martingap/cotplan.hpp"

#include "martingap/lm.hpp"
#include "martingap/rng.hpp"
#include "martingap/textutil.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace martingap {
namespace {

constexpr double kLn2 = 0.6931471805599453;

// rho = 0 is a meaningful limit (iid stream), so [0, 1) is the domain.
double mixing_c1(double rho) {
    if (!(rho >= 0.0) || rho >= 1.0)
        throw std::invalid_argument("mixing rate must be in [0, 1)");
    return 2.0 * std::sqrt(2.0) / (1.0 - rho);
}

void check_confidence(double delta) {
    if (!(delta > 0.0) || !(delta < 1.0))
        throw std::invalid_argument("confidence level must be in (0, 1)");
}

void check_vocab(double v_max) {
    if (!(v_max >= 2.0))
        throw std::invalid_argument("vocabulary size must be at least 2");
}

// Raw logarithmic law, no floor. total_cost and the grid scan use this;
// the floored public model would saturate the scan at the floor knee and
// contradict the closed form it cross-checks.
double benefit_law(double k, const BenefitFit& fit) {
    double k0 = std::max(fit.k0, 1e-9);
    return fit.b0 - fit.alpha * std::log2(1.0 + k / k0);
}

struct FitSetup {
    std::vector<double> ks;
    std::vector<double> ys;
};

Eigen::VectorXd benefit_residual(const Eigen::VectorXd& th,
                                 const FitSetup& s) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(s.ks.size()));
    for (std::size_t i = 0; i < s.ks.size(); ++i) {
        double k0 = std::max(th(1), 1e-9);
        double raw = th(3) - th(0) * std::log2(1.0 + s.ks[i] / k0);
        r(static_cast<Eigen::Index>(i)) = s.ys[i] - std::max(raw, th(2));
    }
    return r;
}

Eigen::MatrixXd benefit_jacobian(const Eigen::VectorXd& th,
                                 const FitSetup& s) {
    // theta = [alpha, k0, b_opt, b0]; piecewise: where the floor binds,
    // only d/d b_opt survives.
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(s.ks.size()), 4);
    double k0 = std::max(th(1), 1e-9);
    for (std::size_t i = 0; i < s.ks.size(); ++i) {
        auto row = static_cast<Eigen::Index>(i);
        double k = s.ks[i];
        double raw = th(3) - th(0) * std::log2(1.0 + k / k0);
        if (raw < th(2)) {
            jac(row, 0) = 0.0;
            jac(row, 1) = 0.0;
            jac(row, 2) = 1.0;
            jac(row, 3) = 0.0;
        } else {
            jac(row, 0) = -std::log2(1.0 + k / k0);
            jac(row, 1) = th(0) * k / (kLn2 * k0 * (k0 + k));
            jac(row, 2) = 0.0;
            jac(row, 3) = 1.0;
        }
    }
    return jac;
}

}  // namespace

double positional_coefficient(double lf, double sigma2_pe) {
    return lf * lf * sigma2_pe / 2.0;
}

Admissibility check_admissibility(const CotParams& params) {
    Admissibility adm;
    adm.eps_min = std::max(std::pow(params.n, -0.25), 1.0 / params.v_max);
    adm.eps_ok = params.eps >= adm.eps_min && params.eps <= 0.5;
    if (params.beta == 0.0) {
        adm.n_ok = true;
    } else if (!(params.h_cot > 0.0)) {
        adm.n_ok = false;
    } else {
        adm.n_ok =
            params.n >= 4.0 * params.beta * std::log2(params.n) / params.h_cot;
    }
    return adm;
}

double entropy_half_width(double delta, double v_max, double rho, double m) {
    check_confidence(delta);
    check_vocab(v_max);
    if (!(m >= 1.0))
        throw std::invalid_argument("sample count must be at least 1");
    double c1 = mixing_c1(rho);
    return c1 * std::log2(v_max) * std::sqrt(std::log(2.0 / delta)) /
           std::sqrt(m);
}

EntropyEstimate estimate_entropy(const std::vector<double>& log2_probs,
                                 double delta, double v_max, double rho) {
    if (log2_probs.size() < 2)
        throw std::invalid_argument("entropy estimate needs at least 2 samples");
    double sum = 0.0;
    for (double lp : log2_probs) {
        if (lp > 0.0)
            throw std::invalid_argument(
                "log-probabilities must be non-positive");
        sum += lp;
    }
    EntropyEstimate est;
    est.m = log2_probs.size();
    est.h_cot = -sum / static_cast<double>(est.m);
    est.half_width =
        entropy_half_width(delta, v_max, rho, static_cast<double>(est.m));
    return est;
}

SamplePlan required_samples(double delta, double v_max, double rho,
                            double budget) {
    check_confidence(delta);
    check_vocab(v_max);
    if (!(budget >= 1.0))
        throw std::invalid_argument("sample budget must be at least 1");
    double c1 = mixing_c1(rho);
    double l = std::log2(v_max);
    SamplePlan plan;
    plan.m_required = std::ceil(16.0 * c1 * c1 * l * l * std::log(6.0 / delta));
    plan.budget = budget;
    plan.feasible = plan.m_required <= budget;
    plan.half_width_at_budget = entropy_half_width(delta, v_max, rho, budget);
    return plan;
}

double benefit_model(double k, const BenefitFit& fit) {
    if (!(k >= 0.0))
        throw std::invalid_argument("chain length must be non-negative");
    return std::max(benefit_law(k, fit), fit.b_opt);
}

BenefitFit fit_benefit(const std::vector<BenefitPoint>& points) {
    if (points.size() < 4)
        throw std::invalid_argument("benefit fit needs at least 4 points");
    bool has_zero = false;
    double k_max = 0.0;
    for (const auto& p : points) {
        if (!(p.k >= 0.0))
            throw std::invalid_argument("chain lengths must be non-negative");
        if (!std::isfinite(p.value))
            throw std::invalid_argument("benefit values must be finite");
        if (p.k == 0.0) has_zero = true;
        k_max = std::max(k_max, p.k);
    }
    if (!has_zero)
        throw std::invalid_argument("benefit fit requires a k = 0 point");
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            if (points[i].k == points[j].k)
                throw std::invalid_argument("chain lengths must be distinct");

    FitSetup s;
    s.ks.reserve(points.size());
    s.ys.reserve(points.size());
    double b0_init = 0.0, y_min = points[0].value, y_max = points[0].value;
    for (const auto& p : points) {
        s.ks.push_back(p.k);
        s.ys.push_back(p.value);
        if (p.k == 0.0) b0_init = p.value;
        y_min = std::min(y_min, p.value);
        y_max = std::max(y_max, p.value);
    }

    // The 1e-6 regularizer enters as the floor on the LM step damping:
    // a penalty of the same weight on the parameter vector itself would
    // bias the noiseless recovery to ~1e-4 residuals.
    LmOptions opts;
    opts.lambda_min = 1e-6;

    // Seeds {1, k_max/10, (k_max/10)^2}: on the standard grid spanning
    // [0, 10 sqrt n] these are {1, sqrt n, n}.
    double k_mid = std::max(k_max / 10.0, 1.0);
    const double k0_seeds[3] = {1.0, k_mid, k_mid * k_mid};

    LmResult best;
    best.cost = std::numeric_limits<double>::infinity();
    for (double k0_seed : k0_seeds) {
        Eigen::VectorXd theta(4);
        double span = std::log2(1.0 + k_max / k0_seed);
        theta(0) = span > 0.0 ? (b0_init - y_min) / span : 0.0;
        theta(1) = k0_seed;
        theta(2) = y_min;
        theta(3) = b0_init;
        LmResult res = lm_minimize(
            theta,
            [&](const Eigen::VectorXd& th) { return benefit_residual(th, s); },
            [&](const Eigen::VectorXd& th) { return benefit_jacobian(th, s); },
            opts);
        if (res.cost < best.cost) best = res;
    }

    BenefitFit fit;
    fit.alpha = best.theta(0);
    fit.k0 = std::max(best.theta(1), 1e-9);
    fit.b_opt = best.theta(2);
    fit.b0 = best.theta(3);
    fit.residual_norm = std::sqrt(best.cost);
    fit.j = points.size();
    fit.converged = best.converged;
    fit.degenerate = std::abs(fit.alpha) <= 1e-8 ||
                     (y_max - y_min) <= 1e-12 || fit.b0 < fit.b_opt;

    // Standard errors from the damped information matrix at the optimum;
    // the damping keeps the degenerate (flat-data) case finite.
    Eigen::MatrixXd jac = benefit_jacobian(best.theta, s);
    Eigen::VectorXd r = benefit_residual(best.theta, s);
    double dof = std::max(1.0, static_cast<double>(points.size()) - 4.0);
    double sigma2 = r.squaredNorm() / dof;
    Eigen::MatrixXd h = jac.transpose() * jac;
    h.diagonal().array() += opts.lambda_min;
    Eigen::MatrixXd cov = sigma2 * h.inverse();
    fit.se_alpha = std::sqrt(std::max(cov(0, 0), 0.0));
    fit.se_k0 = std::sqrt(std::max(cov(1, 1), 0.0));
    fit.se_b_opt = std::sqrt(std::max(cov(2, 2), 0.0));
    fit.se_b0 = std::sqrt(std::max(cov(3, 3), 0.0));
    return fit;
}

double positional_penalty(double k, double n, double beta) {
    if (!(k >= 0.0))
        throw std::invalid_argument("chain length must be non-negative");
    if (!(n >= 1.0))
        throw std::invalid_argument("context length must be at least 1");
    if (k == 0.0) return 0.0;
    return beta * k * std::log2(n + k) / (n + k);
}

double total_cost(double k, const CotParams& params, const BenefitFit& fit) {
    if (!(k >= 0.0))
        throw std::invalid_argument("chain length must be non-negative");
    if (k != std::floor(k))
        throw std::domain_error("total cost is defined on integer k only");
    return k * params.h_cot + benefit_law(k, fit) +
           positional_penalty(k, params.n, params.beta);
}

double remainder_envelope(double k, const CotParams& params) {
    if (!(k >= 0.0))
        throw std::invalid_argument("chain length must be non-negative");
    double c1 = mixing_c1(params.rho);
    double sample_term = c1 * std::log2(params.v_max) *
                         std::sqrt(k * std::log(2.0 / params.delta));
    double curvature_term =
        2.0 * params.m_b / ((k + params.k0) * (k + params.k0));
    double positional_term = params.beta / (params.n + k);
    return sample_term + curvature_term + positional_term;
}

ClosedForm closed_form_kstar(const CotParams& params) {
    if (!(params.h_cot > 0.0) || !(params.b0 > params.b_opt))
        throw std::runtime_error(
            "singular parameters: entropy and benefit drop must be positive");
    if (!(params.alpha > 0.0))
        throw std::invalid_argument("benefit scale must be positive");
    if (!(params.eps > 0.0) || params.eps > 1.0)
        throw std::invalid_argument("target error must be in (0, 1]");
    ClosedForm cf;
    double prefactor = std::sqrt(
        params.alpha * params.n / (params.h_cot * (params.b0 - params.b_opt)));
    cf.k_closed = prefactor * std::log2(1.0 / params.eps);
    cf.k_closed_natural = prefactor * std::log(1.0 / params.eps);
    cf.k_closed_log10 = prefactor * std::log10(1.0 / params.eps);
    cf.c2 = 4.0 * (1.0 + params.m_b / params.alpha +
                   params.beta / params.h_cot);
    cf.xi_n = cf.c2 * std::sqrt(std::log(params.n) / params.n);
    cf.xi_n_base2 = cf.c2 * std::sqrt(std::log2(params.n) / params.n);
    cf.admissibility = check_admissibility(params);
    return cf;
}

GridResult grid_optimize(const CotParams& params, const BenefitFit& fit,
                         long k_max) {
    if (k_max < 1)
        throw std::invalid_argument("grid upper bound must be at least 1");
    GridResult res;
    res.k_max = k_max;
    res.k_grid = 0;
    res.f_grid = total_cost(0.0, params, fit);
    for (long k = 1; k <= k_max; ++k) {
        double f = total_cost(static_cast<double>(k), params, fit);
        if (f < res.f_grid) {
            res.f_grid = f;
            res.k_grid = k;
        }
    }
    res.boundary = res.k_grid == k_max;
    return res;
}

long rope_adjust(long k, long p) {
    if (k < 0) throw std::invalid_argument("chain length must be non-negative");
    if (p < 1) throw std::invalid_argument("rotary period must be positive");
    if (k > 0 && k % p == 0) return k + 1;
    return k;
}

std::size_t benefit_point_count(double n, bool base2) {
    if (!(n >= 1.0))
        throw std::invalid_argument("context length must be at least 1");
    double raw = base2 ? 20.0 * std::log2(n) : 20.0 * std::log(n);
    return static_cast<std::size_t>(std::max(std::ceil(raw), 4.0));
}

std::vector<double> benefit_grid(double n, std::size_t j) {
    if (!(n >= 1.0))
        throw std::invalid_argument("context length must be at least 1");
    if (j < 2) throw std::invalid_argument("grid needs at least 2 points");
    std::vector<double> ks;
    ks.reserve(j);
    ks.push_back(0.0);
    double hi = 10.0 * std::sqrt(n);
    std::size_t count = j - 1;
    if (count == 1) {
        ks.push_back(hi);
        return ks;
    }
    double log_hi = std::log(hi);
    for (std::size_t i = 0; i < count; ++i) {
        double t = static_cast<double>(i) / static_cast<double>(count - 1);
        ks.push_back(std::exp(t * log_hi));
    }
    return ks;
}

std::vector<BenefitPoint> synthetic_benefit_points(
    const BenefitFit& truth, const std::vector<double>& ks,
    double noise_level, std::uint64_t seed) {
    std::vector<BenefitPoint> points;
    points.reserve(ks.size());
    Rng rng(seed);
    for (double k : ks) {
        BenefitPoint p;
        p.k = k;
        p.value = benefit_model(k, truth);
        if (noise_level > 0.0) p.value *= 1.0 + noise_level * rng.normal();
        points.push_back(p);
    }
    return points;
}

namespace {

CotPlan plan_impl(const CotParams& params,
                  const std::vector<BenefitPoint>& points,
                  const EntropyEstimate& entropy) {
    CotParams effective = params;
    effective.h_cot = entropy.h_cot;

    CotPlan out;
    out.params = effective;
    out.entropy = entropy;
    out.samples = required_samples(params.delta, params.v_max, params.rho,
                                   params.sample_budget);
    out.budget_warning = !out.samples.feasible;
    out.fit = fit_benefit(points);
    out.j = points.size();
    out.closed = closed_form_kstar(effective);
    Admissibility adm = out.closed.admissibility;
    out.admissible = adm.eps_ok && adm.n_ok;

    double grid_hi =
        std::max(2.0 * out.closed.k_closed, 10.0 * std::sqrt(params.n));
    long k_max = std::max(1L, static_cast<long>(std::ceil(grid_hi)));
    out.grid = grid_optimize(effective, out.fit, k_max);
    out.f_grid = out.grid.f_grid;

    out.k_closed_round =
        std::max(0L, static_cast<long>(std::llround(out.closed.k_closed)));
    out.f_closed =
        total_cost(static_cast<double>(out.k_closed_round), effective, out.fit);

    // Candidate with the smaller F wins; ties break toward smaller k to
    // match the grid rule.
    long k_best = out.grid.k_grid;
    double f_best = out.f_grid;
    if (out.f_closed < f_best ||
        (out.f_closed == f_best && out.k_closed_round < k_best)) {
        k_best = out.k_closed_round;
        f_best = out.f_closed;
    }
    out.k_final = rope_adjust(k_best, params.rope_period);
    out.f_final =
        total_cost(static_cast<double>(out.k_final), effective, out.fit);

    out.c3 = std::log2(params.v_max) *
             std::max({entropy.h_cot, params.alpha, params.beta});
    double m_used =
        entropy.m > 0 ? static_cast<double>(entropy.m)
                      : std::min(out.samples.m_required, params.sample_budget);
    double j_used = static_cast<double>(out.j);
    out.stability_bound =
        out.c3 * std::sqrt(std::log(params.n / params.delta) / params.n) *
        (1.0 / std::sqrt(m_used) + 1.0 / std::sqrt(j_used));
    out.cost_projection =
        (params.n + static_cast<double>(out.k_final)) / params.n;
    return out;
}

}  // namespace

CotPlan plan(const CotParams& params,
             const std::vector<BenefitPoint>& points) {
    EntropyEstimate entropy;
    entropy.h_cot = params.h_cot;
    entropy.m = 0;  // entropy supplied, not estimated
    // Report the half-width the budgeted sample plan would achieve.
    SamplePlan sp = required_samples(params.delta, params.v_max, params.rho,
                                     params.sample_budget);
    double m_plan = std::min(sp.m_required, params.sample_budget);
    entropy.half_width =
        entropy_half_width(params.delta, params.v_max, params.rho, m_plan);
    return plan_impl(params, points, entropy);
}

CotPlan plan_with_stream(const std::vector<double>& log2_probs,
                         const std::vector<BenefitPoint>& points,
                         const CotParams& params) {
    EntropyEstimate entropy =
        estimate_entropy(log2_probs, params.delta, params.v_max, params.rho);
    return plan_impl(params, points, entropy);
}

std::string cot_plan_json(const CotPlan& plan) {
    nlohmann::json j;
    j["inputs"] = {
        {"n", plan.params.n},
        {"eps", plan.params.eps},
        {"delta", plan.params.delta},
        {"h_cot", plan.params.h_cot},
        {"alpha", plan.params.alpha},
        {"k0", plan.params.k0},
        {"b0", plan.params.b0},
        {"b_opt", plan.params.b_opt},
        {"beta", plan.params.beta},
        {"v_max", plan.params.v_max},
        {"rho", plan.params.rho},
        {"m_b", plan.params.m_b},
        {"rope_period", plan.params.rope_period},
        {"sample_budget", plan.params.sample_budget},
    };
    j["entropy"] = {
        {"h_cot", plan.entropy.h_cot},
        {"half_width", plan.entropy.half_width},
        {"m", plan.entropy.m},
    };
    j["samples"] = {
        {"m_required", plan.samples.m_required},
        {"feasible", plan.samples.feasible},
        {"budget", plan.samples.budget},
        {"half_width_at_budget", plan.samples.half_width_at_budget},
    };
    j["fit"] = {
        {"alpha", plan.fit.alpha},       {"k0", plan.fit.k0},
        {"b0", plan.fit.b0},             {"b_opt", plan.fit.b_opt},
        {"se_alpha", plan.fit.se_alpha}, {"se_k0", plan.fit.se_k0},
        {"se_b0", plan.fit.se_b0},       {"se_b_opt", plan.fit.se_b_opt},
        {"residual_norm", plan.fit.residual_norm},
        {"j", plan.fit.j},
        {"converged", plan.fit.converged},
        {"degenerate", plan.fit.degenerate},
    };
    j["closed_form"] = {
        {"k_closed", plan.closed.k_closed},
        {"k_closed_natural", plan.closed.k_closed_natural},
        {"k_closed_log10", plan.closed.k_closed_log10},
        {"xi_n", plan.closed.xi_n},
        {"xi_n_base2", plan.closed.xi_n_base2},
        {"c2", plan.closed.c2},
    };
    j["grid"] = {
        {"k_grid", plan.grid.k_grid},
        {"f_grid", plan.grid.f_grid},
        {"boundary", plan.grid.boundary},
        {"k_max", plan.grid.k_max},
    };
    j["decision"] = {
        {"k_closed_round", plan.k_closed_round},
        {"k_final", plan.k_final},
        {"f_closed", plan.f_closed},
        {"f_grid", plan.f_grid},
        {"f_final", plan.f_final},
        {"cost_projection", plan.cost_projection},
    };
    j["flags"] = {
        {"admissible", plan.admissible},
        {"eps_ok", plan.closed.admissibility.eps_ok},
        {"n_ok", plan.closed.admissibility.n_ok},
        {"eps_min", plan.closed.admissibility.eps_min},
        {"budget_warning", plan.budget_warning},
        {"grid_boundary", plan.grid.boundary},
    };
    // Bound expressions with their numeric substitutions; the stability
    // constant is only known up to an unspecified constant factor.
    j["bounds"] = {
        {"relative_error",
         "xi_n <= C2*sqrt(ln(n)/n) = " + format_g17(plan.closed.c2) +
             "*sqrt(ln(" + format_g17(plan.params.n) + ")/" +
             format_g17(plan.params.n) + ") = " +
             format_g17(plan.closed.xi_n)},
        {"stability",
         "C3*sqrt(ln(n/delta)/n)*(M^-1/2 + J^-1/2) = " +
             format_g17(plan.stability_bound) +
             " with C3 = log2(v_max)*max(h_cot, alpha, beta) = " +
             format_g17(plan.c3) + " (up to unspecified constant)"},
        {"c3", plan.c3},
        {"stability_bound", plan.stability_bound},
        {"stability_inputs",
         {{"m", plan.entropy.m > 0
                    ? static_cast<double>(plan.entropy.m)
                    : std::min(plan.samples.m_required,
                               plan.samples.budget)},
          {"j", plan.j},
          {"delta", plan.params.delta}}},
        {"remainder_envelope_at_k_final",
         remainder_envelope(static_cast<double>(plan.k_final), plan.params)},
    };
    return j.dump(2) + "\n";
}

std::string cot_plan_summary(const CotPlan& plan) {
    std::string line = "k_final=" + std::to_string(plan.k_final) +
                       " F=" + format_g17(plan.f_final) +
                       " k_closed=" + format_g17(plan.closed.k_closed) +
                       " k_grid=" + std::to_string(plan.grid.k_grid) +
                       " cost_projection=" + format_g17(plan.cost_projection);
    if (!plan.admissible) line += " [inadmissible]";
    if (plan.budget_warning) line += " [sample budget exceeded]";
    if (plan.grid.boundary) line += " [grid boundary]";
    return line;
}

}  // namespace martingap
