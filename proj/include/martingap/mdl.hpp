#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "martingap/bitseq.hpp"
#include "martingap/predictors.hpp"

namespace martingap {

struct MdlLedger {
    std::vector<double> per_step;  // -log2 P(x_t | x_1..x_{t-1}), bits
    double total = 0.0;            // sum of per_step
    // Model-description constant L(M); zero by default since all compared
    // predictors share a parametric form and the constant cancels.
    double model_cost = 0.0;
    std::string model;
};

// Sequential code length of x under the predictor, one entry per symbol.
MdlLedger codelength(const Predictor& pred, const BitSequence& x);

struct EfficiencyPoint {
    std::size_t length = 0;
    double mean_bits_per_symbol = 0.0;
    double efficiency = 0.0;  // H(p) / mean_bits_per_symbol
    double reciprocal = 0.0;  // mean_bits_per_symbol / H(p), for plotting
};

struct EfficiencyCurve {
    std::vector<EfficiencyPoint> points;
    std::string model;
    double p = 0.5;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
};

// For each length, draws `trials` iid Bernoulli(p) sequences and reports the
// entropy-to-codelength ratio H(p) / (mean total / n).  Asymptotically in
// (0, 1]; finite samples may exceed 1 and are reported raw.  Requires
// 0 < p < 1 and trials >= 1.
EfficiencyCurve efficiency_curve(const Predictor& pred, double p,
                                 const std::vector<std::size_t>& lengths,
                                 std::size_t trials, std::uint64_t seed,
                                 unsigned threads = 0);

// Exact E[H(k/t)] for k ~ Hypergeometric(n, s, t) by enumerating the
// closed-form pmf.  Requires 0 <= s <= n and 1 <= t <= n.  By Jensen
// (H concave) the value never exceeds H(s/n).
double hypergeom_entropy_expectation(std::size_t n, std::size_t s,
                                     std::size_t t);

std::string mdl_ledger_csv(const MdlLedger& ledger);
std::string efficiency_curve_csv(const EfficiencyCurve& curve);

}  // namespace martingap
