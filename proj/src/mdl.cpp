#include "martingap/mdl.hpp"

#include <cmath>
#include <stdexcept>

#include "martingap/parallel.hpp"
#include "martingap/rng.hpp"
#include "martingap/textutil.hpp"

namespace martingap {

namespace {

double log_choose(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

MdlLedger codelength(const Predictor& pred, const BitSequence& x) {
    MdlLedger ledger;
    ledger.model = pred.name();
    ledger.per_step.reserve(x.size());
    std::span<const uint8_t> all(x.bits.data(), x.size());
    for (size_t t = 0; t < x.size(); ++t) {
        double q = pred.predict_one(all.subspan(0, t));
        double prob = x.bits[t] ? q : 1.0 - q;
        double bits = -std::log2(prob);
        ledger.per_step.push_back(bits);
        ledger.total += bits;
    }
    return ledger;
}

EfficiencyCurve efficiency_curve(const Predictor& pred, double p,
                                 const std::vector<std::size_t>& lengths,
                                 std::size_t trials, std::uint64_t seed,
                                 unsigned threads) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("bernoulli parameter must lie in (0, 1)");
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (lengths.empty()) throw std::invalid_argument("need at least one length");
    for (size_t i = 0; i < lengths.size(); ++i) {
        if (lengths[i] < 1) throw std::invalid_argument("lengths must be >= 1");
        if (i > 0 && lengths[i] <= lengths[i - 1])
            throw std::invalid_argument("lengths must be strictly increasing");
    }

    double entropy = binary_entropy(p);
    size_t nl = lengths.size();
    std::vector<std::vector<double>> totals(nl, std::vector<double>(trials));
    parallel_for(nl * trials, threads, [&](size_t i) {
        size_t li = i / trials;
        size_t n = lengths[li];
        BitSequence x;
        x.bits.resize(n);
        Rng rng(derive_seed(seed, i));
        for (size_t t = 0; t < n; ++t) x.bits[t] = rng.uniform01() < p ? 1 : 0;
        totals[li][i % trials] = codelength(pred, x).total;
    });

    EfficiencyCurve curve;
    curve.model = pred.name();
    curve.p = p;
    curve.trials = trials;
    curve.seed = seed;
    curve.points.reserve(nl);
    for (size_t li = 0; li < nl; ++li) {
        double mean_total = 0.0;
        for (double t : totals[li]) mean_total += t;
        mean_total /= static_cast<double>(trials);
        EfficiencyPoint pt;
        pt.length = lengths[li];
        pt.mean_bits_per_symbol = mean_total / static_cast<double>(lengths[li]);
        pt.efficiency = entropy / pt.mean_bits_per_symbol;
        pt.reciprocal = pt.mean_bits_per_symbol / entropy;
        curve.points.push_back(pt);
    }
    return curve;
}

double hypergeom_entropy_expectation(std::size_t n, std::size_t s,
                                     std::size_t t) {
    if (s > n) throw std::invalid_argument("need 0 <= s <= n");
    if (t < 1 || t > n) throw std::invalid_argument("need 1 <= t <= n");

    double dn = static_cast<double>(n);
    double ds = static_cast<double>(s);
    double dt = static_cast<double>(t);
    double log_denom = log_choose(dn, dt);

    size_t k_lo = t > n - s ? t - (n - s) : 0;
    size_t k_hi = std::min(t, s);
    double expectation = 0.0;
    for (size_t k = k_lo; k <= k_hi; ++k) {
        double dk = static_cast<double>(k);
        double logp = log_choose(ds, dk) + log_choose(dn - ds, dt - dk) - log_denom;
        expectation += std::exp(logp) * binary_entropy(dk / dt);
    }
    return expectation;
}

std::string mdl_ledger_csv(const MdlLedger& ledger) {
    std::string out;
    out += "# model=" + ledger.model + "\n";
    out += "# model_cost=" + format_g17(ledger.model_cost) + "\n";
    out += "# total=" + format_g17(ledger.total) + "\n";
    out += "step,bits\n";
    for (size_t t = 0; t < ledger.per_step.size(); ++t)
        out += std::to_string(t + 1) + "," + format_g17(ledger.per_step[t]) + "\n";
    return out;
}

std::string efficiency_curve_csv(const EfficiencyCurve& curve) {
    std::string out;
    out += "# model=" + curve.model + "\n";
    out += "# p=" + format_g17(curve.p) + "\n";
    out += "# trials=" + std::to_string(curve.trials) + "\n";
    out += "# seed=" + std::to_string(curve.seed) + "\n";
    out += "length,mean_bits_per_symbol,efficiency,reciprocal\n";
    for (const EfficiencyPoint& pt : curve.points) {
        out += std::to_string(pt.length) + "," +
               format_g17(pt.mean_bits_per_symbol) + "," +
               format_g17(pt.efficiency) + "," + format_g17(pt.reciprocal) + "\n";
    }
    return out;
}

}  // namespace martingap
