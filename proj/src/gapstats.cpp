#include "martingap/gapstats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "martingap/parallel.hpp"
#include "martingap/rng.hpp"
#include "martingap/textutil.hpp"

namespace martingap {

namespace {

double prob_of_bit(const Predictor& pred, std::span<const uint8_t> prefix,
                   uint8_t bit) {
    double q = pred.predict_one(prefix);
    return bit ? q : 1.0 - q;
}

double sample_mean(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    return mean / static_cast<double>(v.size());
}

double sample_var(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = sample_mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size() - 1);
}

// Linear-interpolated percentile of a sorted sample, q in [0, 100].
double percentile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("percentile of empty sample");
    if (sorted.size() == 1) return sorted[0];
    double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
    size_t lo = static_cast<size_t>(pos);
    if (lo >= sorted.size() - 1) return sorted.back();
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double regressor(ScalingForm form, std::size_t n) {
    double dn = static_cast<double>(n);
    return form == ScalingForm::lognn ? std::log2(dn) / dn : 1.0 / dn;
}

void validate_records(const GapSeries& series) {
    if (series.records.size() < 3)
        throw std::invalid_argument("fit needs at least 3 records");
    for (const GapRecord& r : series.records) {
        if (r.length < 2) throw std::invalid_argument("record length must be >= 2");
        if (r.count < 1) throw std::invalid_argument("record count must be >= 1");
        if (!std::isfinite(r.mean_gap))
            throw std::invalid_argument("record mean_gap must be finite");
        if (!(r.var_gap >= 0.0))
            throw std::invalid_argument("record variance must be >= 0");
    }
    if (!series.resampled) {
        for (size_t i = 1; i < series.records.size(); ++i)
            if (series.records[i].length <= series.records[i - 1].length)
                throw std::invalid_argument("record lengths must be strictly increasing");
    }
}

// OLS slope of y on x; returns false when fewer than two points or a
// degenerate x spread.
bool ols_slope(const std::vector<double>& x, const std::vector<double>& y,
               double* slope) {
    if (x.size() < 2 || x.size() != y.size()) return false;
    double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double denom = n * sxx - sx * sx;
    if (!(std::abs(denom) > 1e-12 * (n * sxx + sx * sx + 1e-300))) return false;
    *slope = (n * sxy - sx * sy) / denom;
    return true;
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

double prefix_gap(const Predictor& pred, const BitSequence& x, std::size_t n) {
    if (n < 3 || n > x.size())
        throw std::domain_error("prefix_gap position must satisfy 3 <= n <= length");
    std::span<const uint8_t> all(x.bits.data(), x.size());
    uint8_t target = x.bits[n - 1];
    double p_full = prob_of_bit(pred, all.subspan(0, n - 1), target);
    double p_drop = prob_of_bit(pred, all.subspan(0, n - 2), target);
    return std::abs(std::log2(p_full) - std::log2(p_drop));
}

double permutation_gap(const Predictor& pred, const BitSequence& x,
                       const PermutationSpec& perm) {
    BitSequence shuffled = apply_permutation(x, perm);
    double p_orig = pred.predict_one(x);
    double p_perm = pred.predict_one(shuffled);
    return std::abs(std::log2(p_orig) - std::log2(p_perm));
}

double permutation_gap(const Predictor& pred, const BitSequence& x,
                       std::size_t trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("permutation_gap needs trials >= 1");
    double acc = 0.0;
    for (size_t t = 0; t < trials; ++t) {
        PermutationSpec perm = random_permutation(x.size(), derive_seed(seed, t));
        acc += permutation_gap(pred, x, perm);
    }
    return acc / static_cast<double>(trials);
}

double martingale_residual(const Predictor& pred, const BitSequence& prefix) {
    double q = pred.predict_one(prefix);

    std::vector<uint8_t> ext(prefix.bits);
    ext.push_back(0);
    double q_after0 = pred.predict_one(std::span<const uint8_t>(ext));
    ext.back() = 1;
    double q_after1 = pred.predict_one(std::span<const uint8_t>(ext));

    double tower = (1.0 - q) * q_after0 + q * q_after1;
    return std::abs(std::log2(tower) - std::log2(q));
}

GapSeries gap_scan(const Predictor& pred, const GapScanConfig& cfg) {
    if (cfg.lengths.empty()) throw std::invalid_argument("gap_scan needs at least one length");
    bool perm_mode;
    if (cfg.mode == "permutation") perm_mode = true;
    else if (cfg.mode == "prefix") perm_mode = false;
    else throw std::invalid_argument("mode must be 'prefix' or 'permutation'");
    size_t min_len = perm_mode ? 2 : 4;  // prefix mode conditions on n-2 >= 1
    for (size_t i = 0; i < cfg.lengths.size(); ++i) {
        size_t n = cfg.lengths[i];
        if (n < min_len || n % 2 != 0)
            throw std::invalid_argument("scan lengths must be even and >= " +
                                        std::to_string(min_len));
        if (i > 0 && n <= cfg.lengths[i - 1])
            throw std::invalid_argument("scan lengths must be strictly increasing");
    }
    if (cfg.per_length < 1) throw std::invalid_argument("per_length must be >= 1");
    if (perm_mode && cfg.perm_trials < 1)
        throw std::invalid_argument("perm_trials must be >= 1");

    size_t n_lengths = cfg.lengths.size();
    std::vector<std::vector<double>> per_seq(n_lengths,
                                             std::vector<double>(cfg.per_length));
    size_t items = n_lengths * cfg.per_length;

    parallel_for(items, cfg.threads, [&](size_t i) {
        size_t li = i / cfg.per_length;
        size_t si = i % cfg.per_length;
        size_t n = cfg.lengths[li];
        try {
            // Two disjoint streams per item: one for the sequence draw, one
            // for its permutations.  Everything keys off (seed, item), so
            // the schedule cannot matter.
            uint64_t seq_seed = derive_seed(cfg.seed, 2 * i);
            BitSequence x = balanced_sequences(static_cast<long>(n), 1, seq_seed)[0];
            per_seq[li][si] =
                perm_mode
                    ? permutation_gap(pred, x, cfg.perm_trials,
                                      derive_seed(cfg.seed, 2 * i + 1))
                    : prefix_gap(pred, x, n);
        } catch (const std::exception& e) {
            // Nesting keeps the original exception type visible to the
            // caller's error mapping.
            std::throw_with_nested(
                std::runtime_error("gap_scan item failed (length " +
                                   std::to_string(n) + ", sequence " +
                                   std::to_string(si) + "): " + e.what()));
        }
    });

    GapSeries out;
    out.predictor = pred.name();
    out.mode = cfg.mode;
    out.seed = cfg.seed;
    out.degenerate_variance = cfg.per_length < 2;
    out.records.reserve(n_lengths);
    for (size_t li = 0; li < n_lengths; ++li) {
        const std::vector<double>& v = per_seq[li];
        out.records.push_back(GapRecord{cfg.lengths[li], sample_mean(v),
                                        sample_var(v), cfg.per_length});
    }
    return out;
}

std::string scaling_form_name(ScalingForm form) {
    return form == ScalingForm::lognn ? "lognn" : "invn";
}

ScalingForm scaling_form_from_name(const std::string& name) {
    if (name == "lognn") return ScalingForm::lognn;
    if (name == "invn") return ScalingForm::invn;
    throw std::invalid_argument("unknown scaling form: " + name);
}

ScalingFitResult fit_scaling(const GapSeries& series, ScalingForm form) {
    validate_records(series);

    std::set<std::size_t> distinct;
    for (const GapRecord& r : series.records) distinct.insert(r.length);
    if (distinct.size() < 2)
        throw std::runtime_error("fit design is singular: fewer than two distinct lengths");

    // Inverse-variance weights need strictly positive means; any exact null
    // (or detrended negative value) forces the unweighted fallback.
    bool unweighted = false;
    for (const GapRecord& r : series.records)
        if (r.mean_gap <= 0.0) unweighted = true;

    auto weight_of = [&](const GapRecord& r) {
        return unweighted ? 1.0
                          : static_cast<double>(r.count) / (r.mean_gap * r.mean_gap);
    };

    Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
    Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
    double sw = 0.0, swy = 0.0;
    for (const GapRecord& r : series.records) {
        double u = regressor(form, r.length);
        double w = weight_of(r);
        m(0, 0) += w * u * u;
        m(0, 1) += w * u;
        m(1, 1) += w;
        rhs(0) += w * u * r.mean_gap;
        rhs(1) += w * r.mean_gap;
        sw += w;
        swy += w * r.mean_gap;
    }
    m(1, 0) = m(0, 1);
    double det = m(0, 0) * m(1, 1) - m(0, 1) * m(0, 1);
    if (!(std::abs(det) > 1e-14 * (m(0, 0) * m(1, 1) + 1e-300)))
        throw std::runtime_error("fit design is singular");
    Eigen::Vector2d sol = m.ldlt().solve(rhs);

    ScalingFitResult res;
    res.form = form;
    res.a = sol(0);
    res.b = sol(1);
    res.n_records = series.records.size();
    res.unweighted = unweighted;
    res.series_seed = series.seed;
    res.series_digest = gap_series_digest(series);

    double rss = 0.0, tss = 0.0;
    double ybar = swy / sw;
    for (const GapRecord& r : series.records) {
        double u = regressor(form, r.length);
        double w = weight_of(r);
        double resid = r.mean_gap - (res.a * u + res.b);
        rss += w * resid * resid;
        tss += w * (r.mean_gap - ybar) * (r.mean_gap - ybar);
    }
    res.rss = rss;

    double dm = static_cast<double>(res.n_records);
    // Standard errors under the estimated residual scale.
    double scale = rss / (dm - 2.0);
    Eigen::Matrix2d cov = scale * m.inverse();
    res.se_a = std::sqrt(std::max(cov(0, 0), 0.0));
    res.se_b = std::sqrt(std::max(cov(1, 1), 0.0));

    if (tss > 0.0) {
        res.r2 = 1.0 - rss / tss;
    } else {
        res.r2 = rss <= 1e-30 ? 1.0 : 0.0;
    }
    res.adj_r2 = 1.0 - (1.0 - res.r2) * (dm - 1.0) / (dm - 2.0);

    if (unweighted) {
        // Pooled variance; guarded so an exactly-flat series still yields a
        // finite (if extreme) likelihood.
        double sigma2 = std::max(rss / dm, 1e-300);
        res.loglik = -0.5 * dm * std::log(kTwoPi * sigma2) - rss / (2.0 * sigma2);
    } else {
        double ll = -0.5 * rss;
        for (const GapRecord& r : series.records) {
            double sigma2 = r.mean_gap * r.mean_gap / static_cast<double>(r.count);
            ll += -0.5 * std::log(kTwoPi * sigma2);
        }
        res.loglik = ll;
    }
    return res;
}

ModelComparison compare_models(const ScalingFitResult& first,
                               const ScalingFitResult& second) {
    if (first.form == second.form)
        throw std::invalid_argument("compare_models needs two different forms");
    if (first.series_digest != second.series_digest)
        throw std::invalid_argument("compare_models: fits come from different series");
    ModelComparison cmp;
    cmp.llr = 2.0 * (first.loglik - second.loglik);
    cmp.p_value = std::erfc(std::sqrt(std::abs(cmp.llr) / 2.0));
    cmp.preferred = cmp.llr >= 0.0 ? first.form : second.form;
    cmp.non_nested = true;
    return cmp;
}

BootstrapCi bootstrap_ci(const GapSeries& series, ScalingForm form,
                         FitParam param, std::size_t resamples, double level,
                         std::uint64_t seed) {
    validate_records(series);
    if (resamples < 100) throw std::invalid_argument("bootstrap needs resamples >= 100");
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("bootstrap level must be in (0, 1)");

    size_t m = series.records.size();
    std::vector<double> values;
    values.reserve(resamples);
    size_t discarded = 0;

    GapSeries resample = series;
    resample.resampled = true;
    for (size_t b = 0; b < resamples; ++b) {
        Rng rng(derive_seed(seed, b));
        for (size_t i = 0; i < m; ++i)
            resample.records[i] = series.records[rng.below(m)];
        try {
            ScalingFitResult fit = fit_scaling(resample, form);
            values.push_back(param == FitParam::a ? fit.a : fit.b);
        } catch (const std::exception&) {
            ++discarded;
        }
    }

    if (discarded * 10 > resamples)
        throw std::runtime_error(
            "bootstrap_ci: more than 10% of replicates failed to refit (" +
            std::to_string(discarded) + " of " + std::to_string(resamples) + ")");

    std::sort(values.begin(), values.end());
    BootstrapCi ci;
    ci.lo = percentile_sorted(values, 100.0 * (1.0 - level) / 2.0);
    ci.hi = percentile_sorted(values, 100.0 * (1.0 + level) / 2.0);
    ci.replicates = values.size();
    ci.discarded = discarded;
    return ci;
}

double theory_bound(double lf, double sigma2_pe, std::size_t n) {
    if (lf < 0.0) throw std::invalid_argument("lf must be >= 0");
    if (sigma2_pe < 0.0) throw std::invalid_argument("sigma2_pe must be >= 0");
    if (n < 2) throw std::invalid_argument("theory_bound needs n >= 2");
    double dn = static_cast<double>(n);
    return 0.5 * lf * lf * sigma2_pe * std::log2(dn) / dn;
}

double averaged_predict(const Predictor& pred, const BitSequence& x,
                        std::size_t k, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("averaged_predict needs k >= 1");
    double acc = 0.0;
    for (size_t j = 0; j < k; ++j) {
        PermutationSpec perm = random_permutation(x.size(), derive_seed(seed, j));
        acc += pred.predict_one(apply_permutation(x, perm));
    }
    return acc / static_cast<double>(k);
}

PermAvgCurve variance_curve(const Predictor& pred,
                            const VarianceCurveConfig& cfg) {
    if (cfg.ks.size() < 2)
        throw std::invalid_argument("variance_curve needs at least two k values");
    for (size_t i = 0; i < cfg.ks.size(); ++i) {
        if (cfg.ks[i] < 1) throw std::invalid_argument("permutation counts must be >= 1");
        if (i > 0 && cfg.ks[i] <= cfg.ks[i - 1])
            throw std::invalid_argument("permutation counts must be strictly increasing");
    }
    if (cfg.trials < 2) throw std::invalid_argument("variance_curve needs trials >= 2");
    if (cfg.n_boot < 1) throw std::invalid_argument("n_boot must be >= 1");
    if (cfg.length < 2 || cfg.length % 2 != 0)
        throw std::invalid_argument("sequence length must be even and >= 2");

    uint64_t x_master = derive_seed(cfg.seed, 0);
    uint64_t perm_master = derive_seed(cfg.seed, 1);
    uint64_t boot_master = derive_seed(cfg.seed, 2);

    size_t nk = cfg.ks.size();
    std::vector<std::vector<double>> vals(nk, std::vector<double>(cfg.trials));
    // One fresh sequence per trial, shared across all k (paired design);
    // regenerated per item from its trial seed so items stay independent.
    parallel_for(nk * cfg.trials, cfg.threads, [&](size_t i) {
        size_t ki = i / cfg.trials;
        size_t t = i % cfg.trials;
        BitSequence x = balanced_sequences(static_cast<long>(cfg.length), 1,
                                           derive_seed(x_master, t))[0];
        vals[ki][t] = averaged_predict(pred, x, cfg.ks[ki],
                                       derive_seed(perm_master, i));
    });

    PermAvgCurve curve;
    curve.trials = cfg.trials;
    curve.points.reserve(nk);
    for (size_t ki = 0; ki < nk; ++ki)
        curve.points.push_back(
            PermAvgPoint{cfg.ks[ki], std::sqrt(sample_var(vals[ki]))});

    constexpr double kSpreadEps = 1e-12;
    for (const PermAvgPoint& p : curve.points) {
        if (p.std_dev <= kSpreadEps) {
            curve.exchangeable = true;
            return curve;
        }
    }

    auto slope_of = [&](const std::vector<double>& stds, double* slope) {
        std::vector<double> lx, ly;
        for (size_t ki = 0; ki < nk; ++ki) {
            if (stds[ki] > 1e-15) {
                lx.push_back(std::log2(static_cast<double>(cfg.ks[ki])));
                ly.push_back(std::log2(stds[ki]));
            }
        }
        return ols_slope(lx, ly, slope);
    };

    std::vector<double> point_stds(nk);
    for (size_t ki = 0; ki < nk; ++ki) point_stds[ki] = curve.points[ki].std_dev;
    double slope = 0.0;
    if (!slope_of(point_stds, &slope)) {
        curve.exchangeable = true;
        return curve;
    }
    curve.exponent = slope;

    std::vector<double> boot_slopes;
    boot_slopes.reserve(cfg.n_boot);
    std::vector<double> resampled(cfg.trials);
    std::vector<double> stds(nk);
    std::vector<size_t> idx(cfg.trials);
    for (size_t b = 0; b < cfg.n_boot; ++b) {
        Rng rng(derive_seed(boot_master, b));
        for (size_t t = 0; t < cfg.trials; ++t) idx[t] = rng.below(cfg.trials);
        for (size_t ki = 0; ki < nk; ++ki) {
            for (size_t t = 0; t < cfg.trials; ++t) resampled[t] = vals[ki][idx[t]];
            stds[ki] = std::sqrt(sample_var(resampled));
        }
        double s;
        if (slope_of(stds, &s)) boot_slopes.push_back(s);
    }
    if (boot_slopes.empty()) {
        curve.ci_lo = curve.ci_hi = slope;
    } else {
        std::sort(boot_slopes.begin(), boot_slopes.end());
        curve.ci_lo = percentile_sorted(boot_slopes, 2.5);
        curve.ci_hi = percentile_sorted(boot_slopes, 97.5);
    }
    return curve;
}

std::string gap_series_digest(const GapSeries& series) {
    std::string text;
    for (const GapRecord& r : series.records) {
        text += std::to_string(r.length);
        text += ',';
        text += format_g17(r.mean_gap);
        text += ',';
        text += format_g17(r.var_gap);
        text += ',';
        text += std::to_string(r.count);
        text += ';';
    }
    return digest_hex(fnv1a64(text.data(), text.size()));
}

std::string gap_series_csv(const GapSeries& series) {
    std::string out;
    out += "# predictor=" + series.predictor + "\n";
    out += "# mode=" + series.mode + "\n";
    out += "# seed=" + std::to_string(series.seed) + "\n";
    if (series.degenerate_variance) out += "# degenerate_variance=1\n";
    out += "n,mean_gap_bits,variance,count\n";
    for (const GapRecord& r : series.records) {
        out += std::to_string(r.length) + "," + format_g17(r.mean_gap) + "," +
               format_g17(r.var_gap) + "," + std::to_string(r.count) + "\n";
    }
    return out;
}

GapSeries gap_series_from_csv(const std::string& text) {
    GapSeries series;
    bool header_seen = false;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string body = trim(line.substr(1));
            size_t eq = body.find('=');
            if (eq == std::string::npos) continue;
            std::string key = trim(body.substr(0, eq));
            std::string val = trim(body.substr(eq + 1));
            if (key == "predictor") series.predictor = val;
            else if (key == "mode") series.mode = val;
            else if (key == "seed") series.seed = std::stoull(val);
            else if (key == "degenerate_variance") series.degenerate_variance = (val == "1");
            continue;
        }
        if (!header_seen) {
            if (line != "n,mean_gap_bits,variance,count")
                throw std::invalid_argument("bad gap csv header: " + line);
            header_seen = true;
            continue;
        }
        std::vector<std::string> cols = split(line, ',');
        if (cols.size() != 4)
            throw std::invalid_argument("bad gap csv row: " + line);
        GapRecord r;
        try {
            r.length = std::stoull(trim(cols[0]));
            r.mean_gap = std::stod(trim(cols[1]));
            r.var_gap = std::stod(trim(cols[2]));
            r.count = std::stoull(trim(cols[3]));
        } catch (const std::exception&) {
            throw std::invalid_argument("bad gap csv row: " + line);
        }
        series.records.push_back(r);
    }
    if (!header_seen) throw std::invalid_argument("gap csv has no header row");
    return series;
}

std::string scaling_fit_json(const ScalingFitResult& fit) {
    nlohmann::json j;
    j["form"] = scaling_form_name(fit.form);
    j["a"] = fit.a;
    j["b"] = fit.b;
    j["se_a"] = fit.se_a;
    j["se_b"] = fit.se_b;
    j["r2"] = fit.r2;
    j["adj_r2"] = fit.adj_r2;
    j["loglik"] = fit.loglik;
    j["rss"] = fit.rss;
    j["n_records"] = fit.n_records;
    j["unweighted"] = fit.unweighted;
    j["seed"] = fit.series_seed;
    j["series_digest"] = fit.series_digest;
    return j.dump(2) + "\n";
}

std::string comparison_json(const ModelComparison& cmp) {
    nlohmann::json j;
    j["llr"] = cmp.llr;
    j["p_value"] = cmp.p_value;
    j["preferred"] = scaling_form_name(cmp.preferred);
    j["non_nested_heuristic"] = cmp.non_nested;
    return j.dump(2) + "\n";
}

}  // namespace martingap
