#include "martingap/debias.hpp"

#include "martingap/lm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "json.hpp"

namespace martingap {

namespace {

constexpr double kPi = 3.141592653589793238462643383279;
constexpr double kTwoPi = 2.0 * kPi;

double wrap_phase(double phi) {
    phi = std::fmod(phi, kTwoPi);
    if (phi < 0.0) phi += kTwoPi;
    return phi;
}

double trend_regressor(ScalingForm form, double n) {
    return form == ScalingForm::lognn ? std::log2(n) / n : 1.0 / n;
}

// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse) {
    size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                std::complex<double> u = a[i + j];
                std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        for (std::complex<double>& z : a) z /= static_cast<double>(n);
    }
}

size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

struct UniformGrid {
    std::vector<double> pos;
    double step = 0.0;
};

UniformGrid uniform_grid(const GapSeries& series, size_t min_records) {
    const auto& rec = series.records;
    if (rec.size() < min_records)
        throw std::invalid_argument("spectral analysis needs at least " +
                                    std::to_string(min_records) + " records");
    if (rec[1].length <= rec[0].length)
        throw std::invalid_argument("record lengths must be strictly increasing");
    size_t step = rec[1].length - rec[0].length;
    for (size_t i = 1; i < rec.size(); ++i) {
        if (rec[i].length <= rec[i - 1].length ||
            rec[i].length - rec[i - 1].length != step)
            throw std::runtime_error(
                "non-uniform length grid: resample before spectral analysis");
    }
    UniformGrid g;
    g.step = static_cast<double>(step);
    g.pos.reserve(rec.size());
    for (const GapRecord& r : rec) g.pos.push_back(static_cast<double>(r.length));
    return g;
}

std::vector<double> series_values(const GapSeries& series) {
    std::vector<double> y;
    y.reserve(series.records.size());
    for (const GapRecord& r : series.records) y.push_back(r.mean_gap);
    return y;
}

std::vector<double> detrended_residuals(const GapSeries& series,
                                        ScalingForm form) {
    ScalingFitResult fit = fit_scaling(series, form);
    std::vector<double> r;
    r.reserve(series.records.size());
    for (const GapRecord& rec : series.records) {
        double u = trend_regressor(form, static_cast<double>(rec.length));
        r.push_back(rec.mean_gap - (fit.a * u + fit.b));
    }
    return r;
}

std::vector<double> power_spectrum(const std::vector<double>& values,
                                   size_t padded) {
    std::vector<std::complex<double>> buf(padded, {0.0, 0.0});
    for (size_t i = 0; i < values.size(); ++i) buf[i] = {values[i], 0.0};
    fft(buf, false);
    std::vector<double> power(padded / 2 + 1);
    for (size_t j = 0; j <= padded / 2; ++j) power[j] = std::norm(buf[j]);
    return power;
}

// Least-squares projection of values onto sin/cos at the given period;
// returns {amplitude, phase} for the model B*sin(2 pi n / period + phi).
std::pair<double, double> project_sinusoid(const std::vector<double>& pos,
                                           const std::vector<double>& values,
                                           double period) {
    double cs = 0.0, cc = 0.0;
    size_t m = values.size();
    for (size_t i = 0; i < m; ++i) {
        double theta = kTwoPi * pos[i] / period;
        cs += values[i] * std::sin(theta);
        cc += values[i] * std::cos(theta);
    }
    cs *= 2.0 / static_cast<double>(m);
    cc *= 2.0 / static_cast<double>(m);
    double amp = std::hypot(cs, cc);
    double phase = amp > 0.0 ? wrap_phase(std::atan2(cc, cs)) : 0.0;
    return {amp, phase};
}

// Padded FFT bins carrying harmonic k of the base period, with +-1 slack.
std::vector<size_t> harmonic_bins(double base_period, double step,
                                  size_t padded, int max_k) {
    std::vector<size_t> bins;
    for (int k = 1; k <= max_k; ++k) {
        double centre = static_cast<double>(k) * static_cast<double>(padded) *
                        step / base_period;
        long c = std::lround(centre);
        for (long j = c - 1; j <= c + 1; ++j) {
            if (j >= 1 && j <= static_cast<long>(padded / 2))
                bins.push_back(static_cast<size_t>(j));
        }
    }
    std::sort(bins.begin(), bins.end());
    bins.erase(std::unique(bins.begin(), bins.end()), bins.end());
    return bins;
}

double band_power_of(const std::vector<double>& detrended, size_t padded,
                     const std::vector<size_t>& bins) {
    std::vector<double> power = power_spectrum(detrended, padded);
    double total = 0.0;
    for (size_t j : bins) total += power[j];
    return total;
}

// R^2 of values regressed on {sin, cos, 1} at the base period.
double fundamental_r2(const std::vector<double>& pos,
                      const std::vector<double>& values, double period) {
    size_t m = values.size();
    Eigen::MatrixXd x(m, 3);
    Eigen::VectorXd y(m);
    for (size_t i = 0; i < m; ++i) {
        double theta = kTwoPi * pos[i] / period;
        x(i, 0) = std::sin(theta);
        x(i, 1) = std::cos(theta);
        x(i, 2) = 1.0;
        y(i) = values[i];
    }
    Eigen::VectorXd beta = (x.transpose() * x).ldlt().solve(x.transpose() * y);
    double rss = (y - x * beta).squaredNorm();
    double mean = y.mean();
    double tss = (y.array() - mean).square().sum();
    if (tss <= 0.0) return 0.0;
    return 1.0 - rss / tss;
}

double population_variance(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size());
}

}  // namespace

double HarmonicModel::harmonic_part(double n) const {
    double acc = 0.0;
    for (const HarmonicTerm& h : harmonics) {
        acc += h.amplitude *
               std::sin(kTwoPi * static_cast<double>(h.k) * n / base_period +
                        h.phase);
    }
    return acc;
}

double HarmonicModel::eval(double n) const {
    return a * trend_regressor(trend_form, n) + harmonic_part(n);
}

SpectralPeaks detect_harmonics(const GapSeries& series, double base_period,
                               ScalingForm trend_form) {
    if (!(base_period > 0.0))
        throw std::invalid_argument("base period must be positive");
    UniformGrid grid = uniform_grid(series, 16);
    std::vector<double> resid = detrended_residuals(series, trend_form);

    size_t padded = next_pow2(resid.size());
    std::vector<double> power = power_spectrum(resid, padded);
    size_t half = padded / 2;

    std::vector<double> nondc(power.begin() + 1, power.begin() + half + 1);
    std::vector<double> sorted = nondc;
    std::sort(sorted.begin(), sorted.end());
    double median = sorted[sorted.size() / 2];
    if (sorted.size() % 2 == 0)
        median = 0.5 * (median + sorted[sorted.size() / 2 - 1]);
    double total = 0.0;
    for (double p : nondc) total += p;

    double scale = 0.0;
    for (const GapRecord& r : series.records)
        scale = std::max(scale, std::abs(r.mean_gap));
    double amp_floor = 1e-9 * std::max(scale, 1e-300);

    SpectralPeaks out;
    out.median_power = median;
    out.total_power = total;
    out.padded_size = padded;

    for (size_t j = 1; j <= half; ++j) {
        if (!(power[j] > 3.0 * median)) continue;
        if (!(power[j] > power[j - 1])) continue;
        if (j < half && !(power[j] > power[j + 1])) continue;
        double period = static_cast<double>(padded) * grid.step /
                        static_cast<double>(j);
        auto [amp, phase] = project_sinusoid(grid.pos, resid, period);
        if (!(amp > amp_floor)) continue;
        SpectralPeak peak;
        peak.period = period;
        peak.power_fraction = total > 0.0 ? power[j] / total : 0.0;
        peak.amplitude = amp;
        peak.phase = phase;
        peak.bin = j;
        out.peaks.push_back(peak);
    }
    std::sort(out.peaks.begin(), out.peaks.end(),
              [](const SpectralPeak& a, const SpectralPeak& b) {
                  return a.power_fraction > b.power_fraction;
              });
    return out;
}

HarmonicModel fit_harmonic_model(const GapSeries& series, double base_period,
                                 ScalingForm trend_form) {
    if (!(base_period > 0.0))
        throw std::invalid_argument("base period must be positive");
    if (series.records.size() < 10)
        throw std::invalid_argument("harmonic fit needs at least 10 records");
    for (size_t i = 1; i < series.records.size(); ++i)
        if (series.records[i].length <= series.records[i - 1].length)
            throw std::invalid_argument("record lengths must be strictly increasing");

    size_t m = series.records.size();
    std::vector<double> pos(m), y(m);
    for (size_t i = 0; i < m; ++i) {
        pos[i] = static_cast<double>(series.records[i].length);
        y[i] = series.records[i].mean_gap;
    }

    // Initial trend coefficient by projection (the model has no intercept),
    // then harmonic seeds from sinusoid projections of what remains.
    double suu = 0.0, suy = 0.0;
    for (size_t i = 0; i < m; ++i) {
        double u = trend_regressor(trend_form, pos[i]);
        suu += u * u;
        suy += u * y[i];
    }
    if (!(suu > 0.0)) throw std::runtime_error("degenerate trend regressor");
    double a0 = suy / suu;

    std::vector<double> resid(m);
    for (size_t i = 0; i < m; ++i)
        resid[i] = y[i] - a0 * trend_regressor(trend_form, pos[i]);

    constexpr int kHarmonics = 3;
    // theta = [a, B1, phi1, B2, phi2, B3, phi3]
    Eigen::VectorXd theta(1 + 2 * kHarmonics);
    theta(0) = a0;
    for (int k = 1; k <= kHarmonics; ++k) {
        auto [amp, phase] =
            project_sinusoid(pos, resid, base_period / static_cast<double>(k));
        theta(2 * k - 1) = amp;
        theta(2 * k) = phase;
    }

    auto model_at = [&](const Eigen::VectorXd& th, double n) {
        double v = th(0) * trend_regressor(trend_form, n);
        for (int k = 1; k <= kHarmonics; ++k) {
            v += th(2 * k - 1) *
                 std::sin(kTwoPi * k * n / base_period + th(2 * k));
        }
        return v;
    };
    auto residual_fn = [&](const Eigen::VectorXd& th) {
        Eigen::VectorXd r(m);
        for (size_t i = 0; i < m; ++i) r(i) = y[i] - model_at(th, pos[i]);
        return r;
    };
    auto jacobian_fn = [&](const Eigen::VectorXd& th) {
        Eigen::MatrixXd jac(m, th.size());
        for (size_t i = 0; i < m; ++i) {
            double n = pos[i];
            jac(i, 0) = trend_regressor(trend_form, n);
            for (int k = 1; k <= kHarmonics; ++k) {
                double arg = kTwoPi * k * n / base_period + th(2 * k);
                jac(i, 2 * k - 1) = std::sin(arg);
                jac(i, 2 * k) = th(2 * k - 1) * std::cos(arg);
            }
        }
        return jac;
    };

    LmResult fit = lm_minimize(theta, residual_fn, jacobian_fn);

    HarmonicModel out;
    out.trend_form = trend_form;
    out.base_period = base_period;
    out.cost_trace = fit.cost_trace;
    out.iterations = fit.iterations;
    out.converged = fit.converged;
    out.a = fit.theta(0);
    for (int k = 1; k <= kHarmonics; ++k) {
        HarmonicTerm term;
        term.k = k;
        term.amplitude = fit.theta(2 * k - 1);
        term.phase = fit.theta(2 * k);
        if (term.amplitude < 0.0) {
            term.amplitude = -term.amplitude;
            term.phase += kPi;
        }
        term.phase = wrap_phase(term.phase);
        out.harmonics.push_back(term);
    }
    out.residual_norm = std::sqrt(fit.cost);
    return out;
}

std::vector<double> residue_smooth(const std::vector<double>& positions,
                                   const std::vector<double>& values,
                                   double h) {
    if (positions.size() != values.size())
        throw std::invalid_argument("positions and values must have equal length");
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    size_t m = values.size();
    std::vector<double> out(m, 0.0);
    for (size_t i = 0; i < m; ++i) {
        double num = 0.0, den = 0.0;
        for (size_t j = 0; j < m; ++j) {
            double u = (positions[i] - positions[j]) / h;
            double w = std::exp(-0.5 * u * u);
            num += w * values[j];
            den += w;
        }
        out[i] = num / den;  // den >= 1 (the i == j term)
    }
    return out;
}

DebiasResult debias(const GapSeries& series, double base_period,
                    ScalingForm trend_form, double bandwidth) {
    UniformGrid grid = uniform_grid(series, 16);
    double h = bandwidth > 0.0 ? bandwidth : base_period / 8.0;

    DebiasResult res;
    res.model = fit_harmonic_model(series, base_period, trend_form);

    size_t m = series.records.size();
    size_t padded = next_pow2(m);
    std::vector<size_t> bins = harmonic_bins(base_period, grid.step, padded, 3);

    // Stage 1: remove the fitted harmonics.
    GapSeries stage1 = series;
    for (size_t i = 0; i < m; ++i)
        stage1.records[i].mean_gap -= res.model.harmonic_part(grid.pos[i]);

    // Stage 2: smooth the harmonic-band part of what remains and subtract
    // it.  The band excludes bin 0, so the trend passes through untouched.
    std::vector<double> d1 = detrended_residuals(stage1, trend_form);
    std::vector<std::complex<double>> buf(padded, {0.0, 0.0});
    for (size_t i = 0; i < m; ++i) buf[i] = {d1[i], 0.0};
    fft(buf, false);
    std::vector<bool> keep(padded, false);
    for (size_t j : bins) {
        keep[j] = true;
        keep[padded - j] = true;  // conjugate mirror
    }
    for (size_t j = 0; j < padded; ++j)
        if (!keep[j]) buf[j] = {0.0, 0.0};
    fft(buf, true);
    std::vector<double> band(m);
    for (size_t i = 0; i < m; ++i) band[i] = buf[i].real();
    std::vector<double> smoothed = residue_smooth(grid.pos, band, h);

    res.debiased = stage1;
    for (size_t i = 0; i < m; ++i) res.debiased.records[i].mean_gap -= smoothed[i];

    std::vector<double> d0 = detrended_residuals(series, trend_form);
    std::vector<double> d2 = detrended_residuals(res.debiased, trend_form);

    double v0 = population_variance(d0);
    double v2 = population_variance(d2);
    res.variance_reduction_pct = v0 > 0.0 ? 100.0 * (1.0 - v2 / v0) : 0.0;
    res.r2_before = fundamental_r2(grid.pos, d0, base_period);
    res.r2_after = fundamental_r2(grid.pos, d2, base_period);
    res.band_power_before = band_power_of(d0, padded, bins);
    res.band_power_after = band_power_of(d2, padded, bins);
    return res;
}

std::string harmonic_model_json(const HarmonicModel& model) {
    nlohmann::json j;
    j["trend_form"] = scaling_form_name(model.trend_form);
    j["a"] = model.a;
    j["base_period"] = model.base_period;
    nlohmann::json terms = nlohmann::json::array();
    for (const HarmonicTerm& h : model.harmonics) {
        nlohmann::json t;
        t["k"] = h.k;
        t["amplitude"] = h.amplitude;
        t["phase"] = h.phase;
        terms.push_back(t);
    }
    j["harmonics"] = terms;
    j["residual_norm"] = model.residual_norm;
    j["converged"] = model.converged;
    j["iterations"] = model.iterations;
    return j.dump(2) + "\n";
}

std::string debias_metrics_json(const DebiasResult& result) {
    nlohmann::json j;
    j["variance_reduction_pct"] = result.variance_reduction_pct;
    j["r2_before"] = result.r2_before;
    j["r2_after"] = result.r2_after;
    j["band_power_before"] = result.band_power_before;
    j["band_power_after"] = result.band_power_after;
    j["converged"] = result.model.converged;
    return j.dump(2) + "\n";
}

}  // namespace martingap
