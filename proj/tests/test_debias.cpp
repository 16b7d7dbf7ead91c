#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "martingap/debias.hpp"
#include "martingap/gapstats.hpp"
#include "martingap/rng.hpp"

using namespace martingap;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Harmonic {
  double b;
  double phi;
};

GapSeries harmonic_series(double a, const std::vector<Harmonic>& hs,
                          double noise_sd, uint64_t seed, double period = 64.0) {
  GapSeries s;
  s.predictor = "synthetic";
  s.mode = "permutation";
  s.seed = seed;
  Rng rng(seed);
  for (size_t n = 10; n <= 198; n += 2) {
    double y = a * std::log2(double(n)) / double(n);
    for (size_t k = 0; k < hs.size(); ++k)
      y += hs[k].b * std::sin(kTwoPi * double(k + 1) * double(n) / period + hs[k].phi);
    if (noise_sd > 0) y += noise_sd * rng.normal();
    s.records.push_back({n, y, 1e-8, 100});
  }
  return s;
}

double detrended_variance(const GapSeries& s) {
  auto fit = fit_scaling(s, ScalingForm::lognn);
  double mean = 0.0;
  std::vector<double> resid;
  for (const auto& r : s.records) {
    double pred = fit.a * std::log2(double(r.length)) / double(r.length) + fit.b;
    resid.push_back(r.mean_gap - pred);
    mean += resid.back();
  }
  mean /= double(resid.size());
  double acc = 0.0;
  for (double v : resid) acc += (v - mean) * (v - mean);
  return acc / double(resid.size() - 1);
}

}  // namespace

TEST_CASE("detect_harmonics finds nothing in a pure trend") {
  auto series = harmonic_series(0.18, {}, 0.0, 1);
  auto peaks = detect_harmonics(series, 64.0);
  CHECK(peaks.peaks.empty());
}

TEST_CASE("detect_harmonics localizes an injected fundamental") {
  auto series = harmonic_series(0.18, {{0.01, 0.0}}, 0.0, 2);
  auto peaks = detect_harmonics(series, 64.0);
  REQUIRE(!peaks.peaks.empty());
  CHECK(peaks.peaks[0].period == doctest::Approx(64.0).epsilon(1.0 / 64.0));
  CHECK(peaks.peaks[0].power_fraction > 0.5);
  double total_fraction = 0.0;
  for (const auto& p : peaks.peaks) {
    CHECK(p.period > 0.0);
    total_fraction += p.power_fraction;
  }
  CHECK(total_fraction <= 1.0 + 1e-12);
}

TEST_CASE("detect_harmonics validates its grid") {
  auto series = harmonic_series(0.18, {{0.01, 0.0}}, 0.0, 3);
  series.records.erase(series.records.begin() + 5);  // break uniform spacing
  CHECK_THROWS_AS(detect_harmonics(series, 64.0), std::runtime_error);

  auto few = harmonic_series(0.18, {{0.01, 0.0}}, 0.0, 3);
  few.records.resize(10);
  CHECK_THROWS_AS(detect_harmonics(few, 64.0), std::invalid_argument);
}

TEST_CASE("fit_harmonic_model null case recovers the bare trend") {
  auto series = harmonic_series(0.18, {}, 0.0, 4);
  auto model = fit_harmonic_model(series, 64.0);
  CHECK(model.a == doctest::Approx(0.18).epsilon(1e-6));
  for (const auto& h : model.harmonics) CHECK(h.amplitude <= 1e-6);
  CHECK(model.converged);
}

TEST_CASE("fit_harmonic_model noiseless single harmonic to 1e-4") {
  auto series = harmonic_series(0.18, {{0.01, 0.7}}, 0.0, 5);
  auto model = fit_harmonic_model(series, 64.0);
  REQUIRE(model.harmonics.size() == 3);
  CHECK(model.a == doctest::Approx(0.18).epsilon(1e-4));
  CHECK(model.harmonics[0].amplitude == doctest::Approx(0.01).epsilon(1e-2));
  CHECK(std::abs(model.harmonics[0].amplitude - 0.01) < 1e-4);
  CHECK(std::abs(model.harmonics[0].phase - 0.7) < 1e-2);
  CHECK(model.harmonics[1].amplitude < 1e-6);
  CHECK(model.harmonics[2].amplitude < 1e-6);
  CHECK(model.converged);
  CHECK(model.residual_norm < 1e-8);
}

TEST_CASE("fit_harmonic_model three harmonics under noise") {
  std::vector<Harmonic> truth = {{0.01, 0.7}, {0.005, 2.1}, {0.003, 4.4}};
  auto series = harmonic_series(0.18, truth, 5e-4, 20240801);
  auto model = fit_harmonic_model(series, 64.0);
  REQUIRE(model.harmonics.size() == 3);
  for (size_t k = 0; k < 3; ++k) {
    CHECK(model.harmonics[k].amplitude ==
          doctest::Approx(truth[k].b).epsilon(0.05));
    CHECK(model.harmonics[k].amplitude >= 0.0);
    CHECK(model.harmonics[k].phase >= 0.0);
    CHECK(model.harmonics[k].phase < kTwoPi);
  }
}

TEST_CASE("fit_harmonic_model cost trace is non-increasing") {
  auto series = harmonic_series(0.15, {{0.008, 1.0}, {0.004, 2.5}}, 1e-3, 6);
  auto model = fit_harmonic_model(series, 64.0);
  REQUIRE(model.cost_trace.size() >= 2);
  for (size_t i = 1; i < model.cost_trace.size(); ++i)
    CHECK(model.cost_trace[i] <= model.cost_trace[i - 1] + 1e-15);
  CHECK(model.iterations <= 200);
}

TEST_CASE("fit_harmonic_model eval decomposes into trend plus harmonics") {
  auto series = harmonic_series(0.18, {{0.01, 0.7}}, 0.0, 7);
  auto model = fit_harmonic_model(series, 64.0);
  for (double n : {10.0, 50.0, 128.0}) {
    double trend = model.a * std::log2(n) / n;
    CHECK(model.eval(n) ==
          doctest::Approx(trend + model.harmonic_part(n)).epsilon(1e-12));
  }
}

TEST_CASE("residue_smooth exactness, locality, and validation") {
  std::vector<double> pos;
  for (int i = 0; i < 40; ++i) pos.push_back(10.0 + 2.0 * i);

  std::vector<double> constant(40, 1.7);
  auto sc = residue_smooth(pos, constant, 8.0);
  for (double v : sc) CHECK(v == doctest::Approx(1.7).epsilon(1e-12));

  std::vector<double> impulse(40, 0.0);
  impulse[20] = 1.0;
  auto si = residue_smooth(pos, impulse, 0.2);  // h = step/10
  CHECK(si[20] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(si[19]) < 1e-9);
  CHECK(std::abs(si[21]) < 1e-9);

  CHECK_THROWS_AS(residue_smooth(pos, constant, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(residue_smooth(pos, {1.0}, 1.0), std::invalid_argument);
}

TEST_CASE("residue_smooth damps white noise") {
  std::vector<double> pos, noise;
  Rng rng(88);
  for (int i = 0; i < 200; ++i) {
    pos.push_back(double(2 * i));
    noise.push_back(rng.normal());
  }
  auto smoothed = residue_smooth(pos, noise, 8.0);
  auto var = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= double(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / double(v.size() - 1);
  };
  CHECK(var(smoothed) < 0.2 * var(noise));
}

TEST_CASE("residue_smooth is linear") {
  std::vector<double> pos, r1, r2;
  Rng rng(89);
  for (int i = 0; i < 50; ++i) {
    pos.push_back(double(i));
    r1.push_back(rng.normal());
    r2.push_back(rng.normal());
  }
  const double a = 1.3, b = -0.4;
  std::vector<double> mix(50);
  for (int i = 0; i < 50; ++i) mix[i] = a * r1[i] + b * r2[i];
  auto sm = residue_smooth(pos, mix, 4.0);
  auto s1 = residue_smooth(pos, r1, 4.0);
  auto s2 = residue_smooth(pos, r2, 4.0);
  for (int i = 0; i < 50; ++i)
    CHECK(sm[i] == doctest::Approx(a * s1[i] + b * s2[i]).epsilon(1e-12));
}

TEST_CASE("debias leaves harmonic-free series alone") {
  auto series = harmonic_series(0.18, {}, 0.0, 10);
  auto result = debias(series, 64.0);
  REQUIRE(result.debiased.records.size() == series.records.size());
  for (size_t i = 0; i < series.records.size(); ++i)
    CHECK(std::abs(result.debiased.records[i].mean_gap -
                   series.records[i].mean_gap) < 1e-9);
}

TEST_CASE("debias strips injected harmonics but keeps the trend") {
  std::vector<Harmonic> truth = {{0.01, 0.7}, {0.005, 2.1}, {0.003, 4.4}};
  auto series = harmonic_series(0.18, truth, 5e-4, 11);
  auto result = debias(series, 64.0);

  auto before = fit_scaling(series, ScalingForm::lognn);
  auto after = fit_scaling(result.debiased, ScalingForm::lognn);
  CHECK(std::abs(after.a - before.a) / std::abs(before.a) < 0.10);

  CHECK(result.band_power_after <= 0.10 * result.band_power_before);
  CHECK(result.variance_reduction_pct > 0.0);
  CHECK(result.r2_after < result.r2_before);
  CHECK(detrended_variance(result.debiased) < detrended_variance(series));
}

TEST_CASE("debias is idempotent within tolerance") {
  std::vector<Harmonic> truth = {{0.01, 0.7}, {0.004, 1.9}};
  auto series = harmonic_series(0.18, truth, 5e-4, 12);
  auto once = debias(series, 64.0);
  auto twice = debias(once.debiased, 64.0);
  double var_once = detrended_variance(once.debiased);
  double change = 0.0;
  for (size_t i = 0; i < once.debiased.records.size(); ++i) {
    double d = twice.debiased.records[i].mean_gap - once.debiased.records[i].mean_gap;
    change += d * d;
  }
  change /= double(once.debiased.records.size());
  CHECK(change < 0.01 * var_once);
}

TEST_CASE("harmonic model and metrics serialize with the expected fields") {
  auto series = harmonic_series(0.18, {{0.01, 0.7}}, 0.0, 13);
  auto model = fit_harmonic_model(series, 64.0);
  auto text = harmonic_model_json(model);
  CHECK(text.find("\"trend_form\"") != std::string::npos);
  CHECK(text.find("\"harmonics\"") != std::string::npos);
  CHECK(text.find("\"residual_norm\"") != std::string::npos);
  CHECK(text.find("\"converged\"") != std::string::npos);

  auto result = debias(series, 64.0);
  auto mtext = debias_metrics_json(result);
  CHECK(mtext.find("\"variance_reduction_pct\"") != std::string::npos);
  CHECK(mtext.find("\"r2_before\"") != std::string::npos);
  CHECK(mtext.find("\"band_power_after\"") != std::string::npos);
}
