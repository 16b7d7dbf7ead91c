#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "martingap/gapstats.hpp"

namespace martingap {

struct SpectralPeak {
    double period = 0.0;          // positions
    double power_fraction = 0.0;  // share of total non-DC spectral power
    double amplitude = 0.0;       // projection estimate, bits
    double phase = 0.0;           // radians in [0, 2pi)
    std::size_t bin = 0;          // padded FFT bin index
};

struct SpectralPeaks {
    std::vector<SpectralPeak> peaks;  // sorted by power, descending
    double median_power = 0.0;
    double total_power = 0.0;
    std::size_t padded_size = 0;
};

// Detrends the series (WLS fit of the given form), zero-pads the residuals
// to a power of two, and reports spectral peaks: local maxima above 3x the
// median non-DC power.  Peaks whose projected amplitude falls below 1e-9 of
// the series scale are discarded as numerical noise, so an exact trend
// yields no peaks.  Requires >= 16 uniformly spaced lengths.
SpectralPeaks detect_harmonics(const GapSeries& series, double base_period,
                               ScalingForm trend_form = ScalingForm::lognn);

struct HarmonicTerm {
    int k = 0;               // harmonic index, period = base/k
    double amplitude = 0.0;  // >= 0 after normalization
    double phase = 0.0;      // [0, 2pi)
};

struct HarmonicModel {
    ScalingForm trend_form = ScalingForm::lognn;
    double a = 0.0;  // trend coefficient (no intercept in this model)
    double base_period = 64.0;
    std::vector<HarmonicTerm> harmonics;  // k = 1, 2, 3
    double residual_norm = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    // Cost after the initial point and after each accepted step;
    // non-increasing by construction.
    std::vector<double> cost_trace;

    double eval(double n) const;            // full model at position n
    double harmonic_part(double n) const;   // oscillatory part only
};

// Fits mean_gap ~ a*u(n) + sum_{k=1..3} B_k sin(2 pi k n / p + phi_k) by
// Levenberg-Marquardt (identity damping, lambda0 = 1e-3, x10 on a rejected
// step, /10 on an accepted one, stop on relative cost change < 1e-10 or 200
// iterations).  Initial amplitudes and phases come from direct sinusoid
// projections of the detrended series.  Requires >= 10 records; a model
// that hits the iteration cap is returned with converged == false.
HarmonicModel fit_harmonic_model(const GapSeries& series, double base_period,
                                 ScalingForm trend_form = ScalingForm::lognn);

// Nadaraya-Watson smoothing with a Gaussian kernel of bandwidth h (position
// units), evaluated at the input positions.  Linear in `values`; h > 0.
std::vector<double> residue_smooth(const std::vector<double>& positions,
                                   const std::vector<double>& values,
                                   double h);

struct DebiasResult {
    GapSeries debiased;
    HarmonicModel model;
    double variance_reduction_pct = 0.0;  // detrended variance, before vs after
    double r2_before = 0.0;  // detrended gaps on the fundamental sin/cos pair
    double r2_after = 0.0;
    double band_power_before = 0.0;  // spectral power in harmonic bins +-1
    double band_power_after = 0.0;
};

// Two-stage debiasing: stage 1 subtracts the fitted harmonics; stage 2
// subtracts the kernel-smoothed, harmonic-band-limited part of what
// remains (default bandwidth p/8), leaving the trend untouched.  Metrics
// compare detrended variance, the period-p position-bias R^2, and the
// harmonic-band spectral power before and after.  Same grid requirements
// as detect_harmonics.
DebiasResult debias(const GapSeries& series, double base_period,
                    ScalingForm trend_form = ScalingForm::lognn,
                    double bandwidth = 0.0);  // 0 -> base_period / 8

std::string harmonic_model_json(const HarmonicModel& model);
std::string debias_metrics_json(const DebiasResult& result);

}  // namespace martingap
