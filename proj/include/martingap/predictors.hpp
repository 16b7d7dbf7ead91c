#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "martingap/bitseq.hpp"

namespace martingap {

// All predictor outputs are clamped into [kProbFloor, 1 - kProbFloor] so
// downstream log-probabilities stay finite.
constexpr double kProbFloor = 1e-6;

inline double clamp_prob(double p) {
  if (p < kProbFloor) return kProbFloor;
  if (p > 1.0 - kProbFloor) return 1.0 - kProbFloor;
  return p;
}

// Deterministic next-bit predictor: P(next = 1 | prefix).
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual double predict_one(std::span<const uint8_t> prefix) const = 0;
  virtual std::string name() const = 0;

  double predict_one(const BitSequence& x) const {
    return predict_one(std::span<const uint8_t>(x.bits));
  }
};

// Posterior predictive (alpha0 + S_t) / (alpha0 + beta0 + t). A function of
// (S_t, t) only, hence invariant under prefix permutations.
class BetaBernoulliPredictor : public Predictor {
 public:
  using Predictor::predict_one;
  BetaBernoulliPredictor(double alpha0, double beta0);
  double predict_one(std::span<const uint8_t> prefix) const override;
  std::string name() const override;

  double alpha0() const { return alpha0_; }
  double beta0() const { return beta0_; }

 private:
  double alpha0_, beta0_;
};

// Position-aware fixture: perturbs the exchangeable logit by g(t)*s(prefix)
// with g(t) = (lf^2 * sigma2_pe / 2) * log2(t)/t (g(1) := g(2)) and
// s(prefix) = (1/t) * sum_i sin(2*pi*i/period) * (2*x_i - 1), |s| <= 1.
// Its permutation logit gap is bounded by 2*g(t) by construction.
class PositionAwareSurrogate : public Predictor {
 public:
  using Predictor::predict_one;
  PositionAwareSurrogate(double lf, double sigma2_pe, double period = 64.0,
                         double alpha0 = 1.0, double beta0 = 1.0);
  double predict_one(std::span<const uint8_t> prefix) const override;
  std::string name() const override;

  double g(long t) const;  // logit perturbation scale at prefix length t
  double s(std::span<const uint8_t> prefix) const;
  double envelope_coefficient() const { return 0.5 * lf_ * lf_ * sigma2_pe_; }

 private:
  double lf_, sigma2_pe_, period_;
  BetaBernoulliPredictor base_;
};

// Add-one smoothing: (S_t + 1) / (t + 2).
class LaplacePredictor : public Predictor {
 public:
  using Predictor::predict_one;
  double predict_one(std::span<const uint8_t> prefix) const override;
  std::string name() const override { return "laplace"; }
};

// Empirical rate S_t / t, clamped; 0.5 on the empty prefix.
class MlePredictor : public Predictor {
 public:
  using Predictor::predict_one;
  explicit MlePredictor(double floor = kProbFloor) : floor_(floor) {}
  double predict_one(std::span<const uint8_t> prefix) const override;
  std::string name() const override { return "mle"; }

 private:
  double floor_;
};

double beta_predict(std::span<const uint8_t> prefix, double alpha0, double beta0);
double laplace_predict(std::span<const uint8_t> prefix);
double mle_predict(std::span<const uint8_t> prefix, double floor = kProbFloor);

// Factory for the CLI / config layer. Throws std::invalid_argument on an
// unknown name. Recognized: beta, laplace, mle, surrogate.
struct PredictorConfig {
  std::string kind = "beta";
  double alpha0 = 1.0;
  double beta0 = 1.0;
  double lf = 1.0;
  double sigma2_pe = 1.0;
  double period = 64.0;
  double floor = kProbFloor;  // mle only
};
std::unique_ptr<Predictor> make_predictor(const PredictorConfig& cfg);

}  // namespace martingap
