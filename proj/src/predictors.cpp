#include "martingap/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace martingap {

namespace {

long count_ones(std::span<const uint8_t> prefix) {
  return std::accumulate(prefix.begin(), prefix.end(), 0L);
}

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

BetaBernoulliPredictor::BetaBernoulliPredictor(double alpha0, double beta0)
    : alpha0_(alpha0), beta0_(beta0) {
  if (!(alpha0 > 0.0) || !(beta0 > 0.0))
    throw std::domain_error("BetaBernoulliPredictor: pseudo-counts must be > 0");
}

double BetaBernoulliPredictor::predict_one(std::span<const uint8_t> prefix) const {
  const double t = double(prefix.size());
  const double s = double(count_ones(prefix));
  return clamp_prob((alpha0_ + s) / (alpha0_ + beta0_ + t));
}

std::string BetaBernoulliPredictor::name() const {
  return "beta(" + std::to_string(alpha0_) + "," + std::to_string(beta0_) + ")";
}

PositionAwareSurrogate::PositionAwareSurrogate(double lf, double sigma2_pe,
                                               double period, double alpha0,
                                               double beta0)
    : lf_(lf), sigma2_pe_(sigma2_pe), period_(period), base_(alpha0, beta0) {
  if (!(period > 0.0))
    throw std::domain_error("PositionAwareSurrogate: period must be > 0");
  if (sigma2_pe < 0.0)
    throw std::domain_error("PositionAwareSurrogate: sigma2_pe must be >= 0");
}

double PositionAwareSurrogate::g(long t) const {
  if (t < 2) t = 2;  // log2(1) = 0 would switch the perturbation off at t=1
  return envelope_coefficient() * std::log2(double(t)) / double(t);
}

double PositionAwareSurrogate::s(std::span<const uint8_t> prefix) const {
  const size_t t = prefix.size();
  if (t == 0) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < t; ++i) {
    const double pos = double(i + 1);  // positions are 1-based
    acc += std::sin(2.0 * M_PI * pos / period_) * (2.0 * double(prefix[i]) - 1.0);
  }
  return acc / double(t);
}

double PositionAwareSurrogate::predict_one(std::span<const uint8_t> prefix) const {
  const double base = base_.predict_one(prefix);
  if (prefix.empty()) return base;
  const double shift = g(long(prefix.size())) * s(prefix);
  // Exact reduction to the base rule when the perturbation vanishes; the
  // logit/sigmoid round trip is not bit-exact.
  if (shift == 0.0) return base;
  return clamp_prob(sigmoid(logit(base) + shift));
}

std::string PositionAwareSurrogate::name() const {
  return "surrogate(lf=" + std::to_string(lf_) +
         ",s2pe=" + std::to_string(sigma2_pe_) +
         ",p=" + std::to_string(period_) + ")";
}

double LaplacePredictor::predict_one(std::span<const uint8_t> prefix) const {
  const double t = double(prefix.size());
  const double s = double(count_ones(prefix));
  return clamp_prob((s + 1.0) / (t + 2.0));
}

double MlePredictor::predict_one(std::span<const uint8_t> prefix) const {
  return mle_predict(prefix, floor_);
}

double beta_predict(std::span<const uint8_t> prefix, double alpha0, double beta0) {
  return BetaBernoulliPredictor(alpha0, beta0).predict_one(prefix);
}

double laplace_predict(std::span<const uint8_t> prefix) {
  return LaplacePredictor().predict_one(prefix);
}

double mle_predict(std::span<const uint8_t> prefix, double floor) {
  if (!(floor > 0.0 && floor < 0.5))
    throw std::domain_error("mle floor must lie in (0, 0.5)");
  if (prefix.empty()) return 0.5;
  const double t = double(prefix.size());
  const double s = double(count_ones(prefix));
  return std::clamp(s / t, floor, 1.0 - floor);
}

std::unique_ptr<Predictor> make_predictor(const PredictorConfig& cfg) {
  if (cfg.kind == "beta")
    return std::make_unique<BetaBernoulliPredictor>(cfg.alpha0, cfg.beta0);
  if (cfg.kind == "laplace") return std::make_unique<LaplacePredictor>();
  if (cfg.kind == "mle") return std::make_unique<MlePredictor>(cfg.floor);
  if (cfg.kind == "surrogate")
    return std::make_unique<PositionAwareSurrogate>(cfg.lf, cfg.sigma2_pe,
                                                    cfg.period, cfg.alpha0,
                                                    cfg.beta0);
  throw std::invalid_argument("make_predictor: unknown kind '" + cfg.kind + "'");
}

}  // namespace martingap
