#pragma once

// Helpers shared by the test binaries.

#include <cmath>
#include <random>
#include <vector>

#include "tpc/core.hpp"

namespace tpc::test {

inline LogitFrame frame(std::initializer_list<double> values) {
  LogitFrame f(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) f[i++] = v;
  return f;
}

inline LogitFrame random_frame(std::mt19937_64& rng, std::size_t v, double scale = 3.0) {
  std::normal_distribution<double> normal(0.0, scale);
  LogitFrame f(static_cast<Eigen::Index>(v));
  for (auto& x : f) x = normal(rng);
  return f;
}

/// Random point on the simplex; some coordinates may be exactly zero.
inline ProbFrame random_distribution(std::mt19937_64& rng, std::size_t v, bool allow_zeros = true) {
  std::exponential_distribution<double> expo(1.0);
  std::bernoulli_distribution zero(0.2);
  ProbFrame p(static_cast<Eigen::Index>(v));
  for (auto& x : p) x = (allow_zeros && zero(rng)) ? 0.0 : expo(rng);
  if (p.sum() == 0.0) p[0] = 1.0;
  return p / p.sum();
}

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

/// Max elementwise relative error, measured against the larger magnitude
/// (absolute below 1).
inline double max_rel_err(const LogitFrame& a, const LogitFrame& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1.0});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

/// Independent scalar KL in nats, no flooring; both inputs strictly positive.
inline double kl_scalar(const std::vector<double>& p, const std::vector<double>& q) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) acc += p[i] * std::log(p[i] / q[i]);
  }
  return acc;
}

inline double js_scalar(const std::vector<double>& p, const std::vector<double>& q) {
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return 0.5 * kl_scalar(p, m) + 0.5 * kl_scalar(q, m);
}

inline std::vector<double> scalar_softmax(const LogitFrame& f) {
  double mx = f.maxCoeff();
  std::vector<double> out(static_cast<std::size_t>(f.size()));
  double z = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) z += out[i] = std::exp(f[static_cast<Eigen::Index>(i)] - mx);
  for (auto& x : out) x /= z;
  return out;
}

}  // namespace tpc::test
