#pragma once

// Shared numeric types: logit/probability vectors, traces, vocabularies and
// the divergence measures used across decoding and analysis.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "tpc/error.hpp"

namespace tpc {

template <typename Scalar>
using Logits = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Raw pre-normalization scores over the vocabulary for one timestep.
using LogitFrame = Logits<double>;
/// Normalized next-token distribution.
using ProbFrame = Logits<double>;

using TokenId = std::int32_t;

/// Marks a token removed from consideration (e.g. by a plausibility
/// constraint). It is the most negative finite float so it survives the
/// 32-bit trace format; softmax maps any score at or below it to zero.
inline constexpr double kExcludedScore = static_cast<double>(std::numeric_limits<float>::lowest());

/// Probability floor applied before KL/JS.
inline constexpr double kProbFloor = 1e-12;

enum class DivergenceUnit { Nats, Bits };

template <typename Derived>
bool is_excluded(const Eigen::MatrixBase<Derived>& scores, Eigen::Index i) {
  return scores.coeff(i) <= kExcludedScore;
}

/// Throws InvalidFrame for empty or non-finite frames.
template <typename Derived>
void check_frame(const Eigen::MatrixBase<Derived>& scores) {
  if (scores.size() == 0) throw Error(Errc::InvalidFrame, "empty logit frame");
  if (!scores.allFinite()) throw Error(Errc::InvalidFrame, "logit frame contains NaN or Inf");
}

template <typename DerivedA, typename DerivedB>
void check_same_size(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw Error(Errc::DimensionMismatch,
                "vocab size " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

/// Numerically stable softmax at the given temperature. Excluded scores get
/// exactly zero probability.
template <typename Derived>
Logits<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& scores,
                                         double temperature = 1.0) {
  using Scalar = typename Derived::Scalar;
  check_frame(scores);
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(Errc::InvalidConfig, "temperature must be positive");
  }
  const Scalar max = scores.maxCoeff();
  const Scalar inv_t = Scalar(1) / static_cast<Scalar>(temperature);
  Logits<Scalar> out = ((scores.array() - max) * inv_t).exp().matrix();
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (is_excluded(scores, i)) out[i] = Scalar(0);
  }
  out /= out.sum();
  return out;
}

/// log(softmax(scores / T)); excluded tokens map to -infinity.
template <typename Derived>
Logits<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& scores,
                                             double temperature = 1.0) {
  using Scalar = typename Derived::Scalar;
  check_frame(scores);
  if (!(temperature > 0.0)) throw Error(Errc::InvalidConfig, "temperature must be positive");
  const Scalar max = scores.maxCoeff();
  const Scalar inv_t = Scalar(1) / static_cast<Scalar>(temperature);
  Logits<Scalar> shifted = ((scores.array() - max) * inv_t).matrix();
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < shifted.size(); ++i) {
    if (!is_excluded(scores, i)) sum += std::exp(shifted[i]);
  }
  const Scalar log_z = std::log(sum);
  for (Eigen::Index i = 0; i < shifted.size(); ++i) {
    shifted[i] = is_excluded(scores, i) ? -std::numeric_limits<Scalar>::infinity()
                                        : shifted[i] - log_z;
  }
  return shifted;
}

/// Clamp to kProbFloor and renormalize.
template <typename Derived>
Logits<typename Derived::Scalar> smooth_probs(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  Logits<Scalar> q = p.cwiseMax(static_cast<Scalar>(kProbFloor));
  q /= q.sum();
  return q;
}

namespace detail {

template <typename DerivedA, typename DerivedB>
double kl_smoothed(const Eigen::MatrixBase<DerivedA>& p, const Eigen::MatrixBase<DerivedB>& q) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = static_cast<double>(p.coeff(i));
    if (pi > 0.0) acc += pi * std::log(pi / static_cast<double>(q.coeff(i)));
  }
  return acc < 0.0 ? 0.0 : acc;
}

inline double to_unit(double nats, DivergenceUnit unit) {
  return unit == DivergenceUnit::Bits ? nats / std::numbers::ln2 : nats;
}

}  // namespace detail

/// KL(p || q). Both inputs are floored at kProbFloor and renormalized first.
template <typename DerivedA, typename DerivedB>
double kl_divergence(const Eigen::MatrixBase<DerivedA>& p, const Eigen::MatrixBase<DerivedB>& q,
                     DivergenceUnit unit = DivergenceUnit::Nats) {
  check_same_size(p, q);
  return detail::to_unit(detail::kl_smoothed(smooth_probs(p), smooth_probs(q)), unit);
}

/// Jensen-Shannon divergence, bounded by ln 2 nats (1 bit).
template <typename DerivedA, typename DerivedB>
double js_divergence(const Eigen::MatrixBase<DerivedA>& p, const Eigen::MatrixBase<DerivedB>& q,
                     DivergenceUnit unit = DivergenceUnit::Nats) {
  check_same_size(p, q);
  const auto ps = smooth_probs(p);
  const auto qs = smooth_probs(q);
  const auto m = ((ps + qs) * 0.5).eval();
  double js = 0.5 * detail::kl_smoothed(ps, m) + 0.5 * detail::kl_smoothed(qs, m);
  js = std::min(std::max(js, 0.0), std::numbers::ln2);
  return detail::to_unit(js, unit);
}

/// Ordered logit frames for one sequence, optionally with early-exit frames
/// per step. The first prompt_len frames belong to the input sequence: frame
/// t holds the logits computed from tokens [0, t).
struct LogitTrace {
  std::vector<LogitFrame> frames;
  /// Empty, or one entry per step holding layers shallow to deep; the last
  /// layer equals frames[t].
  std::vector<std::vector<LogitFrame>> layers;
  std::size_t prompt_len = 0;

  std::size_t vocab_size() const { return frames.empty() ? 0 : static_cast<std::size_t>(frames.front().size()); }
  std::size_t num_steps() const { return frames.size(); }
  std::size_t num_layers() const { return layers.empty() ? 1 : layers.front().size(); }
  bool has_layers() const { return !layers.empty(); }
  std::size_t generated_steps() const { return frames.size() - prompt_len; }

  /// Throws on any violated invariant.
  void validate() const;

  friend bool operator==(const LogitTrace& a, const LogitTrace& b);
};

/// Token strings with a reverse lookup.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  /// "yes", "no", then "w2" .. "w{V-1}".
  static Vocabulary synthetic(std::size_t vocab_size);
  static Vocabulary from_file(const std::string& path);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  TokenId id(const std::string& token) const;
  bool contains(const std::string& token) const { return lookup_.count(token) != 0; }

  std::string decode(const std::vector<TokenId>& ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> lookup_;
};

}  // namespace tpc
