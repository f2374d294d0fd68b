#pragma once

// Cross-temporal logit connection: past logit frames are added to the
// current frame either uniformly (linear) or with geometric attenuation.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tpc/core.hpp"

namespace tpc {

enum class ConnectMode { Off, Ltpc, Atpc };

enum class WindowAnchor {
  TrailingInput,  ///< the w frames closest to the current step
  FixedRange,     ///< prompt frames [anchor_start, anchor_start + w)
};

/// Which frame enters the history after a step.
enum class HistoryFeedback { Raw, Connected };

/// Sliding: generated frames keep entering the window. PromptOnly: the window
/// is frozen after priming.
enum class HistoryScope { Sliding, PromptOnly };

/// Post-connection rescaling. Softmax leaves normalization to the sampler;
/// UnitSum divides the connected frame by its L1 norm.
enum class Normalization { Softmax, UnitSum };

struct DecodePolicy {
  ConnectMode mode = ConnectMode::Atpc;
  double lambda = 0.1;
  double alpha = 3.0;
  std::size_t window = 20;
  WindowAnchor anchor = WindowAnchor::TrailingInput;
  std::size_t anchor_start = 0;
  HistoryFeedback feedback = HistoryFeedback::Raw;
  HistoryScope scope = HistoryScope::Sliding;
  Normalization normalization = Normalization::Softmax;

  void validate() const;

  friend bool operator==(const DecodePolicy&, const DecodePolicy&) = default;
};

const char* to_string(ConnectMode mode) noexcept;
ConnectMode parse_connect_mode(const std::string& text);

namespace detail {

template <typename Derived>
void check_window(const Eigen::MatrixBase<Derived>& current, std::span<const LogitFrame> window) {
  if (window.empty()) throw Error(Errc::InvalidConfig, "connection window is empty");
  for (const auto& frame : window) check_same_size(current, frame);
}

}  // namespace detail

/// current + lambda * (sum of window frames).
template <typename Derived>
LogitFrame ltpc_connect(const Eigen::MatrixBase<Derived>& current,
                        std::span<const LogitFrame> window, double lambda) {
  detail::check_window(current, window);
  LogitFrame sum = LogitFrame::Zero(current.size());
  for (const auto& frame : window) sum += frame;
  return current.template cast<double>() + lambda * sum;
}

/// current + sum_{d=1..w} lambda^d * window[w - d], window ordered oldest to
/// newest; the newest frame sits at distance 1.
template <typename Derived>
LogitFrame atpc_connect(const Eigen::MatrixBase<Derived>& current,
                        std::span<const LogitFrame> window, double lambda) {
  detail::check_window(current, window);
  LogitFrame out = current.template cast<double>();
  double weight = lambda;
  for (auto it = window.rbegin(); it != window.rend(); ++it) {
    out += weight * *it;
    weight *= lambda;
  }
  return out;
}

/// alpha * current.
template <typename Derived>
LogitFrame apply_alpha(const Eigen::MatrixBase<Derived>& current, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(Errc::InvalidConfig, "alpha must be positive");
  }
  return alpha * current.template cast<double>();
}

/// Running connection state for one decoding session.
///
/// Holds the last w absorbed frames in a ring buffer along with the running
/// aggregate the active mode needs: the plain window sum for LTPC, or
/// sum_{d>=1} lambda^(d-1) * l_{t-d} over the window for ATPC. Aggregates are
/// updated in O(V) per step and rebuilt from the buffer every w absorptions
/// so rounding does not drift.
class TpcState {
 public:
  TpcState() = default;
  explicit TpcState(const DecodePolicy& policy);

  const DecodePolicy& policy() const { return policy_; }
  std::size_t steps_seen() const { return steps_seen_; }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  bool frozen() const { return frozen_; }

  /// Buffered frames, oldest first.
  std::vector<LogitFrame> window_frames() const;

  /// Mode aggregate (see class comment); zero-sized when empty.
  const LogitFrame& carry() const { return carry_; }

  /// Connected frame for `current` without changing the state.
  LogitFrame connect(const LogitFrame& current) const;

  /// Push a frame into the history (no-op once frozen).
  void absorb(const LogitFrame& frame);

  /// Stop absorbing further frames.
  void freeze() { frozen_ = true; }

  /// connect() then absorb the raw frame (or the connected one when the
  /// policy asks for connected feedback).
  LogitFrame step(const LogitFrame& current);

  /// As step(), but absorbs `history_frame` in raw-feedback mode. Used when
  /// the frame being connected is a contrast output while the history should
  /// keep the model's own logits.
  LogitFrame step(const LogitFrame& current, const LogitFrame& history_frame);

 private:
  friend std::pair<LogitFrame, TpcState> tpc_step(const TpcState&, const DecodePolicy&,
                                                  const LogitFrame&);

  void rebuild_carry();
  const LogitFrame& oldest() const;

  DecodePolicy policy_{};
  std::vector<LogitFrame> buffer_;
  std::size_t head_ = 0;  // slot for the next write
  std::size_t count_ = 0;
  std::size_t steps_seen_ = 0;
  std::size_t since_rebuild_ = 0;
  double evict_weight_ = 0.0;  // lambda^w (ATPC) or 1 (LTPC)
  LogitFrame carry_;
  bool frozen_ = false;
};

/// Initialize a state from the input-sequence frames according to the
/// policy anchor. An empty prompt gives an empty state.
TpcState tpc_prime(const DecodePolicy& policy, std::span<const LogitFrame> prompt_frames);

/// Pure single step: returns the connected frame and the advanced state.
std::pair<LogitFrame, TpcState> tpc_step(const TpcState& state, const DecodePolicy& policy,
                                         const LogitFrame& current);

}  // namespace tpc
