#include "tpc/connection.hpp"

#include <algorithm>
#include <cmath>

namespace tpc {

const char* to_string(ConnectMode mode) noexcept {
  switch (mode) {
    case ConnectMode::Off: return "off";
    case ConnectMode::Ltpc: return "ltpc";
    case ConnectMode::Atpc: return "atpc";
  }
  return "?";
}

ConnectMode parse_connect_mode(const std::string& text) {
  if (text == "off") return ConnectMode::Off;
  if (text == "ltpc") return ConnectMode::Ltpc;
  if (text == "atpc") return ConnectMode::Atpc;
  throw Error(Errc::InvalidConfig, "unknown connection mode '" + text + "'");
}

void DecodePolicy::validate() const {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw Error(Errc::InvalidConfig, "lambda must lie in [0, 1)");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error(Errc::InvalidConfig, "alpha must be positive");
  if (window < 1) throw Error(Errc::InvalidConfig, "window must be at least 1");
}

TpcState::TpcState(const DecodePolicy& policy) : policy_(policy) {
  policy_.validate();
  evict_weight_ = policy_.mode == ConnectMode::Atpc
                      ? std::pow(policy_.lambda, static_cast<double>(policy_.window))
                      : 1.0;
}

std::vector<LogitFrame> TpcState::window_frames() const {
  std::vector<LogitFrame> out;
  out.reserve(count_);
  const std::size_t w = policy_.window;
  for (std::size_t i = 0; i < count_; ++i) out.push_back(buffer_[(head_ + w - count_ + i) % w]);
  return out;
}

const LogitFrame& TpcState::oldest() const {
  const std::size_t w = policy_.window;
  return buffer_[(head_ + w - count_) % w];
}

LogitFrame TpcState::connect(const LogitFrame& current) const {
  check_frame(current);
  if (policy_.mode == ConnectMode::Off) return current;

  LogitFrame out = apply_alpha(current, policy_.alpha);
  if (count_ > 0) {
    check_same_size(current, carry_);
    out += policy_.lambda * carry_;
  }
  if (policy_.normalization == Normalization::UnitSum) {
    double l1 = 0.0;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      if (!is_excluded(out, i)) l1 += std::abs(out[i]);
    }
    if (l1 > 0.0) {
      for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (!is_excluded(out, i)) out[i] /= l1;
      }
    }
  }
  return out;
}

void TpcState::absorb(const LogitFrame& frame) {
  if (frozen_) return;
  check_frame(frame);
  const std::size_t w = policy_.window;
  if (buffer_.empty()) {
    buffer_.resize(w);
    carry_ = LogitFrame::Zero(frame.size());
  } else {
    check_same_size(frame, carry_);
  }

  const bool full = count_ == w;
  switch (policy_.mode) {
    case ConnectMode::Atpc:
      if (full) {
        carry_ = frame + policy_.lambda * carry_ - evict_weight_ * buffer_[head_];
      } else {
        carry_ = frame + policy_.lambda * carry_;
      }
      break;
    case ConnectMode::Ltpc:
      carry_ += frame;
      if (full) carry_ -= buffer_[head_];
      break;
    case ConnectMode::Off:
      break;
  }

  buffer_[head_] = frame;
  head_ = (head_ + 1) % w;
  count_ = std::min(count_ + 1, w);
  ++steps_seen_;
  if (++since_rebuild_ >= w) rebuild_carry();
}

void TpcState::rebuild_carry() {
  since_rebuild_ = 0;
  if (count_ == 0 || policy_.mode == ConnectMode::Off) return;
  const std::size_t w = policy_.window;
  carry_.setZero();
  for (std::size_t i = 0; i < count_; ++i) {
    const LogitFrame& frame = buffer_[(head_ + w - count_ + i) % w];
    if (policy_.mode == ConnectMode::Atpc) {
      carry_ = frame + policy_.lambda * carry_;
    } else {
      carry_ += frame;
    }
  }
}

LogitFrame TpcState::step(const LogitFrame& current) { return step(current, current); }

LogitFrame TpcState::step(const LogitFrame& current, const LogitFrame& history_frame) {
  LogitFrame connected = connect(current);
  absorb(policy_.feedback == HistoryFeedback::Connected ? connected : history_frame);
  return connected;
}

TpcState tpc_prime(const DecodePolicy& policy, std::span<const LogitFrame> prompt_frames) {
  TpcState state(policy);
  const std::size_t w = policy.window;
  std::size_t begin = 0;
  std::size_t end = prompt_frames.size();
  if (policy.anchor == WindowAnchor::FixedRange) {
    if (policy.anchor_start + w > prompt_frames.size()) {
      throw Error(Errc::InvalidConfig,
                  "fixed window [" + std::to_string(policy.anchor_start) + ", " +
                      std::to_string(policy.anchor_start + w) + ") exceeds prompt of " +
                      std::to_string(prompt_frames.size()) + " frames");
    }
    begin = policy.anchor_start;
    end = begin + w;
  } else if (prompt_frames.size() > w) {
    begin = prompt_frames.size() - w;
  }
  for (std::size_t i = begin; i < end; ++i) state.absorb(prompt_frames[i]);
  if (policy.scope == HistoryScope::PromptOnly) state.freeze();
  return state;
}

std::pair<LogitFrame, TpcState> tpc_step(const TpcState& state, const DecodePolicy& policy,
                                         const LogitFrame& current) {
  const DecodePolicy& primed = state.policy();
  if (policy.mode != primed.mode || policy.lambda != primed.lambda || policy.window != primed.window) {
    throw Error(Errc::InvalidConfig, "policy mode/lambda/window differ from the primed state");
  }
  policy.validate();
  TpcState next = state;
  next.policy_ = policy;
  LogitFrame connected = next.step(current);
  return {std::move(connected), std::move(next)};
}

}  // namespace tpc
