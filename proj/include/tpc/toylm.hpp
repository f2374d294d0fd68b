#pragma once

// Deterministic toy autoregressive model with early-exit layers. It has no
// learned parameters; every weight is a pseudo-random function of the seed.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tpc/core.hpp"

namespace tpc {

struct ToyModelConfig {
  std::size_t vocab_size = 64;
  std::size_t num_layers = 8;
  std::size_t context_window = 32;
  std::size_t hidden = 32;
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const ToyModelConfig&, const ToyModelConfig&) = default;
};

/// Next-token logits are a bounded squash of head * g_l, where g_l blends
/// the context state with a layer-specific rotation of it and the layer
/// scale grows with depth up to the final-layer bound kScoreBound. The
/// context state is an exponentially smoothed mix of token embeddings and a
/// slowly drifting positional signal, which makes logits at nearby steps
/// similar and distant ones less so.
class ToyModel {
 public:
  static constexpr double kScoreBound = 20.0;

  explicit ToyModel(const ToyModelConfig& config = {});

  const ToyModelConfig& config() const { return config_; }
  std::size_t vocab_size() const { return config_.vocab_size; }
  std::size_t num_layers() const { return config_.num_layers; }

  /// One frame per layer, shallow to deep; the last is the model's logits.
  std::vector<LogitFrame> step(std::span<const TokenId> history) const;

  /// Final-layer logits only.
  LogitFrame final_logits(std::span<const TokenId> history) const;

 private:
  Eigen::VectorXd context_state(std::span<const TokenId> history) const;
  Eigen::VectorXd position_signal(std::size_t position) const;
  LogitFrame layer_logits(const Eigen::VectorXd& state, std::size_t layer) const;
  double hashed_uniform(std::uint64_t a, std::uint64_t b) const;

  ToyModelConfig config_;
  Eigen::MatrixXd embed_;  // hidden x (V + 1); last column is BOS
  Eigen::MatrixXd head_;   // V x hidden
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  std::vector<RowMatrix> layer_mix_;  // depth-blended head * mix, V x hidden
};

/// Run a greedy continuation of `prompt` for `steps` tokens and record every
/// frame (prompt positions included) with per-layer exits. Scores are
/// rounded to float so the trace survives the 32-bit file format unchanged.
LogitTrace toy_generate_trace(const ToyModel& model, std::span<const TokenId> prompt,
                              std::size_t steps);

/// Deterministic pseudo-random prompt of `length` tokens.
std::vector<TokenId> toy_prompt(std::uint64_t seed, std::size_t length, std::size_t vocab_size);

}  // namespace tpc
