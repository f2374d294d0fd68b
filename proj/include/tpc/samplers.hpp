#pragma once

// Token selection: greedy, temperature, nucleus (top-p) and beam search.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tpc/connection.hpp"
#include "tpc/core.hpp"

namespace tpc {

enum class Strategy { Greedy, Temperature, Nucleus, Beam };

const char* to_string(Strategy strategy) noexcept;
Strategy parse_strategy(const std::string& text);

struct SamplerConfig {
  Strategy strategy = Strategy::Nucleus;
  double temperature = 1.0;
  double top_p = 1.0;
  std::size_t beam_width = 5;
  std::uint64_t seed = 0;
  std::size_t max_tokens = 32;
  std::vector<TokenId> stop_tokens;

  void validate() const;
  bool is_stop(TokenId token) const;

  friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

/// Seeded random stream. Bits come from std::mt19937_64, whose output
/// sequence is fixed by the standard; the seed for stream `s` is
/// splitmix64(seed ^ splitmix64(s)) and uniforms use the top 53 bits, so
/// draws are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Uniform in [0, 1).
  double uniform();
  std::uint64_t next() { return engine_(); }

  static std::uint64_t splitmix64(std::uint64_t x);

 private:
  std::mt19937_64 engine_;
};

/// Argmax; ties go to the lowest id.
TokenId select_greedy(const LogitFrame& frame);

/// Smallest prefix of tokens (sorted by probability descending, id ascending)
/// whose mass reaches top_p, with probabilities renormalized over the prefix.
struct NucleusSet {
  std::vector<TokenId> ids;
  std::vector<double> probs;
  double kept_mass = 0.0;  ///< mass before renormalization
};

NucleusSet nucleus_set(const LogitFrame& frame, double temperature, double top_p);

TokenId sample_nucleus(const LogitFrame& frame, const SamplerConfig& cfg, Rng& rng);

/// Full-distribution sampling at cfg.temperature.
TokenId sample_temperature(const LogitFrame& frame, const SamplerConfig& cfg, Rng& rng);

/// Dispatch on cfg.strategy; Beam is rejected (use beam_search).
TokenId select_token(const LogitFrame& frame, const SamplerConfig& cfg, Rng& rng);

/// Produces the next-token logits for a full token history.
using StepFn = std::function<LogitFrame(std::span<const TokenId> history)>;

/// Like StepFn but also returns the frame that should enter the connection
/// history (first: frame to connect and score, second: history frame).
using DualStepFn =
    std::function<std::pair<LogitFrame, LogitFrame>(std::span<const TokenId> history)>;

struct BeamHypothesis {
  std::vector<TokenId> tokens;  ///< generated tokens only
  double log_prob = 0.0;
  bool finished = false;

  /// Length-normalized score: log_prob / token count.
  double score() const;
};

/// Length-normalized beam search. When `tpc` is given each beam carries its
/// own copy of the connection state and every frame is connected before
/// scoring.
BeamHypothesis beam_search(const StepFn& model_step, std::span<const TokenId> prompt,
                           const SamplerConfig& cfg, const TpcState* tpc = nullptr);

BeamHypothesis beam_search(const DualStepFn& model_step, std::span<const TokenId> prompt,
                           const SamplerConfig& cfg, const TpcState* tpc = nullptr);

}  // namespace tpc
