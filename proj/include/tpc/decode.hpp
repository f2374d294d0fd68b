#pragma once

// The decode loop: obtain a frame (toy model or trace replay), optionally
// contrast it, connect it across time, then pick a token.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tpc/config.hpp"
#include "tpc/core.hpp"
#include "tpc/toylm.hpp"

namespace tpc {

struct StepFrames {
  LogitFrame final;
  std::vector<LogitFrame> layers;     ///< empty when the source has no early exits
  std::optional<LogitFrame> negative; ///< second stream, when available
};

class FrameProvider {
 public:
  virtual ~FrameProvider() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t num_layers() const = 0;
  virtual bool has_negative() const { return false; }

  /// Input-sequence frames, used to prime the connection window.
  virtual std::span<const LogitFrame> prompt_frames() const = 0;
  virtual std::span<const TokenId> prompt_tokens() const = 0;

  /// Generated steps the source can produce, if bounded.
  virtual std::optional<std::size_t> max_steps() const { return std::nullopt; }

  /// Frames for generated step `step`, given the full history (prompt
  /// tokens followed by generated tokens). Early-exit layers are filled
  /// only when `with_layers` is set.
  virtual StepFrames step(std::span<const TokenId> history, std::size_t step, bool with_layers) const = 0;
};

class ToyFrameProvider final : public FrameProvider {
 public:
  /// Computes the prompt frames eagerly, like a prefill pass would.
  ToyFrameProvider(std::shared_ptr<const ToyModel> model, std::vector<TokenId> prompt);

  std::size_t vocab_size() const override { return model_->vocab_size(); }
  std::size_t num_layers() const override { return model_->num_layers(); }
  std::span<const LogitFrame> prompt_frames() const override { return prompt_frames_; }
  std::span<const TokenId> prompt_tokens() const override { return prompt_; }
  StepFrames step(std::span<const TokenId> history, std::size_t step, bool with_layers) const override;

 private:
  std::shared_ptr<const ToyModel> model_;
  std::vector<TokenId> prompt_;
  std::vector<LogitFrame> prompt_frames_;
};

/// Replays recorded frames; generated tokens do not influence them.
class TraceFrameProvider final : public FrameProvider {
 public:
  explicit TraceFrameProvider(std::shared_ptr<const LogitTrace> trace,
                              std::shared_ptr<const LogitTrace> negative = nullptr);

  std::size_t vocab_size() const override { return trace_->vocab_size(); }
  std::size_t num_layers() const override { return trace_->num_layers(); }
  bool has_negative() const override { return negative_ != nullptr; }
  std::span<const LogitFrame> prompt_frames() const override;
  std::span<const TokenId> prompt_tokens() const override { return {}; }
  std::optional<std::size_t> max_steps() const override { return trace_->generated_steps(); }
  StepFrames step(std::span<const TokenId> history, std::size_t step, bool with_layers) const override;

 private:
  std::shared_ptr<const LogitTrace> trace_;
  std::shared_ptr<const LogitTrace> negative_;
};

/// Builds the provider a config asks for (reads trace files).
std::unique_ptr<FrameProvider> make_provider(const SourceConfig& source);

/// Prompt used for a toy source: the explicit one, or toy_prompt(seed, prompt_len).
std::vector<TokenId> resolve_toy_prompt(const SourceConfig& source);

struct TokenProb {
  TokenId id;
  double prob;
};

struct StepLog {
  std::size_t t = 0;
  TokenId token = 0;
  std::vector<TokenProb> top;  ///< most probable tokens of the connected frame
  ConnectMode mode = ConnectMode::Off;
  std::optional<LogitFrame> frame;  ///< full connected frame when dumping
};

struct DecodeOptions {
  bool log_steps = true;
  bool dump_frames = false;
  std::size_t top_k_log = 5;
};

struct DecodeResult {
  std::vector<TokenId> tokens;
  std::vector<StepLog> log;
};

/// Runs the configured decode against `provider`. `rng_stream` selects the
/// sampler stream (sessions that must not share draws use distinct
/// streams). Throws DecodeError when a trace runs out of frames.
DecodeResult decode(const RunConfig& config, const FrameProvider& provider,
                    const DecodeOptions& options = {}, std::uint64_t rng_stream = 0);

/// The frame that enters the sampler before connection: final logits or the
/// configured contrast of them.
LogitFrame contrast_frame(const RunConfig& config, const StepFrames& frames);

/// Worker count from TPC_THREADS (default 1).
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on worker_count() threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace tpc
