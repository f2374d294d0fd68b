#include "tpc/decode.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "tpc/trace_io.hpp"

namespace tpc {

ToyFrameProvider::ToyFrameProvider(std::shared_ptr<const ToyModel> model, std::vector<TokenId> prompt)
    : model_(std::move(model)), prompt_(std::move(prompt)) {
  prompt_frames_.reserve(prompt_.size());
  for (std::size_t i = 0; i < prompt_.size(); ++i) {
    prompt_frames_.push_back(model_->final_logits(std::span<const TokenId>(prompt_.data(), i)));
  }
  // validates the prompt's token ids even when it is empty of frames
  if (!prompt_.empty()) model_->final_logits(prompt_);
}

StepFrames ToyFrameProvider::step(std::span<const TokenId> history, std::size_t, bool with_layers) const {
  StepFrames out;
  if (!with_layers || model_->num_layers() < 2) {
    out.final = model_->final_logits(history);
    return out;
  }
  out.layers = model_->step(history);
  out.final = out.layers.back();
  return out;
}

TraceFrameProvider::TraceFrameProvider(std::shared_ptr<const LogitTrace> trace,
                                       std::shared_ptr<const LogitTrace> negative)
    : trace_(std::move(trace)), negative_(std::move(negative)) {
  trace_->validate();
  if (negative_) {
    negative_->validate();
    if (negative_->vocab_size() != trace_->vocab_size()) {
      throw Error(Errc::DimensionMismatch, "negative trace vocab size differs");
    }
    if (negative_->num_steps() != trace_->num_steps() || negative_->prompt_len != trace_->prompt_len) {
      throw Error(Errc::InvalidInput, "negative trace length or prompt_len differs");
    }
  }
}

std::span<const LogitFrame> TraceFrameProvider::prompt_frames() const {
  return {trace_->frames.data(), trace_->prompt_len};
}

StepFrames TraceFrameProvider::step(std::span<const TokenId>, std::size_t step, bool with_layers) const {
  const std::size_t t = trace_->prompt_len + step;
  if (t >= trace_->num_steps()) {
    throw Error(Errc::DecodeError, "trace exhausted after " + std::to_string(trace_->generated_steps()) +
                                       " generated steps");
  }
  StepFrames out;
  out.final = trace_->frames[t];
  if (with_layers && trace_->has_layers()) out.layers = trace_->layers[t];
  if (negative_) out.negative = negative_->frames[t];
  return out;
}

std::vector<TokenId> resolve_toy_prompt(const SourceConfig& source) {
  if (!source.prompt.empty()) return source.prompt;
  return toy_prompt(source.toy.seed, source.prompt_len, source.toy.vocab_size);
}

std::unique_ptr<FrameProvider> make_provider(const SourceConfig& source) {
  switch (source.kind) {
    case SourceConfig::Kind::ToyModel:
      return std::make_unique<ToyFrameProvider>(std::make_shared<const ToyModel>(source.toy),
                                                resolve_toy_prompt(source));
    case SourceConfig::Kind::TraceFile:
      return std::make_unique<TraceFrameProvider>(std::make_shared<const LogitTrace>(read_trace(source.path)));
    case SourceConfig::Kind::TwoStream:
      return std::make_unique<TraceFrameProvider>(
          std::make_shared<const LogitTrace>(read_trace(source.path)),
          std::make_shared<const LogitTrace>(read_trace(source.negative_path)));
  }
  throw Error(Errc::InvalidConfig, "unknown source kind");
}

LogitFrame contrast_frame(const RunConfig& config, const StepFrames& frames) {
  switch (config.decoder) {
    case ContrastDecoder::Plain:
      return frames.final;
    case ContrastDecoder::Vcd:
      if (!frames.negative) throw Error(Errc::InvalidConfig, "vcd decoding needs a negative stream");
      return contrast_combine(frames.final, *frames.negative, config.contrast_or_default());
    case ContrastDecoder::Dola:
      if (frames.layers.size() < 2) throw Error(Errc::InvalidConfig, "dola decoding needs early-exit layers");
      return dola_step(frames.layers, config.contrast_or_default());
  }
  return frames.final;
}

namespace {

std::vector<TokenProb> top_tokens(const LogitFrame& connected, double temperature, std::size_t k) {
  const ProbFrame probs = softmax(connected, temperature);
  std::vector<TokenId> ids(static_cast<std::size_t>(probs.size()));
  std::iota(ids.begin(), ids.end(), 0);
  k = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    [&](TokenId a, TokenId b) { return probs[a] > probs[b] || (probs[a] == probs[b] && a < b); });
  std::vector<TokenProb> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back({ids[i], probs[ids[i]]});
  return out;
}

}  // namespace

DecodeResult decode(const RunConfig& config, const FrameProvider& provider, const DecodeOptions& options,
                    std::uint64_t rng_stream) {
  config.policy.validate();
  config.sampler.validate();
  if (config.decoder == ContrastDecoder::Dola) {
    if (provider.num_layers() < 2) throw Error(Errc::InvalidConfig, "dola needs a source with early-exit layers");
    config.contrast_or_default().validate(provider.num_layers());
  }
  if (config.decoder == ContrastDecoder::Vcd && !provider.has_negative()) {
    throw Error(Errc::InvalidConfig, "vcd needs a negative stream");
  }
  const std::size_t max_tokens = config.sampler.max_tokens;
  if (const auto bound = provider.max_steps(); bound && max_tokens > *bound) {
    throw Error(Errc::DecodeError, "requested " + std::to_string(max_tokens) + " tokens but the trace holds " +
                                       std::to_string(*bound) + " generated steps");
  }

  const bool connect = config.policy.mode != ConnectMode::Off;
  const bool with_layers = config.decoder == ContrastDecoder::Dola;
  TpcState state = connect ? tpc_prime(config.policy, provider.prompt_frames()) : TpcState{};
  const std::span<const TokenId> prompt = provider.prompt_tokens();

  DecodeResult result;
  if (config.sampler.strategy == Strategy::Beam) {
    const DualStepFn step_fn = [&](std::span<const TokenId> history) {
      const StepFrames frames = provider.step(history, history.size() - prompt.size(), with_layers);
      return std::pair<LogitFrame, LogitFrame>(contrast_frame(config, frames), frames.final);
    };
    BeamHypothesis best = beam_search(step_fn, prompt, config.sampler, connect ? &state : nullptr);
    result.tokens = std::move(best.tokens);
    if (options.log_steps) {
      for (std::size_t t = 0; t < result.tokens.size(); ++t) {
        result.log.push_back({t, result.tokens[t], {}, config.policy.mode, std::nullopt});
      }
    }
    return result;
  }

  Rng rng(config.sampler.seed, rng_stream);
  std::vector<TokenId> history(prompt.begin(), prompt.end());
  history.reserve(prompt.size() + max_tokens);
  for (std::size_t t = 0; t < max_tokens; ++t) {
    const StepFrames frames = provider.step(history, t, with_layers);
    LogitFrame current = contrast_frame(config, frames);
    LogitFrame connected = connect ? state.step(current, frames.final) : std::move(current);
    const TokenId token = select_token(connected, config.sampler, rng);

    result.tokens.push_back(token);
    history.push_back(token);
    if (options.log_steps) {
      StepLog entry;
      entry.t = t;
      entry.token = token;
      entry.mode = config.policy.mode;
      entry.top = top_tokens(connected, config.sampler.temperature, options.top_k_log);
      if (options.dump_frames) entry.frame = std::move(connected);
      result.log.push_back(std::move(entry));
    }
    if (config.sampler.is_stop(token)) break;
  }
  return result;
}

std::size_t worker_count() {
  if (const char* env = std::getenv("TPC_THREADS")) {
    char* end = nullptr;
    const unsigned long n = std::strtoul(env, &end, 10);
    if (end != env && n > 0) return static_cast<std::size_t>(n);
  }
  return 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace tpc
