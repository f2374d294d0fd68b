#include "tpc/toylm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tpc/samplers.hpp"

namespace tpc {

namespace {

constexpr double kDecay = 0.75;
constexpr std::size_t kPositionSmoothing = 8;
constexpr double kPositionGain = 1.5;

enum : std::uint64_t { kTagEmbed = 1, kTagHead = 2, kTagPosition = 3, kTagMix = 16 };

double squash(double x) { return x / (1.0 + std::abs(x)); }

}  // namespace

void ToyModelConfig::validate() const {
  if (vocab_size < 2) throw Error(Errc::InvalidConfig, "toy model vocab_size must be >= 2");
  if (num_layers < 1) throw Error(Errc::InvalidConfig, "toy model needs at least one layer");
  if (context_window < 1) throw Error(Errc::InvalidConfig, "toy model context_window must be >= 1");
  if (hidden < 1) throw Error(Errc::InvalidConfig, "toy model hidden size must be >= 1");
}

double ToyModel::hashed_uniform(std::uint64_t a, std::uint64_t b) const {
  const std::uint64_t key = Rng::splitmix64(a) ^ (b * 0xd1b54a32d192ed03ULL);
  const std::uint64_t bits = Rng::splitmix64(config_.seed ^ Rng::splitmix64(key));
  return static_cast<double>(bits >> 11) * 0x1.0p-52 - 1.0;
}

ToyModel::ToyModel(const ToyModelConfig& config) : config_(config) {
  config_.validate();
  const auto h = static_cast<Eigen::Index>(config_.hidden);
  const auto v = static_cast<Eigen::Index>(config_.vocab_size);

  embed_.resize(h, v + 1);
  for (Eigen::Index c = 0; c <= v; ++c) {
    for (Eigen::Index r = 0; r < h; ++r) {
      embed_(r, c) = hashed_uniform(kTagEmbed << 32 | static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(r));
    }
  }
  head_.resize(v, h);
  for (Eigen::Index r = 0; r < v; ++r) {
    for (Eigen::Index c = 0; c < h; ++c) {
      head_(r, c) = hashed_uniform(kTagHead << 32 | static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(c));
    }
  }

  // head * M_l is folded in up front so every layer costs one V x hidden product
  const double mix_scale = 1.0 / std::sqrt(static_cast<double>(config_.hidden));
  layer_mix_.reserve(config_.num_layers);
  for (std::size_t layer = 0; layer < config_.num_layers; ++layer) {
    Eigen::MatrixXd mix(h, h);
    for (Eigen::Index r = 0; r < h; ++r) {
      for (Eigen::Index c = 0; c < h; ++c) {
        mix(r, c) = mix_scale * hashed_uniform((kTagMix + layer) << 32 | static_cast<std::uint64_t>(r),
                                               static_cast<std::uint64_t>(c));
      }
    }
    const double depth = static_cast<double>(layer + 1) / static_cast<double>(config_.num_layers);
    RowMatrix combined(v, h);
    for (Eigen::Index r = 0; r < v; ++r) {
      for (Eigen::Index c = 0; c < h; ++c) {
        double acc = 0.0;
        for (Eigen::Index k = 0; k < h; ++k) acc += head_(r, k) * mix(k, c);
        combined(r, c) = depth * head_(r, c) + (1.0 - depth) * acc;
      }
    }
    layer_mix_.push_back(std::move(combined));
  }
}

Eigen::VectorXd ToyModel::position_signal(std::size_t position) const {
  const auto h = static_cast<Eigen::Index>(config_.hidden);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(h);
  for (std::size_t j = 0; j < kPositionSmoothing; ++j) {
    const std::uint64_t p = static_cast<std::uint64_t>(position + j);
    for (Eigen::Index r = 0; r < h; ++r) {
      out[r] += hashed_uniform(kTagPosition << 32 | p, static_cast<std::uint64_t>(r));
    }
  }
  return out * (kPositionGain / static_cast<double>(kPositionSmoothing));
}

Eigen::VectorXd ToyModel::context_state(std::span<const TokenId> history) const {
  for (TokenId token : history) {
    if (token < 0 || static_cast<std::size_t>(token) >= config_.vocab_size) {
      throw Error(Errc::InvalidToken, "token " + std::to_string(token) + " outside vocabulary of " +
                                          std::to_string(config_.vocab_size));
    }
  }
  // sequence is BOS followed by history; keep the last context_window entries
  const std::size_t length = history.size() + 1;
  const std::size_t begin = length > config_.context_window ? length - config_.context_window : 0;

  Eigen::VectorXd state = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(config_.hidden));
  double total = 0.0;
  double weight = 1.0;
  for (std::size_t pos = length; pos-- > begin;) {
    const Eigen::Index column = pos == 0 ? static_cast<Eigen::Index>(config_.vocab_size)
                                         : static_cast<Eigen::Index>(history[pos - 1]);
    state += weight * (embed_.col(column) + position_signal(pos));
    total += weight;
    weight *= kDecay;
  }
  return state / total;
}

LogitFrame ToyModel::layer_logits(const Eigen::VectorXd& state, std::size_t layer) const {
  const double depth = static_cast<double>(layer + 1) / static_cast<double>(config_.num_layers);
  const double scale = kScoreBound * depth;
  const RowMatrix& m = layer_mix_[layer];
  // plain left-to-right sums: vectorized products would reorder them per ISA
  LogitFrame out(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double* row = m.data() + r * m.cols();
    double acc = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) acc += row[c] * state[c];
    out[r] = scale * squash(acc);
  }
  return out;
}

std::vector<LogitFrame> ToyModel::step(std::span<const TokenId> history) const {
  const Eigen::VectorXd state = context_state(history);
  std::vector<LogitFrame> out;
  out.reserve(config_.num_layers);
  for (std::size_t layer = 0; layer < config_.num_layers; ++layer) out.push_back(layer_logits(state, layer));
  return out;
}

LogitFrame ToyModel::final_logits(std::span<const TokenId> history) const {
  return layer_logits(context_state(history), config_.num_layers - 1);
}

LogitTrace toy_generate_trace(const ToyModel& model, std::span<const TokenId> prompt,
                              std::size_t steps) {
  if (steps < 1) throw Error(Errc::InvalidConfig, "steps must be at least 1");
  const auto to_float = [](const LogitFrame& f) -> LogitFrame {
    return f.cast<float>().cast<double>();
  };
  const bool keep_layers = model.num_layers() >= 2;

  LogitTrace trace;
  trace.prompt_len = prompt.size();
  std::vector<TokenId> history;
  history.reserve(prompt.size() + steps);
  const auto record = [&](std::vector<LogitFrame> layers) {
    for (auto& frame : layers) frame = to_float(frame);
    trace.frames.push_back(layers.back());
    if (keep_layers) trace.layers.push_back(std::move(layers));
  };

  for (std::size_t i = 0; i < prompt.size(); ++i) {
    record(model.step(history));
    history.push_back(prompt[i]);
  }
  for (std::size_t s = 0; s < steps; ++s) {
    record(model.step(history));
    history.push_back(select_greedy(trace.frames.back()));
  }
  return trace;
}

std::vector<TokenId> toy_prompt(std::uint64_t seed, std::size_t length, std::size_t vocab_size) {
  Rng rng(seed, 0x70726f6d7074ULL);
  std::vector<TokenId> out(length);
  for (auto& token : out) token = static_cast<TokenId>(rng.next() % vocab_size);
  return out;
}

}  // namespace tpc
