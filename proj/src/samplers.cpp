#include "tpc/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace tpc {

const char* to_string(Strategy strategy) noexcept {
  switch (strategy) {
    case Strategy::Greedy: return "greedy";
    case Strategy::Temperature: return "temperature";
    case Strategy::Nucleus: return "nucleus";
    case Strategy::Beam: return "beam";
  }
  return "?";
}

Strategy parse_strategy(const std::string& text) {
  if (text == "greedy") return Strategy::Greedy;
  if (text == "temperature") return Strategy::Temperature;
  if (text == "nucleus") return Strategy::Nucleus;
  if (text == "beam") return Strategy::Beam;
  throw Error(Errc::InvalidConfig, "unknown sampling strategy '" + text + "'");
}

void SamplerConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(Errc::InvalidConfig, "temperature must be positive");
  }
  if (!(top_p > 0.0 && top_p <= 1.0)) throw Error(Errc::InvalidConfig, "top_p must lie in (0, 1]");
  if (beam_width < 1) throw Error(Errc::InvalidConfig, "beam width must be at least 1");
  if (max_tokens < 1) throw Error(Errc::InvalidConfig, "max_tokens must be at least 1");
}

bool SamplerConfig::is_stop(TokenId token) const {
  return std::find(stop_tokens.begin(), stop_tokens.end(), token) != stop_tokens.end();
}

std::uint64_t Rng::splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : engine_(splitmix64(seed ^ splitmix64(stream))) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

TokenId select_greedy(const LogitFrame& frame) {
  check_frame(frame);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < frame.size(); ++i) {
    if (frame[i] > frame[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

NucleusSet nucleus_set(const LogitFrame& frame, double temperature, double top_p) {
  if (!(top_p > 0.0 && top_p <= 1.0)) throw Error(Errc::InvalidConfig, "top_p must lie in (0, 1]");
  const ProbFrame probs = softmax(frame, temperature);

  // (prob, id) pairs sort contiguously, which matters at large V
  std::vector<std::pair<double, TokenId>> order(static_cast<std::size_t>(probs.size()));
  for (Eigen::Index i = 0; i < probs.size(); ++i) order[static_cast<std::size_t>(i)] = {probs[i], static_cast<TokenId>(i)};
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });

  NucleusSet set;
  double mass = 0.0;
  for (const auto& [p, id] : order) {
    if (p <= 0.0 && !set.ids.empty()) break;
    set.ids.push_back(id);
    set.probs.push_back(p);
    mass += p;
    if (mass >= top_p - 1e-12) break;
  }
  set.kept_mass = mass;
  for (double& p : set.probs) p /= mass;
  return set;
}

TokenId sample_nucleus(const LogitFrame& frame, const SamplerConfig& cfg, Rng& rng) {
  const NucleusSet set = nucleus_set(frame, cfg.temperature, cfg.top_p);
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    cumulative += set.probs[i];
    if (u < cumulative) return set.ids[i];
  }
  return set.ids.back();
}

TokenId sample_temperature(const LogitFrame& frame, const SamplerConfig& cfg, Rng& rng) {
  SamplerConfig full = cfg;
  full.top_p = 1.0;
  return sample_nucleus(frame, full, rng);
}

TokenId select_token(const LogitFrame& frame, const SamplerConfig& cfg, Rng& rng) {
  switch (cfg.strategy) {
    case Strategy::Greedy: return select_greedy(frame);
    case Strategy::Temperature: return sample_temperature(frame, cfg, rng);
    case Strategy::Nucleus: return sample_nucleus(frame, cfg, rng);
    case Strategy::Beam: break;
  }
  throw Error(Errc::InvalidConfig, "beam strategy needs beam_search, not per-step selection");
}

double BeamHypothesis::score() const {
  return tokens.empty() ? log_prob : log_prob / static_cast<double>(tokens.size());
}

namespace {

struct LiveBeam {
  BeamHypothesis hyp;
  std::unique_ptr<TpcState> state;
};

struct Candidate {
  std::size_t parent;
  TokenId token;
  double log_prob;
  double raw;  // connected score, breaks log-prob ties the same way greedy does
};

}  // namespace

BeamHypothesis beam_search(const StepFn& model_step, std::span<const TokenId> prompt,
                           const SamplerConfig& cfg, const TpcState* tpc) {
  const DualStepFn dual = [&](std::span<const TokenId> history) {
    LogitFrame frame = model_step(history);
    return std::pair<LogitFrame, LogitFrame>(frame, frame);
  };
  return beam_search(dual, prompt, cfg, tpc);
}

BeamHypothesis beam_search(const DualStepFn& model_step, std::span<const TokenId> prompt,
                           const SamplerConfig& cfg, const TpcState* tpc) {
  cfg.validate();
  const std::size_t width = cfg.beam_width;

  std::vector<LiveBeam> live;
  live.push_back({BeamHypothesis{}, tpc ? std::make_unique<TpcState>(*tpc) : nullptr});
  std::vector<BeamHypothesis> finished;

  std::vector<TokenId> history(prompt.begin(), prompt.end());
  for (std::size_t step = 0; step < cfg.max_tokens && !live.empty(); ++step) {
    std::vector<Candidate> candidates;
    std::vector<std::unique_ptr<TpcState>> next_states(live.size());

    for (std::size_t b = 0; b < live.size(); ++b) {
      history.resize(prompt.size());
      history.insert(history.end(), live[b].hyp.tokens.begin(), live[b].hyp.tokens.end());
      auto [scores, history_frame] = model_step(history);

      LogitFrame connected;
      if (live[b].state) {
        next_states[b] = std::make_unique<TpcState>(*live[b].state);
        connected = next_states[b]->step(scores, history_frame);
      } else {
        connected = std::move(scores);
      }
      const LogitFrame lp = log_softmax(connected, cfg.temperature);
      for (Eigen::Index i = 0; i < lp.size(); ++i) {
        if (std::isfinite(lp[i])) {
          candidates.push_back({b, static_cast<TokenId>(i), live[b].hyp.log_prob + lp[i], connected[i]});
        }
      }
    }

    const std::size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [](const Candidate& a, const Candidate& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        if (a.raw != b.raw) return a.raw > b.raw;
                        return a.token < b.token;
                      });

    std::vector<LiveBeam> next_live;
    for (std::size_t c = 0; c < keep; ++c) {
      const Candidate& cand = candidates[c];
      BeamHypothesis hyp = live[cand.parent].hyp;
      hyp.tokens.push_back(cand.token);
      hyp.log_prob = cand.log_prob;
      if (cfg.is_stop(cand.token)) {
        hyp.finished = true;
        finished.push_back(std::move(hyp));
      } else {
        std::unique_ptr<TpcState> state =
            next_states[cand.parent] ? std::make_unique<TpcState>(*next_states[cand.parent]) : nullptr;
        next_live.push_back({std::move(hyp), std::move(state)});
      }
    }
    live = std::move(next_live);
  }

  for (auto& beam : live) finished.push_back(std::move(beam.hyp));
  if (finished.empty()) throw Error(Errc::DecodeError, "beam search produced no hypothesis");
  // stable: on equal scores the earlier (finished first, higher ranked) wins
  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i) {
    if (finished[i].score() > finished[best].score()) best = i;
  }
  return finished[best];
}

}  // namespace tpc
