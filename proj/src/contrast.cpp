#include "tpc/contrast.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tpc {

void ContrastConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw Error(Errc::InvalidConfig, "gamma must be >= 0");
  if (!(plausibility_cutoff >= 0.0 && plausibility_cutoff <= 1.0)) {
    throw Error(Errc::InvalidConfig, "plausibility cutoff must lie in [0, 1]");
  }
}

void ContrastConfig::validate(std::size_t num_layers) const {
  validate();
  if (num_layers < 2) throw Error(Errc::InvalidConfig, "layer contrast needs at least 2 layers");
  for (std::size_t layer : candidate_layers) {
    if (layer + 1 >= num_layers) {
      throw Error(Errc::InvalidConfig, "candidate layer " + std::to_string(layer) +
                                           " is not below the final layer " +
                                           std::to_string(num_layers - 1));
    }
  }
}

std::vector<std::size_t> odd_layers(std::size_t num_layers) {
  std::vector<std::size_t> out;
  for (std::size_t layer = 1; layer + 1 < num_layers; layer += 2) out.push_back(layer);
  return out;
}

LogitFrame contrast_combine(const LogitFrame& base, const LogitFrame& negative,
                            const ContrastConfig& cfg) {
  cfg.validate();
  check_same_size(base, negative);
  check_frame(negative);
  const ProbFrame probs = softmax(base);
  const double threshold = cfg.plausibility_cutoff * probs.maxCoeff();

  LogitFrame out(base.size());
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    if (probs[i] >= threshold && !is_excluded(base, i)) {
      // base + gamma * (base - negative) == (1 + gamma) * base - gamma * negative,
      // and cancels exactly when the streams agree
      out[i] = base[i] + cfg.gamma * (base[i] - negative[i]);
    } else {
      out[i] = kExcludedScore;
    }
  }
  return out;
}

std::size_t dola_select_layer(std::span<const LogitFrame> step_layers, const LogitFrame& final,
                              std::span<const std::size_t> candidates) {
  if (candidates.empty()) throw Error(Errc::InvalidConfig, "no premature layer candidates");
  std::vector<std::size_t> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t layer : sorted) {
    if (layer >= step_layers.size()) {
      throw Error(Errc::InvalidConfig, "candidate layer " + std::to_string(layer) + " out of range");
    }
  }

  const ProbFrame final_probs = softmax(final);
  std::size_t best = sorted.front();
  double best_js = -1.0;
  for (std::size_t layer : sorted) {
    const double js = js_divergence(final_probs, softmax(step_layers[layer]));
    if (js > best_js) {
      best_js = js;
      best = layer;
    }
  }
  return best;
}

LogitFrame dola_step(std::span<const LogitFrame> step_layers, const ContrastConfig& cfg) {
  cfg.validate(step_layers.size());
  const LogitFrame& final = step_layers.back();
  const std::vector<std::size_t> candidates =
      cfg.candidate_layers.empty() ? odd_layers(step_layers.size()) : cfg.candidate_layers;
  if (candidates.empty()) {
    // two-layer stacks have no odd layer below the final one
    return contrast_combine(final, step_layers.front(), cfg);
  }
  const std::size_t premature = dola_select_layer(step_layers, final, candidates);
  return contrast_combine(final, step_layers[premature], cfg);
}

}  // namespace tpc
