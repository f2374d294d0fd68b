#pragma once

// Logit-level contrastive decoding baselines: two-stream contrast against a
// negative logit stream, and early-exit layer contrast with the premature
// layer chosen by maximum Jensen-Shannon divergence.

#include <cstddef>
#include <span>
#include <vector>

#include "tpc/core.hpp"

namespace tpc {

struct ContrastConfig {
  double gamma = 1.0;
  double plausibility_cutoff = 0.1;
  /// Premature-layer candidates; empty means every odd-indexed layer below
  /// the final one.
  std::vector<std::size_t> candidate_layers;

  void validate() const;
  /// Also checks candidates against a concrete layer count.
  void validate(std::size_t num_layers) const;

  friend bool operator==(const ContrastConfig&, const ContrastConfig&) = default;
};

/// Indices 1, 3, 5, ... strictly below the final layer index.
std::vector<std::size_t> odd_layers(std::size_t num_layers);

/// (1 + gamma) * base - gamma * negative on the plausible set
/// {i : softmax(base)_i >= cutoff * max softmax(base)}; every other token is
/// set to kExcludedScore.
LogitFrame contrast_combine(const LogitFrame& base, const LogitFrame& negative,
                            const ContrastConfig& cfg);

/// The candidate whose distribution is furthest (JS) from the final layer's.
/// Ties go to the shallowest layer.
std::size_t dola_select_layer(std::span<const LogitFrame> step_layers, const LogitFrame& final,
                              std::span<const std::size_t> candidates);

/// Contrast the final layer against the selected premature layer.
LogitFrame dola_step(std::span<const LogitFrame> step_layers, const ContrastConfig& cfg);

}  // namespace tpc
