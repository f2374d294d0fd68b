#pragma once

// Measurement harnesses: divergence as a function of timestep distance,
// the sliding-window connection sweep, PCA of logit trajectories and the
// hallucination-impact score.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tpc/connection.hpp"
#include "tpc/core.hpp"
#include "tpc/metrics.hpp"
#include "tpc/samplers.hpp"

namespace tpc {

struct DistanceStats {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;

  void add(double value);
  double mean() const;
  /// Population standard deviation.
  double stddev() const;
};

struct DivergenceProfile {
  std::map<std::size_t, DistanceStats> by_distance;

  void merge(const DivergenceProfile& other);
  std::size_t total_pairs() const;
};

struct DivergenceOptions {
  bool include_prompt = false;
  DivergenceUnit unit = DivergenceUnit::Nats;
  double temperature = 1.0;
};

/// JS divergence between softmax(l_s) and softmax(l_t) for every pair s < t,
/// bucketed by t - s. Only generated frames take part unless include_prompt
/// is set.
DivergenceProfile divergence_profile(const LogitTrace& trace, const DivergenceOptions& options = {});

struct SlidingWindowItem {
  LogitTrace trace;
  EvalRecord record;
};

struct SegmentScore {
  std::size_t segment = 0;
  ConnectMode mode = ConnectMode::Off;
  double accuracy = 0.0;
  double f1 = 0.0;
  std::vector<TokenId> answers;  ///< one per item
};

/// Start of prompt window `segment` out of `num_segments`. Windows are
/// contiguous, non-overlapping and end at the prompt boundary, so the last
/// segment is always the trailing window; a leading remainder is unused.
std::size_t segment_start(std::size_t prompt_len, std::size_t window, std::size_t num_segments,
                          std::size_t segment);

/// For each segment and each of Off, LTPC and ATPC: prime the connection
/// state with that prompt window, connect it to the first generated frame,
/// pick the answer token with `sampler` (stream = item index, identical for
/// every segment and mode) and score the decoded token text against the
/// item's label. Results are ordered by segment, then mode.
std::vector<SegmentScore> sliding_window_eval(std::span<const SlidingWindowItem> items,
                                              const DecodePolicy& policy_template,
                                              std::size_t num_segments, const SamplerConfig& sampler,
                                              const Vocabulary& vocab);

struct PcaOptions {
  bool softmax_space = false;
  bool generated_only = false;
};

struct ProjectionResult {
  Eigen::MatrixXd components;          ///< V x k, orthonormal columns
  Eigen::MatrixXd projected;           ///< frames x k
  Eigen::VectorXd explained_variance;  ///< fraction of total variance per component
  std::vector<std::size_t> frame_indices;
  std::string warning;  ///< set when fewer than k components carry variance
};

/// Top-k principal axes of the mean-centred frames, from a thin SVD of the
/// frames x V data matrix (cost grows with V, never V^2).
ProjectionResult pca_project(const LogitTrace& trace, std::size_t k, const PcaOptions& options = {});

/// acc_origin - acc_hallu, rounded to 12 decimals. Both inputs must be on
/// the same scale (fractions or percentages).
double hi_score(double acc_origin, double acc_hallu);

}  // namespace tpc
