#include "tpc/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace tpc {

void DistanceStats::add(double value) {
  sum += value;
  sum_sq += value * value;
  ++count;
}

double DistanceStats::mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }

double DistanceStats::stddev() const {
  if (count == 0) return 0.0;
  const double m = mean();
  const double var = sum_sq / static_cast<double>(count) - m * m;
  return var > 0.0 ? std::sqrt(var) : 0.0;
}

void DivergenceProfile::merge(const DivergenceProfile& other) {
  for (const auto& [d, stats] : other.by_distance) {
    auto& mine = by_distance[d];
    mine.sum += stats.sum;
    mine.sum_sq += stats.sum_sq;
    mine.count += stats.count;
  }
}

std::size_t DivergenceProfile::total_pairs() const {
  std::size_t n = 0;
  for (const auto& [d, stats] : by_distance) n += stats.count;
  return n;
}

DivergenceProfile divergence_profile(const LogitTrace& trace, const DivergenceOptions& options) {
  const std::size_t begin = options.include_prompt ? 0 : trace.prompt_len;
  const std::size_t n = trace.frames.size() - std::min(begin, trace.frames.size());
  if (n < 2) throw Error(Errc::InvalidInput, "divergence profile needs at least 2 frames");

  std::vector<ProbFrame> probs;
  probs.reserve(n);
  for (std::size_t t = begin; t < trace.frames.size(); ++t) {
    probs.push_back(softmax(trace.frames[t], options.temperature));
  }

  DivergenceProfile profile;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = s + 1; t < n; ++t) {
      profile.by_distance[t - s].add(js_divergence(probs[s], probs[t], options.unit));
    }
  }
  return profile;
}

std::size_t segment_start(std::size_t prompt_len, std::size_t window, std::size_t num_segments,
                          std::size_t segment) {
  if (num_segments == 0 || segment >= num_segments) {
    throw Error(Errc::InvalidConfig, "segment index out of range");
  }
  if (num_segments * window > prompt_len) {
    throw Error(Errc::InvalidInput, std::to_string(num_segments) + " windows of " +
                                        std::to_string(window) + " do not fit a prompt of " +
                                        std::to_string(prompt_len) + " frames");
  }
  return prompt_len - (num_segments - segment) * window;
}

std::vector<SegmentScore> sliding_window_eval(std::span<const SlidingWindowItem> items,
                                              const DecodePolicy& policy_template,
                                              std::size_t num_segments, const SamplerConfig& sampler,
                                              const Vocabulary& vocab) {
  if (items.empty()) throw Error(Errc::InvalidInput, "no items for the sliding-window sweep");
  if (num_segments == 0) throw Error(Errc::InvalidConfig, "num_segments must be at least 1");
  policy_template.validate();
  sampler.validate();
  for (const auto& item : items) {
    item.trace.validate();
    if (item.trace.generated_steps() < 1) {
      throw Error(Errc::InvalidInput, "item '" + item.record.id + "' has no generated frame");
    }
    if (item.trace.vocab_size() > vocab.size()) {
      throw Error(Errc::InvalidInput, "vocabulary smaller than trace vocab size");
    }
    segment_start(item.trace.prompt_len, policy_template.window, num_segments, 0);
  }

  constexpr ConnectMode kModes[] = {ConnectMode::Off, ConnectMode::Ltpc, ConnectMode::Atpc};
  std::vector<SegmentScore> out;
  for (std::size_t segment = 0; segment < num_segments; ++segment) {
    for (ConnectMode mode : kModes) {
      SegmentScore score;
      score.segment = segment;
      score.mode = mode;
      std::vector<EvalRecord> records;
      records.reserve(items.size());
      for (std::size_t i = 0; i < items.size(); ++i) {
        const LogitTrace& trace = items[i].trace;
        DecodePolicy policy = policy_template;
        policy.mode = mode;
        policy.anchor = WindowAnchor::FixedRange;
        policy.anchor_start = segment_start(trace.prompt_len, policy.window, num_segments, segment);
        const std::span<const LogitFrame> prompt(trace.frames.data(), trace.prompt_len);
        const TpcState state = tpc_prime(policy, prompt);
        const LogitFrame connected = state.connect(trace.frames[trace.prompt_len]);

        Rng rng(sampler.seed, i);
        const TokenId token = select_token(connected, sampler, rng);
        score.answers.push_back(token);
        records.push_back({items[i].record.id, items[i].record.label, vocab.token(token)});
      }
      const PopeScores pope = pope_score(records);
      score.accuracy = pope.accuracy;
      score.f1 = pope.f1;
      out.push_back(std::move(score));
    }
  }
  return out;
}

ProjectionResult pca_project(const LogitTrace& trace, std::size_t k, const PcaOptions& options) {
  if (k == 0) throw Error(Errc::InvalidConfig, "k must be at least 1");
  const std::size_t begin = options.generated_only ? trace.prompt_len : 0;
  const std::size_t n = trace.frames.size() - std::min(begin, trace.frames.size());
  if (n < k + 1) {
    throw Error(Errc::InvalidInput, "PCA with k=" + std::to_string(k) + " needs at least " +
                                        std::to_string(k + 1) + " frames");
  }
  const auto v = static_cast<Eigen::Index>(trace.vocab_size());

  ProjectionResult result;
  Eigen::MatrixXd data(static_cast<Eigen::Index>(n), v);
  for (std::size_t i = 0; i < n; ++i) {
    const LogitFrame& frame = trace.frames[begin + i];
    if (options.softmax_space) {
      data.row(static_cast<Eigen::Index>(i)) = softmax(frame).transpose();
    } else {
      data.row(static_cast<Eigen::Index>(i)) = frame.transpose();
    }
    result.frame_indices.push_back(begin + i);
  }
  const Eigen::RowVectorXd mean = data.colwise().mean();
  data.rowwise() -= mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(data, Eigen::ComputeThinV);
  const Eigen::VectorXd variances = svd.singularValues().array().square();
  const double total = variances.sum();
  const double tol = total * 1e-12;

  std::size_t kept = 0;
  while (kept < k && kept < static_cast<std::size_t>(variances.size()) &&
         variances[static_cast<Eigen::Index>(kept)] > tol && total > 0.0) {
    ++kept;
  }
  if (kept < k) {
    result.warning = "trace spans only " + std::to_string(kept) + " of " + std::to_string(k) +
                     " requested principal directions";
  }

  const auto kk = static_cast<Eigen::Index>(kept);
  result.components = svd.matrixV().leftCols(kk);
  // sign convention: largest-magnitude loading of each axis is positive
  for (Eigen::Index c = 0; c < kk; ++c) {
    Eigen::Index arg = 0;
    result.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (result.components(arg, c) < 0.0) result.components.col(c) *= -1.0;
  }
  result.projected = data * result.components;
  result.explained_variance = kk > 0 ? Eigen::VectorXd(variances.head(kk) / total) : Eigen::VectorXd();
  return result;
}

double hi_score(double acc_origin, double acc_hallu) {
  if (!std::isfinite(acc_origin) || !std::isfinite(acc_hallu) || acc_origin < 0.0 || acc_hallu < 0.0 ||
      acc_origin > 100.0 || acc_hallu > 100.0) {
    throw Error(Errc::InvalidInput, "accuracies must lie in [0, 1] or [0, 100]");
  }
  if ((acc_origin <= 1.0) != (acc_hallu <= 1.0)) {
    throw Error(Errc::InvalidInput, "accuracies on different scales (fraction vs percent)");
  }
  return std::round((acc_origin - acc_hallu) * 1e12) / 1e12;
}

}  // namespace tpc
