#include <doctest.h>

#include "test_util.hpp"
#include "tpc/analysis.hpp"
#include "tpc/decode.hpp"
#include "tpc/toylm.hpp"

using namespace tpc;
using tpc::test::frame;

namespace {

LogitTrace three_frame_trace() {
  LogitTrace t;
  t.frames = {frame({0, 0, 0}), frame({std::log(2.0), 0, 0}), frame({std::log(4.0), 0, 0})};
  return t;
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
void jacobi_eigen(std::vector<std::vector<double>> a, std::vector<double>& values,
                  std::vector<std::vector<double>>& vectors) {
  const std::size_t n = a.size();
  vectors.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) vectors[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vectors[k][p], vkq = vectors[k][q];
          vectors[k][p] = c * vkp - s * vkq;
          vectors[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  values.resize(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a[i][i];
}

}  // namespace

TEST_CASE("divergence profile of a hand-built trace") {
  const DivergenceProfile prof = divergence_profile(three_frame_trace());
  REQUIRE(prof.by_distance.size() == 2);
  // softmax rows are [1/3,1/3,1/3], [1/2,1/4,1/4], [2/3,1/6,1/6]; JS values evaluated offline to 17 digits
  CHECK(prof.by_distance.at(1).count == 2);
  CHECK(prof.by_distance.at(1).mean() == doctest::Approx(0.014362591564146661).epsilon(1e-12));
  CHECK(prof.by_distance.at(2).count == 1);
  CHECK(prof.by_distance.at(2).mean() == doctest::Approx(0.056633012265132487).epsilon(1e-12));
  CHECK(prof.total_pairs() == 3);
}

TEST_CASE("divergence profile matches pair enumeration on random traces") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 20; ++i) {
    LogitTrace t;
    const std::size_t n = 3 + rng() % 12;
    for (std::size_t k = 0; k < n; ++k) t.frames.push_back(test::random_frame(rng, 6));
    t.prompt_len = rng() % 2;
    const DivergenceProfile prof = divergence_profile(t);

    std::map<std::size_t, std::vector<double>> expected;
    for (std::size_t a = t.prompt_len; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        expected[b - a].push_back(test::js_scalar(test::scalar_softmax(t.frames[a]), test::scalar_softmax(t.frames[b])));
    REQUIRE(prof.by_distance.size() == expected.size());
    for (const auto& [d, values] : expected) {
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      const DistanceStats& s = prof.by_distance.at(d);
      CHECK(s.count == values.size());
      CHECK(s.mean() == doctest::Approx(mean).epsilon(1e-9));
      CHECK(s.stddev() == doctest::Approx(std::sqrt(var / static_cast<double>(values.size()))).epsilon(1e-6));
    }
  }
}

TEST_CASE("divergence options") {
  LogitTrace t = three_frame_trace();
  t.prompt_len = 1;
  CHECK(divergence_profile(t).total_pairs() == 1);
  DivergenceOptions all;
  all.include_prompt = true;
  CHECK(divergence_profile(t, all).total_pairs() == 3);
  DivergenceOptions bits = all;
  bits.unit = DivergenceUnit::Bits;
  CHECK(divergence_profile(t, bits).by_distance.at(2).mean() ==
        doctest::Approx(0.056633012265132487 / std::log(2.0)).epsilon(1e-12));
  t.prompt_len = 2;
  CHECK_THROWS_AS(divergence_profile(t), Error);  // one generated frame has no pair
}

TEST_CASE("adjacent toy frames are closer than distant ones") {
  const ToyModel model;
  DivergenceProfile pooled;
  for (std::uint64_t s = 0; s < 10; ++s) pooled.merge(divergence_profile(toy_generate_trace(model, toy_prompt(s, 8, 64), 64)));
  double far = 0.0;
  std::size_t count = 0;
  for (const auto& [d, st] : pooled.by_distance) {
    if (d >= 16) {
      far += st.sum;
      count += st.count;
    }
  }
  CHECK(pooled.by_distance.at(1).mean() < far / static_cast<double>(count));
}

TEST_CASE("segment windows end at the prompt boundary") {
  CHECK(segment_start(100, 20, 3, 0) == 40);
  CHECK(segment_start(100, 20, 3, 2) == 80);
  CHECK(segment_start(640, 20, 32, 0) == 0);
  CHECK(segment_start(640, 20, 32, 31) == 620);
  CHECK(segment_start(30, 20, 1, 0) == 10);
  CHECK_THROWS_AS(segment_start(100, 20, 6, 0), Error);
  CHECK_THROWS_AS(segment_start(100, 20, 3, 3), Error);
}

TEST_CASE("sliding-window harness") {
  const ToyModel model;
  std::vector<SlidingWindowItem> items;
  for (std::uint64_t s = 0; s < 6; ++s) {
    SlidingWindowItem item;
    item.trace = toy_generate_trace(model, toy_prompt(s, 40, 64), 1);
    item.record = {"i" + std::to_string(s), s % 2 ? Answer::Yes : Answer::No, {}};
    items.push_back(std::move(item));
  }
  DecodePolicy policy;
  policy.window = 10;
  SamplerConfig sampler;
  sampler.seed = 5;
  const Vocabulary vocab = Vocabulary::synthetic(64);

  const auto scores = sliding_window_eval(items, policy, 4, sampler, vocab);
  REQUIRE(scores.size() == 12);
  for (const auto& s : scores) {
    if (s.mode != ConnectMode::Off) continue;
    CHECK(s.accuracy == scores[0].accuracy);
    CHECK(s.answers == scores[0].answers);
  }

  // one segment is the trailing window, i.e. ordinary decoding of the first answer token
  const auto one = sliding_window_eval(items, policy, 1, sampler, vocab);
  for (const auto& s : one) {
    RunConfig config;
    config.policy = policy;
    config.policy.mode = s.mode;
    config.sampler = sampler;
    config.sampler.max_tokens = 1;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const TraceFrameProvider provider(std::make_shared<const LogitTrace>(items[i].trace));
      CHECK(decode(config, provider, {}, i).tokens.front() == s.answers[i]);
    }
  }

  CHECK_THROWS_AS(sliding_window_eval(items, policy, 5, sampler, vocab), Error);  // 5 x 10 > 40
  CHECK_THROWS_AS(sliding_window_eval({}, policy, 1, sampler, vocab), Error);
}

TEST_CASE("PCA agrees with an independent eigendecomposition") {
  std::mt19937_64 rng(33);
  LogitTrace t;
  for (int i = 0; i < 10; ++i) t.frames.push_back(test::random_frame(rng, 5));
  const ProjectionResult r = pca_project(t, 3);
  CHECK(r.warning.empty());

  // covariance (unnormalized) and its eigenvectors, sorted by eigenvalue
  std::vector<double> mean(5, 0.0);
  for (const auto& f : t.frames)
    for (int j = 0; j < 5; ++j) mean[j] += f[j] / 10.0;
  std::vector<std::vector<double>> cov(5, std::vector<double>(5, 0.0));
  for (const auto& f : t.frames)
    for (int a = 0; a < 5; ++a)
      for (int b = 0; b < 5; ++b) cov[a][b] += (f[a] - mean[a]) * (f[b] - mean[b]);
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
  jacobi_eigen(cov, values, vectors);
  std::vector<int> order{0, 1, 2, 3, 4};
  std::sort(order.begin(), order.end(), [&](int x, int y) { return values[x] > values[y]; });
  double total = 0.0;
  for (double v : values) total += v;

  for (int c = 0; c < 3; ++c) {
    const int e = order[c];
    std::vector<double> axis(5);
    int arg = 0;
    for (int j = 0; j < 5; ++j) {
      axis[j] = vectors[j][e];
      if (std::abs(axis[j]) > std::abs(axis[arg])) arg = j;
    }
    if (axis[arg] < 0)
      for (double& x : axis) x = -x;
    CHECK(r.explained_variance[c] == doctest::Approx(values[e] / total).epsilon(1e-9));
    for (int i = 0; i < 10; ++i) {
      double proj = 0.0;
      for (int j = 0; j < 5; ++j) proj += (t.frames[i][j] - mean[j]) * axis[j];
      CHECK(r.projected(i, c) == doctest::Approx(proj).epsilon(1e-8));
    }
  }
  // orthonormal axes
  const Eigen::MatrixXd gram = r.components.transpose() * r.components;
  CHECK((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("PCA edge cases") {
  LogitTrace t;
  t.frames = {frame({1, 2, 3}), frame({2, 4, 6}), frame({3, 6, 9})};  // rank one after centring
  const ProjectionResult r = pca_project(t, 2);
  CHECK(!r.warning.empty());
  CHECK(r.projected.cols() == 1);
  CHECK_THROWS_AS(pca_project(t, 3), Error);  // needs k + 1 frames
  t.prompt_len = 1;
  PcaOptions gen;
  gen.generated_only = true;
  CHECK(pca_project(t, 1, gen).frame_indices == std::vector<std::size_t>{1, 2});
  PcaOptions soft;
  soft.softmax_space = true;
  CHECK(pca_project(t, 1, soft).projected.rows() == 3);
}

TEST_CASE("hallucination impact") {
  CHECK(hi_score(0.85, 0.74) == 0.11);
  // original-prompt average 81.47 and induced average 69.16 give 12.31 (the printed table says 12.58)
  CHECK(hi_score(81.47, 69.16) == 12.31);
  CHECK(hi_score(0.5, 0.5) == 0.0);
  CHECK(hi_score(0.4, 0.6) == doctest::Approx(-0.2));
  CHECK_THROWS_AS(hi_score(0.85, 74.0), Error);
  CHECK_THROWS_AS(hi_score(-0.1, 0.5), Error);
  CHECK_THROWS_AS(hi_score(101.0, 50.0), Error);
}
