#include <doctest.h>

#include "test_util.hpp"
#include "tpc/contrast.hpp"

using namespace tpc;
using tpc::test::frame;

namespace {

ContrastConfig cfg(double gamma, double cutoff) {
  ContrastConfig c;
  c.gamma = gamma;
  c.plausibility_cutoff = cutoff;
  return c;
}

}  // namespace

TEST_CASE("two-stream contrast hand case") {
  const LogitFrame out = contrast_combine(frame({2, 0}), frame({0, 2}), cfg(1.0, 0.0));
  CHECK(out[0] == 4.0);
  CHECK(out[1] == -2.0);
}

TEST_CASE("plausibility cutoff excludes unlikely tokens") {
  // probabilities 0.8, 0.1, 0.1 with ln-ratios; cutoff 0.2 keeps only token 0
  const LogitFrame base = frame({std::log(8.0), 0.0, 0.0});
  const LogitFrame out = contrast_combine(base, frame({0, 0, 0}), cfg(1.0, 0.2));
  CHECK(out[0] == doctest::Approx(2.0 * std::log(8.0)));
  CHECK(is_excluded(out, 1));
  CHECK(is_excluded(out, 2));
  CHECK(softmax(out)[0] == 1.0);

  // the top token always survives, even with cutoff 1
  const LogitFrame top_only = contrast_combine(base, frame({5, 0, 0}), cfg(1.0, 1.0));
  CHECK(!is_excluded(top_only, 0));
}

TEST_CASE("gamma 0 returns the base on the plausible set") {
  std::mt19937_64 rng(4);
  const LogitFrame base = test::random_frame(rng, 10);
  const LogitFrame out = contrast_combine(base, test::random_frame(rng, 10), cfg(0.0, 0.0));
  CHECK(out == base);
}

TEST_CASE("contrast config validation") {
  CHECK_THROWS_AS(cfg(-1.0, 0.1).validate(), Error);
  CHECK_THROWS_AS(cfg(1.0, 1.5).validate(), Error);
  ContrastConfig c;
  c.candidate_layers = {3};
  CHECK_THROWS_AS(c.validate(4), Error);  // 3 is the final layer
  CHECK_NOTHROW(c.validate(5));
  CHECK_THROWS_AS(ContrastConfig{}.validate(1), Error);
  CHECK_THROWS_AS(contrast_combine(frame({1, 2}), frame({1}), ContrastConfig{}), Error);
}

TEST_CASE("odd candidate layers") {
  CHECK(odd_layers(8) == std::vector<std::size_t>{1, 3, 5});
  CHECK(odd_layers(3) == std::vector<std::size_t>{1});
  CHECK(odd_layers(2).empty());
  CHECK(odd_layers(32).size() == 15);
}

TEST_CASE("layer selection matches exhaustive JS comparison") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 500; ++i) {
    const std::size_t v = 2 + rng() % 12;
    std::vector<LogitFrame> layers;
    for (int l = 0; l < 5; ++l) layers.push_back(test::random_frame(rng, v));
    const std::vector<std::size_t> candidates{0, 1, 2, 3};

    const std::vector<double> fin = test::scalar_softmax(layers.back());
    std::size_t best = 0;
    double best_js = -1.0;
    for (std::size_t c : candidates) {
      const double js = test::js_scalar(fin, test::scalar_softmax(layers[c]));
      if (js > best_js + 1e-12) {
        best_js = js;
        best = c;
      }
    }
    CHECK(dola_select_layer(layers, layers.back(), candidates) == best);
  }
}

TEST_CASE("hand-set three-layer case picks the most divergent layer") {
  // layer 0 agrees with the final layer; layer 1 puts its mass elsewhere
  const std::vector<LogitFrame> layers{frame({std::log(0.7), std::log(0.2), std::log(0.1)}),
                                       frame({std::log(0.1), std::log(0.1), std::log(0.8)}),
                                       frame({std::log(0.7), std::log(0.2), std::log(0.1)})};
  const std::vector<std::size_t> both{0, 1};
  CHECK(dola_select_layer(layers, layers.back(), both) == 1);
}

TEST_CASE("ties go to the shallowest layer") {
  const std::vector<LogitFrame> layers(4, frame({1, 2, 3}));
  const std::vector<std::size_t> candidates{2, 0, 1};
  CHECK(dola_select_layer(layers, layers.back(), candidates) == 0);
  CHECK_THROWS_AS(dola_select_layer(layers, layers.back(), std::vector<std::size_t>{}), Error);
}

TEST_CASE("identical layers reproduce the final layer") {
  std::mt19937_64 rng(12);
  const LogitFrame f = test::random_frame(rng, 16);
  const std::vector<LogitFrame> layers(6, f);
  CHECK(dola_step(layers, cfg(1.0, 0.0)) == f);
  // with the default cutoff, the plausible tokens keep their final-layer score
  const LogitFrame out = dola_step(layers, ContrastConfig{});
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    if (!is_excluded(out, i)) CHECK(out[i] == f[i]);
  }
}

TEST_CASE("two-layer stack contrasts against the shallow layer") {
  // final favours token 0 more than the shallow layer does, token 2 less
  const std::vector<LogitFrame> layers{frame({1.0, 1.0, 1.0}), frame({2.0, 1.0, 0.5})};
  const LogitFrame out = dola_step(layers, cfg(1.0, 0.0));
  CHECK(out[0] == 3.0);   // 2 + (2 - 1)
  CHECK(out[1] == 1.0);   // unchanged
  CHECK(out[2] == 0.0);   // 0.5 + (0.5 - 1)
}
