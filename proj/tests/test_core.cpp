#include <doctest.h>

#include <numbers>

#include "test_util.hpp"
#include "tpc/core.hpp"

using namespace tpc;
using tpc::test::frame;

TEST_CASE("softmax of log-ratios recovers the ratios") {
  const ProbFrame p = softmax(frame({std::log(1.0), std::log(3.0)}));
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("softmax is shift invariant and stable for huge scores") {
  const ProbFrame a = softmax(frame({1.0, 2.0, 3.0}));
  const ProbFrame b = softmax(frame({1001.0, 1002.0, 1003.0}));
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(b.allFinite());
  CHECK(b.sum() == doctest::Approx(1.0));
}

TEST_CASE("softmax temperature scales the scores") {
  const LogitFrame f = frame({0.3, -1.2, 2.5, 0.0});
  const ProbFrame hot = softmax(f, 2.0);
  const ProbFrame direct = softmax(LogitFrame(f / 2.0));
  CHECK((hot - direct).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("excluded scores get exactly zero probability") {
  const ProbFrame p = softmax(frame({kExcludedScore, 0.0, 0.0}));
  CHECK(p[0] == 0.0);
  CHECK(p[1] == doctest::Approx(0.5));
  const LogitFrame lp = log_softmax(frame({kExcludedScore, 0.0}));
  CHECK(std::isinf(lp[0]));
  CHECK(lp[1] == doctest::Approx(0.0));
}

TEST_CASE("log_softmax matches log of softmax") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const LogitFrame f = test::random_frame(rng, 17);
    const LogitFrame lp = log_softmax(f, 0.7);
    const ProbFrame p = softmax(f, 0.7);
    for (Eigen::Index k = 0; k < f.size(); ++k) CHECK(lp[k] == doctest::Approx(std::log(p[k])).epsilon(1e-12));
  }
}

TEST_CASE("softmax rejects bad frames and temperatures") {
  CHECK_THROWS_AS(softmax(LogitFrame()), Error);
  try {
    softmax(frame({1.0, std::nan("")}));
    FAIL("expected InvalidFrame");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidFrame);
  }
  try {
    softmax(frame({1.0}), 0.0);
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidConfig);
  }
}

TEST_CASE("KL hand cases") {
  CHECK(kl_divergence(frame({1.0, 0.0}), frame({0.5, 0.5})) == doctest::Approx(std::numbers::ln2).epsilon(1e-9));
  // 0.25 ln(1/3) + 0.75 ln 3, evaluated to 19 digits offline
  CHECK(kl_divergence(frame({0.25, 0.75}), frame({0.75, 0.25})) ==
        doctest::Approx(0.5493061443340548457).epsilon(1e-14));
  CHECK(kl_divergence(frame({0.25, 0.75}), frame({0.75, 0.25}), DivergenceUnit::Bits) ==
        doctest::Approx(0.5493061443340548457 / std::numbers::ln2).epsilon(1e-14));
}

TEST_CASE("JS reference value from an independent high-precision evaluation") {
  CHECK(js_divergence(frame({0.9, 0.1}), frame({0.1, 0.9})) == doctest::Approx(0.3680642071684970699).epsilon(1e-14));
}

TEST_CASE("JS of disjoint distributions reaches ln 2 and is clamped there") {
  const double js = js_divergence(frame({1.0, 0.0}), frame({0.0, 1.0}));
  CHECK(js <= std::numbers::ln2);
  CHECK(js == doctest::Approx(std::numbers::ln2).epsilon(1e-9));
  CHECK(js_divergence(frame({1.0, 0.0}), frame({0.0, 1.0}), DivergenceUnit::Bits) <= 1.0);
}

TEST_CASE("JS properties over random pairs") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t v = 2 + rng() % 30;
    const ProbFrame p = test::random_distribution(rng, v);
    const ProbFrame q = test::random_distribution(rng, v);
    const double pq = js_divergence(p, q);
    CHECK(pq >= 0.0);
    CHECK(pq <= std::numbers::ln2 + 1e-12);
    CHECK(std::abs(pq - js_divergence(q, p)) <= 1e-12);
    CHECK(js_divergence(p, p) <= 1e-8);
    CHECK(kl_divergence(p, q) >= 0.0);
  }
}

TEST_CASE("JS agrees with a scalar evaluation on strictly positive inputs") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const ProbFrame p = test::random_distribution(rng, 8, false);
    const ProbFrame q = test::random_distribution(rng, 8, false);
    const std::vector<double> ps(p.begin(), p.end()), qs(q.begin(), q.end());
    CHECK(js_divergence(p, q) == doctest::Approx(test::js_scalar(ps, qs)).epsilon(1e-9));
  }
}

TEST_CASE("divergences reject mismatched sizes") {
  try {
    js_divergence(frame({0.5, 0.5}), frame({1.0}));
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DimensionMismatch);
  }
}

TEST_CASE("trace validation") {
  LogitTrace t;
  CHECK_THROWS_AS(t.validate(), Error);
  t.frames = {frame({1, 2}), frame({3, 4})};
  t.prompt_len = 1;
  CHECK_NOTHROW(t.validate());
  CHECK(t.num_layers() == 1);
  CHECK(t.generated_steps() == 1);

  t.prompt_len = 3;
  CHECK_THROWS_AS(t.validate(), Error);
  t.prompt_len = 1;

  t.frames.push_back(frame({1, 2, 3}));
  try {
    t.validate();
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DimensionMismatch);
  }
  t.frames.pop_back();

  t.layers = {{frame({0, 0}), frame({1, 2})}, {frame({0, 0}), frame({3, 5})}};
  CHECK_THROWS_AS(t.validate(), Error);  // final layer must equal the frame
  t.layers[1][1] = frame({3, 4});
  CHECK_NOTHROW(t.validate());
  CHECK(t.num_layers() == 2);
}

TEST_CASE("vocabulary lookups") {
  const Vocabulary v = Vocabulary::synthetic(5);
  CHECK(v.size() == 5);
  CHECK(v.token(0) == "yes");
  CHECK(v.token(1) == "no");
  CHECK(v.token(4) == "w4");
  CHECK(v.id("w3") == 3);
  CHECK(v.decode({0, 2, 1}) == "yes w2 no");
  try {
    v.token(5);
    FAIL("expected InvalidToken");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidToken);
  }
  CHECK_THROWS_AS(Vocabulary(std::vector<std::string>{"a", "a"}), Error);
}

TEST_CASE("error codes carry their names") {
  const Error e(Errc::CorruptFile, "boom");
  CHECK(e.code() == Errc::CorruptFile);
  CHECK(std::string(to_string(Errc::DecodeError)) == "DecodeError");
}
