#include <doctest.h>

#include "tpc/bench.hpp"

using namespace tpc;

TEST_CASE("small bench run produces one row per mode") {
  BenchOptions o;
  o.toy.vocab_size = 64;
  o.sequences = 2;
  o.steps = 8;
  o.repeats = 1;
  o.modes = {BenchMode::Atpc, BenchMode::Dola};
  const BenchReport r = run_bench(o);
  REQUIRE(r.rows.size() == 3);  // Off is added
  const BenchRow* off = r.find(BenchMode::Off);
  REQUIRE(off);
  CHECK(off->relative == 1.0);
  CHECK(off->overhead == 0.0);
  for (const auto& row : r.rows) {
    CHECK(row.seconds > 0.0);
    CHECK(row.ms_per_sample == doctest::Approx(row.seconds * 1000.0 / 2.0));
    CHECK(row.ms_per_step == doctest::Approx(row.ms_per_sample / 8.0));
    CHECK(row.overhead == doctest::Approx(row.relative - 1.0));
  }
  CHECK(r.find(BenchMode::Ltpc) == nullptr);

  const auto j = to_json(r);
  for (const char* key : {"vocab_size", "num_layers", "sequences", "steps", "prompt_len", "repeats", "threads",
                          "lambda", "alpha", "window", "strategy", "top_p", "temperature", "results"}) {
    CHECK_MESSAGE(j.contains(key), key);
  }
  CHECK(j["results"].size() == 3);
}

TEST_CASE("bench rejects configurations it cannot time") {
  BenchOptions o;
  o.sampler.strategy = Strategy::Beam;
  CHECK_THROWS_AS(run_bench(o), Error);
  BenchOptions one_layer;
  one_layer.toy.num_layers = 1;
  CHECK_THROWS_AS(one_layer.validate(), Error);
  one_layer.modes = {BenchMode::Atpc};
  CHECK_NOTHROW(one_layer.validate());
}
