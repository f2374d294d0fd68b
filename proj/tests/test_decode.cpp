#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <random>

#include "test_util.hpp"
#include "tpc/decode.hpp"

using namespace tpc;

namespace {

RunConfig toy_config(ConnectMode mode, Strategy strategy = Strategy::Nucleus) {
  RunConfig c;
  c.policy.mode = mode;
  c.sampler.strategy = strategy;
  c.sampler.top_p = 0.9;
  c.sampler.max_tokens = 24;
  c.sampler.seed = 11;
  return c;
}

ToyFrameProvider toy_provider(std::uint64_t seed, std::size_t layers = 8) {
  ToyModelConfig cfg;
  cfg.num_layers = layers;
  return ToyFrameProvider(std::make_shared<const ToyModel>(cfg), toy_prompt(seed, 8, cfg.vocab_size));
}

std::shared_ptr<const LogitTrace> random_trace(std::uint64_t seed, std::size_t steps, std::size_t prompt_len) {
  std::mt19937_64 rng(seed);
  auto trace = std::make_shared<LogitTrace>();
  for (std::size_t t = 0; t < steps; ++t) trace->frames.push_back(test::random_frame(rng, 16));
  trace->prompt_len = prompt_len;
  return trace;
}

}  // namespace

TEST_CASE("decoding is deterministic for a fixed seed and stream") {
  const ToyFrameProvider provider = toy_provider(3);
  for (ConnectMode mode : {ConnectMode::Off, ConnectMode::Ltpc, ConnectMode::Atpc}) {
    const RunConfig c = toy_config(mode);
    CHECK(decode(c, provider).tokens == decode(c, provider).tokens);
    CHECK(decode(c, provider, {}, 5).tokens == decode(c, provider, {}, 5).tokens);
  }
}

TEST_CASE("lambda 0 and alpha 1 reproduce the unconnected decode") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ToyFrameProvider provider = toy_provider(seed);
    const auto off = decode(toy_config(ConnectMode::Off), provider).tokens;
    for (ConnectMode mode : {ConnectMode::Ltpc, ConnectMode::Atpc}) {
      RunConfig c = toy_config(mode);
      c.policy.lambda = 0.0;
      c.policy.alpha = 1.0;
      CHECK(decode(c, provider).tokens == off);
    }
  }
}

TEST_CASE("trace replay") {
  const auto trace = random_trace(1, 12, 4);
  const TraceFrameProvider provider(trace);
  RunConfig c = toy_config(ConnectMode::Atpc, Strategy::Greedy);

  SUBCASE("greedy off picks the argmax of each generated frame") {
    c.policy.mode = ConnectMode::Off;
    c.sampler.max_tokens = 8;
    const auto tokens = decode(c, provider).tokens;
    REQUIRE(tokens.size() == 8);
    for (std::size_t t = 0; t < 8; ++t) CHECK(tokens[t] == select_greedy(trace->frames[4 + t]));
  }
  SUBCASE("asking for more steps than recorded is a DecodeError") {
    c.sampler.max_tokens = 9;
    try {
      decode(c, provider);
      FAIL("expected DecodeError");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::DecodeError);
    }
  }
  SUBCASE("log entries carry top tokens of the connected frame") {
    c.sampler.max_tokens = 8;
    DecodeOptions opts;
    opts.dump_frames = true;
    const auto result = decode(c, provider, opts);
    REQUIRE(result.log.size() == 8);
    for (const auto& entry : result.log) {
      REQUIRE(entry.top.size() == 5);
      double mass = 0.0;
      for (std::size_t i = 0; i < entry.top.size(); ++i) {
        mass += entry.top[i].prob;
        if (i) CHECK(entry.top[i - 1].prob >= entry.top[i].prob);
      }
      CHECK(mass <= 1.0 + 1e-12);
      REQUIRE(entry.frame);
      CHECK(entry.top[0].id == entry.token);  // greedy
      CHECK(entry.mode == ConnectMode::Atpc);
    }
  }
}

TEST_CASE("stop tokens end the decode") {
  const auto trace = random_trace(2, 12, 2);
  const TraceFrameProvider provider(trace);
  RunConfig c = toy_config(ConnectMode::Off, Strategy::Greedy);
  c.sampler.max_tokens = 10;
  const auto full = decode(c, provider).tokens;
  c.sampler.stop_tokens = {full[3]};
  const auto stopped = decode(c, provider).tokens;
  CHECK(stopped.back() == full[3]);
  CHECK(stopped.size() <= 4);
  CHECK(std::equal(stopped.begin(), stopped.end(), full.begin()));
}

TEST_CASE("two-stream contrast") {
  const auto pos = random_trace(3, 10, 2);
  const auto neg = random_trace(4, 10, 2);
  const TraceFrameProvider provider(pos, neg);
  RunConfig c = toy_config(ConnectMode::Off, Strategy::Greedy);
  c.decoder = ContrastDecoder::Vcd;
  c.sampler.max_tokens = 8;
  const auto tokens = decode(c, provider).tokens;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    CHECK(tokens[t] == select_greedy(contrast_combine(pos->frames[2 + t], neg->frames[2 + t], ContrastConfig{})));
  }

  const TraceFrameProvider single(pos);
  CHECK_THROWS_AS(decode(c, single), Error);

  const auto short_neg = random_trace(5, 9, 2);
  try {
    TraceFrameProvider bad(pos, short_neg);
    FAIL("expected InvalidInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidInput);
  }
}

TEST_CASE("layer contrast on the toy model") {
  const ToyFrameProvider provider = toy_provider(6);
  RunConfig c = toy_config(ConnectMode::Atpc);
  c.decoder = ContrastDecoder::Dola;
  const auto a = decode(c, provider).tokens;
  CHECK(a.size() == c.sampler.max_tokens);
  CHECK(a == decode(c, provider).tokens);

  const TraceFrameProvider final_only(random_trace(7, 10, 2));
  try {
    decode(c, final_only);
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidConfig);
  }
}

TEST_CASE("beam width 1 matches greedy under connection") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const ToyFrameProvider provider = toy_provider(seed);
    RunConfig greedy = toy_config(ConnectMode::Atpc, Strategy::Greedy);
    RunConfig beam = toy_config(ConnectMode::Atpc, Strategy::Beam);
    beam.sampler.beam_width = 1;
    CHECK(decode(beam, provider).tokens == decode(greedy, provider).tokens);
  }
}

TEST_CASE("parallel_for visits every index and forwards exceptions") {
  for (const char* threads : {"1", "3"}) {
    setenv("TPC_THREADS", threads, 1);
    std::vector<std::atomic<int>> seen(50);
    parallel_for(seen.size(), [&](std::size_t i) { seen[i]++; });
    for (const auto& s : seen) CHECK(s.load() == 1);
    CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                      if (i == 7) throw Error(Errc::DecodeError, "boom");
                    }),
                    Error);
  }
  setenv("TPC_THREADS", "0", 1);
  CHECK(worker_count() == 1);
  unsetenv("TPC_THREADS");
  CHECK(worker_count() == 1);
}
