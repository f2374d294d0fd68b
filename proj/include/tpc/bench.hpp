#pragma once

// Wall-clock comparison of decode modes on identical toy-model workloads.

#include <cstddef>
#include <string>
#include <vector>

#include "tpc/connection.hpp"
#include "tpc/samplers.hpp"
#include "tpc/toylm.hpp"
#include <json.hpp>

namespace tpc {

enum class BenchMode { Off, Ltpc, Atpc, Dola };

const char* to_string(BenchMode mode) noexcept;

struct BenchOptions {
  ToyModelConfig toy{.vocab_size = 4096};
  std::size_t sequences = 64;
  std::size_t steps = 256;
  std::size_t prompt_len = 8;
  /// Every mode runs this many times, interleaved; the fastest run counts.
  std::size_t repeats = 3;
  DecodePolicy policy;     ///< lambda, alpha, window for the connected modes
  SamplerConfig sampler;   ///< max_tokens is overridden by `steps`
  std::vector<BenchMode> modes{BenchMode::Off, BenchMode::Ltpc, BenchMode::Atpc, BenchMode::Dola};

  void validate() const;
};

struct BenchRow {
  BenchMode mode = BenchMode::Off;
  double seconds = 0.0;          ///< fastest repeat, all sequences
  double samples_per_s = 0.0;
  double ms_per_sample = 0.0;
  double ms_per_step = 0.0;
  double relative = 1.0;         ///< ms_per_sample / Off's ms_per_sample
  double overhead = 0.0;         ///< relative - 1
};

struct BenchReport {
  BenchOptions options;
  std::vector<BenchRow> rows;

  const BenchRow* find(BenchMode mode) const;
};

/// Off is always measured, since it defines 100%.
BenchReport run_bench(const BenchOptions& options);

nlohmann::json to_json(const BenchReport& report);

}  // namespace tpc
