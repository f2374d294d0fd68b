#include "tpc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <limits>

#include "tpc/config.hpp"
#include "tpc/decode.hpp"

namespace tpc {

const char* to_string(BenchMode mode) noexcept {
  switch (mode) {
    case BenchMode::Off: return "off";
    case BenchMode::Ltpc: return "ltpc";
    case BenchMode::Atpc: return "atpc";
    case BenchMode::Dola: return "dola";
  }
  return "?";
}

void BenchOptions::validate() const {
  toy.validate();
  if (sequences < 1) throw Error(Errc::InvalidConfig, "bench needs at least one sequence");
  if (steps < 1) throw Error(Errc::InvalidConfig, "bench needs at least one step");
  if (prompt_len < 1) throw Error(Errc::InvalidConfig, "bench needs a non-empty prompt");
  if (repeats < 1) throw Error(Errc::InvalidConfig, "bench needs at least one repeat");
  policy.validate();
  sampler.validate();
  if (sampler.strategy == Strategy::Beam) throw Error(Errc::InvalidConfig, "bench does not time beam search");
  const bool dola = std::find(modes.begin(), modes.end(), BenchMode::Dola) != modes.end();
  if (dola && toy.num_layers < 2) throw Error(Errc::InvalidConfig, "dola bench needs at least two layers");
}

const BenchRow* BenchReport::find(BenchMode mode) const {
  for (const auto& row : rows) {
    if (row.mode == mode) return &row;
  }
  return nullptr;
}

namespace {

RunConfig config_for(const BenchOptions& options, BenchMode mode) {
  RunConfig config;
  config.policy = options.policy;
  config.sampler = options.sampler;
  config.sampler.max_tokens = options.steps;
  config.sampler.stop_tokens.clear();
  switch (mode) {
    case BenchMode::Off:
    case BenchMode::Dola: config.policy.mode = ConnectMode::Off; break;
    case BenchMode::Ltpc: config.policy.mode = ConnectMode::Ltpc; break;
    case BenchMode::Atpc: config.policy.mode = ConnectMode::Atpc; break;
  }
  if (mode == BenchMode::Dola) config.decoder = ContrastDecoder::Dola;
  return config;
}

}  // namespace

BenchReport run_bench(const BenchOptions& options) {
  options.validate();
  std::vector<BenchMode> modes{BenchMode::Off};
  for (BenchMode m : options.modes) {
    if (std::find(modes.begin(), modes.end(), m) == modes.end()) modes.push_back(m);
  }

  const auto model = std::make_shared<const ToyModel>(options.toy);
  std::vector<ToyFrameProvider> providers;
  providers.reserve(options.sequences);
  for (std::size_t i = 0; i < options.sequences; ++i) {
    providers.emplace_back(model, toy_prompt(options.toy.seed + i, options.prompt_len, options.toy.vocab_size));
  }

  DecodeOptions quiet;
  quiet.log_steps = false;
  std::vector<double> best(modes.size(), std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < options.repeats; ++r) {
    for (std::size_t m = 0; m < modes.size(); ++m) {
      const RunConfig config = config_for(options, modes[m]);
      const auto start = std::chrono::steady_clock::now();
      parallel_for(options.sequences, [&](std::size_t i) { decode(config, providers[i], quiet, i); });
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      best[m] = std::min(best[m], elapsed.count());
    }
  }

  BenchReport report;
  report.options = options;
  const double n = static_cast<double>(options.sequences);
  const double off_ms = best[0] * 1000.0 / n;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    BenchRow row;
    row.mode = modes[m];
    row.seconds = best[m];
    row.samples_per_s = n / best[m];
    row.ms_per_sample = best[m] * 1000.0 / n;
    row.ms_per_step = row.ms_per_sample / static_cast<double>(options.steps);
    row.relative = row.ms_per_sample / off_ms;
    row.overhead = row.relative - 1.0;
    report.rows.push_back(row);
  }
  return report;
}

nlohmann::json to_json(const BenchReport& report) {
  const BenchOptions& o = report.options;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"mode", to_string(row.mode)},
                    {"seconds", row.seconds},
                    {"samples_per_s", row.samples_per_s},
                    {"ms_per_sample", row.ms_per_sample},
                    {"ms_per_step", row.ms_per_step},
                    {"relative", row.relative},
                    {"overhead", row.overhead}});
  }
  return {{"vocab_size", o.toy.vocab_size},
          {"num_layers", o.toy.num_layers},
          {"sequences", o.sequences},
          {"steps", o.steps},
          {"prompt_len", o.prompt_len},
          {"repeats", o.repeats},
          {"threads", worker_count()},
          {"lambda", o.policy.lambda},
          {"alpha", o.policy.alpha},
          {"window", o.policy.window},
          {"strategy", to_string(o.sampler.strategy)},
          {"top_p", o.sampler.top_p},
          {"temperature", o.sampler.temperature},
          {"results", rows}};
}

}  // namespace tpc
