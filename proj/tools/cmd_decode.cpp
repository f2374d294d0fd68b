// decode, sweep, config and bench subcommands.

#include <algorithm>
#include <iomanip>
#include <map>
#include <set>

#include "cli_common.hpp"
#include "tpc/bench.hpp"
#include "tpc/decode.hpp"
#include "tpc/trace_io.hpp"

namespace tpc::cli {

namespace {

nlohmann::json log_line(const StepLog& entry) {
  nlohmann::json top = nlohmann::json::array();
  for (const auto& tp : entry.top) top.push_back({{"id", tp.id}, {"prob", tp.prob}});
  nlohmann::json line = {{"t", entry.t}, {"token", entry.token}, {"top", top}, {"mode", to_string(entry.mode)}};
  if (entry.frame) line["frame"] = std::vector<double>(entry.frame->begin(), entry.frame->end());
  return line;
}

/// Trace sources replay every recorded step unless a length was asked for.
RunConfig for_provider(const ResolvedConfig& resolved, const FrameProvider& provider) {
  RunConfig config = resolved.config;
  if (!resolved.explicit_max_tokens) {
    if (const auto bound = provider.max_steps()) config.sampler.max_tokens = *bound;
  }
  return config;
}

template <typename T>
std::vector<T> dedupe(const std::vector<T>& values, const char* name) {
  std::vector<T> out;
  for (const T& v : values) {
    if (std::find(out.begin(), out.end(), v) == out.end()) {
      out.push_back(v);
    } else {
      warn(std::string("duplicate ") + name + " grid value " + fmt(static_cast<double>(v)) + " ignored");
    }
  }
  return out;
}

}  // namespace

void register_decode(CLI::App& app) {
  auto* sub = app.add_subcommand("decode", "Decode from a toy model or a recorded trace");
  auto flags = std::make_shared<DecodeFlags>();
  auto log_path = std::make_shared<std::string>();
  auto out_path = std::make_shared<std::string>();
  auto dump = std::make_shared<bool>(false);
  add_decode_flags(*sub, *flags);
  sub->add_option("--log", *log_path, "write the JSONL step log here");
  sub->add_flag("--dump-frames", *dump, "include the full connected frame in each log line");
  sub->add_option("--out", *out_path, "result file (default stdout)");

  sub->callback([=] {
    if (*dump && log_path->empty()) throw Error(Errc::InvalidConfig, "--dump-frames needs --log");
    const ResolvedConfig resolved = resolve(*flags);
    const auto provider = make_provider(resolved.config.source);
    const RunConfig config = for_provider(resolved, *provider);
    const Vocabulary vocab = load_vocabulary(flags->vocab, provider->vocab_size());

    DecodeOptions options;
    options.log_steps = !log_path->empty();
    options.dump_frames = *dump;
    const DecodeResult result = decode(config, *provider, options);

    if (!log_path->empty()) {
      Output log(*log_path);
      for (const auto& entry : result.log) log.stream() << log_line(entry).dump() << '\n';
    }
    Output out(*out_path);
    const nlohmann::json summary = {{"tokens", result.tokens},
                                    {"text", vocab.decode(result.tokens)},
                                    {"mode", to_string(config.policy.mode)},
                                    {"decoder", to_string(config.decoder)},
                                    {"strategy", to_string(config.sampler.strategy)}};
    out.stream() << summary.dump() << '\n';
  });
}

void register_sweep(CLI::App& app) {
  auto* sub = app.add_subcommand("sweep", "Score a grid of lambda/alpha/top-p/window settings on an eval set");
  auto flags = std::make_shared<DecodeFlags>();
  auto items_path = std::make_shared<std::string>();
  auto out_path = std::make_shared<std::string>();
  auto lambdas = std::make_shared<std::vector<double>>();
  auto alphas = std::make_shared<std::vector<double>>();
  auto top_ps = std::make_shared<std::vector<double>>();
  auto windows = std::make_shared<std::vector<std::size_t>>();
  add_decode_flags(*sub, *flags);
  sub->add_option("--items", *items_path, "JSONL eval items {id, label, trace | prompt}");
  sub->add_option("--lambdas", *lambdas, "lambda grid")->delimiter(',');
  sub->add_option("--alphas", *alphas, "alpha grid")->delimiter(',');
  sub->add_option("--top-ps", *top_ps, "top-p grid")->delimiter(',');
  sub->add_option("--windows", *windows, "window grid")->delimiter(',');
  sub->add_option("--out", *out_path, "CSV file (default stdout)");

  sub->callback([=] {
    if (items_path->empty()) throw Error(Errc::InvalidConfig, "sweep needs an eval set (--items)");
    const ResolvedConfig base = resolve(*flags);
    const std::vector<EvalItem> items = read_eval_items(*items_path);
    if (items.empty()) throw Error(Errc::InvalidConfig, "eval set " + *items_path + " is empty");

    const auto model = std::make_shared<const ToyModel>(base.config.source.toy);
    std::vector<std::unique_ptr<FrameProvider>> providers;
    for (const auto& item : items) {
      if (!item.trace_path.empty()) {
        providers.push_back(
            std::make_unique<TraceFrameProvider>(std::make_shared<const LogitTrace>(read_trace(item.trace_path))));
      } else {
        providers.push_back(std::make_unique<ToyFrameProvider>(model, item.prompt));
      }
    }
    const Vocabulary vocab = load_vocabulary(flags->vocab, providers.front()->vocab_size());
    for (const auto& p : providers) {
      if (p->vocab_size() != vocab.size()) throw Error(Errc::InvalidInput, "eval items differ in vocab size");
    }

    const auto grid_l = dedupe(lambdas->empty() ? std::vector{base.config.policy.lambda} : *lambdas, "lambda");
    const auto grid_a = dedupe(alphas->empty() ? std::vector{base.config.policy.alpha} : *alphas, "alpha");
    const auto grid_p = dedupe(top_ps->empty() ? std::vector{base.config.sampler.top_p} : *top_ps, "top_p");
    const auto grid_w = dedupe(windows->empty() ? std::vector{base.config.policy.window} : *windows, "window");

    Output out(*out_path);
    out.stream() << "lambda,alpha,top_p,window,accuracy,precision,recall,f1\n";
    for (double l : grid_l) {
      for (double a : grid_a) {
        for (double p : grid_p) {
          for (std::size_t w : grid_w) {
            ResolvedConfig point = base;
            point.config.policy.lambda = l;
            point.config.policy.alpha = a;
            point.config.sampler.top_p = p;
            point.config.policy.window = w;
            point.config.validate();

            std::vector<EvalRecord> records(items.size());
            DecodeOptions quiet;
            quiet.log_steps = false;
            // each item is decoded exactly as a standalone `decode` run would be
            parallel_for(items.size(), [&](std::size_t i) {
              const RunConfig config = for_provider(point, *providers[i]);
              const DecodeResult result = decode(config, *providers[i], quiet);
              records[i] = {items[i].id, items[i].label, vocab.decode(result.tokens)};
            });
            const PopeScores s = pope_score(records);
            for (const auto& message : s.warnings) warn(message);
            out.stream() << fmt(l) << ',' << fmt(a) << ',' << fmt(p) << ',' << w << ',' << fmt(s.accuracy) << ','
                         << fmt(s.precision) << ',' << fmt(s.recall) << ',' << fmt(s.f1) << '\n';
          }
        }
      }
    }
  });
}

void register_config(CLI::App& app) {
  auto* sub = app.add_subcommand("config", "Print the effective run config as JSON");
  auto flags = std::make_shared<DecodeFlags>();
  auto out_path = std::make_shared<std::string>();
  add_decode_flags(*sub, *flags);
  sub->add_option("--out", *out_path, "JSON file (default stdout)");
  sub->callback([=] {
    Output out(*out_path);
    out.stream() << to_json(resolve(*flags).config).dump(2) << '\n';
  });
}

void register_bench(CLI::App& app) {
  auto* sub = app.add_subcommand("bench", "Time decode modes on identical toy-model workloads");
  auto o = std::make_shared<BenchOptions>();
  auto modes = std::make_shared<std::vector<std::string>>(std::vector<std::string>{"off", "ltpc", "atpc", "dola"});
  auto strategy = std::make_shared<std::string>("nucleus");
  auto out_path = std::make_shared<std::string>();
  sub->add_option("--vocab-size", o->toy.vocab_size, "toy vocabulary size")->capture_default_str();
  sub->add_option("--layers", o->toy.num_layers, "toy layer count")->capture_default_str();
  sub->add_option("--context-window", o->toy.context_window, "toy context window")->capture_default_str();
  sub->add_option("--hidden", o->toy.hidden, "toy hidden size")->capture_default_str();
  sub->add_option("--model-seed", o->toy.seed, "toy weight seed")->capture_default_str();
  sub->add_option("--sequences", o->sequences, "sequences per mode")->capture_default_str();
  sub->add_option("--steps", o->steps, "generated tokens per sequence")->capture_default_str();
  sub->add_option("--prompt-len", o->prompt_len, "prompt length")->capture_default_str();
  sub->add_option("--repeats", o->repeats, "interleaved repeats; the fastest counts")->capture_default_str();
  sub->add_option("--modes", *modes, "modes to time (off is always included)")->delimiter(',');
  sub->add_option("--lambda", o->policy.lambda, "history weight")->capture_default_str();
  sub->add_option("--alpha", o->policy.alpha, "current-step scale")->capture_default_str();
  sub->add_option("--window", o->policy.window, "connected history length")->capture_default_str();
  sub->add_option("--strategy", *strategy, "greedy | temperature | nucleus")->capture_default_str();
  sub->add_option("--temperature", o->sampler.temperature, "softmax temperature")->capture_default_str();
  sub->add_option("--top-p", o->sampler.top_p, "nucleus mass")->capture_default_str();
  sub->add_option("--seed", o->sampler.seed, "sampler seed")->capture_default_str();
  sub->add_option("--out", *out_path, "JSON report file (default stdout)");

  sub->callback([=] {
    BenchOptions options = *o;
    options.sampler.strategy = parse_strategy(*strategy);
    options.modes.clear();
    for (const auto& m : *modes) {
      if (m == "off") options.modes.push_back(BenchMode::Off);
      else if (m == "ltpc") options.modes.push_back(BenchMode::Ltpc);
      else if (m == "atpc") options.modes.push_back(BenchMode::Atpc);
      else if (m == "dola") options.modes.push_back(BenchMode::Dola);
      else throw Error(Errc::InvalidConfig, "unknown bench mode '" + m + "'");
    }
    const BenchReport report = run_bench(options);
    for (const auto& row : report.rows) {
      std::cerr << std::left << std::setw(6) << to_string(row.mode) << std::right << std::fixed
                << std::setprecision(2) << std::setw(10) << row.samples_per_s << " samples/s" << std::setw(10)
                << row.ms_per_sample << " ms/sample" << std::setw(9) << row.overhead * 100.0 << " % overhead\n";
    }
    Output out(*out_path);
    out.stream() << to_json(report).dump(2) << '\n';
  });
}

}  // namespace tpc::cli
