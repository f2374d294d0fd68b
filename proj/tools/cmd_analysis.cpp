// toylm gen, divergence, sliding-window and pca subcommands.

#include <charconv>
#include <map>

#include "cli_common.hpp"
#include "tpc/analysis.hpp"
#include "tpc/decode.hpp"
#include "tpc/trace_io.hpp"

namespace tpc::cli {

namespace {

struct ToyFlags {
  ToyModelConfig toy;
  std::vector<TokenId> prompt;
  std::size_t prompt_len = 8;
  std::size_t steps = 32;
};

void add_toy_flags(CLI::App& app, ToyFlags& f) {
  app.add_option("--vocab-size", f.toy.vocab_size, "vocabulary size")->capture_default_str();
  app.add_option("--layers", f.toy.num_layers, "layer count (1 writes final-only traces)")->capture_default_str();
  app.add_option("--context-window", f.toy.context_window, "context window")->capture_default_str();
  app.add_option("--hidden", f.toy.hidden, "hidden size")->capture_default_str();
  app.add_option("--model-seed", f.toy.seed, "weight seed")->capture_default_str();
  app.add_option("--prompt", f.prompt, "prompt token ids")->delimiter(',');
  app.add_option("--prompt-len", f.prompt_len, "length of the generated prompt")->capture_default_str();
  app.add_option("--steps", f.steps, "generated steps")->capture_default_str();
}

std::vector<TokenId> toy_flags_prompt(const ToyFlags& f, std::uint64_t seed) {
  return f.prompt.empty() ? toy_prompt(seed, f.prompt_len, f.toy.vocab_size) : f.prompt;
}

}  // namespace

void register_toylm(CLI::App& app) {
  auto* toylm = app.add_subcommand("toylm", "Toy model utilities");
  toylm->require_subcommand(1);
  auto* gen = toylm->add_subcommand("gen", "Write a greedy toy-model trace");
  auto f = std::make_shared<ToyFlags>();
  auto out_path = std::make_shared<std::string>();
  add_toy_flags(*gen, *f);
  gen->add_option("--out", *out_path, "trace file")->required();
  gen->callback([=] {
    f->toy.validate();
    const ToyModel model(f->toy);
    const LogitTrace trace = toy_generate_trace(model, toy_flags_prompt(*f, f->toy.seed), f->steps);
    write_trace(trace, *out_path);
    std::cout << nlohmann::json{{"path", *out_path},
                                {"vocab_size", trace.vocab_size()},
                                {"num_steps", trace.num_steps()},
                                {"num_layers", trace.num_layers()},
                                {"prompt_len", trace.prompt_len}}
                     .dump()
              << '\n';
  });
}

void register_divergence(CLI::App& app) {
  auto* sub = app.add_subcommand("divergence", "Mean JS divergence by timestep distance");
  auto traces = std::make_shared<std::vector<std::string>>();
  auto f = std::make_shared<ToyFlags>();
  auto toy_count = std::make_shared<std::size_t>(0);
  auto opts = std::make_shared<DivergenceOptions>();
  auto bits = std::make_shared<bool>(false);
  auto out_path = std::make_shared<std::string>();
  sub->add_option("--trace", *traces, "trace files (repeatable)");
  sub->add_option("--toy-count", *toy_count, "also pool this many toy traces, prompt seeds 0..n-1");
  add_toy_flags(*sub, *f);
  sub->add_flag("--include-prompt", opts->include_prompt, "pair prompt frames too");
  sub->add_flag("--bits", *bits, "report in bits instead of nats");
  sub->add_option("--temperature", opts->temperature, "softmax temperature")->capture_default_str();
  sub->add_option("--out", *out_path, "CSV file (default stdout)");

  sub->callback([=] {
    if (traces->empty() && *toy_count == 0) throw Error(Errc::InvalidConfig, "divergence needs --trace or --toy-count");
    DivergenceOptions options = *opts;
    options.unit = *bits ? DivergenceUnit::Bits : DivergenceUnit::Nats;

    std::vector<DivergenceProfile> profiles(traces->size() + *toy_count);
    std::unique_ptr<ToyModel> model;
    if (*toy_count > 0) model = std::make_unique<ToyModel>(f->toy);
    parallel_for(profiles.size(), [&](std::size_t i) {
      if (i < traces->size()) {
        profiles[i] = divergence_profile(read_trace((*traces)[i]), options);
      } else {
        const std::uint64_t seed = i - traces->size();
        const LogitTrace trace = toy_generate_trace(*model, toy_flags_prompt(*f, seed), f->steps);
        profiles[i] = divergence_profile(trace, options);
      }
    });
    DivergenceProfile pooled;
    for (const auto& p : profiles) pooled.merge(p);

    Output out(*out_path);
    out.stream() << "distance,mean_js,std,count\n";
    for (const auto& [d, stats] : pooled.by_distance) {
      out.stream() << d << ',' << fmt(stats.mean()) << ',' << fmt(stats.stddev()) << ',' << stats.count << '\n';
    }
  });
}

void register_sliding_window(CLI::App& app) {
  auto* sub = app.add_subcommand("sliding-window", "Score each prompt window connected to the first answer step");
  auto flags = std::make_shared<DecodeFlags>();
  auto items_path = std::make_shared<std::string>();
  auto segments = std::make_shared<std::size_t>(32);
  auto answer_steps = std::make_shared<std::size_t>(1);
  auto out_path = std::make_shared<std::string>();
  sub->add_option("--items", *items_path, "JSONL eval items {id, label, trace | prompt}")->required();
  sub->add_option("--segments", *segments, "number of prompt windows")->capture_default_str();
  sub->add_option("--config", flags->config_path, "JSON run config");
  add_source_flags(*sub, *flags);
  add_policy_flags(*sub, *flags);
  add_sampler_flags(*sub, *flags);
  sub->add_option("--vocab", flags->vocab, "vocabulary file, one token per line");
  sub->add_option("--out", *out_path, "CSV file (default stdout)");

  sub->callback([=] {
    const RunConfig base = resolve(*flags).config;
    const std::vector<EvalItem> items = read_eval_items(*items_path);
    std::vector<SlidingWindowItem> sw(items.size());
    const ToyModel model(base.source.toy);
    for (std::size_t i = 0; i < items.size(); ++i) {
      sw[i].trace = items[i].trace_path.empty() ? toy_generate_trace(model, items[i].prompt, *answer_steps)
                                                : read_trace(items[i].trace_path);
      sw[i].record = {items[i].id, items[i].label, {}};
    }
    if (sw.empty()) throw Error(Errc::InvalidInput, "eval set " + *items_path + " is empty");
    const Vocabulary vocab = load_vocabulary(flags->vocab, sw.front().trace.vocab_size());
    const auto scores = sliding_window_eval(sw, base.policy, *segments, base.sampler, vocab);

    Output out(*out_path);
    out.stream() << "segment,mode,accuracy,f1\n";
    for (const auto& s : scores) {
      out.stream() << s.segment << ',' << to_string(s.mode) << ',' << fmt(s.accuracy) << ',' << fmt(s.f1) << '\n';
    }
  });
}

void register_pca(CLI::App& app) {
  auto* sub = app.add_subcommand("pca", "Project trace frames onto their top principal axes");
  auto trace_path = std::make_shared<std::string>();
  auto labels_path = std::make_shared<std::string>();
  auto k = std::make_shared<std::size_t>(2);
  auto opts = std::make_shared<PcaOptions>();
  auto out_path = std::make_shared<std::string>();
  sub->add_option("--trace", *trace_path, "trace file")->required();
  sub->add_option("--k", *k, "components (2 or 3)")->capture_default_str()->check(CLI::Range(2, 3));
  sub->add_flag("--softmax", opts->softmax_space, "project probabilities instead of logits");
  sub->add_flag("--generated-only", opts->generated_only, "skip prompt frames");
  sub->add_option("--labels", *labels_path, "CSV frame_idx,label annotations");
  sub->add_option("--out", *out_path, "CSV file (default stdout)");

  sub->callback([=] {
    const LogitTrace trace = read_trace(*trace_path);
    std::map<std::size_t, std::string> labels;
    if (!labels_path->empty()) {
      std::ifstream in(*labels_path);
      if (!in) throw Error(Errc::InvalidInput, "cannot open labels " + *labels_path);
      std::string line;
      for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (line.empty() || line.rfind("frame_idx", 0) == 0) continue;
        const auto comma = line.find(',');
        std::size_t idx = 0;
        const auto [ptr, ec] = std::from_chars(line.data(), line.data() + std::min(comma, line.size()), idx);
        if (comma == std::string::npos || ec != std::errc{} || ptr != line.data() + comma) {
          throw Error(Errc::CorruptFile, *labels_path + ":" + std::to_string(lineno) + ": expected frame_idx,label");
        }
        labels[idx] = line.substr(comma + 1);
      }
    }

    const ProjectionResult result = pca_project(trace, *k, *opts);
    if (!result.warning.empty()) warn(result.warning);
    Output out(*out_path);
    out.stream() << "frame_idx";
    for (std::size_t c = 0; c < *k; ++c) out.stream() << ",pc" << c + 1;
    out.stream() << ",label\n";
    for (std::size_t r = 0; r < result.frame_indices.size(); ++r) {
      const std::size_t idx = result.frame_indices[r];
      out.stream() << idx;
      for (std::size_t c = 0; c < *k; ++c) {
        const auto col = static_cast<Eigen::Index>(c);
        // components that carry no variance project to 0
        const double v = col < result.projected.cols() ? result.projected(static_cast<Eigen::Index>(r), col) : 0.0;
        out.stream() << ',' << fmt(v);
      }
      const auto it = labels.find(idx);
      out.stream() << ',' << (it != labels.end() ? it->second : idx < trace.prompt_len ? "prompt" : "generated")
                   << '\n';
    }
  });
}

}  // namespace tpc::cli
