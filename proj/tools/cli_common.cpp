#include "cli_common.hpp"

#include <charconv>
#include <fstream>

namespace tpc::cli {

void add_source_flags(CLI::App& app, DecodeFlags& f) {
  app.add_option("--source", f.source, "toylm | trace | two-stream (inferred from --trace/--negative-trace)");
  app.add_option("--trace", f.trace, "recorded trace to replay");
  app.add_option("--negative-trace", f.negative_trace, "second stream for vcd contrast");
  app.add_option("--vocab-size", f.vocab_size, "toy model vocabulary size");
  app.add_option("--layers", f.layers, "toy model layer count");
  app.add_option("--context-window", f.context_window, "toy model context window");
  app.add_option("--hidden", f.hidden, "toy model hidden size");
  app.add_option("--model-seed", f.model_seed, "toy model weight seed (also seeds the default prompt)");
  app.add_option("--prompt", f.prompt, "toy prompt token ids")->delimiter(',');
  app.add_option("--prompt-len", f.prompt_len, "length of the generated toy prompt");
}

void add_policy_flags(CLI::App& app, DecodeFlags& f) {
  app.add_option("--mode", f.mode, "off | ltpc | atpc");
  app.add_option("--lambda", f.lambda, "history weight");
  app.add_option("--alpha", f.alpha, "current-step scale");
  app.add_option("--window", f.window, "connected history length");
  app.add_option("--anchor", f.anchor, "trailing | fixed");
  app.add_option("--anchor-start", f.anchor_start, "first prompt frame of a fixed window");
  app.add_option("--feedback", f.feedback, "raw | connected");
  app.add_option("--history", f.history, "sliding | prompt-only");
  app.add_option("--normalize", f.normalize, "softmax | unit-sum");
}

void add_sampler_flags(CLI::App& app, DecodeFlags& f) {
  app.add_option("--strategy", f.strategy, "greedy | temperature | nucleus | beam");
  app.add_option("--temperature", f.temperature, "softmax temperature");
  app.add_option("--top-p", f.top_p, "nucleus mass");
  app.add_option("--beam-width", f.beam_width, "beam width");
  app.add_option("--seed", f.seed, "sampler seed");
  app.add_option("--max-tokens", f.max_tokens, "tokens to generate (trace default: all recorded steps)");
  app.add_option("--stop", f.stop, "stop token ids")->delimiter(',');
}

void add_contrast_flags(CLI::App& app, DecodeFlags& f) {
  app.add_option("--decoder", f.decoder, "plain | vcd | dola");
  app.add_option("--gamma", f.gamma, "contrast strength");
  app.add_option("--cutoff", f.cutoff, "plausibility cutoff relative to the top probability");
  app.add_option("--candidate-layers", f.candidate_layers, "premature layers for dola")->delimiter(',');
}

void add_decode_flags(CLI::App& app, DecodeFlags& f) {
  app.add_option("--config", f.config_path, "JSON run config");
  add_source_flags(app, f);
  add_contrast_flags(app, f);
  add_policy_flags(app, f);
  add_sampler_flags(app, f);
  app.add_option("--vocab", f.vocab, "vocabulary file, one token per line");
}

namespace {

template <typename T>
void set_if(const std::optional<T>& value, T& target) {
  if (value) target = *value;
}

template <typename T, typename Parse>
void parse_if(const std::optional<std::string>& value, T& target, Parse parse) {
  if (value) target = parse(*value);
}

}  // namespace

ResolvedConfig resolve(const DecodeFlags& f) {
  ResolvedConfig out;
  RunConfig& c = out.config;
  if (f.config_path) {
    c = load_run_config(*f.config_path);
    std::ifstream in(*f.config_path);
    const nlohmann::json raw = nlohmann::json::parse(in, nullptr, false);
    out.explicit_max_tokens =
        raw.is_object() && raw.contains("sampler") && raw["sampler"].is_object() && raw["sampler"].contains("max_tokens");
  }

  // a full config object round-trip reuses the JSON parsers for enum names
  nlohmann::json patch = nlohmann::json::object();
  auto put = [&](const char* section, const char* key, const auto& value) {
    if (value) patch[section][key] = *value;
  };
  put("policy", "mode", f.mode);
  put("policy", "anchor", f.anchor);
  put("policy", "feedback", f.feedback);
  put("policy", "history", f.history);
  put("policy", "normalize", f.normalize);
  put("sampler", "strategy", f.strategy);
  put("source", "kind", f.source);
  if (f.decoder) patch["decoder"] = *f.decoder;
  if (!patch.empty()) c = run_config_from_json(patch, c);

  set_if(f.lambda, c.policy.lambda);
  set_if(f.alpha, c.policy.alpha);
  set_if(f.window, c.policy.window);
  set_if(f.anchor_start, c.policy.anchor_start);

  set_if(f.temperature, c.sampler.temperature);
  set_if(f.top_p, c.sampler.top_p);
  set_if(f.beam_width, c.sampler.beam_width);
  set_if(f.seed, c.sampler.seed);
  set_if(f.stop, c.sampler.stop_tokens);
  if (f.max_tokens) {
    c.sampler.max_tokens = *f.max_tokens;
    out.explicit_max_tokens = true;
  }

  if (f.gamma || f.cutoff || f.candidate_layers) {
    ContrastConfig cc = c.contrast_or_default();
    set_if(f.gamma, cc.gamma);
    set_if(f.cutoff, cc.plausibility_cutoff);
    set_if(f.candidate_layers, cc.candidate_layers);
    c.contrast = cc;
  }

  SourceConfig& s = c.source;
  if (!f.source) {
    if (f.negative_trace) {
      s.kind = SourceConfig::Kind::TwoStream;
    } else if (f.trace) {
      s.kind = SourceConfig::Kind::TraceFile;
    }
  }
  set_if(f.trace, s.path);
  set_if(f.negative_trace, s.negative_path);
  set_if(f.vocab_size, s.toy.vocab_size);
  set_if(f.layers, s.toy.num_layers);
  set_if(f.context_window, s.toy.context_window);
  set_if(f.hidden, s.toy.hidden);
  set_if(f.model_seed, s.toy.seed);
  set_if(f.prompt, s.prompt);
  set_if(f.prompt_len, s.prompt_len);

  c.validate();
  return out;
}

Vocabulary load_vocabulary(const std::optional<std::string>& path, std::size_t vocab_size) {
  if (!path) return Vocabulary::synthetic(vocab_size);
  Vocabulary vocab = Vocabulary::from_file(*path);
  if (vocab.size() != vocab_size) {
    throw Error(Errc::InvalidInput, "vocabulary has " + std::to_string(vocab.size()) + " tokens but the source has " +
                                        std::to_string(vocab_size));
  }
  return vocab;
}

std::string fmt(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, value);
  return {buf, result.ptr};
}

Output::Output(const std::string& path) {
  if (path.empty() || path == "-") return;
  file_ = std::make_unique<std::ofstream>(path);
  if (!*file_) throw Error(Errc::InvalidInput, "cannot open " + path + " for writing");
}

void warn(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

}  // namespace tpc::cli
