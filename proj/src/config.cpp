#include "tpc/config.hpp"

#include <filesystem>
#include <fstream>

namespace tpc {

using nlohmann::json;

const char* to_string(ContrastDecoder decoder) noexcept {
  switch (decoder) {
    case ContrastDecoder::Plain: return "plain";
    case ContrastDecoder::Vcd: return "vcd";
    case ContrastDecoder::Dola: return "dola";
  }
  return "?";
}

ContrastDecoder parse_decoder(const std::string& text) {
  if (text == "plain") return ContrastDecoder::Plain;
  if (text == "vcd") return ContrastDecoder::Vcd;
  if (text == "dola") return ContrastDecoder::Dola;
  throw Error(Errc::InvalidConfig, "unknown decoder '" + text + "'");
}

namespace {

const char* to_string(WindowAnchor a) { return a == WindowAnchor::TrailingInput ? "trailing" : "fixed"; }
const char* to_string(HistoryFeedback f) { return f == HistoryFeedback::Raw ? "raw" : "connected"; }
const char* to_string(HistoryScope s) { return s == HistoryScope::Sliding ? "sliding" : "prompt-only"; }
const char* to_string(Normalization n) { return n == Normalization::Softmax ? "softmax" : "unit-sum"; }
const char* to_string(SourceConfig::Kind k) {
  switch (k) {
    case SourceConfig::Kind::ToyModel: return "toylm";
    case SourceConfig::Kind::TraceFile: return "trace";
    case SourceConfig::Kind::TwoStream: return "two-stream";
  }
  return "?";
}

template <typename Enum>
Enum parse_choice(const std::string& text, std::initializer_list<std::pair<const char*, Enum>> choices,
                  const char* what) {
  for (const auto& [name, value] : choices) {
    if (text == name) return value;
  }
  throw Error(Errc::InvalidConfig, std::string("unknown ") + what + " '" + text + "'");
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("field '") + key + "': " + e.what());
  }
}

json parse_line(const std::string& line, const std::string& path, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptFile, path + ":" + std::to_string(lineno) + ": " + e.what());
  }
}

Answer parse_label(const json& obj, const std::string& where) {
  const auto it = obj.find("label");
  if (it == obj.end() || !it->is_string()) throw Error(Errc::CorruptFile, where + ": missing label");
  const Answer label = parse_yes_no(it->get<std::string>());
  if (label == Answer::Unparseable) throw Error(Errc::CorruptFile, where + ": label must be yes or no");
  return label;
}

template <typename Fn>
void for_each_jsonl(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidInput, "cannot open " + path);
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json obj = parse_line(line, path, lineno);
    if (!obj.is_object()) throw Error(Errc::CorruptFile, path + ":" + std::to_string(lineno) + ": not an object");
    fn(obj, path + ":" + std::to_string(lineno));
  }
}

std::set<std::string> string_set(const json& obj, const char* key, const std::string& where) {
  std::set<std::string> out;
  const auto it = obj.find(key);
  if (it == obj.end()) return out;
  if (!it->is_array()) throw Error(Errc::CorruptFile, where + ": " + key + " must be an array");
  for (const auto& v : *it) {
    if (!v.is_string()) throw Error(Errc::CorruptFile, where + ": " + key + " entries must be strings");
    out.insert(v.get<std::string>());
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  policy.validate();
  sampler.validate();
  if (contrast) contrast->validate();
  switch (source.kind) {
    case SourceConfig::Kind::ToyModel:
      source.toy.validate();
      if (decoder == ContrastDecoder::Vcd) {
        throw Error(Errc::InvalidConfig, "vcd needs a two-stream trace source");
      }
      if (decoder == ContrastDecoder::Dola && source.toy.num_layers < 2) {
        throw Error(Errc::InvalidConfig, "dola needs a model with at least 2 layers");
      }
      break;
    case SourceConfig::Kind::TraceFile:
      if (source.path.empty()) throw Error(Errc::InvalidConfig, "trace source needs a path");
      if (decoder == ContrastDecoder::Vcd) {
        throw Error(Errc::InvalidConfig, "vcd needs a negative trace");
      }
      break;
    case SourceConfig::Kind::TwoStream:
      if (source.path.empty() || source.negative_path.empty()) {
        throw Error(Errc::InvalidConfig, "two-stream source needs both trace paths");
      }
      break;
  }
}

json to_json(const RunConfig& c) {
  json j;
  j["policy"] = {
      {"mode", to_string(c.policy.mode)},
      {"lambda", c.policy.lambda},
      {"alpha", c.policy.alpha},
      {"window", c.policy.window},
      {"anchor", to_string(c.policy.anchor)},
      {"anchor_start", c.policy.anchor_start},
      {"feedback", to_string(c.policy.feedback)},
      {"history", to_string(c.policy.scope)},
      {"normalize", to_string(c.policy.normalization)},
  };
  j["sampler"] = {
      {"strategy", to_string(c.sampler.strategy)},
      {"temperature", c.sampler.temperature},
      {"top_p", c.sampler.top_p},
      {"beam_width", c.sampler.beam_width},
      {"seed", c.sampler.seed},
      {"max_tokens", c.sampler.max_tokens},
      {"stop_tokens", c.sampler.stop_tokens},
  };
  j["decoder"] = to_string(c.decoder);
  if (c.contrast) {
    j["contrast"] = {
        {"gamma", c.contrast->gamma},
        {"plausibility_cutoff", c.contrast->plausibility_cutoff},
        {"candidate_layers", c.contrast->candidate_layers},
    };
  }
  j["source"] = {
      {"kind", to_string(c.source.kind)},
      {"seed", c.source.toy.seed},
      {"vocab_size", c.source.toy.vocab_size},
      {"num_layers", c.source.toy.num_layers},
      {"context_window", c.source.toy.context_window},
      {"hidden", c.source.toy.hidden},
      {"prompt", c.source.prompt},
      {"prompt_len", c.source.prompt_len},
      {"path", c.source.path},
      {"negative_path", c.source.negative_path},
  };
  return j;
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  if (!j.is_object()) throw Error(Errc::InvalidConfig, "config must be a JSON object");

  if (const auto it = j.find("policy"); it != j.end()) {
    const json& p = *it;
    std::string text;
    if (p.contains("mode")) {
      read_field(p, "mode", text);
      c.policy.mode = parse_connect_mode(text);
    }
    read_field(p, "lambda", c.policy.lambda);
    read_field(p, "alpha", c.policy.alpha);
    read_field(p, "window", c.policy.window);
    read_field(p, "anchor_start", c.policy.anchor_start);
    if (p.contains("anchor")) {
      read_field(p, "anchor", text);
      c.policy.anchor = parse_choice<WindowAnchor>(
          text, {{"trailing", WindowAnchor::TrailingInput}, {"fixed", WindowAnchor::FixedRange}}, "anchor");
    }
    if (p.contains("feedback")) {
      read_field(p, "feedback", text);
      c.policy.feedback = parse_choice<HistoryFeedback>(
          text, {{"raw", HistoryFeedback::Raw}, {"connected", HistoryFeedback::Connected}}, "feedback");
    }
    if (p.contains("history")) {
      read_field(p, "history", text);
      c.policy.scope = parse_choice<HistoryScope>(
          text, {{"sliding", HistoryScope::Sliding}, {"prompt-only", HistoryScope::PromptOnly}}, "history");
    }
    if (p.contains("normalize")) {
      read_field(p, "normalize", text);
      c.policy.normalization = parse_choice<Normalization>(
          text, {{"softmax", Normalization::Softmax}, {"unit-sum", Normalization::UnitSum}}, "normalize");
    }
  }

  if (const auto it = j.find("sampler"); it != j.end()) {
    const json& s = *it;
    if (s.contains("strategy")) {
      std::string text;
      read_field(s, "strategy", text);
      c.sampler.strategy = parse_strategy(text);
    }
    read_field(s, "temperature", c.sampler.temperature);
    read_field(s, "top_p", c.sampler.top_p);
    read_field(s, "beam_width", c.sampler.beam_width);
    read_field(s, "seed", c.sampler.seed);
    read_field(s, "max_tokens", c.sampler.max_tokens);
    read_field(s, "stop_tokens", c.sampler.stop_tokens);
  }

  if (j.contains("decoder")) {
    std::string text;
    read_field(j, "decoder", text);
    c.decoder = parse_decoder(text);
  }

  if (const auto it = j.find("contrast"); it != j.end() && !it->is_null()) {
    ContrastConfig cc = c.contrast_or_default();
    read_field(*it, "gamma", cc.gamma);
    read_field(*it, "plausibility_cutoff", cc.plausibility_cutoff);
    read_field(*it, "candidate_layers", cc.candidate_layers);
    c.contrast = cc;
  }

  if (const auto it = j.find("source"); it != j.end()) {
    const json& s = *it;
    if (s.contains("kind")) {
      std::string text;
      read_field(s, "kind", text);
      c.source.kind = parse_choice<SourceConfig::Kind>(text,
                                                       {{"toylm", SourceConfig::Kind::ToyModel},
                                                        {"trace", SourceConfig::Kind::TraceFile},
                                                        {"two-stream", SourceConfig::Kind::TwoStream}},
                                                       "source kind");
    }
    read_field(s, "seed", c.source.toy.seed);
    read_field(s, "vocab_size", c.source.toy.vocab_size);
    read_field(s, "num_layers", c.source.toy.num_layers);
    read_field(s, "context_window", c.source.toy.context_window);
    read_field(s, "hidden", c.source.toy.hidden);
    read_field(s, "prompt", c.source.prompt);
    read_field(s, "prompt_len", c.source.prompt_len);
    read_field(s, "path", c.source.path);
    read_field(s, "negative_path", c.source.negative_path);
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidConfig, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, path + ": " + e.what());
  }
  return run_config_from_json(j);
}

std::vector<EvalRecord> read_eval_records(const std::string& path) {
  std::vector<EvalRecord> out;
  for_each_jsonl(path, [&](const json& obj, const std::string& where) {
    EvalRecord r;
    r.id = obj.value("id", std::to_string(out.size()));
    r.label = parse_label(obj, where);
    const auto it = obj.find("predicted_text");
    if (it != obj.end() && !it->is_null()) {
      if (!it->is_string()) throw Error(Errc::CorruptFile, where + ": predicted_text must be a string");
      r.predicted_text = it->get<std::string>();
    }
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<CaptionRecord> read_caption_records(const std::string& path, const SynonymMap& synonyms) {
  std::vector<CaptionRecord> out;
  for_each_jsonl(path, [&](const json& obj, const std::string& where) {
    CaptionRecord r;
    r.id = obj.value("id", std::to_string(out.size()));
    if (obj.contains("caption_objects")) {
      r.caption_objects = string_set(obj, "caption_objects", where);
    } else if (const auto it = obj.find("caption"); it != obj.end() && it->is_string()) {
      r.caption_objects = extract_objects(it->get<std::string>(), synonyms);
    }
    r.ground_truth_objects = string_set(obj, "ground_truth_objects", where);
    out.push_back(std::move(r));
  });
  return out;
}

SynonymMap read_synonyms(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidInput, "cannot open synonyms " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptFile, path + ": " + e.what());
  }
  if (!j.is_object()) throw Error(Errc::CorruptFile, path + ": synonyms must be a JSON object");
  SynonymMap out;
  for (const auto& [key, value] : j.items()) {
    if (value.is_string()) {
      out[key] = value.get<std::string>();
    } else if (value.is_array()) {
      out[key] = key;
      for (const auto& surface : value) {
        if (!surface.is_string()) throw Error(Errc::CorruptFile, path + ": synonym lists hold strings");
        out[surface.get<std::string>()] = key;
      }
    } else {
      throw Error(Errc::CorruptFile, path + ": bad synonym entry for '" + key + "'");
    }
  }
  return out;
}

std::vector<EvalItem> read_eval_items(const std::string& path) {
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::vector<EvalItem> out;
  for_each_jsonl(path, [&](const json& obj, const std::string& where) {
    EvalItem item;
    item.id = obj.value("id", std::to_string(out.size()));
    item.label = parse_label(obj, where);
    if (const auto it = obj.find("trace"); it != obj.end()) {
      if (!it->is_string()) throw Error(Errc::CorruptFile, where + ": trace must be a path string");
      std::filesystem::path p = it->get<std::string>();
      item.trace_path = (p.is_relative() ? base / p : p).string();
    } else if (const auto pit = obj.find("prompt"); pit != obj.end()) {
      try {
        item.prompt = pit->get<std::vector<TokenId>>();
      } catch (const json::exception& e) {
        throw Error(Errc::CorruptFile, where + ": prompt: " + e.what());
      }
    } else {
      throw Error(Errc::CorruptFile, where + ": item needs a trace or a prompt");
    }
    out.push_back(std::move(item));
  });
  return out;
}

}  // namespace tpc
