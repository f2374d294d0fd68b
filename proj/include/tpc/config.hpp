#pragma once

// Run configuration and its JSON schema, plus JSONL record readers.
//
// Config schema (every key optional; missing keys keep defaults):
//   {
//     "policy":   {"mode": "off|ltpc|atpc", "lambda": 0.1, "alpha": 3.0,
//                  "window": 20, "anchor": "trailing|fixed", "anchor_start": 0,
//                  "feedback": "raw|connected", "history": "sliding|prompt-only",
//                  "normalize": "softmax|unit-sum"},
//     "sampler":  {"strategy": "greedy|temperature|nucleus|beam",
//                  "temperature": 1.0, "top_p": 1.0, "beam_width": 5,
//                  "seed": 0, "max_tokens": 32, "stop_tokens": []},
//     "decoder":  "plain|vcd|dola",
//     "contrast": {"gamma": 1.0, "plausibility_cutoff": 0.1,
//                  "candidate_layers": []},
//     "source":   {"kind": "toylm|trace|two-stream", "seed": 0,
//                  "vocab_size": 64, "num_layers": 8, "context_window": 32,
//                  "hidden": 32, "prompt": [..] | "prompt_len": 8,
//                  "path": "", "negative_path": ""}
//   }

#include <optional>
#include <string>
#include <vector>

#include "tpc/connection.hpp"
#include "tpc/contrast.hpp"
#include "tpc/metrics.hpp"
#include "tpc/samplers.hpp"
#include "tpc/toylm.hpp"
#include <json.hpp>

namespace tpc {

enum class ContrastDecoder { Plain, Vcd, Dola };

const char* to_string(ContrastDecoder decoder) noexcept;
ContrastDecoder parse_decoder(const std::string& text);

struct SourceConfig {
  enum class Kind { ToyModel, TraceFile, TwoStream };

  Kind kind = Kind::ToyModel;
  ToyModelConfig toy;
  std::vector<TokenId> prompt;      ///< toy model prompt; empty means prompt_len tokens from toy_prompt
  std::size_t prompt_len = 8;
  std::string path;                 ///< trace file
  std::string negative_path;        ///< second stream for two-stream contrast

  friend bool operator==(const SourceConfig&, const SourceConfig&) = default;
};

struct RunConfig {
  DecodePolicy policy;
  SamplerConfig sampler;
  ContrastDecoder decoder = ContrastDecoder::Plain;
  std::optional<ContrastConfig> contrast;
  SourceConfig source;

  /// Structural checks that do not need to open any file.
  void validate() const;

  /// The contrast settings in effect (defaults when unset).
  ContrastConfig contrast_or_default() const { return contrast.value_or(ContrastConfig{}); }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

nlohmann::json to_json(const RunConfig& config);
/// Throws InvalidConfig on unknown enum strings or wrongly typed fields.
RunConfig run_config_from_json(const nlohmann::json& json, RunConfig base = {});
RunConfig load_run_config(const std::string& path);

/// JSONL: {"id": "...", "label": "yes|no", "predicted_text": "..."}
std::vector<EvalRecord> read_eval_records(const std::string& path);

/// JSONL: {"id": "...", "caption_objects": [...], "ground_truth_objects": [...]}
/// An optional "caption" string is run through extract_objects when
/// caption_objects is absent.
std::vector<CaptionRecord> read_caption_records(const std::string& path, const SynonymMap& synonyms = {});

/// JSON object {"surface": "canonical", ...} or {"canonical": ["surface", ...]}.
SynonymMap read_synonyms(const std::string& path);

/// Evaluation item for sweeps and the sliding-window harness:
/// {"id": "...", "label": "yes|no", "trace": "path"} or
/// {"id": "...", "label": "yes|no", "prompt": [ids]}. Relative trace paths
/// resolve against the item file's directory.
struct EvalItem {
  std::string id;
  Answer label = Answer::No;
  std::string trace_path;
  std::vector<TokenId> prompt;
};

std::vector<EvalItem> read_eval_items(const std::string& path);

}  // namespace tpc
