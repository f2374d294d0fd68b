#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tpc/config.hpp"
#include "tpc/core.hpp"

namespace tpc::cli {

/// Decode-related flags. Every field is optional so that only flags the user
/// actually passed override the config file, which overrides the defaults.
struct DecodeFlags {
  std::optional<std::string> config_path;

  std::optional<std::string> source;
  std::optional<std::string> trace;
  std::optional<std::string> negative_trace;
  std::optional<std::size_t> vocab_size;
  std::optional<std::size_t> layers;
  std::optional<std::size_t> context_window;
  std::optional<std::size_t> hidden;
  std::optional<std::uint64_t> model_seed;
  std::optional<std::vector<TokenId>> prompt;
  std::optional<std::size_t> prompt_len;

  std::optional<std::string> decoder;
  std::optional<double> gamma;
  std::optional<double> cutoff;
  std::optional<std::vector<std::size_t>> candidate_layers;

  std::optional<std::string> mode;
  std::optional<double> lambda;
  std::optional<double> alpha;
  std::optional<std::size_t> window;
  std::optional<std::string> anchor;
  std::optional<std::size_t> anchor_start;
  std::optional<std::string> feedback;
  std::optional<std::string> history;
  std::optional<std::string> normalize;

  std::optional<std::string> strategy;
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<std::size_t> beam_width;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_tokens;
  std::optional<std::vector<TokenId>> stop;

  std::optional<std::string> vocab;
};

void add_source_flags(CLI::App& app, DecodeFlags& f);
void add_policy_flags(CLI::App& app, DecodeFlags& f);
void add_sampler_flags(CLI::App& app, DecodeFlags& f);
void add_contrast_flags(CLI::App& app, DecodeFlags& f);
/// All of the above plus --config and --vocab.
void add_decode_flags(CLI::App& app, DecodeFlags& f);

struct ResolvedConfig {
  RunConfig config;
  /// max_tokens came from a flag or the config file rather than the default.
  bool explicit_max_tokens = false;
};

/// defaults <- --config file <- explicit flags; validated.
ResolvedConfig resolve(const DecodeFlags& f);

/// Vocabulary from --vocab, else the synthetic one of size `vocab_size`.
Vocabulary load_vocabulary(const std::optional<std::string>& path, std::size_t vocab_size);

/// Shortest round-trip decimal form.
std::string fmt(double value);

/// Writes to the file named by `path`, or stdout when it is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path);
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void warn(const std::string& message);

void register_decode(CLI::App& app);
void register_sweep(CLI::App& app);
void register_config(CLI::App& app);
void register_bench(CLI::App& app);
void register_toylm(CLI::App& app);
void register_divergence(CLI::App& app);
void register_sliding_window(CLI::App& app);
void register_pca(CLI::App& app);
void register_pope_eval(CLI::App& app);
void register_chair_eval(CLI::App& app);
void register_hi_eval(CLI::App& app);

}  // namespace tpc::cli
