#pragma once

// Hallucination metrics: POPE-style yes/no scoring and CHAIR caption
// object hallucination rates.

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tpc/error.hpp"

namespace tpc {

enum class Answer { Yes, No, Unparseable };

const char* to_string(Answer answer) noexcept;

/// Case-insensitive match of the first alphabetic word against yes/no.
Answer parse_yes_no(const std::string& text);

struct EvalRecord {
  std::string id;
  Answer label = Answer::No;  ///< Yes or No only
  std::string predicted_text;
};

struct PopeScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0, unparseable = 0, total = 0;
  std::vector<std::string> warnings;
};

/// Positive class is Yes. An unparseable prediction is always wrong: a false
/// negative when the label is Yes, and outside the confusion matrix (but
/// still counted in the accuracy denominator) when the label is No.
PopeScores pope_score(std::span<const EvalRecord> records);

/// Surface form -> canonical object name.
using SynonymMap = std::unordered_map<std::string, std::string>;

struct CaptionRecord {
  std::string id;
  std::set<std::string> caption_objects;
  std::set<std::string> ground_truth_objects;
};

struct ChairScores {
  double chair_i = 0.0;
  double chair_s = 0.0;
  std::size_t hallucinated_objects = 0;
  std::size_t mentioned_objects = 0;
  std::size_t hallucinated_captions = 0;
  std::size_t captions = 0;
};

/// Canonicalize a set through the synonym map (unmapped entries kept as-is,
/// lower-cased).
std::set<std::string> canonicalize(const std::set<std::string>& objects, const SynonymMap& synonyms);

/// Pooled CHAIRi (hallucinated mentions / all mentions) and CHAIRs
/// (captions with any hallucination / all captions). Mentions are sets, so a
/// repeated object counts once per caption.
ChairScores chair(std::span<const CaptionRecord> records, const SynonymMap& synonyms = {});

/// Exact-match object extraction: lower-cases the text, splits on
/// non-letters, and looks up unigrams and bigrams in the synonym map
/// (bigrams win over their constituent unigrams).
std::set<std::string> extract_objects(const std::string& text, const SynonymMap& synonyms);

}  // namespace tpc
