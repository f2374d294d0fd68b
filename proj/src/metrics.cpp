#include "tpc/metrics.hpp"

#include <algorithm>
#include <cctype>

namespace tpc {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> words(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalpha(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

const char* to_string(Answer answer) noexcept {
  switch (answer) {
    case Answer::Yes: return "yes";
    case Answer::No: return "no";
    case Answer::Unparseable: return "unparseable";
  }
  return "?";
}

Answer parse_yes_no(const std::string& text) {
  const auto ws = words(text);
  if (ws.empty()) return Answer::Unparseable;
  if (ws.front() == "yes") return Answer::Yes;
  if (ws.front() == "no") return Answer::No;
  return Answer::Unparseable;
}

PopeScores pope_score(std::span<const EvalRecord> records) {
  if (records.empty()) throw Error(Errc::InvalidInput, "no records to score");
  PopeScores s;
  for (const auto& record : records) {
    if (record.label == Answer::Unparseable) {
      throw Error(Errc::InvalidInput, "record '" + record.id + "' has no yes/no label");
    }
    const Answer pred = parse_yes_no(record.predicted_text);
    const bool positive = record.label == Answer::Yes;
    switch (pred) {
      case Answer::Yes: positive ? ++s.tp : ++s.fp; break;
      case Answer::No: positive ? ++s.fn : ++s.tn; break;
      case Answer::Unparseable:
        ++s.unparseable;
        if (positive) ++s.fn;
        break;
    }
  }
  s.total = records.size();
  s.accuracy = ratio(s.tp + s.tn, s.total);
  if (s.tp + s.fp == 0) s.warnings.emplace_back("no Yes predictions: precision set to 0");
  if (s.tp + s.fn == 0) s.warnings.emplace_back("no Yes labels: recall set to 0");
  s.precision = ratio(s.tp, s.tp + s.fp);
  s.recall = ratio(s.tp, s.tp + s.fn);
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

std::set<std::string> canonicalize(const std::set<std::string>& objects, const SynonymMap& synonyms) {
  std::set<std::string> out;
  for (const auto& object : objects) {
    std::string key = lower(object);
    const auto it = synonyms.find(key);
    out.insert(it == synonyms.end() ? key : it->second);
  }
  return out;
}

ChairScores chair(std::span<const CaptionRecord> records, const SynonymMap& synonyms) {
  if (records.empty()) throw Error(Errc::InvalidInput, "no captions to score");
  ChairScores s;
  for (const auto& record : records) {
    const auto mentioned = canonicalize(record.caption_objects, synonyms);
    const auto truth = canonicalize(record.ground_truth_objects, synonyms);
    std::size_t hallucinated = 0;
    for (const auto& object : mentioned) {
      if (truth.count(object) == 0) ++hallucinated;
    }
    s.mentioned_objects += mentioned.size();
    s.hallucinated_objects += hallucinated;
    if (hallucinated > 0) ++s.hallucinated_captions;
  }
  s.captions = records.size();
  s.chair_i = ratio(s.hallucinated_objects, s.mentioned_objects);
  s.chair_s = ratio(s.hallucinated_captions, s.captions);
  return s;
}

std::set<std::string> extract_objects(const std::string& text, const SynonymMap& synonyms) {
  const auto ws = words(text);
  std::set<std::string> out;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    if (i + 1 < ws.size()) {
      const auto bigram = synonyms.find(ws[i] + " " + ws[i + 1]);
      if (bigram != synonyms.end()) {
        out.insert(bigram->second);
        ++i;
        continue;
      }
    }
    const auto unigram = synonyms.find(ws[i]);
    if (unigram != synonyms.end()) out.insert(unigram->second);
  }
  return out;
}

}  // namespace tpc
