#include "tpc/core.hpp"

#include <fstream>

namespace tpc {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidFrame: return "InvalidFrame";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InvalidToken: return "InvalidToken";
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::CorruptFile: return "CorruptFile";
    case Errc::DecodeError: return "DecodeError";
  }
  return "Unknown";
}

void LogitTrace::validate() const {
  if (frames.empty()) throw Error(Errc::InvalidInput, "trace has no frames");
  const std::size_t v = vocab_size();
  if (v == 0) throw Error(Errc::InvalidFrame, "trace frames are empty");
  for (const auto& frame : frames) {
    if (static_cast<std::size_t>(frame.size()) != v) {
      throw Error(Errc::DimensionMismatch, "trace frames have differing vocab sizes");
    }
    check_frame(frame);
  }
  if (prompt_len > frames.size()) throw Error(Errc::InvalidInput, "prompt_len exceeds trace length");
  if (layers.empty()) return;
  if (layers.size() != frames.size()) throw Error(Errc::InvalidInput, "layer list length differs from frames");
  const std::size_t l = layers.front().size();
  if (l < 2) throw Error(Errc::InvalidInput, "layered traces need at least 2 layers");
  for (std::size_t t = 0; t < layers.size(); ++t) {
    if (layers[t].size() != l) throw Error(Errc::InvalidInput, "layer count differs between steps");
    for (const auto& frame : layers[t]) {
      if (static_cast<std::size_t>(frame.size()) != v) {
        throw Error(Errc::DimensionMismatch, "layer frame vocab size differs");
      }
      check_frame(frame);
    }
    if (layers[t].back() != frames[t]) {
      throw Error(Errc::InvalidInput, "final layer differs from frame at step " + std::to_string(t));
    }
  }
}

bool operator==(const LogitTrace& a, const LogitTrace& b) {
  if (a.prompt_len != b.prompt_len || a.frames.size() != b.frames.size() ||
      a.layers.size() != b.layers.size()) {
    return false;
  }
  const auto same = [](const LogitFrame& x, const LogitFrame& y) {
    return x.size() == y.size() && x == y;
  };
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    if (!same(a.frames[t], b.frames[t])) return false;
  }
  for (std::size_t t = 0; t < a.layers.size(); ++t) {
    if (a.layers[t].size() != b.layers[t].size()) return false;
    for (std::size_t l = 0; l < a.layers[t].size(); ++l) {
      if (!same(a.layers[t][l], b.layers[t][l])) return false;
    }
  }
  return true;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  lookup_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!lookup_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw Error(Errc::InvalidInput, "duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::synthetic(std::size_t vocab_size) {
  std::vector<std::string> tokens;
  tokens.reserve(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    if (i == 0) tokens.emplace_back("yes");
    else if (i == 1) tokens.emplace_back("no");
    else tokens.push_back("w" + std::to_string(i));
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidInput, "cannot open vocabulary file " + path);
  std::vector<std::string> tokens;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error(Errc::InvalidToken, "token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::id(const std::string& token) const {
  const auto it = lookup_.find(token);
  if (it == lookup_.end()) throw Error(Errc::InvalidToken, "unknown token '" + token + "'");
  return it->second;
}

std::string Vocabulary::decode(const std::vector<TokenId>& ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

}  // namespace tpc
