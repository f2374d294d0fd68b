#pragma once

// Binary trace container ("TPCL"). All integers little-endian:
//
//   offset  size  field
//   0       4     magic "TPCL"
//   4       4     version (u32) = 1
//   8       4     vocab_size (u32)
//   12      4     num_steps (u32)
//   16      4     num_layers (u32), 1 = final layer only
//   20      4     prompt_len (u32)
//   24      ...   num_steps * num_layers frames of vocab_size IEEE-754
//                 float32, layer-major within a step, final layer last
//
// The header is validated before any payload is read.

#include <cstdint>
#include <iosfwd>
#include <string>

#include "tpc/core.hpp"

namespace tpc {

inline constexpr char kTraceMagic[4] = {'T', 'P', 'C', 'L'};
inline constexpr std::uint32_t kTraceVersion = 1;
inline constexpr std::size_t kTraceHeaderSize = 24;

struct TraceHeader {
  std::uint32_t version = kTraceVersion;
  std::uint32_t vocab_size = 0;
  std::uint32_t num_steps = 0;
  std::uint32_t num_layers = 1;
  std::uint32_t prompt_len = 0;
};

/// Scores are narrowed to float32; values below the float range clamp to
/// kExcludedScore.
void write_trace(const LogitTrace& trace, std::ostream& out);
void write_trace(const LogitTrace& trace, const std::string& path);

/// Errors: UnsupportedFormat (magic/version), CorruptFile (bad header
/// fields, truncated or oversized payload), InvalidFrame (NaN/Inf score).
LogitTrace read_trace(std::istream& in);
LogitTrace read_trace(const std::string& path);

TraceHeader read_trace_header(std::istream& in);

}  // namespace tpc
