#include "tpc/trace_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <vector>

namespace tpc {

namespace {

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(Errc::InvalidInput, std::string(what) + " does not fit the trace header");
  }
  return static_cast<std::uint32_t>(v);
}

void put_frame(std::vector<unsigned char>& buf, const LogitFrame& frame) {
  constexpr double kLowest = std::numeric_limits<float>::lowest();
  constexpr double kMax = std::numeric_limits<float>::max();
  for (Eigen::Index i = 0; i < frame.size(); ++i) {
    const float f = static_cast<float>(std::clamp(frame[i], kLowest, kMax));
    put_u32(buf, std::bit_cast<std::uint32_t>(f));
  }
}

}  // namespace

void write_trace(const LogitTrace& trace, std::ostream& out) {
  trace.validate();
  const std::size_t layers = trace.num_layers();
  std::vector<unsigned char> buf;
  buf.reserve(kTraceHeaderSize + trace.num_steps() * layers * trace.vocab_size() * 4);
  buf.insert(buf.end(), std::begin(kTraceMagic), std::end(kTraceMagic));
  put_u32(buf, kTraceVersion);
  put_u32(buf, checked_u32(trace.vocab_size(), "vocab_size"));
  put_u32(buf, checked_u32(trace.num_steps(), "num_steps"));
  put_u32(buf, checked_u32(layers, "num_layers"));
  put_u32(buf, checked_u32(trace.prompt_len, "prompt_len"));
  for (std::size_t t = 0; t < trace.num_steps(); ++t) {
    if (trace.has_layers()) {
      for (const auto& frame : trace.layers[t]) put_frame(buf, frame);
    } else {
      put_frame(buf, trace.frames[t]);
    }
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(Errc::InvalidInput, "failed writing trace");
}

void write_trace(const LogitTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::InvalidInput, "cannot open " + path + " for writing");
  write_trace(trace, out);
}

TraceHeader read_trace_header(std::istream& in) {
  std::array<unsigned char, kTraceHeaderSize> raw{};
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got < 4 || std::memcmp(raw.data(), kTraceMagic, 4) != 0) {
    throw Error(Errc::UnsupportedFormat, "missing TPCL magic");
  }
  if (got < 8) throw Error(Errc::CorruptFile, "truncated trace header");
  TraceHeader h;
  h.version = get_u32(raw.data() + 4);
  if (h.version != kTraceVersion) {
    throw Error(Errc::UnsupportedFormat, "unsupported trace version " + std::to_string(h.version));
  }
  if (got < kTraceHeaderSize) throw Error(Errc::CorruptFile, "truncated trace header");
  h.vocab_size = get_u32(raw.data() + 8);
  h.num_steps = get_u32(raw.data() + 12);
  h.num_layers = get_u32(raw.data() + 16);
  h.prompt_len = get_u32(raw.data() + 20);
  if (h.vocab_size == 0) throw Error(Errc::CorruptFile, "vocab_size is zero");
  if (h.num_steps == 0) throw Error(Errc::CorruptFile, "num_steps is zero");
  if (h.num_layers == 0) throw Error(Errc::CorruptFile, "num_layers is zero");
  if (h.prompt_len > h.num_steps) throw Error(Errc::CorruptFile, "prompt_len exceeds num_steps");
  return h;
}

LogitTrace read_trace(std::istream& in) {
  const TraceHeader h = read_trace_header(in);
  const std::uint64_t floats = static_cast<std::uint64_t>(h.num_steps) * h.num_layers * h.vocab_size;
  if (floats > (std::uint64_t{1} << 34)) throw Error(Errc::CorruptFile, "implausible trace dimensions");

  std::vector<unsigned char> payload(static_cast<std::size_t>(floats) * 4);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
    throw Error(Errc::CorruptFile, "truncated trace payload");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(Errc::CorruptFile, "trailing bytes after trace payload");
  }

  const auto v = static_cast<Eigen::Index>(h.vocab_size);
  const unsigned char* p = payload.data();
  const auto next_frame = [&]() {
    LogitFrame frame(v);
    for (Eigen::Index i = 0; i < v; ++i, p += 4) {
      const float f = std::bit_cast<float>(get_u32(p));
      if (!std::isfinite(f)) throw Error(Errc::InvalidFrame, "non-finite score in trace payload");
      frame[i] = static_cast<double>(f);
    }
    return frame;
  };

  LogitTrace trace;
  trace.prompt_len = h.prompt_len;
  trace.frames.reserve(h.num_steps);
  for (std::uint32_t t = 0; t < h.num_steps; ++t) {
    if (h.num_layers == 1) {
      trace.frames.push_back(next_frame());
      continue;
    }
    std::vector<LogitFrame> layers;
    layers.reserve(h.num_layers);
    for (std::uint32_t l = 0; l < h.num_layers; ++l) layers.push_back(next_frame());
    trace.frames.push_back(layers.back());
    trace.layers.push_back(std::move(layers));
  }
  return trace;
}

LogitTrace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidInput, "cannot open trace " + path);
  return read_trace(in);
}

}  // namespace tpc
