#pragma once

// On-disk formats.
//
// Binary array file:
//   "CNMF1\n"                         6 magic bytes
//   u64 ndim                          2 or 3
//   u64 dims[ndim]
//   f64 values[prod(dims)]            row-major, last index fastest
// All integers and floats little-endian. Matrices are stored as (rows, cols);
// motif tensors as (L, N, K).
//
// CSV matrix: one matrix row per line, comma separated, no header.
//
// Trace CSV: header "iteration,elapsed_s,loss", loss with 17 significant
// digits so every double survives a round trip.

#include <array>
#include <bit>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cnmf/solvers.hpp"
#include "cnmf/tensor.hpp"

namespace cnmf {

/// Malformed or unreadable input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kMagic = "CNMF1\n";

/// A dense array as stored on disk: shape plus row-major values.
struct ArrayFile {
  std::vector<std::uint64_t> shape;
  std::vector<double> values;

  friend bool operator==(const ArrayFile&, const ArrayFile&) = default;
};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

/// Writes via a temporary file in the same directory, then renames.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string format_double(double v) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return buf.data();
}

inline double parse_double(std::string_view field, const std::string& where) {
  std::string s(field);
  const auto first = s.find_first_not_of(" \t\r");
  const auto last = s.find_last_not_of(" \t\r");
  if (first == std::string::npos) throw FormatError(where + ": empty field");
  s = s.substr(first, last - first + 1);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) throw FormatError(where + ": bad number '" + s + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const auto next = line.find(sep, pos);
    out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

inline std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace detail

inline std::string encode_array(const ArrayFile& a) {
  if (a.shape.size() != 2 && a.shape.size() != 3) throw InvalidInput("array file must be 2-D or 3-D");
  std::uint64_t count = 1;
  for (auto d : a.shape) {
    if (d == 0) throw InvalidInput("array file dimensions must be nonzero");
    count *= d;
  }
  if (count != a.values.size()) throw InvalidInput("array file shape does not match value count");
  std::string out(kMagic);
  detail::put_u64(out, a.shape.size());
  for (auto d : a.shape) detail::put_u64(out, d);
  out.reserve(out.size() + 8 * a.values.size());
  for (double v : a.values) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline ArrayFile decode_array(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) throw FormatError("missing CNMF1 magic");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  std::size_t pos = kMagic.size();
  const auto need = [&](std::size_t n) {
    if (bytes.size() - pos < n) throw FormatError("truncated array file");
  };
  need(8);
  const std::uint64_t ndim = detail::get_u64(p + pos);
  pos += 8;
  if (ndim != 2 && ndim != 3) throw FormatError("array file ndim must be 2 or 3");
  ArrayFile a;
  std::uint64_t count = 1;
  for (std::uint64_t i = 0; i < ndim; ++i) {
    need(8);
    const std::uint64_t d = detail::get_u64(p + pos);
    pos += 8;
    if (d == 0) throw FormatError("array file has a zero dimension");
    if (count > (std::uint64_t{1} << 40) / d) throw FormatError("array file dimensions too large");
    count *= d;
    a.shape.push_back(d);
  }
  if (bytes.size() - pos != 8 * count) throw FormatError("array payload length does not match declared shape");
  a.values.resize(count);
  for (std::uint64_t i = 0; i < count; ++i, pos += 8) a.values[i] = std::bit_cast<double>(detail::get_u64(p + pos));
  return a;
}

inline ArrayFile to_array(const Matrix& M) {
  ArrayFile a;
  a.shape = {static_cast<std::uint64_t>(M.rows()), static_cast<std::uint64_t>(M.cols())};
  a.values.reserve(static_cast<std::size_t>(M.size()));
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) a.values.push_back(M(i, j));
  return a;
}

inline ArrayFile to_array(const MotifTensor& W) {
  ArrayFile a;
  a.shape = {static_cast<std::uint64_t>(W.lags()), static_cast<std::uint64_t>(W.features()),
             static_cast<std::uint64_t>(W.components())};
  a.values.reserve(static_cast<std::size_t>(W.size()));
  for (Index l = 0; l < W.lags(); ++l)
    for (Index n = 0; n < W.features(); ++n)
      for (Index k = 0; k < W.components(); ++k) a.values.push_back(W(l, n, k));
  return a;
}

inline Matrix matrix_from(const ArrayFile& a) {
  if (a.shape.size() != 2) throw FormatError("expected a 2-D array");
  const auto rows = static_cast<Index>(a.shape[0]), cols = static_cast<Index>(a.shape[1]);
  Matrix M(rows, cols);
  std::size_t i = 0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) M(r, c) = a.values[i++];
  return M;
}

inline MotifTensor tensor_from(const ArrayFile& a) {
  if (a.shape.size() != 3) throw FormatError("expected a 3-D array");
  MotifTensor W(static_cast<Index>(a.shape[0]), static_cast<Index>(a.shape[1]), static_cast<Index>(a.shape[2]));
  std::size_t i = 0;
  for (Index l = 0; l < W.lags(); ++l)
    for (Index n = 0; n < W.features(); ++n)
      for (Index k = 0; k < W.components(); ++k) W(l, n, k) = a.values[i++];
  return W;
}

inline void write_array(const std::filesystem::path& path, const ArrayFile& a) {
  detail::write_file_atomic(path, encode_array(a));
}

inline ArrayFile read_array(const std::filesystem::path& path) { return decode_array(detail::read_file(path)); }

inline void write_matrix(const std::filesystem::path& path, const Matrix& M) { write_array(path, to_array(M)); }
inline void write_tensor(const std::filesystem::path& path, const MotifTensor& W) { write_array(path, to_array(W)); }
inline MotifTensor read_tensor(const std::filesystem::path& path) { return tensor_from(read_array(path)); }

inline std::string encode_csv(const Matrix& M) {
  std::string out;
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j) out.push_back(',');
      out += detail::format_double(M(i, j));
    }
    out.push_back('\n');
  }
  return out;
}

inline Matrix decode_csv(std::string_view text) {
  const auto lines = detail::lines_of(text);
  if (lines.empty()) throw FormatError("empty CSV matrix");
  std::vector<double> values;
  Index cols = -1;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto fields = detail::split(lines[r], ',');
    if (cols < 0) cols = static_cast<Index>(fields.size());
    if (static_cast<Index>(fields.size()) != cols) throw FormatError("CSV row " + std::to_string(r + 1) + " has wrong length");
    for (auto f : fields) values.push_back(detail::parse_double(f, "CSV row " + std::to_string(r + 1)));
  }
  const auto rows = static_cast<Index>(lines.size());
  Matrix M(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) M(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  return M;
}

inline void write_matrix_csv(const std::filesystem::path& path, const Matrix& M) {
  detail::write_file_atomic(path, encode_csv(M));
}

/// Reads a 2-D matrix, binary if the file starts with the magic, CSV otherwise.
inline Matrix read_matrix(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  if (bytes.compare(0, kMagic.size(), kMagic) == 0) return matrix_from(decode_array(bytes));
  return decode_csv(bytes);
}

/// Trace as CSV. With timing off, elapsed_s holds the iteration index so the
/// output is a pure function of the computation.
inline std::string encode_trace(const FitTrace& trace, bool timing = true) {
  std::string out = "iteration,elapsed_s,loss\n";
  for (const auto& r : trace.records) {
    out += std::to_string(r.iteration);
    out.push_back(',');
    out += timing ? detail::format_double(r.elapsed_s) : std::to_string(r.iteration);
    out.push_back(',');
    out += detail::format_double(r.loss);
    out.push_back('\n');
  }
  return out;
}

inline FitTrace decode_trace(std::string_view text) {
  const auto lines = detail::lines_of(text);
  if (lines.empty() || lines[0] != "iteration,elapsed_s,loss") throw FormatError("trace CSV header missing");
  FitTrace trace;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = detail::split(lines[i], ',');
    if (fields.size() != 3) throw FormatError("trace row " + std::to_string(i) + " must have 3 fields");
    const std::string where = "trace row " + std::to_string(i);
    TraceRecord r;
    r.iteration = static_cast<int>(detail::parse_double(fields[0], where));
    r.elapsed_s = detail::parse_double(fields[1], where);
    r.loss = detail::parse_double(fields[2], where);
    trace.records.push_back(r);
  }
  return trace;
}

inline void write_trace(const std::filesystem::path& path, const FitTrace& trace, bool timing = true) {
  detail::write_file_atomic(path, encode_trace(trace, timing));
}

inline FitTrace read_trace(const std::filesystem::path& path) { return decode_trace(detail::read_file(path)); }

}  // namespace cnmf
