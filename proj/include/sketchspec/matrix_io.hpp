#pragma once

// Dense matrix files.
//
// MatrixMarket: "%%MatrixMarket matrix array real general" (integer field is
// also read), '%' comment lines, a "rows cols" size line, then rows*cols
// values in column-major order. Values are written with 17 significant digits.
//
// Binary: "SKSP", u32 rows, u32 cols, then rows*cols float64, all little-endian,
// entries row-major.

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sketchspec/dense_matrix.hpp"
#include "sketchspec/error.hpp"

namespace sketchspec {

enum class MatrixFormat { MatrixMarket, Binary };

/// ".mtx" selects MatrixMarket, anything else the binary format.
inline MatrixFormat format_for_path(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".mtx" ? MatrixFormat::MatrixMarket : MatrixFormat::Binary;
}

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

inline double parse_double(const std::string& tok, std::size_t line) {
  double v = 0.0;
  const char* b = tok.data();
  const char* e = b + tok.size();
  if (!tok.empty() && *b == '+') ++b;
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) throw ParseError("not a number: '" + tok + "'", line);
  if (!std::isfinite(v)) throw ParseError("non-finite value '" + tok + "'", line);
  return v;
}

inline std::size_t parse_dim(const std::string& tok, std::size_t line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v == 0) {
    throw ParseError("invalid dimension '" + tok + "'", line);
  }
  return v;
}

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
bool get_le(std::istream& is, T& v) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  std::memcpy(&v, buf, sizeof(T));
  return true;
}

}  // namespace detail

inline DenseMatrix read_matrix_market(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty file", 1);
  ++lineno;
  {
    std::istringstream hs(line);
    std::string banner, object, format, field, symmetry;
    hs >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket") throw ParseError("missing %%MatrixMarket banner", lineno);
    if (detail::lower(object) != "matrix") throw ParseError("unsupported object '" + object + "'", lineno);
    if (detail::lower(format) != "array") throw ParseError("unsupported format '" + format + "'", lineno);
    const std::string f = detail::lower(field);
    if (f != "real" && f != "integer" && f != "double") throw ParseError("unsupported field '" + field + "'", lineno);
    if (detail::lower(symmetry) != "general") {
      throw ParseError("unsupported symmetry '" + symmetry + "'", lineno);
    }
  }
  std::size_t rows = 0;
  std::size_t cols = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '%' || detail::blank(line)) continue;
    std::istringstream ss(line);
    std::string r, c, extra;
    ss >> r >> c;
    if (c.empty() || (ss >> extra)) throw ParseError("size line must hold exactly 'rows cols'", lineno);
    rows = detail::parse_dim(r, lineno);
    cols = detail::parse_dim(c, lineno);
    break;
  }
  if (rows == 0) throw ParseError("missing size line", lineno + 1);
  if (rows > std::numeric_limits<std::size_t>::max() / cols) throw ParseError("dimensions overflow", lineno);
  const std::size_t total = rows * cols;
  std::vector<double> col_major;
  col_major.reserve(total);
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line[0] == '%') continue;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
      if (col_major.size() == total) throw ParseError("more values than rows*cols", lineno);
      col_major.push_back(detail::parse_double(tok, lineno));
    }
  }
  if (col_major.size() != total) {
    throw ParseError("expected " + std::to_string(total) + " values, found " + std::to_string(col_major.size()),
                     lineno);
  }
  RowMatrix a(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t i = 0; i < rows; ++i) a(Eigen::Index(i), Eigen::Index(j)) = col_major[j * rows + i];
  }
  return DenseMatrix(std::move(a));
}

inline void write_matrix_market(std::ostream& out, const DenseMatrix& a) {
  out << "%%MatrixMarket matrix array real general\n" << a.rows() << ' ' << a.cols() << '\n';
  char buf[40];
  for (std::size_t j = 0; j < a.cols(); ++j) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g\n", a(i, j));
      out << buf;
    }
  }
}

inline DenseMatrix read_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SKSP", 4) != 0) throw ParseError("missing SKSP magic", 0);
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  if (!detail::get_le(in, rows) || !detail::get_le(in, cols)) throw ParseError("truncated header", 0);
  if (rows == 0 || cols == 0) throw ParseError("zero dimension in header", 0);
  const std::size_t total = std::size_t(rows) * cols;
  std::vector<double> v(total);
  for (auto& x : v) {
    if (!detail::get_le(in, x)) throw ParseError("truncated payload", 0);
    if (!std::isfinite(x)) throw ParseError("non-finite entry", 0);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailing bytes after payload", 0);
  return DenseMatrix(rows, cols, v);
}

inline void write_binary(std::ostream& out, const DenseMatrix& a) {
  if (a.rows() > std::numeric_limits<std::uint32_t>::max() || a.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("matrix too large for the binary format");
  }
  out.write("SKSP", 4);
  detail::put_le(out, static_cast<std::uint32_t>(a.rows()));
  detail::put_le(out, static_cast<std::uint32_t>(a.cols()));
  for (double x : a.entries()) detail::put_le(out, x);
}

inline DenseMatrix read_matrix(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open '" + p.string() + "' for reading");
  return format_for_path(p) == MatrixFormat::MatrixMarket ? read_matrix_market(in) : read_binary(in);
}

inline void write_matrix(const std::filesystem::path& p, const DenseMatrix& a) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
  if (format_for_path(p) == MatrixFormat::MatrixMarket) {
    write_matrix_market(out, a);
  } else {
    write_binary(out, a);
  }
  out.flush();
  if (!out) throw IoError("write to '" + p.string() + "' failed");
}

}  // namespace sketchspec
