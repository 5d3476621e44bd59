#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "sketchsolve/common.hpp"

namespace sketchsolve {

namespace detail {

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace detail

/// Reads a dense matrix from Matrix Market text. Supports
/// `%%MatrixMarket matrix {coordinate|array} real general`; array data is
/// column-major and coordinate indices are 1-based. Unlisted coordinate
/// entries are zero; repeated coordinates overwrite.
inline Matrix read_matrix_market(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line)) throw ParseError("empty file", 1);
  ++lineno;
  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") throw ParseError("missing %%MatrixMarket banner", lineno);
  object = detail::lowercase(object);
  format = detail::lowercase(format);
  field = detail::lowercase(field);
  symmetry = detail::lowercase(symmetry);
  if (object != "matrix") throw ParseError("unsupported object '" + object + "'", lineno);
  if (format != "coordinate" && format != "array") throw ParseError("unsupported format '" + format + "'", lineno);
  if (field != "real") throw ParseError("unsupported field '" + field + "' (only real)", lineno);
  if (symmetry != "general") throw ParseError("unsupported symmetry '" + symmetry + "'", lineno);

  auto next_data_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      ++lineno;
      if (!out.empty() && out[0] == '%') continue;
      if (detail::blank(out)) continue;
      return true;
    }
    return false;
  };

  if (!next_data_line(line)) throw ParseError("missing size line", lineno + 1);
  std::istringstream size_line(line);
  long long rows = -1, cols = -1, nnz = -1;
  if (format == "coordinate") {
    if (!(size_line >> rows >> cols >> nnz)) throw ParseError("malformed size line", lineno);
  } else if (!(size_line >> rows >> cols)) {
    throw ParseError("malformed size line", lineno);
  }
  if (rows < 0 || cols < 0 || (format == "coordinate" && nnz < 0))
    throw ParseError("negative dimension", lineno);

  Matrix out = Matrix::Zero(rows, cols);
  const long long entries = format == "coordinate" ? nnz : rows * cols;
  for (long long k = 0; k < entries; ++k) {
    if (!next_data_line(line)) throw ParseError("unexpected end of file", lineno + 1);
    std::istringstream data(line);
    if (format == "coordinate") {
      long long i = 0, j = 0;
      double v = 0.0;
      if (!(data >> i >> j >> v)) throw ParseError("malformed coordinate entry", lineno);
      if (i < 1 || i > rows || j < 1 || j > cols)
        throw ParseError("index (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range", lineno);
      out(i - 1, j - 1) = v;
    } else {
      double v = 0.0;
      if (!(data >> v)) throw ParseError("malformed array entry", lineno);
      out(k % rows, k / rows) = v;
    }
  }
  if (!out.allFinite()) throw ParseError("non-finite entry", lineno);
  return out;
}

inline Matrix load_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_matrix_market(in);
}

}  // namespace sketchsolve
