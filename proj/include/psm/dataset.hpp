#pragma once

#include "psm/types.hpp"

#include <Eigen/SparseCore>

#include <zlib.h>

#include <charconv>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace psm {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Sparse design matrix plus labels, as read from LIBSVM text.
struct Dataset {
  SparseRowMatrix features;  // n_samples x d
  Vector labels;

  int samples() const { return static_cast<int>(features.rows()); }
  int dimension() const { return static_cast<int>(features.cols()); }
};

struct LibsvmOptions {
  /// Force the feature count (files omit trailing all-zero columns).
  std::optional<int> dimension_override;
  /// Map {0, 1} labels to {-1, +1} for binary classification losses.
  bool normalize_binary_labels = false;
};

namespace detail {

inline double parse_number(const std::string& tok, int line_no, const char* what) {
  double out = 0.0;
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  if (begin != end && *begin == '+') ++begin;  // from_chars rejects leading '+'
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end || begin == end)
    throw ParseError(std::string("invalid ") + what + " '" + tok + "'", line_no);
  if (!std::isfinite(out))
    throw ParseError(std::string(what) + " is not finite", line_no);
  return out;
}

}  // namespace detail

/// Parse LIBSVM lines "label idx:val idx:val ..." with 1-based, strictly
/// ascending indices. A bare label is a valid empty row.
inline Dataset parse_libsvm(std::istream& in, const LibsvmOptions& options = {}) {
  std::vector<Eigen::Triplet<double>> entries;
  std::vector<double> labels;
  int max_index = 0;
  int line_no = 0;

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string tok;
    if (!(fields >> tok)) continue;  // blank line
    if (tok[0] == '#') continue;

    double label = detail::parse_number(tok, line_no, "label");
    const int row = static_cast<int>(labels.size());
    labels.push_back(label);

    int prev_index = 0;
    while (fields >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
        throw ParseError("expected index:value, got '" + tok + "'", line_no);
      int index = 0;
      {
        const char* begin = tok.data();
        const char* end = begin + colon;
        auto [ptr, ec] = std::from_chars(begin, end, index);
        if (ec != std::errc{} || ptr != end)
          throw ParseError("invalid feature index '" + tok.substr(0, colon) + "'",
                           line_no);
      }
      if (index < 1) throw ParseError("feature indices are 1-based", line_no);
      if (index <= prev_index)
        throw ParseError("feature indices must be strictly ascending", line_no);
      const double value =
          detail::parse_number(tok.substr(colon + 1), line_no, "feature value");
      entries.emplace_back(row, index - 1, value);
      prev_index = index;
      max_index = std::max(max_index, index);
    }
  }

  int dim = options.dimension_override.value_or(max_index);
  if (options.dimension_override && *options.dimension_override < max_index)
    throw ParseError("dimension override " +
                         std::to_string(*options.dimension_override) +
                         " is below the largest feature index " +
                         std::to_string(max_index),
                     line_no);

  Dataset data;
  data.features.resize(static_cast<int>(labels.size()), dim);
  data.features.setFromTriplets(entries.begin(), entries.end());
  data.features.makeCompressed();
  data.labels = Eigen::Map<const Vector>(labels.data(),
                                         static_cast<Eigen::Index>(labels.size()));

  if (options.normalize_binary_labels) {
    bool zero_one = true;
    for (Eigen::Index i = 0; i < data.labels.size(); ++i)
      if (data.labels[i] != 0.0 && data.labels[i] != 1.0) zero_one = false;
    if (zero_one)
      for (Eigen::Index i = 0; i < data.labels.size(); ++i)
        data.labels[i] = data.labels[i] == 0.0 ? -1.0 : 1.0;
  }
  return data;
}

inline Dataset parse_libsvm(const std::string& text, const LibsvmOptions& options = {}) {
  std::istringstream in(text);
  return parse_libsvm(in, options);
}

/// Load from disk; gzip-compressed files (magic 1f 8b) decompress transparently.
inline Dataset load_libsvm_file(const std::string& path,
                                const LibsvmOptions& options = {}) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw Error("cannot open data file: " + path);
  unsigned char magic[2] = {0, 0};
  probe.read(reinterpret_cast<char*>(magic), 2);
  probe.close();

  if (magic[0] == 0x1f && magic[1] == 0x8b) {
    gzFile gz = gzopen(path.c_str(), "rb");
    if (gz == nullptr) throw Error("cannot open gzip data file: " + path);
    std::string text;
    char buf[1 << 16];
    int got = 0;
    while ((got = gzread(gz, buf, sizeof buf)) > 0) text.append(buf, got);
    const bool truncated = got < 0;
    gzclose(gz);
    if (truncated) throw Error("gzip stream is corrupt: " + path);
    return parse_libsvm(text, options);
  }

  std::ifstream in(path);
  return parse_libsvm(in, options);
}

/// Re-emit LIBSVM text (1-based ascending indices, %.17g values).
inline void write_libsvm(std::ostream& out, const Dataset& data) {
  out.precision(17);
  for (int i = 0; i < data.samples(); ++i) {
    out << data.labels[i];
    for (SparseRowMatrix::InnerIterator it(data.features, i); it; ++it)
      out << ' ' << (it.col() + 1) << ':' << it.value();
    out << '\n';
  }
}

}  // namespace psm
