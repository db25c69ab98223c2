#pragma once

#include "psm/solver.hpp"
#include "psm/types.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace psm {

inline constexpr const char* kTraceHeader =
    "t,F,normG,alpha,normDx,eta,inner_iters,refresh,hess_evals,wall_s,ls_trials,lambda";

/// Shortest decimal representation that round-trips the double exactly.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double_strict(const std::string& tok, int line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw ParseError("invalid numeric field '" + tok + "'", line_no);
  return v;
}

inline void write_trace_csv(std::ostream& out,
                            const std::vector<TraceRecord>& trace) {
  out << kTraceHeader << '\n';
  for (const TraceRecord& row : trace) {
    out << row.t << ',' << format_double(row.F) << ','
        << format_double(row.norm_G) << ',' << format_double(row.alpha) << ','
        << format_double(row.norm_dx) << ',' << format_double(row.eta) << ','
        << row.inner_iters << ',' << (row.refresh ? 1 : 0) << ','
        << row.hess_evals << ',' << format_double(row.wall_s) << ','
        << row.ls_trials << ',' << format_double(row.lambda) << '\n';
  }
}

inline std::vector<TraceRecord> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty trace file", 1);
  if (line != kTraceHeader)
    throw ParseError("unexpected trace header '" + line + "'", 1);

  std::vector<TraceRecord> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) fields.push_back(tok);
    if (fields.size() != 12)
      throw ParseError("expected 12 fields, got " + std::to_string(fields.size()),
                       line_no);
    TraceRecord row;
    row.t = static_cast<int>(parse_double_strict(fields[0], line_no));
    row.F = parse_double_strict(fields[1], line_no);
    row.norm_G = parse_double_strict(fields[2], line_no);
    row.alpha = parse_double_strict(fields[3], line_no);
    row.norm_dx = parse_double_strict(fields[4], line_no);
    row.eta = parse_double_strict(fields[5], line_no);
    row.inner_iters = static_cast<int>(parse_double_strict(fields[6], line_no));
    row.refresh = parse_double_strict(fields[7], line_no) != 0.0;
    row.hess_evals = static_cast<int>(parse_double_strict(fields[8], line_no));
    row.wall_s = parse_double_strict(fields[9], line_no);
    row.ls_trials = static_cast<int>(parse_double_strict(fields[10], line_no));
    row.lambda = parse_double_strict(fields[11], line_no);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace psm
