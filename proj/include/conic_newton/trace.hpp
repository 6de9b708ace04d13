#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace conic_newton {

/// Shortest decimal string that round-trips the double exactly.
inline std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

/// One per-iteration record of a solver run. `cum_cost` tracks the running
/// cost-model counter in dual-cone-projection units: one per sweep for the
/// plain splitting solver, one per sweep plus one per residual evaluation
/// for the Newton solver. It backs the benchmark accounting and is not part
/// of the CSV schema.
struct TraceRecord {
  std::int64_t iter = 0;
  double elapsed_s = 0.0;
  double fnorm = 0.0;
  std::optional<double> step_size;
  std::optional<int> gmres_iters;
  std::optional<int> backtracks;
  std::optional<double> objective;
  std::optional<double> dist_to_ref;
  std::int64_t cum_cost = 0;
};

inline constexpr const char* kTraceCsvHeader =
    "iter,elapsed_s,fnorm,step_size,gmres_iters,backtracks,objective,dist_to_ref";

inline std::string trace_row_csv(const TraceRecord& rec) {
  std::string row = std::to_string(rec.iter);
  row += ',';
  row += format_double(rec.elapsed_s);
  row += ',';
  row += format_double(rec.fnorm);
  row += ',';
  if (rec.step_size) row += format_double(*rec.step_size);
  row += ',';
  if (rec.gmres_iters) row += std::to_string(*rec.gmres_iters);
  row += ',';
  if (rec.backtracks) row += std::to_string(*rec.backtracks);
  row += ',';
  if (rec.objective) row += format_double(*rec.objective);
  row += ',';
  if (rec.dist_to_ref) row += format_double(*rec.dist_to_ref);
  return row;
}

inline void write_trace_csv(const std::vector<TraceRecord>& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path);
  out << kTraceCsvHeader << '\n';
  for (const auto& rec : trace) out << trace_row_csv(rec) << '\n';
  if (!out) throw std::runtime_error("write_trace_csv: write failed for " + path);
}

}  // namespace conic_newton
