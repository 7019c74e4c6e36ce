#pragma once

// Matrix/grid ingestion, the square-root count transform, and (de)serialization
// of fits, selection traces and simulation reports.
//
// Numbers written to CSV use 17 significant digits in the C locale; JSON uses
// the shortest representation that round-trips. Both are lossless.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "pfpca/error.hpp"
#include "pfpca/fpca.hpp"
#include "pfpca/grid_penalty.hpp"
#include "pfpca/selection.hpp"
#include "pfpca/simulation.hpp"

namespace pfpca {

inline constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------------------
// number formatting and files

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// Writes to a sibling temporary file and renames it over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// CSV with a header line and one row per entry of `columns[0]`.
inline std::string columns_to_csv(const std::vector<std::string>& header, const std::vector<VectorXd>& columns) {
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
  out += '\n';
  const Index rows = columns.empty() ? 0 : columns.front().size();
  for (Index r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + format_double(columns[c](r));
    out += '\n';
  }
  return out;
}

/// Plain matrix CSV (no header).
inline std::string matrix_to_csv(const MatrixXd& m) {
  std::string out;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) out += (c ? "," : "") + format_double(m(r, c));
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// ingestion

enum class GridSourceKind { HeaderRow, File, Unit };

struct GridSource {
  GridSourceKind kind = GridSourceKind::Unit;
  std::string path;  ///< for GridSourceKind::File
};

struct LoadedMatrix {
  MatrixXd matrix;
  TimeGrid grid;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_cell(std::string_view cell, std::size_t line, std::size_t col) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::NonNumericCell, "line " + std::to_string(line) + ", column " + std::to_string(col) +
                                               ": '" + std::string(cell) + "' is not a number");
  }
  return v;
}

/// Parses comma-separated numeric lines; blank lines are skipped. Returns rows
/// with their 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::vector<double>>> parse_csv(const std::string& text) {
  std::vector<std::pair<std::size_t, std::vector<double>>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0, col = 1;
    while (true) {
      const std::size_t comma = view.find(',', start);
      const std::string_view cell = view.substr(start, comma == std::string_view::npos ? view.npos : comma - start);
      row.push_back(parse_cell(cell, lineno, col));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
      ++col;
    }
    rows.emplace_back(lineno, std::move(row));
  }
  return rows;
}

}  // namespace detail

inline LoadedMatrix load_matrix(const std::string& path, const GridSource& source = {}) {
  auto rows = detail::parse_csv(read_file(path));
  LoadedMatrix out;

  VectorXd times;
  std::size_t first = 0;
  if (source.kind == GridSourceKind::HeaderRow) {
    if (rows.empty()) throw Error(ErrorCode::ParseError, path + ": missing header row");
    const auto& head = rows.front().second;
    times = Eigen::Map<const VectorXd>(head.data(), Index(head.size()));
    first = 1;
  }
  if (rows.size() <= first) throw Error(ErrorCode::ParseError, path + ": no data rows");

  const std::size_t m = rows[first].second.size();
  for (std::size_t r = first; r < rows.size(); ++r) {
    if (rows[r].second.size() != m) {
      throw Error(ErrorCode::RaggedRows, path + ": line " + std::to_string(rows[r].first) + " has " +
                                             std::to_string(rows[r].second.size()) + " values, expected " +
                                             std::to_string(m));
    }
  }
  out.matrix.resize(Index(rows.size() - first), Index(m));
  for (std::size_t r = first; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < m; ++c) out.matrix(Index(r - first), Index(c)) = rows[r].second[c];
  }

  if (source.kind == GridSourceKind::File) {
    const auto grid_rows = detail::parse_csv(read_file(source.path));
    times.resize(Index(grid_rows.size()));
    for (std::size_t i = 0; i < grid_rows.size(); ++i) {
      if (grid_rows[i].second.size() != 1) {
        throw Error(ErrorCode::ParseError,
                    source.path + ": line " + std::to_string(grid_rows[i].first) + " must hold a single value");
      }
      times(Index(i)) = grid_rows[i].second[0];
    }
  } else if (source.kind == GridSourceKind::Unit) {
    times = VectorXd::LinSpaced(Index(m), 1.0, double(m));
    out.warnings.push_back("no grid given; using unit-spaced times 1.." + std::to_string(m));
  }
  if (times.size() != Index(m)) {
    throw Error(ErrorCode::GridLengthMismatch, "grid has " + std::to_string(times.size()) +
                                                   " points but the matrix has " + std::to_string(m) + " columns");
  }
  out.grid = build_grid(times);
  return out;
}

/// Elementwise sqrt(N + 1/4) for nonnegative counts.
inline MatrixXd sqrt_count_transform(const MatrixXd& counts) {
  for (Index i = 0; i < counts.size(); ++i) {
    if (!(counts.data()[i] >= 0.0)) {
      throw Error(ErrorCode::NegativeCount, "count matrix has a negative or NaN entry");
    }
  }
  return (counts.array() + 0.25).sqrt().matrix();
}

// ---------------------------------------------------------------------------
// JSON

using json = nlohmann::json;

namespace detail {

inline json vec_to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), Index(v.size()));
}

/// Non-finite numbers are not representable in JSON; they are written as null
/// and read back as +inf.
inline json scores_to_json(const std::vector<double>& xs) {
  json out = json::array();
  for (double x : xs) out.push_back(std::isfinite(x) ? json(x) : json(nullptr));
  return out;
}

inline std::vector<double> scores_from_json(const json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(x.is_null() ? std::numeric_limits<double>::infinity() : x.get<double>());
  return out;
}

inline Criterion criterion_from_string(const std::string& s) {
  if (s == "cv") return Criterion::CV;
  if (s == "gcv") return Criterion::GCV;
  if (s == "row_cv") return Criterion::RowCV;
  throw Error(ErrorCode::ParseError, "unknown criterion '" + s + "'");
}

}  // namespace detail

inline json to_json(const SelectionTrace& t) {
  json j;
  j["criterion"] = std::string(to_string(t.criterion));
  j["alphas"] = t.alphas;
  j["scores"] = detail::scores_to_json(t.scores);
  j["failed"] = std::vector<bool>(t.failed);
  j["chosen_index"] = t.chosen_index;
  return j;
}

inline SelectionTrace selection_trace_from_json(const json& j) {
  SelectionTrace t;
  t.criterion = detail::criterion_from_string(j.at("criterion").get<std::string>());
  t.alphas = j.at("alphas").get<std::vector<double>>();
  t.scores = detail::scores_from_json(j.at("scores"));
  t.failed = j.at("failed").get<std::vector<bool>>();
  t.chosen_index = j.at("chosen_index").get<std::size_t>();
  return t;
}

/// alpha, score, chosen (0/1) per grid point.
inline std::string selection_trace_csv(const SelectionTrace& t) {
  std::string out = "alpha,score,chosen\n";
  for (std::size_t i = 0; i < t.alphas.size(); ++i) {
    out += format_double(t.alphas[i]) + "," + format_double(t.scores[i]) + "," +
           (i == t.chosen_index ? "1" : "0") + "\n";
  }
  return out;
}

inline json to_json(const FPCAResult& r) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "fpca_result";
  j["method"] = std::string(to_string(r.method));
  j["times"] = detail::vec_to_json(r.times);
  j["column_means"] = detail::vec_to_json(r.column_means);
  j["residual_fro_norm"] = r.residual_fro_norm;
  j["total_sum_squares"] = r.total_sum_squares;
  j["stopped_early"] = r.stopped_early;
  const std::vector<double> fractions = variance_explained(r);
  json comps = json::array();
  for (std::size_t k = 0; k < r.components.size(); ++k) {
    const auto& c = r.components[k];
    json jc;
    jc["alpha"] = c.fit.alpha;
    jc["loading"] = detail::vec_to_json(c.fit.loading);
    jc["scores"] = detail::vec_to_json(c.fit.scores);
    jc["objective"] = c.fit.objective;
    jc["iterations"] = c.fit.iterations;
    jc["converged"] = c.fit.converged;
    jc["variance_fraction"] = fractions[k];
    jc["selection"] = to_json(c.selection);
    comps.push_back(std::move(jc));
  }
  j["components"] = std::move(comps);
  return j;
}

inline FPCAResult fpca_result_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != kFormatVersion) {
      throw Error(ErrorCode::ParseError, "unsupported format_version");
    }
    FPCAResult r;
    const std::string method = j.at("method").get<std::string>();
    if (method != "mpdc" && method != "spdr") throw Error(ErrorCode::ParseError, "unknown method '" + method + "'");
    r.method = method == "mpdc" ? Method::MPDC : Method::SPDR;
    r.times = detail::vec_from_json(j.at("times"));
    r.column_means = detail::vec_from_json(j.at("column_means"));
    r.residual_fro_norm = j.at("residual_fro_norm").get<double>();
    r.total_sum_squares = j.at("total_sum_squares").get<double>();
    r.stopped_early = j.at("stopped_early").get<bool>();
    for (const auto& jc : j.at("components")) {
      ExtractedComponent c;
      c.fit.alpha = jc.at("alpha").get<double>();
      c.fit.loading = detail::vec_from_json(jc.at("loading"));
      c.fit.scores = detail::vec_from_json(jc.at("scores"));
      c.fit.objective = jc.at("objective").get<double>();
      c.fit.iterations = jc.at("iterations").get<int>();
      c.fit.converged = jc.at("converged").get<bool>();
      c.selection = selection_trace_from_json(jc.at("selection"));
      r.components.push_back(std::move(c));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed result JSON: ") + e.what());
  }
}

inline void save_result(const std::filesystem::path& path, const FPCAResult& r) {
  write_file_atomic(path, to_json(r).dump(2) + "\n");
}

inline FPCAResult load_result(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return fpca_result_from_json(j);
}

inline json to_json(const SimulationReport& rep) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "simulation_report";
  j["failures"] = rep.failures;
  json recs = json::array();
  for (const auto& r : rep.per_replicate) {
    json jr;
    jr["index"] = r.index;
    jr["failed"] = r.failed;
    if (r.failed) {
      jr["error"] = r.error;
    } else {
      jr["mse_mpdc"] = r.mse_mpdc;
      jr["mse_spdr"] = r.mse_spdr;
      jr["alpha_mpdc"] = r.alpha_mpdc;
      jr["alpha_spdr"] = r.alpha_spdr;
    }
    recs.push_back(std::move(jr));
  }
  j["per_replicate"] = std::move(recs);
  json summary = json::array();
  for (int c = 0; c < 2; ++c) {
    const auto& s = rep.ratio_summary[c];
    json js;
    js["component"] = c + 1;
    js["q1"] = s.q1;
    js["median"] = s.median;
    js["mean"] = s.mean;
    js["q3"] = s.q3;
    js["sign_test_p"] = std::isfinite(rep.sign_test_p[c]) ? json(rep.sign_test_p[c]) : json(nullptr);
    summary.push_back(std::move(js));
  }
  j["ratio_summary"] = std::move(summary);
  return j;
}

/// Summary table of SPDR/MPDC MSE ratios, one row per component.
inline std::string ratio_table_csv(const SimulationReport& rep) {
  std::string out = "fpc,q1,median,mean,q3,sign_test_p\n";
  for (int c = 0; c < 2; ++c) {
    const auto& s = rep.ratio_summary[c];
    out += std::to_string(c + 1) + "," + format_double(s.q1) + "," + format_double(s.median) + "," +
           format_double(s.mean) + "," + format_double(s.q3) + "," + format_double(rep.sign_test_p[c]) + "\n";
  }
  return out;
}

/// Raw per-replicate MSEs (unscaled) for scatter plots and ratio histograms.
inline std::string replicate_table_csv(const SimulationReport& rep) {
  std::string out = "replicate,mse_mpdc_1,mse_spdr_1,mse_mpdc_2,mse_spdr_2,alpha_mpdc_1,alpha_mpdc_2,alpha_spdr\n";
  for (const auto& r : rep.per_replicate) {
    if (r.failed) continue;
    out += std::to_string(r.index) + "," + format_double(r.mse_mpdc[0]) + "," + format_double(r.mse_spdr[0]) + "," +
           format_double(r.mse_mpdc[1]) + "," + format_double(r.mse_spdr[1]) + "," + format_double(r.alpha_mpdc[0]) +
           "," + format_double(r.alpha_mpdc[1]) + "," + format_double(r.alpha_spdr) + "\n";
  }
  return out;
}

/// Console summary; MSEs are displayed multiplied by 1e4.
inline std::string study_summary_text(const SimulationReport& rep) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  for (int c = 0; c < 2; ++c) {
    double mpdc = 0.0, spdr = 0.0;
    int count = 0;
    for (const auto& r : rep.per_replicate) {
      if (r.failed) continue;
      mpdc += r.mse_mpdc[c];
      spdr += r.mse_spdr[c];
      ++count;
    }
    const double scale = count > 0 ? 1e4 / double(count) : 0.0;
    const auto& s = rep.ratio_summary[c];
    os << "FPC" << c + 1 << ": mean MSE x1e4 MPDC " << mpdc * scale << ", SPDR " << spdr * scale
       << "; SPDR/MPDC ratio Q1 " << s.q1 << " median " << s.median << " mean " << s.mean << " Q3 " << s.q3
       << "; sign test p " << std::scientific << rep.sign_test_p[c] << std::fixed << "\n";
  }
  os << "failed replicates: " << rep.failures << " of " << rep.per_replicate.size() << "\n";
  return os.str();
}

}  // namespace pfpca
