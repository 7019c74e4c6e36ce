#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "pfpca/io.hpp"
#include "test_support.hpp"

using namespace pfpca;
using pfpca::testing::code_of;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) : path_(fs::temp_directory_path() / ("pfpca_test_" + tag)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write(const fs::path& p, const std::string& text) { write_file_atomic(p, text); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PFPCA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Smooth rank-two data with noise as CSV text whose first row is the grid.
std::string smooth_csv(Index n, Index m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  MatrixXd x(n + 1, m);
  for (Index j = 0; j < m; ++j) x(0, j) = 0.1 * double(j);
  for (Index i = 1; i <= n; ++i) {
    const double a = 3.0 * z(rng), b = z(rng);
    for (Index j = 0; j < m; ++j) {
      const double t = x(0, j);
      x(i, j) = a * std::sin(t) + b * std::cos(2.0 * t) + 0.2 * z(rng);
    }
  }
  return matrix_to_csv(x);
}

}  // namespace

TEST(Parse, HeaderGridFileGridAndUnitGrid) {
  TempDir dir("parse");
  write(dir / "a.csv", "0, 0.5, 2\n\n1,2,3\r\n4,5,+6\n");
  const LoadedMatrix h = load_matrix((dir / "a.csv").string(), {GridSourceKind::HeaderRow, ""});
  ASSERT_EQ(h.matrix.rows(), 2);
  EXPECT_EQ(h.matrix(1, 2), 6.0);
  EXPECT_EQ(h.grid.times()(1), 0.5);
  EXPECT_TRUE(h.warnings.empty());

  const LoadedMatrix u = load_matrix((dir / "a.csv").string());
  EXPECT_EQ(u.matrix.rows(), 3);
  EXPECT_EQ(u.grid.times()(2), 3.0);
  EXPECT_EQ(u.warnings.size(), 1u);

  write(dir / "g.csv", "1\n2\n4\n");
  const LoadedMatrix f = load_matrix((dir / "a.csv").string(), {GridSourceKind::File, (dir / "g.csv").string()});
  EXPECT_EQ(f.grid.times()(2), 4.0);
}

TEST(Parse, ErrorCodes) {
  TempDir dir("parse_err");
  const std::string p = (dir / "x.csv").string();
  write(p, "1,2,3\n4,5\n");
  EXPECT_EQ(code_of([&] { load_matrix(p); }), ErrorCode::RaggedRows);
  write(p, "1,2,3\n4,abc,6\n");
  EXPECT_EQ(code_of([&] { load_matrix(p); }), ErrorCode::NonNumericCell);
  write(p, "1,2,3\n4,nan,6\n");
  EXPECT_EQ(code_of([&] { load_matrix(p); }), ErrorCode::NonNumericCell);
  write(p, "1,2,3\n4,,6\n");
  EXPECT_EQ(code_of([&] { load_matrix(p); }), ErrorCode::NonNumericCell);
  write(p, "0,1,2\n");
  EXPECT_EQ(code_of([&] { load_matrix(p, {GridSourceKind::HeaderRow, ""}); }), ErrorCode::ParseError);
  write(p, "\n\n");
  EXPECT_EQ(code_of([&] { load_matrix(p); }), ErrorCode::ParseError);
  write(p, "0,2,1\n4,5,6\n");
  EXPECT_EQ(code_of([&] { load_matrix(p, {GridSourceKind::HeaderRow, ""}); }), ErrorCode::NonIncreasingGrid);
  write(p, "0,1\n4,5\n");
  EXPECT_EQ(code_of([&] { load_matrix(p, {GridSourceKind::HeaderRow, ""}); }), ErrorCode::GridTooSmall);
  write(dir / "g.csv", "1\n2\n");
  write(p, "1,2,3\n");
  EXPECT_EQ(code_of([&] { load_matrix(p, {GridSourceKind::File, (dir / "g.csv").string()}); }),
            ErrorCode::GridLengthMismatch);
  EXPECT_EQ(code_of([&] { load_matrix((dir / "missing.csv").string()); }), ErrorCode::IoError);
  try {
    write(p, "1,2,3\n\n4,x,6\n");
    load_matrix(p);
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3, column 2"), std::string::npos) << e.what();
  }
}

TEST(Transform, SqrtCount) {
  MatrixXd counts(1, 3);
  counts << 0, 2, 12;
  const MatrixXd t = sqrt_count_transform(counts);
  EXPECT_DOUBLE_EQ(t(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(t(0, 1), 1.5);
  EXPECT_DOUBLE_EQ(t(0, 2), 3.5);
  counts(0, 1) = -1.0;
  EXPECT_EQ(code_of([&] { sqrt_count_transform(counts); }), ErrorCode::NegativeCount);
}

TEST(Format, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e22, 0.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
}

TEST(Json, ResultRoundTrip) {
  std::mt19937_64 rng(3);
  const MatrixXd x = pfpca::testing::random_matrix(8, 7, rng);
  const TimeGrid g = uniform_grid(7, 0.0, 6.0);
  const FPCAResult r = fit_mpdc(center_columns(x, g), build_penalty(g), 2, default_alpha_grid(), Criterion::GCV);
  TempDir dir("json");
  save_result(dir / "r.json", r);
  const FPCAResult back = load_result(dir / "r.json");
  EXPECT_EQ(back.method, r.method);
  EXPECT_TRUE(back.times == r.times);
  EXPECT_TRUE(back.column_means == r.column_means);
  ASSERT_EQ(back.components.size(), 2u);
  for (int k = 0; k < 2; ++k) {
    EXPECT_TRUE(back.components[k].fit.loading == r.components[k].fit.loading);
    EXPECT_TRUE(back.components[k].fit.scores == r.components[k].fit.scores);
    EXPECT_EQ(back.components[k].fit.alpha, r.components[k].fit.alpha);
    EXPECT_EQ(back.components[k].selection.scores, r.components[k].selection.scores);
    EXPECT_EQ(back.components[k].selection.chosen_index, r.components[k].selection.chosen_index);
  }
  EXPECT_EQ(to_json(back).dump(), to_json(r).dump());
}

TEST(Json, RejectsWrongKindOrVersion) {
  TempDir dir("json_bad");
  write(dir / "r.json", R"({"format_version": 99, "kind": "fpca_result"})");
  EXPECT_EQ(code_of([&] { load_result(dir / "r.json"); }), ErrorCode::ParseError);
  write(dir / "r.json", "not json");
  EXPECT_EQ(code_of([&] { load_result(dir / "r.json"); }), ErrorCode::ParseError);
}

TEST(Cli, FitEvaluateAndExitCodes) {
  TempDir dir("cli");
  write(dir / "data.csv", smooth_csv(25, 30, 5));
  const std::string data = (dir / "data.csv").string();
  const std::string out = (dir / "out").string();
  ASSERT_EQ(run_cli("fit -i " + data + " --header-grid -k 2 -o " + out + " --dump-penalty"), 0);
  for (const char* f : {"result.json", "mean.csv", "loading_1.csv", "loading_2.csv", "trace_1.json",
                        "penalty_omega.csv", "penalty_eigvecs.csv", "penalty_eigvals.csv"}) {
    EXPECT_TRUE(fs::exists(dir.path() / "out" / f)) << f;
  }
  const FPCAResult r = load_result(dir.path() / "out" / "result.json");
  ASSERT_EQ(r.components.size(), 2u);

  const std::string ev = (dir / "ev.csv").string();
  ASSERT_EQ(run_cli("evaluate -r " + out + "/result.json --points 0,0.5,1.2 -c 2 -o " + ev), 0);
  const auto rows = detail::parse_csv(read_file(ev).substr(read_file(ev).find('\n') + 1));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].second[1], r.components[1].fit.loading(0));

  EXPECT_EQ(run_cli("evaluate -r " + out + "/result.json -c 3 -o " + ev), 2);
  EXPECT_EQ(run_cli("fit -i " + (dir / "missing.csv").string() + " -o " + out), 2);
  EXPECT_EQ(run_cli("fit -i " + data + " -o " + out + " --criterion bogus"), 2);
  EXPECT_EQ(run_cli("fit -i " + data + " --header-grid -k 0 -o " + out), 2);
  EXPECT_EQ(run_cli("fit -i " + data + " --header-grid -k 2 --alphas 1,0.5 -o " + out), 2);
  EXPECT_EQ(run_cli("fit -i " + data + " --header-grid --transform sqrt_count -o " + out), 2);
  EXPECT_EQ(run_cli("simulate --sigma 0 --dump " + (dir / "d.csv").string()), 2);
  EXPECT_EQ(run_cli("nonsense"), 2);
}

TEST(Cli, CsvTracesAndSpdr) {
  TempDir dir("cli_spdr");
  write(dir / "data.csv", smooth_csv(12, 15, 9));
  const std::string out = (dir / "out").string();
  ASSERT_EQ(run_cli("fit -i " + (dir / "data.csv").string() +
                    " --header-grid --method spdr -k 2 --format csv --alpha-min-exp 0 --alpha-max-exp 5 -o " + out),
            0);
  const std::string trace = read_file(dir.path() / "out" / "trace_1.csv");
  EXPECT_EQ(trace.substr(0, trace.find('\n')), "alpha,score,chosen");
  EXPECT_EQ(load_result(dir.path() / "out" / "result.json").method, Method::SPDR);
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
  TempDir dir("cli_det");
  write(dir / "data.csv", smooth_csv(20, 18, 13));
  const std::string base = "fit -i " + (dir / "data.csv").string() + " --header-grid -k 2 --seed 4 -o ";
  ASSERT_EQ(run_cli(base + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli(base + (dir / "b").string()), 0);
  for (const auto& entry : fs::directory_iterator(dir.path() / "a")) {
    const fs::path twin = dir.path() / "b" / entry.path().filename();
    EXPECT_EQ(read_file(entry.path()), read_file(twin)) << entry.path().filename();
  }
}
