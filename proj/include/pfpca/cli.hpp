#pragma once

// Command-line surface: fit, simulate, evaluate.
// Exit codes: 0 success, 2 input error, 3 numerical failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pfpca/error.hpp"
#include "pfpca/fpca.hpp"
#include "pfpca/grid_penalty.hpp"
#include "pfpca/io.hpp"
#include "pfpca/selection.hpp"
#include "pfpca/simulation.hpp"
#include "pfpca/spline.hpp"

namespace pfpca {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumeric = 3;

enum class Transform { None, SqrtCount };
enum class OutputFormat { Json, Csv };

struct RunConfig {
  // fit
  std::string input_path;
  std::string grid_path;
  bool header_grid = false;
  int components = 2;
  std::vector<double> alphas;  ///< explicit grid; empty means exponent range
  int alpha_exp_min = -5;
  int alpha_exp_max = 25;
  bool alpha_zero = true;
  Criterion criterion = Criterion::CV;
  Method method = Method::MPDC;
  Transform transform = Transform::None;
  bool center = true;
  FitEngine engine = FitEngine::SvdRoute;
  int refine = 10;
  bool dump_penalty = false;
  std::uint64_t seed = 20080601;
  OutputFormat format = OutputFormat::Json;
  std::string out_dir;
  // simulate
  SimConfig sim;
  bool sim_mean_curve = false;
  std::string dump_path;
  // evaluate
  std::string result_path;
  std::vector<int> eval_components;
  std::vector<double> eval_points;
  std::vector<double> eval_uniform;  ///< lo, hi, count
  std::string out_path;
};

namespace detail {

inline AlphaGrid alpha_grid_from(const RunConfig& cfg) {
  if (!cfg.alphas.empty()) return AlphaGrid(cfg.alphas);
  return exponential_alpha_grid(cfg.alpha_exp_min, cfg.alpha_exp_max, cfg.alpha_zero);
}

inline std::filesystem::path prepare_out_dir(const std::string& dir) {
  if (dir.empty()) throw Error(ErrorCode::InvalidConfig, "--out is required");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());
  return dir;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_input_error(e.code()) ? kExitInput : kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace detail

/// transform -> center -> fit -> result.json, mean.csv, loading_k.csv (spline on a
/// refined grid), and selection traces (trace_k.csv or trace_k.json).
inline int cmd_fit(const RunConfig& cfg) {
  return detail::guarded([&] {
    if (cfg.input_path.empty()) throw Error(ErrorCode::InvalidConfig, "--input is required");
    if (cfg.components < 1) throw Error(ErrorCode::InvalidConfig, "--components must be >= 1");
    if (cfg.refine < 1) throw Error(ErrorCode::InvalidConfig, "--refine must be >= 1");
    GridSource source;
    if (!cfg.grid_path.empty()) {
      source = {GridSourceKind::File, cfg.grid_path};
    } else if (cfg.header_grid) {
      source.kind = GridSourceKind::HeaderRow;
    }
    LoadedMatrix loaded = load_matrix(cfg.input_path, source);
    for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
    const AlphaGrid grid = detail::alpha_grid_from(cfg);
    const std::filesystem::path out = detail::prepare_out_dir(cfg.out_dir);

    MatrixXd x = cfg.transform == Transform::SqrtCount ? sqrt_count_transform(loaded.matrix) : loaded.matrix;
    const CenteredDataset data = cfg.center ? center_columns(x, loaded.grid) : uncentered(x, loaded.grid);
    const PenaltyOperator p = build_penalty(loaded.grid);

    FitConfig fit_cfg;
    fit_cfg.engine = cfg.engine;
    const FPCAResult result = cfg.method == Method::MPDC
                                  ? fit_mpdc(data, p, cfg.components, grid, cfg.criterion, fit_cfg)
                                  : fit_spdr(data, p, cfg.components, grid, fit_cfg);

    save_result(out / "result.json", result);
    write_file_atomic(out / "mean.csv", columns_to_csv({"t", "mean"}, {result.times, result.column_means}));
    const Index fine = (loaded.grid.size() - 1) * cfg.refine + 1;
    const VectorXd ts = VectorXd::LinSpaced(fine, loaded.grid.front(), loaded.grid.back());
    for (std::size_t k = 0; k < result.components.size(); ++k) {
      const auto& comp = result.components[k];
      const std::string tag = std::to_string(k + 1);
      const SplineFunction s = interpolate(loaded.grid, comp.fit.loading);
      write_file_atomic(out / ("loading_" + tag + ".csv"), columns_to_csv({"t", "value"}, {ts, evaluate(s, ts)}));
      if (cfg.format == OutputFormat::Csv) {
        write_file_atomic(out / ("trace_" + tag + ".csv"), selection_trace_csv(comp.selection));
      } else {
        write_file_atomic(out / ("trace_" + tag + ".json"), to_json(comp.selection).dump(2) + "\n");
      }
    }
    if (cfg.dump_penalty) {
      write_file_atomic(out / "penalty_omega.csv", matrix_to_csv(p.omega));
      write_file_atomic(out / "penalty_eigvecs.csv", matrix_to_csv(p.eigvecs));
      write_file_atomic(out / "penalty_eigvals.csv", matrix_to_csv(p.eigvals));
    }
    if (result.stopped_early) {
      std::cerr << "warning: residual vanished after " << result.components.size() << " components\n";
    }
    return kExitOk;
  });
}

/// Runs the Monte-Carlo study; writes report.json, table.csv and replicates.csv.
/// With --dump, also writes replicate 0 as a CSV whose first row is the penalty grid.
inline int cmd_simulate(const RunConfig& cfg) {
  return detail::guarded([&] {
    SimConfig sim = cfg.sim;
    for (double s : {sim.sigma1, sim.sigma2, sim.sigma}) {
      if (!(s > 0.0)) throw Error(ErrorCode::InvalidConfig, "standard deviations must be > 0");
    }
    sim.base_seed = cfg.seed;
    sim.alpha_grid = detail::alpha_grid_from(cfg);
    sim.criterion = cfg.criterion;
    validate(sim);
    if (cfg.sim_mean_curve) sim.mean_curve = default_mean_curve(simulation_grid(sim));

    if (!cfg.dump_path.empty()) {
      const MatrixXd x = generate(sim, 0);
      MatrixXd with_header(x.rows() + 1, x.cols());
      // header row is the grid the study builds its penalty on, so a refit sees the same alpha scale
      const VectorXd knots =
          sim.penalty_on_index_grid ? VectorXd::LinSpaced(sim.m, 0.0, double(sim.m - 1)) : simulation_grid(sim).times();
      with_header.row(0) = knots.transpose();
      with_header.bottomRows(x.rows()) = x;
      write_file_atomic(cfg.dump_path, matrix_to_csv(with_header));
    }
    if (cfg.out_dir.empty()) {
      if (!cfg.dump_path.empty()) return kExitOk;
      throw Error(ErrorCode::InvalidConfig, "--out is required");
    }
    const std::filesystem::path out = detail::prepare_out_dir(cfg.out_dir);
    const SimulationReport report = run_study(sim);
    write_file_atomic(out / "report.json", to_json(report).dump(2) + "\n");
    write_file_atomic(out / "table.csv", ratio_table_csv(report));
    write_file_atomic(out / "replicates.csv", replicate_table_csv(report));
    std::cout << study_summary_text(report);
    return kExitOk;
  });
}

/// Evaluates stored loadings as natural cubic splines at the requested points.
inline int cmd_evaluate(const RunConfig& cfg) {
  return detail::guarded([&] {
    if (cfg.result_path.empty()) throw Error(ErrorCode::InvalidConfig, "--result is required");
    if (cfg.out_path.empty()) throw Error(ErrorCode::InvalidConfig, "--out is required");
    const FPCAResult result = load_result(cfg.result_path);
    const TimeGrid grid = build_grid(result.times);

    VectorXd ts;
    if (!cfg.eval_points.empty()) {
      ts = Eigen::Map<const VectorXd>(cfg.eval_points.data(), Index(cfg.eval_points.size()));
    } else if (cfg.eval_uniform.size() == 3) {
      const double count = cfg.eval_uniform[2];
      if (!(count >= 2.0) || count != std::floor(count)) {
        throw Error(ErrorCode::InvalidConfig, "--uniform count must be an integer >= 2");
      }
      ts = VectorXd::LinSpaced(Index(count), cfg.eval_uniform[0], cfg.eval_uniform[1]);
    } else {
      ts = grid.times();
    }

    std::vector<int> which = cfg.eval_components;
    if (which.empty()) {
      for (std::size_t k = 0; k < result.components.size(); ++k) which.push_back(int(k) + 1);
    }
    std::vector<std::string> header{"t"};
    std::vector<VectorXd> cols{ts};
    for (int k : which) {
      if (k < 1 || std::size_t(k) > result.components.size()) {
        throw Error(ErrorCode::InvalidConfig, "component " + std::to_string(k) + " does not exist (result has " +
                                                  std::to_string(result.components.size()) + ")");
      }
      const SplineFunction s = interpolate(grid, result.components[std::size_t(k - 1)].fit.loading);
      header.push_back("gamma_" + std::to_string(k));
      cols.push_back(evaluate(s, ts));
    }
    write_file_atomic(cfg.out_path, columns_to_csv(header, cols));
    return kExitOk;
  });
}

/// Parses argv and dispatches to one of the commands.
inline int run_cli(int argc, char** argv) {
  CLI::App app{"Functional PCA by penalized rank-one approximation"};
  app.require_subcommand(1);
  RunConfig cfg;

  std::string criterion = "cv", method = "mpdc", transform = "none", format = "json", engine = "svd";
  auto choice = [](std::initializer_list<std::string> names) { return CLI::IsMember(std::vector<std::string>(names)); };

  auto add_alpha_options = [&](CLI::App* sub) {
    sub->add_option("--alphas", cfg.alphas, "Explicit ascending alpha grid")->delimiter(',');
    sub->add_option("--alpha-min-exp", cfg.alpha_exp_min, "Smallest exponent i of 1.5^i");
    sub->add_option("--alpha-max-exp", cfg.alpha_exp_max, "Largest exponent i of 1.5^i");
    sub->add_flag("!--no-alpha-zero", cfg.alpha_zero, "Leave alpha = 0 out of the grid");
    sub->add_option("--criterion", criterion, "Column-deletion criterion: cv or gcv")->check(choice({"cv", "gcv"}));
    sub->add_option("--seed", cfg.seed, "Random seed");
  };

  CLI::App* fit = app.add_subcommand("fit", "Fit smoothed principal components to a data matrix");
  fit->add_option("-i,--input", cfg.input_path, "CSV matrix, one curve per row")->required();
  fit->add_option("--grid-file", cfg.grid_path, "One-column CSV of observation times");
  fit->add_flag("--header-grid", cfg.header_grid, "First CSV row holds the observation times");
  fit->add_option("-k,--components", cfg.components, "Number of components");
  fit->add_option("--method", method, "mpdc or spdr")->check(choice({"mpdc", "spdr"}));
  fit->add_option("--transform", transform, "none or sqrt_count")->check(choice({"none", "sqrt_count"}));
  fit->add_flag("!--no-center", cfg.center, "Skip column centering");
  fit->add_option("--engine", engine, "svd or power")->check(choice({"svd", "power"}));
  fit->add_option("--refine", cfg.refine, "Refinement factor of the loading-curve grid");
  fit->add_flag("--dump-penalty", cfg.dump_penalty, "Also write Omega, Gamma and Lambda as CSV");
  fit->add_option("--format", format, "Selection trace format: json or csv")->check(choice({"json", "csv"}));
  fit->add_option("-o,--out", cfg.out_dir, "Output directory")->required();
  add_alpha_options(fit);

  CLI::App* sim = app.add_subcommand("simulate", "Monte-Carlo comparison of MPDC and SPDR");
  sim->add_option("--n", cfg.sim.n, "Curves per data set");
  sim->add_option("--m", cfg.sim.m, "Grid points");
  sim->add_option("--sigma1", cfg.sim.sigma1, "Score SD of the first component");
  sim->add_option("--sigma2", cfg.sim.sigma2, "Score SD of the second component");
  sim->add_option("--sigma", cfg.sim.sigma, "Noise SD");
  sim->add_option("--t-min", cfg.sim.t_min, "Left end of the grid");
  sim->add_option("--t-max", cfg.sim.t_max, "Right end of the grid");
  sim->add_option("--replicates", cfg.sim.replicates, "Number of simulated data sets");
  sim->add_flag("--mean-curve", cfg.sim_mean_curve, "Add 5 sin(2 pi t) to every curve and center before fitting");
  sim->add_flag("!--time-penalty", cfg.sim.penalty_on_index_grid,
                "Build the penalty on the [t-min, t-max] grid instead of unit-spaced knots");
  sim->add_option("--dump", cfg.dump_path, "Write replicate 0 as CSV with a header grid row");
  sim->add_option("-o,--out", cfg.out_dir, "Output directory");
  add_alpha_options(sim);

  CLI::App* ev = app.add_subcommand("evaluate", "Evaluate fitted loading curves");
  ev->add_option("-r,--result", cfg.result_path, "result.json written by fit")->required();
  ev->add_option("-c,--components", cfg.eval_components, "1-based component indices")->delimiter(',');
  auto* pts = ev->add_option("--points", cfg.eval_points, "Evaluation points")->delimiter(',');
  ev->add_option("--uniform", cfg.eval_uniform, "lo,hi,count")->delimiter(',')->expected(3)->excludes(pts);
  ev->add_option("-o,--out", cfg.out_path, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }
  cfg.criterion = criterion == "gcv" ? Criterion::GCV : Criterion::CV;
  cfg.method = method == "spdr" ? Method::SPDR : Method::MPDC;
  cfg.transform = transform == "sqrt_count" ? Transform::SqrtCount : Transform::None;
  cfg.format = format == "csv" ? OutputFormat::Csv : OutputFormat::Json;
  cfg.engine = engine == "power" ? FitEngine::Power : FitEngine::SvdRoute;
  if (*fit) return cmd_fit(cfg);
  if (*sim) return cmd_simulate(cfg);
  return cmd_evaluate(cfg);
}

}  // namespace pfpca
