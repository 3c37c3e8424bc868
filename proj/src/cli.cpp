#include "lowrank/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "lowrank/errors.hpp"
#include "lowrank/io.hpp"
#include "lowrank/serialize.hpp"
#include "lowrank/theory.hpp"
#include "lowrank/version.hpp"

namespace lowrank {

namespace {

namespace fs = std::filesystem;

constexpr double kSigmaFloor = 0.01;

struct PenaltyFlags {
  std::string family = "scad";
  double lambda = 0.0;
  std::string b = "auto";
  double c = 2.0;
  double sigma = 0.0;
  CLI::Option* lambda_opt = nullptr;
  CLI::Option* b_opt = nullptr;
  CLI::Option* c_opt = nullptr;
  CLI::Option* sigma_opt = nullptr;
  CLI::Option* family_opt = nullptr;

  void attach(CLI::App* app) {
    family_opt = app->add_option("--penalty", family, "nuclear, scad or mcp")
                     ->check(CLI::IsMember({"nuclear", "scad", "mcp"}));
    lambda_opt = app->add_option("--lambda", lambda, "regularization level");
    b_opt = app->add_option("--b", b, "shape parameter, or auto");
    c_opt = app->add_option("--c", c, "constant of the theory lambda rule");
    sigma_opt = app->add_option("--sigma", sigma, "noise level for the lambda rule");
  }
};

struct SolverFlags {
  double alpha_star = 0.0;
  int max_iter = 0;
  double tol = 0.0;
  double rank_tol = 0.0;
  std::string warm_start;
  CLI::Option* alpha_opt = nullptr;
  CLI::Option* max_iter_opt = nullptr;
  CLI::Option* tol_opt = nullptr;
  CLI::Option* rank_tol_opt = nullptr;
  CLI::Option* warm_opt = nullptr;

  void attach(CLI::App* app) {
    alpha_opt = app->add_option("--alpha-star", alpha_star, "entrywise box radius");
    max_iter_opt = app->add_option("--max-iter", max_iter, "iteration cap");
    tol_opt = app->add_option("--tol", tol, "relative change tolerance");
    rank_tol_opt = app->add_option("--rank-tol", rank_tol, "relative rank threshold");
    warm_opt = app->add_option("--warm-start", warm_start, "zero or nuclear")
                   ->check(CLI::IsMember({"zero", "nuclear"}));
  }

  SolverConfig apply(SolverConfig c) const {
    if (*alpha_opt) c.alpha_star = alpha_star;
    if (*max_iter_opt) c.max_iter = max_iter;
    if (*tol_opt) c.tol = tol;
    if (*rank_tol_opt) c.rank_tol_rel = rank_tol;
    if (*warm_opt) c.warm_start = warm_start == "nuclear" ? WarmStart::NuclearSolution : WarmStart::Zero;
    c.validate();
    return c;
  }
};

struct InputFlags {
  std::string path;
  std::string format;
  Index rows = 0;
  Index cols = 0;
  CLI::Option* rows_opt = nullptr;
  CLI::Option* cols_opt = nullptr;

  void attach(CLI::App* app, bool allow_dense) {
    app->add_option("input", path, "input CSV")->required();
    if (allow_dense) {
      app->add_option("--format", format, "dense or triplets (default: detect)")
          ->check(CLI::IsMember({"dense", "triplets"}));
    }
    rows_opt = app->add_option("--rows", rows, "number of rows")->check(CLI::PositiveNumber);
    cols_opt = app->add_option("--cols", cols, "number of columns")->check(CLI::PositiveNumber);
  }
};

struct LoadedInput {
  std::vector<Triplet> triplets;
  Index m1 = 0;
  Index m2 = 0;
  std::string format;
};

void guard_size(Index m1, Index m2) {
  if (static_cast<double>(m1) * static_cast<double>(m2) > kMaxCells) {
    throw ResourceError("matrix of size " + std::to_string(m1) + "x" + std::to_string(m2) +
                        " exceeds the 1e8-entry limit");
  }
}

LoadedInput load_input(const InputFlags& flags, bool allow_dense) {
  const std::string text = read_file(flags.path);
  InputFormat format = InputFormat::Triplets;
  if (allow_dense) {
    if (flags.format == "dense") {
      format = InputFormat::Dense;
    } else if (flags.format != "triplets") {
      format = detect_format(text);
    }
  }
  LoadedInput in;
  if (format == InputFormat::Dense) {
    in.format = "dense";
    const MatrixXd m = parse_dense_csv(text);
    if ((*flags.rows_opt && flags.rows != m.rows()) || (*flags.cols_opt && flags.cols != m.cols())) {
      throw DimensionError("dense input is " + std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()) + ", not the size given by --rows/--cols");
    }
    guard_size(m.rows(), m.cols());
    in.m1 = m.rows();
    in.m2 = m.cols();
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i)
        if (!std::isnan(m(i, j))) in.triplets.push_back({i, j, m(i, j)});
    if (in.triplets.empty()) throw ParseError(0, "dense input has no observed entries");
    return in;
  }
  in.format = "triplets";
  TripletFile file = parse_triplet_file(text);
  const auto [e1, e2] = triplet_extent(file.triplets);
  in.m1 = *flags.rows_opt ? flags.rows : e1;
  in.m2 = *flags.cols_opt ? flags.cols : e2;
  guard_size(in.m1, in.m2);
  for (std::size_t i = 0; i < file.triplets.size(); ++i) {
    const Triplet& t = file.triplets[i];
    if (t.row >= in.m1 || t.col >= in.m2) {
      throw ParseError(file.lines[i], "line " + std::to_string(file.lines[i]) + ": index (" +
                                          std::to_string(t.row) + "," + std::to_string(t.col) +
                                          ") outside " + std::to_string(in.m1) + "x" +
                                          std::to_string(in.m2));
    }
  }
  in.triplets = std::move(file.triplets);
  return in;
}

PenaltySpec resolve_penalty(const PenaltyFlags& flags, Index m1, Index m2, Index n) {
  const PenaltyFamily family = parse_penalty_family(flags.family);
  double lambda = flags.lambda;
  if (!*flags.lambda_opt) {
    if (!*flags.sigma_opt) throw DomainError("either --lambda or --sigma is required");
    lambda = lambda_completion(std::max(flags.sigma, kSigmaFloor), m1, m2, n, flags.c);
  }
  double b = 0.0;
  if (family != PenaltyFamily::Nuclear) {
    if (flags.b == "auto") {
      const double kappa = 1.0 / (static_cast<double>(m1) * static_cast<double>(m2));
      b = family == PenaltyFamily::Scad ? 1.0 + 2.0 / kappa : 2.0 / kappa;
    } else {
      std::size_t used = 0;
      try {
        b = std::stod(flags.b, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != flags.b.size()) throw DomainError("--b must be a number or auto");
    }
  }
  return PenaltySpec(family, lambda, b);
}

std::string json_path_for(const std::string& out) {
  fs::path p(out);
  if (p.extension() == ".json") return out + ".json";
  return p.replace_extension(".json").string();
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---- simulate --------------------------------------------------------------

struct SimulateFlags {
  std::string config;
  std::string out_dir;
  int jobs = 0;
  std::uint64_t seed = 0;
  bool record_runtime = false;
  CLI::Option* out_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  PenaltyFlags penalty;
  SolverFlags solver;
};

void override_config(Json& doc, const SimulateFlags& f) {
  if (!doc.is_object()) throw ConfigError("(root)", "expected a JSON object");
  if (*f.seed_opt) doc["base_seed"] = f.seed;
  if (*f.penalty.c_opt) doc["c"] = f.penalty.c;
  if (*f.penalty.sigma_opt) doc["sigma"] = f.penalty.sigma;
  auto b_value = [&]() -> Json {
    if (f.penalty.b == "auto") return "auto";
    std::size_t used = 0;
    double b = 0.0;
    try {
      b = std::stod(f.penalty.b, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != f.penalty.b.size()) throw ConfigError("b", "--b must be a number or auto");
    return b;
  };
  if (*f.penalty.family_opt) {
    Json p = {{"family", f.penalty.family}};
    if (f.penalty.family != "nuclear" && *f.penalty.b_opt) p["b"] = b_value();
    doc["penalties"] = Json::array({p});
  } else if (*f.penalty.b_opt && doc.contains("penalties") && doc["penalties"].is_array()) {
    for (auto& p : doc["penalties"]) {
      if (p.is_object() && p.value("family", "") != "nuclear") p["b"] = b_value();
    }
  }
  if (*f.penalty.lambda_opt) {
    throw ConfigError("lambda", "lambda is resolved per sample size; set c instead");
  }
  Json& solver = doc["solver"];
  if (solver.is_null()) solver = Json::object();
  if (*f.solver.alpha_opt) solver["alpha_star"] = f.solver.alpha_star;
  if (*f.solver.max_iter_opt) solver["max_iter"] = f.solver.max_iter;
  if (*f.solver.tol_opt) solver["tol"] = f.solver.tol;
  if (*f.solver.rank_tol_opt) solver["rank_tol_rel"] = f.solver.rank_tol;
  if (*f.solver.warm_opt) solver["warm_start"] = f.solver.warm_start;
  if (solver.empty()) doc.erase("solver");
}

void check_config_size(const Json& doc) {
  const auto m1 = doc.find("m1");
  const auto m2 = doc.find("m2");
  if (m1 != doc.end() && m2 != doc.end() && m1->is_number() && m2->is_number()) {
    if (m1->get<double>() * m2->get<double>() > kMaxCells) {
      throw ResourceError("m1*m2 exceeds the 1e8-entry limit");
    }
  }
}

int cmd_simulate(const SimulateFlags& f, std::ostream& out) {
  Json doc;
  try {
    doc = Json::parse(read_file(f.config));
  } catch (const Json::parse_error& e) {
    throw ConfigError("(root)", std::string("config is not valid JSON: ") + e.what());
  }
  override_config(doc, f);
  check_config_size(doc);
  RunConfig cfg = run_config_from_json(doc);
  if (*f.out_opt) cfg.out_dir = f.out_dir;
  if (!cfg.out_dir) throw ConfigError("out_dir", "no output directory (use --out or out_dir)");
  const int jobs = *f.jobs_opt ? f.jobs
                   : cfg.jobs  ? *cfg.jobs
                               : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const bool record_runtime = f.record_runtime || cfg.record_runtime;

  std::error_code ec;
  fs::create_directories(*cfg.out_dir, ec);
  if (ec) throw IoError("cannot create '" + *cfg.out_dir + "': " + ec.message());

  const GridResult grid = run_grid(cfg.spec, jobs);
  const fs::path dir(*cfg.out_dir);
  write_file((dir / "results.csv").string(), results_csv(grid.trials, record_runtime));
  write_file((dir / "summary.csv").string(), summary_csv(grid.cells, cfg.spec.model));

  Json trials = Json::array();
  for (const auto& t : grid.trials) {
    Json j = to_json(t);
    if (record_runtime) j["runtime_seconds"] = t.runtime_seconds;
    trials.push_back(std::move(j));
  }
  write_file((dir / "trials.json").string(), dump(trials));

  Json meta = {{"library", "lowrank"},
               {"version", std::string(kVersion)},
               {"rng", std::string(kRngIdentifier)},
               {"config", doc},
               {"resolved", to_json(cfg.spec)},
               {"n_resolved", cfg.spec.resolved_n()},
               {"trials", grid.trials.size()},
               {"timestamp", utc_timestamp()}};
  write_file((dir / "meta.json").string(), dump(meta));

  int converged = 0;
  for (const auto& t : grid.trials) converged += t.converged ? 1 : 0;
  out << "simulate: " << grid.trials.size() << " trials (" << converged << " converged) in "
      << grid.cells.size() << " cells -> " << dir.string() << "\n";
  return kExitOk;
}

// ---- fit --------------------------------------------------------------------

struct FitFlags {
  InputFlags input;
  PenaltyFlags penalty;
  SolverFlags solver;
  std::string out;
  std::string json_out;
  CLI::Option* json_opt = nullptr;
};

int cmd_fit(const FitFlags& f, std::ostream& out) {
  const LoadedInput in = load_input(f.input, true);
  const SolverConfig config = f.solver.apply(SolverConfig{});
  const double sigma = *f.penalty.sigma_opt ? f.penalty.sigma : 0.0;
  const ObservationSet obs = observations_from_triplets(in.triplets, in.m1, in.m2, sigma);
  const PenaltySpec penalty = resolve_penalty(f.penalty, in.m1, in.m2, obs.n());
  const FitResult result = fit(obs, penalty, config);

  write_file(f.out, dense_csv(result.theta_hat));
  Json j = to_json(result);
  j["penalty"] = to_json(penalty);
  j["input"] = {{"format", in.format}, {"m1", in.m1}, {"m2", in.m2}, {"n", obs.n()}};
  write_file(*f.json_opt ? f.json_out : json_path_for(f.out), dump(j));

  out << "fit: " << in.m1 << "x" << in.m2 << " n=" << obs.n() << " rank_hat=" << result.rank_hat
      << " iterations=" << result.iterations << " converged=" << (result.converged ? "yes" : "no")
      << "\n";
  return kExitOk;
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateFlags {
  InputFlags input;
  PenaltyFlags penalty;
  SolverFlags solver;
  double fraction = 0.5;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_evaluate(const EvaluateFlags& f, std::ostream& out) {
  const LoadedInput in = load_input(f.input, false);
  const SolverConfig config = f.solver.apply(SolverConfig{});
  Rng rng(f.seed);
  const auto [train, test] = holdout_split(in.triplets, f.fraction, rng);
  const double sigma = *f.penalty.sigma_opt ? f.penalty.sigma : 0.0;
  const ObservationSet obs = observations_from_triplets(train, in.m1, in.m2, sigma);
  const PenaltySpec penalty = resolve_penalty(f.penalty, in.m1, in.m2, obs.n());
  const FitResult result = fit(obs, penalty, config);
  const double score = rmse(result.theta_hat, test);

  const Json j = {{"rmse", score},
                  {"rank_hat", result.rank_hat},
                  {"lambda", penalty.lambda()},
                  {"seed", f.seed},
                  {"penalty", to_json(penalty)},
                  {"n_train", train.size()},
                  {"n_test", test.size()},
                  {"converged", result.converged},
                  {"iterations", result.iterations}};
  write_file(f.out, dump(j));
  out << "evaluate: rmse=" << format_double(score) << " rank_hat=" << result.rank_hat
      << " train=" << train.size() << " test=" << test.size() << "\n";
  return kExitOk;
}

// ---- regularity -------------------------------------------------------------

struct RegularityFlags {
  PenaltyFlags penalty;
  int points = 4000;
  double grid_max = 0.0;
  CLI::Option* grid_max_opt = nullptr;
  std::string out;
};

int cmd_regularity(const RegularityFlags& f, std::ostream& out) {
  if (!*f.penalty.lambda_opt) throw DomainError("--lambda is required");
  const PenaltyFamily family = parse_penalty_family(f.penalty.family);
  double b = 0.0;
  if (family != PenaltyFamily::Nuclear) {
    if (!*f.penalty.b_opt || f.penalty.b == "auto") {
      throw DomainError("--b must be given as a number for regularity checks");
    }
    b = std::stod(f.penalty.b);
  }
  const PenaltySpec spec(family, f.penalty.lambda, b);
  const double t_max = *f.grid_max_opt            ? f.grid_max
                       : std::isfinite(spec.nu()) ? 2.0 * spec.nu()
                                                  : 10.0 * spec.lambda();
  if (!(t_max > 0.0) || f.points < 2) throw DomainError("grid must be positive with >= 2 points");
  std::vector<double> grid(static_cast<std::size_t>(f.points));
  for (int i = 0; i < f.points; ++i) grid[static_cast<std::size_t>(i)] = t_max * (i + 1) / f.points;
  const RegularityReport report = check_regularity(spec, grid);
  Json j = to_json(report);
  j["penalty"] = to_json(spec);
  write_file(f.out, dump(j));
  out << "regularity: " << (report.all_passed() ? "all conditions hold" : "violated")
      << " zeta_witness=" << format_double(report.zeta_witness) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-rank matrix estimation with spectral SCAD/MCP penalties", "lowrank"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  SimulateFlags sim;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "run a Monte Carlo grid from a JSON config");
  sim_cmd->add_option("--config", sim.config, "JSON run configuration")->required();
  sim.out_opt = sim_cmd->add_option("--out", sim.out_dir, "output directory");
  sim.jobs_opt = sim_cmd->add_option("--jobs", sim.jobs, "worker threads")->check(CLI::PositiveNumber);
  sim.seed_opt = sim_cmd->add_option("--seed", sim.seed, "base seed");
  sim_cmd->add_flag("--record-runtime", sim.record_runtime, "fill runtime_seconds in results.csv");
  sim.penalty.attach(sim_cmd);
  sim.solver.attach(sim_cmd);

  FitFlags fitf;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit one model to a dense or triplet CSV");
  fitf.input.attach(fit_cmd, true);
  fitf.penalty.attach(fit_cmd);
  fitf.solver.attach(fit_cmd);
  fit_cmd->add_option("--out", fitf.out, "estimated matrix (dense CSV)")->required();
  fitf.json_opt = fit_cmd->add_option("--json", fitf.json_out, "fit summary JSON");

  EvaluateFlags eval;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "holdout RMSE on triplet data");
  eval.input.attach(eval_cmd, false);
  eval.penalty.attach(eval_cmd);
  eval.solver.attach(eval_cmd);
  eval_cmd->add_option("--fraction", eval.fraction, "training fraction in (0, 1)");
  eval_cmd->add_option("--seed", eval.seed, "split seed");
  eval_cmd->add_option("--out", eval.out, "result JSON")->required();

  RegularityFlags reg;
  CLI::App* reg_cmd = app.add_subcommand("regularity", "check penalty regularity on a grid");
  reg.penalty.attach(reg_cmd);
  reg_cmd->add_option("--points", reg.points, "grid size");
  reg.grid_max_opt = reg_cmd->add_option("--grid-max", reg.grid_max, "largest grid point");
  reg_cmd->add_option("--out", reg.out, "report JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*sim_cmd) return cmd_simulate(sim, out);
    if (*fit_cmd) return cmd_fit(fitf, out);
    if (*eval_cmd) return cmd_evaluate(eval, out);
    if (*reg_cmd) return cmd_regularity(reg, out);
    return kExitInput;
  } catch (const ResourceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitResource;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ConfigError& e) {
    err << "config error [" << e.key() << "]: " << e.what() << "\n";
    return kExitInput;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace lowrank
