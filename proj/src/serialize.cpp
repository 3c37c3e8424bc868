#include "lowrank/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>

#include "lowrank/errors.hpp"

namespace lowrank {

namespace {

const std::initializer_list<const char*> kSpecKeys = {
    "model",       "m1",          "m2",       "r",          "sigma",      "n_grid",
    "N_grid",      "penalties",   "spectrum", "lambda_rule", "c",         "repeats",
    "base_seed",   "solver",      "ensemble", "diagnostics", "probe_trials",
    "oracle_match_tol"};
const std::initializer_list<const char*> kRunKeys = {"out_dir", "jobs", "record_runtime"};

class Reader {
 public:
  Reader(const Json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) {
      throw ConfigError(prefix_.empty() ? "(root)" : prefix_, "expected a JSON object");
    }
  }

  void allow(std::initializer_list<std::initializer_list<const char*>> groups) const {
    for (const auto& [k, v] : j_.items()) {
      bool known = false;
      for (const auto& g : groups) {
        known = known || std::any_of(g.begin(), g.end(), [&](const char* a) { return k == a; });
      }
      if (!known) throw ConfigError(path(k), "unknown key '" + path(k) + "'");
    }
  }

  std::string path(std::string_view k) const {
    return prefix_.empty() ? std::string(k) : prefix_ + "." + std::string(k);
  }

  const Json* find(const char* k) const {
    const auto it = j_.find(k);
    return it == j_.end() ? nullptr : &*it;
  }

  const Json& need(const char* k) const {
    const Json* v = find(k);
    if (!v) throw ConfigError(path(k), "missing required key '" + path(k) + "'");
    return *v;
  }

  double real(const char* k) const { return as_real(need(k), path(k)); }
  double real(const char* k, double fallback) const {
    const Json* v = find(k);
    return v ? as_real(*v, path(k)) : fallback;
  }
  long long integer(const char* k) const { return as_integer(need(k), path(k)); }
  long long integer(const char* k, long long fallback) const {
    const Json* v = find(k);
    return v ? as_integer(*v, path(k)) : fallback;
  }
  bool boolean(const char* k, bool fallback) const {
    const Json* v = find(k);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ConfigError(path(k), path(k) + " must be a boolean");
    return v->get<bool>();
  }
  std::string string(const char* k) const { return as_string(need(k), path(k)); }
  std::optional<std::string> string_opt(const char* k) const {
    const Json* v = find(k);
    if (!v) return std::nullopt;
    return as_string(*v, path(k));
  }

  static double as_real(const Json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError(key, key + " must be a number");
    return v.get<double>();
  }
  static long long as_integer(const Json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ConfigError(key, key + " must be an integer");
    if (v.is_number_unsigned()) {
      const auto u = v.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<long long>::max())) {
        throw ConfigError(key, key + " is out of range");
      }
      return static_cast<long long>(u);
    }
    return v.get<long long>();
  }
  static std::string as_string(const Json& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError(key, key + " must be a string");
    return v.get<std::string>();
  }

 private:
  const Json& j_;
  std::string prefix_;
};

PenaltyTemplate template_from_json(const Json& j, const std::string& prefix) {
  Reader rd(j, prefix);
  rd.allow({{"family", "b"}});
  PenaltyTemplate t;
  try {
    t.family = parse_penalty_family(rd.string("family"));
  } catch (const DomainError& e) {
    throw ConfigError(rd.path("family"), e.what());
  }
  if (const Json* b = rd.find("b")) {
    if (b->is_string()) {
      if (b->get<std::string>() != "auto") {
        throw ConfigError(rd.path("b"), rd.path("b") + " must be a number or \"auto\"");
      }
    } else if (t.family != PenaltyFamily::Nuclear) {
      t.b = Reader::as_real(*b, rd.path("b"));
    }
  }
  return t;
}

SpectrumRule spectrum_from_json(const Json& j) {
  Reader rd(j, "spectrum");
  const std::string rule = rd.string("rule");
  if (rule == "all_above_nu") {
    rd.allow({{"rule", "margin"}});
    return SpectrumRule::all_above_nu(rd.real("margin", 0.2));
  }
  if (rule == "mixed") {
    rd.allow({{"rule", "r1", "r2", "low_fraction", "margin"}});
    return SpectrumRule::mixed(rd.integer("r1"), rd.integer("r2"), rd.real("low_fraction", 0.5),
                               rd.real("margin", 0.2));
  }
  if (rule == "uniform") {
    rd.allow({{"rule", "low", "high"}});
    return SpectrumRule::uniform(rd.real("low"), rd.real("high"));
  }
  throw ConfigError("spectrum.rule", "unknown spectrum rule '" + rule + "'");
}

SensingEnsemble ensemble_from_json(const Json& j, Index m1, Index m2) {
  Reader rd(j, "ensemble");
  const std::string kind = rd.string("kind");
  if (kind == "identity") {
    rd.allow({{"kind"}});
    return SensingEnsemble::identity();
  }
  if (kind == "ar1") {
    rd.allow({{"kind", "rho"}});
    const double rho = rd.real("rho");
    if (!(std::abs(rho) < 1.0)) throw ConfigError("ensemble.rho", "rho must satisfy |rho| < 1");
    if (m1 < 1 || m2 < 1) throw ConfigError("ensemble", "ensemble needs valid m1, m2");
    return ar1_ensemble(m1 * m2, rho);
  }
  if (kind == "cholesky") {
    rd.allow({{"kind", "factor"}});
    const Json& f = rd.need("factor");
    if (!f.is_array() || f.empty()) {
      throw ConfigError("ensemble.factor", "factor must be a non-empty array of rows");
    }
    const auto p = static_cast<Index>(f.size());
    MatrixXd L(p, p);
    for (Index i = 0; i < p; ++i) {
      const Json& row = f[static_cast<std::size_t>(i)];
      if (!row.is_array() || static_cast<Index>(row.size()) != p) {
        throw ConfigError("ensemble.factor", "factor must be square");
      }
      for (Index k = 0; k < p; ++k) {
        L(i, k) = Reader::as_real(row[static_cast<std::size_t>(k)], "ensemble.factor");
      }
    }
    try {
      return SensingEnsemble::cholesky(std::move(L));
    } catch (const std::exception& e) {
      throw ConfigError("ensemble.factor", e.what());
    }
  }
  throw ConfigError("ensemble.kind", "unknown ensemble kind '" + kind + "'");
}

TrialSpec parse_spec(const Json& j, bool allow_run_keys) {
  Reader rd(j, "");
  if (allow_run_keys) {
    rd.allow({kSpecKeys, kRunKeys});
  } else {
    rd.allow({kSpecKeys});
  }
  TrialSpec spec;
  const std::string model = rd.string("model");
  if (model == "completion") {
    spec.model = ObservationModel::Completion;
  } else if (model == "sensing") {
    spec.model = ObservationModel::Sensing;
  } else {
    throw ConfigError("model", "model must be \"completion\" or \"sensing\"");
  }
  spec.m1 = rd.integer("m1");
  spec.m2 = rd.integer("m2");
  spec.r = rd.integer("r");
  spec.sigma = rd.real("sigma");
  if (const Json* g = rd.find("n_grid")) {
    if (!g->is_array()) throw ConfigError("n_grid", "n_grid must be an array");
    for (const auto& v : *g) spec.n_grid.push_back(Reader::as_integer(v, "n_grid"));
  }
  if (const Json* g = rd.find("N_grid")) {
    if (!g->is_array()) throw ConfigError("N_grid", "N_grid must be an array");
    for (const auto& v : *g) spec.rescaled_grid.push_back(Reader::as_real(v, "N_grid"));
  }
  const Json& pens = rd.need("penalties");
  if (!pens.is_array()) throw ConfigError("penalties", "penalties must be an array");
  for (std::size_t i = 0; i < pens.size(); ++i) {
    spec.penalties.push_back(template_from_json(pens[i], "penalties[" + std::to_string(i) + "]"));
  }
  if (const Json* s = rd.find("spectrum")) spec.spectrum = spectrum_from_json(*s);
  if (auto rule = rd.string_opt("lambda_rule")) {
    if (*rule == "theory") {
      spec.lambda_rule = LambdaRule::Theory;
    } else if (*rule == "oracle") {
      spec.lambda_rule = LambdaRule::Oracle;
    } else {
      throw ConfigError("lambda_rule", "lambda_rule must be \"theory\" or \"oracle\"");
    }
  }
  spec.c = rd.real("c", spec.c);
  spec.repeats = static_cast<int>(rd.integer("repeats", spec.repeats));
  if (const Json* s = rd.find("base_seed")) {
    if (!s->is_number_unsigned()) {
      throw ConfigError("base_seed", "base_seed must be a nonnegative integer");
    }
    spec.base_seed = s->get<std::uint64_t>();
  }
  if (const Json* s = rd.find("solver")) spec.solver = solver_config_from_json(*s);
  if (const Json* e = rd.find("ensemble")) spec.ensemble = ensemble_from_json(*e, spec.m1, spec.m2);
  spec.diagnostics = rd.boolean("diagnostics", spec.diagnostics);
  spec.probe_trials = static_cast<int>(rd.integer("probe_trials", spec.probe_trials));
  spec.oracle_match_tol = rd.real("oracle_match_tol", spec.oracle_match_tol);
  spec.validate();
  return spec;
}

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }
Json opt(const std::optional<bool>& v) { return v ? Json(*v) : Json(nullptr); }

Json spectrum_json(const VectorXd& s) { return Json(std::vector<double>(s.data(), s.data() + s.size())); }

Json check_json(const ConditionCheck& c) {
  return {{"passed", c.passed},
          {"worst", c.worst},
          {"witness_t", c.witness_t},
          {"witness_t2", c.witness_t2},
          {"detail", c.detail}};
}

}  // namespace

Json to_json(const PenaltySpec& spec) {
  return {{"family", std::string(to_string(spec.family()))},
          {"lambda", spec.lambda()},
          {"b", spec.b()}};
}

PenaltySpec penalty_from_json(const Json& j) {
  Reader rd(j, "penalty");
  rd.allow({{"family", "lambda", "b"}});
  PenaltyFamily family;
  try {
    family = parse_penalty_family(rd.string("family"));
  } catch (const DomainError& e) {
    throw ConfigError("penalty.family", e.what());
  }
  try {
    return PenaltySpec(family, rd.real("lambda"), rd.real("b", 0.0));
  } catch (const DomainError& e) {
    throw ConfigError("penalty", e.what());
  }
}

Json to_json(const FitResult& fit) {
  return {{"rank_hat", fit.rank_hat},
          {"iterations", fit.iterations},
          {"converged", fit.converged},
          {"fixed_point_residual", fit.fixed_point_residual},
          {"step_size", fit.step_size},
          {"spectrum", spectrum_json(fit.spectrum)}};
}

Json to_json(const ErrorBoundReport& r) {
  return {{"tau", r.tau},         {"lambda", r.lambda},   {"kappa", r.kappa},
          {"zeta_minus", r.zeta_minus}, {"r1", r.r1},   {"r2", r.r2},
          {"part_s1", r.part_s1}, {"part_s2", r.part_s2}, {"total", r.total}};
}

Json to_json(const CurvatureEstimate& e) {
  return {{"kappa_hat", e.kappa_hat},
          {"rho_hat", e.rho_hat},
          {"samples", e.samples},
          {"min_witness", e.min_witness}};
}

Json to_json(const RegularityReport& r) {
  return {{"flatness", check_json(r.flatness)},
          {"curvature", check_json(r.curvature)},
          {"origin", check_json(r.origin)},
          {"bounded", check_json(r.bounded)},
          {"zeta_witness", r.zeta_witness},
          {"all_passed", r.all_passed()}};
}

Json to_json(const TrialOutcome& t) {
  Json j = {{"model", std::string(to_string(t.model))},
            {"m1", t.m1},
            {"m2", t.m2},
            {"r", t.r},
            {"n", t.n},
            {"N", t.rescaled_n},
            {"penalty_index", t.penalty_index},
            {"penalty", t.penalty},
            {"lambda", t.lambda},
            {"b", t.b},
            {"repeat", t.repeat},
            {"seed", t.seed},
            {"mse", t.mse},
            {"frob_err", t.frob_err},
            {"rel_err", t.rel_err},
            {"rank_hat", t.rank_hat},
            {"rank_correct", t.rank_correct},
            {"converged", t.converged},
            {"iterations", t.iterations},
            {"fixed_point_residual", t.fixed_point_residual},
            {"oracle_match", opt(t.oracle_match)},
            {"oracle_rel_diff", opt(t.oracle_rel_diff)},
            {"bound_holds", opt(t.bound_holds)},
            {"oracle_gap", opt(t.oracle_gap)}};
  j["curvature"] = t.curvature ? to_json(*t.curvature) : Json(nullptr);
  j["bound"] = t.bound ? to_json(*t.bound) : Json(nullptr);
  j["cone"] = t.cone ? Json{{"ratio", t.cone->ratio}, {"in_cone", t.cone->in_cone}} : Json(nullptr);
  if (!t.failure.empty()) j["failure"] = t.failure;
  return j;
}

Json to_json(const SolverConfig& c) {
  Json step = c.step.kind == StepKind::Fixed ? Json{{"fixed", c.step.eta}} : Json("inverse_power");
  return {{"max_iter", c.max_iter},
          {"tol", c.tol},
          {"step", step},
          {"alpha_star", opt(c.alpha_star)},
          {"warm_start", c.warm_start == WarmStart::Zero ? "zero" : "nuclear"},
          {"rank_tol_rel", c.rank_tol_rel}};
}

Json to_json(const TrialSpec& spec) {
  Json pens = Json::array();
  for (const auto& p : spec.penalties) {
    Json pj = {{"family", std::string(to_string(p.family))}};
    if (p.family != PenaltyFamily::Nuclear) pj["b"] = p.b ? Json(*p.b) : Json("auto");
    pens.push_back(pj);
  }
  Json spectrum;
  switch (spec.spectrum.kind) {
    case SpectrumRuleKind::AllAboveNu:
      spectrum = {{"rule", "all_above_nu"}, {"margin", spec.spectrum.margin}};
      break;
    case SpectrumRuleKind::Mixed:
      spectrum = {{"rule", "mixed"},
                  {"r1", spec.spectrum.r1},
                  {"r2", spec.spectrum.r2},
                  {"low_fraction", spec.spectrum.low_fraction},
                  {"margin", spec.spectrum.margin}};
      break;
    case SpectrumRuleKind::Uniform:
      spectrum = {{"rule", "uniform"}, {"low", spec.spectrum.low}, {"high", spec.spectrum.high}};
      break;
  }
  Json ensemble = spec.ensemble.kind() == EnsembleKind::Identity
                      ? Json{{"kind", "identity"}}
                      : Json{{"kind", "cholesky"}, {"dimension", spec.ensemble.factor().rows()}};
  Json j = {{"model", std::string(to_string(spec.model))},
            {"m1", spec.m1},
            {"m2", spec.m2},
            {"r", spec.r},
            {"sigma", spec.sigma},
            {"penalties", pens},
            {"spectrum", spectrum},
            {"lambda_rule", spec.lambda_rule == LambdaRule::Theory ? "theory" : "oracle"},
            {"c", spec.c},
            {"repeats", spec.repeats},
            {"base_seed", spec.base_seed},
            {"solver", to_json(spec.solver)},
            {"ensemble", ensemble},
            {"diagnostics", spec.diagnostics},
            {"probe_trials", spec.probe_trials},
            {"oracle_match_tol", spec.oracle_match_tol}};
  if (!spec.n_grid.empty()) j["n_grid"] = spec.n_grid;
  if (!spec.rescaled_grid.empty()) j["N_grid"] = spec.rescaled_grid;
  return j;
}

SolverConfig solver_config_from_json(const Json& j, const std::string& prefix) {
  Reader rd(j, prefix);
  rd.allow({{"max_iter", "tol", "step", "alpha_star", "warm_start", "rank_tol_rel"}});
  SolverConfig c;
  c.max_iter = static_cast<int>(rd.integer("max_iter", c.max_iter));
  c.tol = rd.real("tol", c.tol);
  if (const Json* s = rd.find("step")) {
    if (s->is_string() && s->get<std::string>() == "inverse_power") {
      c.step = StepPolicy::inverse_power();
    } else if (s->is_object() && s->size() == 1 && s->contains("fixed")) {
      c.step = StepPolicy::fixed(Reader::as_real(s->at("fixed"), rd.path("step.fixed")));
    } else {
      throw ConfigError(rd.path("step"), "step must be \"inverse_power\" or {\"fixed\": eta}");
    }
  }
  if (const Json* a = rd.find("alpha_star"); a && !a->is_null()) {
    c.alpha_star = Reader::as_real(*a, rd.path("alpha_star"));
  }
  if (auto w = rd.string_opt("warm_start")) {
    if (*w == "zero") {
      c.warm_start = WarmStart::Zero;
    } else if (*w == "nuclear") {
      c.warm_start = WarmStart::NuclearSolution;
    } else {
      throw ConfigError(rd.path("warm_start"), "warm_start must be \"zero\" or \"nuclear\"");
    }
  }
  c.rank_tol_rel = rd.real("rank_tol_rel", c.rank_tol_rel);
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ConfigError(prefix, e.what());
  }
  return c;
}

TrialSpec trial_spec_from_json(const Json& j) { return parse_spec(j, false); }

RunConfig run_config_from_json(const Json& j) {
  RunConfig cfg;
  cfg.spec = parse_spec(j, true);
  Reader rd(j, "");
  cfg.out_dir = rd.string_opt("out_dir");
  if (rd.find("jobs")) {
    cfg.jobs = static_cast<int>(rd.integer("jobs"));
    if (*cfg.jobs < 1) throw ConfigError("jobs", "jobs must be >= 1");
  }
  cfg.record_runtime = rd.boolean("record_runtime", false);
  return cfg;
}

SensingEnsemble ar1_ensemble(Index dimension, double rho) {
  if (dimension < 1) throw DimensionError("ar1_ensemble: dimension must be >= 1");
  if (!(std::abs(rho) < 1.0)) throw DomainError("ar1_ensemble: |rho| must be < 1");
  MatrixXd sigma(dimension, dimension);
  for (Index i = 0; i < dimension; ++i)
    for (Index k = 0; k < dimension; ++k)
      sigma(i, k) = std::pow(rho, static_cast<double>(std::abs(i - k)));
  MatrixXd L = sigma.llt().matrixL();
  return SensingEnsemble::cholesky(std::move(L));
}

}  // namespace lowrank
