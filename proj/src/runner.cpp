#include "runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "csv.hpp"

namespace npmix::io {

namespace {

using nlohmann::json;

std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string resolve_out_dir(const RunConfig& cfg) {
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  if (const char* env = std::getenv("NPMIX_OUT")) return env;
  return ".";
}

struct TraceCsvRow {
  long iteration;
  int phase;  // 0 joint, 1 fixed-gamma, 2 EM
  double k, grad_inf, gamma;
  long active;
  double loglik, psi;
};

void write_trace_csv(const std::string& path, const std::vector<TraceCsvRow>& rows,
                     double final_loglik) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out.precision(17);
  out << "iteration,phase,k_value,grad_inf,gamma,active,loglik,psi,lambda\n";
  for (const auto& r : rows) {
    out << r.iteration << "," << r.phase << "," << r.k << "," << r.grad_inf << ","
        << r.gamma << "," << r.active << "," << r.loglik << "," << r.psi << ","
        << std::abs(final_loglik - r.loglik) << "\n";
  }
}

void write_cdf_csv(const std::string& path, const model::CdfSteps& steps) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out.precision(17);
  out << "theta,weight,cum_weight\n";
  for (Index k = 0; k < steps.theta.size(); ++k) {
    out << steps.theta(k) << "," << steps.weight(k) << "," << steps.cumulative(k) << "\n";
  }
}

void write_tree_csv(const std::string& path, const model::MixtureTree& tree, Index p) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out.precision(17);
  out << "level,sieve,loglik,m_hat,psi,weight";
  for (Index k = 0; k < p; ++k) out << ",theta_" << k;
  out << "\n";
  for (size_t lev = 0; lev < tree.levels.size(); ++lev) {
    const auto& L = tree.levels[lev];
    for (Index j = 0; j < L.weights.size(); ++j) {
      out << lev << "," << L.sieve << "," << L.loglik << "," << L.m_hat << "," << L.psi
          << "," << L.weights(j);
      for (Index k = 0; k < p; ++k) out << "," << L.supports(j, k);
      out << "\n";
    }
  }
}

json pd_fit_json(const pd::PdResult& fit, const SupportSet& supports,
                 const pd::SolverOptions& opt) {
  recover::MixingMeasure act = model::active_measure(supports, fit.pi, opt.active_threshold);
  json j;
  j["loglik"] = fit.loglik;
  j["psi"] = fit.psi;
  j["gamma"] = fit.state.gamma;
  j["iterations"] = {{"joint", fit.iter_joint},
                     {"fixed", fit.iter_fixed},
                     {"total", fit.iter_joint + fit.iter_fixed}};
  j["converged"] = fit.converged;
  j["m_hat"] = act.weights.size();
  j["active_threshold"] = opt.active_threshold;
  j["gradient_bound"] = fit.gradient_bound;
  j["residual_check"] = fit.residual_check;
  j["weights"] = to_std(fit.pi);
  j["active_supports"] = matrix_to_json(act.supports);
  j["active_weights"] = to_std(act.weights);
  return j;
}

std::vector<TraceCsvRow> pd_trace_rows(const pd::PdResult& fit) {
  std::vector<TraceCsvRow> rows;
  rows.reserve(fit.trace.rows.size());
  for (const auto& r : fit.trace.rows) {
    rows.push_back(TraceCsvRow{r.iteration, r.phase, r.k, r.grad_inf, r.gamma, r.active,
                               r.loglik, r.psi});
  }
  return rows;
}

json cem_fit_json(const em::ContinuousFit& fit) {
  json j;
  j["loglik"] = fit.loglik;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["collapsed"] = fit.collapsed;
  j["m"] = fit.pi.size();
  j["weights"] = to_std(fit.pi);
  j["locations"] = matrix_to_json(fit.mu);
  if (fit.sigma_hat.size() > 0) j["sigma_hat"] = matrix_to_json(fit.sigma_hat);
  j["delta"] = fit.delta;
  return j;
}

}  // namespace

void parse_support_spec(const std::string& spec, RunConfig* cfg) {
  if (spec == "data") {
    cfg->support_source = "data";
    return;
  }
  if (spec.rfind("grid:", 0) == 0) {
    cfg->support_source = "grid";
    std::string rest = spec.substr(5);
    double lo, hi, step;
    if (std::sscanf(rest.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3) {
      throw std::invalid_argument("support grid spec must be grid:lo:hi:step");
    }
    cfg->grid_lo = lo;
    cfg->grid_hi = hi;
    cfg->grid_step = step;
    return;
  }
  if (spec.rfind("file:", 0) == 0) {
    cfg->support_source = "file";
    cfg->support_path = spec.substr(5);
    return;
  }
  throw std::invalid_argument("unknown support spec '" + spec + "'");
}

RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  cfg.data_path = j.value("data", "");
  cfg.has_header = j.value("has_header", false);
  cfg.synthetic = j.value("synthetic", false);
  if (j.contains("design")) {
    const auto& d = j["design"];
    cfg.design.n = d.value("n", cfg.design.n);
    cfg.design.p = d.value("p", cfg.design.p);
    if (d.contains("coords")) cfg.design.coords = d["coords"].get<std::vector<double>>();
  }
  cfg.seed = j.value("seed", cfg.seed);
  cfg.dedup_tol = j.value("dedup_tol", 0.0);
  cfg.family = j.value("family", "normal");
  cfg.delta = j.value("delta", 1.0);
  if (j.contains("support")) parse_support_spec(j["support"].get<std::string>(), &cfg);
  cfg.algorithm = j.value("algorithm", "pd");
  if (j.contains("sieve")) cfg.sieve = j["sieve"].get<std::vector<double>>();
  cfg.sieve_kind = j.value("sieve_kind", "delta");
  cfg.dem_stop = j.value("dem_stop", "psi");
  cfg.dem_tol = j.value("dem_tol", -1.0);
  cfg.dem_max_iter = j.value("dem_max_iter", cfg.dem_max_iter);
  cfg.cem_tol = j.value("cem_tol", cfg.cem_tol);
  cfg.cem_max_iter = j.value("cem_max_iter", cfg.cem_max_iter);
  cfg.warm_start = j.value("warm_start", true);
  cfg.out_dir = j.value("out_dir", "");
  cfg.write_outputs = j.value("write_outputs", true);
  cfg.verify = j.value("verify", false);
  cfg.verify_resolution = j.value("verify_resolution", 50);
  if (j.contains("options")) {
    const auto& o = j["options"];
    cfg.options.joint_tol = o.value("joint_tol", cfg.options.joint_tol);
    cfg.options.psi_tol = o.value("psi_tol", cfg.options.psi_tol);
    cfg.options.max_iter_joint = o.value("max_iter_joint", cfg.options.max_iter_joint);
    cfg.options.max_iter_fixed = o.value("max_iter_fixed", cfg.options.max_iter_fixed);
    cfg.options.step_shrink = o.value("step_shrink", cfg.options.step_shrink);
    cfg.options.prune_threshold = o.value("prune_threshold", cfg.options.prune_threshold);
    cfg.options.ridge_floor = o.value("ridge_floor", cfg.options.ridge_floor);
    cfg.options.gamma_cap = o.value("gamma_cap", cfg.options.gamma_cap);
    cfg.options.active_threshold = o.value("active_threshold", cfg.options.active_threshold);
  }
  return cfg;
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["data"] = cfg.data_path;
  j["has_header"] = cfg.has_header;
  j["synthetic"] = cfg.synthetic;
  if (cfg.synthetic) {
    j["design"] = {{"n", cfg.design.n}, {"p", cfg.design.p}, {"coords", cfg.design.coords}};
    j["seed"] = cfg.seed;
  }
  j["dedup_tol"] = cfg.dedup_tol;
  j["family"] = cfg.family;
  j["delta"] = cfg.delta;
  if (cfg.support_source == "grid") {
    j["support"] = "grid:" + std::to_string(cfg.grid_lo) + ":" + std::to_string(cfg.grid_hi) +
                   ":" + std::to_string(cfg.grid_step);
  } else if (cfg.support_source == "file") {
    j["support"] = "file:" + cfg.support_path;
  } else {
    j["support"] = "data";
  }
  j["algorithm"] = cfg.algorithm;
  if (!cfg.sieve.empty()) {
    j["sieve"] = cfg.sieve;
    j["sieve_kind"] = cfg.sieve_kind;
  }
  j["dem_stop"] = cfg.dem_stop;
  j["dem_tol"] = cfg.dem_tol;
  j["cem_tol"] = cfg.cem_tol;
  j["warm_start"] = cfg.warm_start;
  j["verify"] = cfg.verify;
  j["options"] = {{"joint_tol", cfg.options.joint_tol},
                  {"psi_tol", cfg.options.psi_tol},
                  {"max_iter_joint", cfg.options.max_iter_joint},
                  {"max_iter_fixed", cfg.options.max_iter_fixed},
                  {"step_shrink", cfg.options.step_shrink},
                  {"prune_threshold", cfg.options.prune_threshold},
                  {"ridge_floor", cfg.options.ridge_floor},
                  {"gamma_cap", cfg.options.gamma_cap},
                  {"active_threshold", cfg.options.active_threshold}};
  return j;
}

RunOutcome run(const RunConfig& cfg) {
  auto started = std::chrono::steady_clock::now();
  const std::string out_dir = resolve_out_dir(cfg);
  if (cfg.write_outputs) std::filesystem::create_directories(out_dir);

  // Data.
  RawDataset raw;
  json data_info;
  if (cfg.synthetic) {
    SyntheticResult syn = generate_synthetic(cfg.design, cfg.seed);
    raw = std::move(syn.data);
    if (cfg.write_outputs) {
      write_csv_matrix(out_dir + "/synthetic_data.csv", raw.rows);
      Matrix tm(syn.true_supports.rows(), syn.true_supports.cols() + 1);
      tm.col(0) = syn.true_weights;
      tm.rightCols(syn.true_supports.cols()) = syn.true_supports;
      write_csv_matrix(out_dir + "/true_measure.csv", tm);
    }
    data_info["synthetic"] = {{"n", cfg.design.n}, {"p", cfg.design.p},
                              {"coords", cfg.design.coords}, {"seed", cfg.seed}};
  } else {
    if (cfg.data_path.empty()) throw std::invalid_argument("no data path given");
    raw = make_raw(read_csv_matrix(cfg.data_path, cfg.has_header));
    data_info["path"] = cfg.data_path;
  }

  const bool poisson = cfg.family == "poisson";
  if (!poisson && cfg.family != "normal") {
    throw std::invalid_argument("unknown family '" + cfg.family + "'");
  }
  if (poisson) {
    require_counts_data(raw.rows);
    if (cfg.dedup_tol != 0.0) {
      throw std::invalid_argument("discrete families require dedup_tol = 0");
    }
  }

  DistinctDataset data = deduplicate(raw, cfg.dedup_tol);
  data_info["n"] = data.total;
  data_info["d"] = data.d();
  data_info["p"] = data.p();

  // Supports.
  SupportSet supports;
  if (cfg.support_source == "data") {
    supports = support_from_data(data);
  } else if (cfg.support_source == "grid") {
    supports = support_grid_1d(cfg.grid_lo, cfg.grid_hi, cfg.grid_step);
    if (supports.p() != data.p()) {
      throw std::invalid_argument("1-D grid supports need 1-D data");
    }
  } else if (cfg.support_source == "file") {
    supports = make_support(read_csv_matrix(cfg.support_path, false));
  } else {
    throw std::invalid_argument("unknown support source '" + cfg.support_source + "'");
  }

  ComponentFamily family = poisson
      ? ComponentFamily::poisson()
      : ComponentFamily::normal(sample_covariance(raw).S, cfg.delta);

  json report;
  report["config"] = config_to_json(cfg);
  report["data"] = data_info;
  report["support"] = {{"m", supports.m()}, {"source", cfg.support_source}};

  bool converged = false;
  double headline_loglik = 0.0;
  std::vector<TraceCsvRow> trace_rows;
  Vector final_pi;  // on the fixed support set, for cdf.csv and verify

  if (cfg.algorithm == "pd" || cfg.algorithm == "pd-ic") {
    LikelihoodMatrix L = likelihood_matrix(family, supports, data);
    pd::PdResult fit = pd::solve(L, data.counts, cfg.options, cfg.algorithm == "pd-ic");
    report["fit"] = pd_fit_json(fit, supports, cfg.options);
    converged = fit.converged;
    headline_loglik = fit.loglik;
    trace_rows = pd_trace_rows(fit);
    final_pi = fit.pi;
  } else if (cfg.algorithm == "dem") {
    LikelihoodMatrix L = likelihood_matrix(family, supports, data);
    em::StopRule rule = cfg.dem_stop == "dloglik" ? em::StopRule::kLoglikChange
                                                  : em::StopRule::kPsi;
    double tol = cfg.dem_tol >= 0.0
                     ? cfg.dem_tol
                     : (rule == em::StopRule::kPsi ? cfg.options.psi_tol : 1e-4);
    em::DiscreteEmResult fit =
        em::discrete_em_solve(L, data.counts, Vector(), rule, tol, cfg.dem_max_iter);
    recover::MixingMeasure act =
        model::active_measure(supports, fit.pi, cfg.options.active_threshold);
    report["fit"] = {{"loglik", fit.loglik},
                     {"psi", fit.psi},
                     {"iterations", fit.iterations},
                     {"converged", fit.converged},
                     {"m_hat", act.weights.size()},
                     {"active_threshold", cfg.options.active_threshold},
                     {"stop_rule", cfg.dem_stop},
                     {"tol", tol},
                     {"weights", to_std(fit.pi)}};
    converged = fit.converged;
    headline_loglik = fit.loglik;
    for (const auto& r : fit.trace) {
      trace_rows.push_back(TraceCsvRow{r.iteration, 2, std::nan(""), std::nan(""),
                                       std::nan(""), supports.m(), r.loglik, r.psi});
    }
    final_pi = fit.pi;
  } else if (cfg.algorithm == "algorithm1" || cfg.algorithm == "cem") {
    model::TwoStageResult ts = model::two_stage_fit(data, family, supports, cfg.options,
                                                    cfg.cem_tol, cfg.cem_max_iter);
    report["fit"] = {{"step1", pd_fit_json(ts.step1, supports, cfg.options)},
                     {"step2", cem_fit_json(ts.step2)}};
    converged = ts.step1.converged && ts.step2.converged && !ts.step2.collapsed;
    headline_loglik = cfg.algorithm == "cem" ? ts.step2.loglik : ts.step1.loglik;
    trace_rows = pd_trace_rows(ts.step1);
    final_pi = ts.step1.pi;
  } else if (cfg.algorithm == "sweep") {
    if (cfg.sieve.empty()) throw std::invalid_argument("sweep needs sieve values");
    Matrix sigma_base = cfg.sieve_kind == "sigma"
                            ? Matrix::Identity(data.p(), data.p())
                            : sample_covariance(raw).S;
    model::MixtureTree tree =
        model::sieve_sweep(data, sigma_base, family.kind(), supports, cfg.sieve,
                           cfg.sieve_kind == "sigma", cfg.options, cfg.warm_start);
    json levels = json::array();
    converged = !tree.levels.empty();
    for (const auto& lev : tree.levels) {
      levels.push_back({{"sieve", lev.sieve},
                        {"loglik", lev.loglik},
                        {"psi", lev.psi},
                        {"m_hat", lev.m_hat},
                        {"converged", lev.converged},
                        {"degenerate", lev.degenerate}});
      converged = converged && lev.converged;
      headline_loglik = lev.loglik;
    }
    report["fit"] = {{"levels", levels}, {"sieve_kind", cfg.sieve_kind}};
    if (cfg.write_outputs) write_tree_csv(out_dir + "/tree.csv", tree, supports.p());
  } else {
    throw std::invalid_argument("unknown algorithm '" + cfg.algorithm + "'");
  }

  if (cfg.verify && final_pi.size() > 0) {
    LikelihoodMatrix L = likelihood_matrix(family, supports, data);
    oracle::OracleSolution sol =
        supports.m() <= 4 ? oracle::brute_force_primal(L, data.counts, cfg.verify_resolution)
                          : oracle::projected_ascent(L, data.counts, 1000000);
    double tol = supports.m() <= 4 ? 1e-6 : 1e-3;
    double gap = sol.loglik - headline_loglik;
    report["verify"] = {{"oracle_method", sol.method},
                        {"oracle_loglik", sol.loglik},
                        {"solver_loglik", headline_loglik},
                        {"gap", gap},
                        {"coarse", sol.coarse},
                        {"pass", gap <= tol}};
  }

  if (cfg.write_outputs) {
    if (!trace_rows.empty()) {
      write_trace_csv(out_dir + "/trace.csv", trace_rows, headline_loglik);
    }
    if (final_pi.size() > 0 && supports.p() == 1) {
      recover::MixingMeasure full{supports.theta, final_pi};
      write_cdf_csv(out_dir + "/cdf.csv", model::cdf_of_measure(full));
    }
  }

  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  report["wall_time_sec"] = wall;
  report["converged"] = converged;
  report["exit_code"] = converged ? 0 : 2;

  if (cfg.write_outputs) {
    std::ofstream out(out_dir + "/report.json");
    if (!out) throw std::invalid_argument("cannot write " + out_dir + "/report.json");
    out << report.dump(2) << "\n";
  }

  return RunOutcome{std::move(report), converged ? 0 : 2};
}

}  // namespace npmix::io
