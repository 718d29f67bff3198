#include "npmix/npmix.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "csv.hpp"
#include "model_builder.hpp"
#include "runner.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

int fail(int code, const std::string& msg) {
  set_error(msg);
  return code;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

struct npmix_dataset {
  npmix::RawDataset raw;
  npmix::DistinctDataset distinct;
};

struct npmix_support {
  npmix::SupportSet s;
};

struct npmix_fit {
  // Either a fixed-support fit (weights over `supports`) or a continuous fit.
  npmix::Vector weights;
  npmix::Matrix supports;
  double loglik = 0.0;
  double psi = kNaN;
  double gamma = kNaN;
  long iterations = 0;
  bool converged = false;
  struct TraceEntry {
    double iteration, k, gamma, loglik, psi;
  };
  std::vector<TraceEntry> trace;
};

extern "C" {

const char* npmix_version(void) { return "0.1.0"; }

const char* npmix_last_error(void) { return g_last_error.c_str(); }

int npmix_dataset_from_csv(const char* path, int has_header, double dedup_tol,
                           npmix_dataset** out) {
  if (!path || !out) return fail(NPMIX_ERR_INVALID, "null argument");
  try {
    auto* ds = new npmix_dataset;
    ds->raw = npmix::make_raw(npmix::io::read_csv_matrix(path, has_header != 0));
    ds->distinct = npmix::deduplicate(ds->raw, dedup_tol);
    *out = ds;
    return NPMIX_OK;
  } catch (const std::exception& e) {
    return fail(NPMIX_ERR_IO, e.what());
  }
}

int npmix_dataset_from_rows(const double* rows, long n, long p, double dedup_tol,
                            npmix_dataset** out) {
  if (!rows || !out) return fail(NPMIX_ERR_INVALID, "null argument");
  try {
    npmix::Matrix m(n, p);
    for (long i = 0; i < n; ++i) {
      for (long j = 0; j < p; ++j) m(i, j) = rows[i * p + j];
    }
    auto* ds = new npmix_dataset;
    ds->raw = npmix::make_raw(std::move(m));
    ds->distinct = npmix::deduplicate(ds->raw, dedup_tol);
    *out = ds;
    return NPMIX_OK;
  } catch (const std::exception& e) {
    return fail(NPMIX_ERR_INVALID, e.what());
  }
}

int npmix_dataset_synthetic(long n, long p, const double* coords, long ncoords,
                            uint64_t seed, npmix_dataset** out) {
  if (!coords || !out || ncoords < 1) return fail(NPMIX_ERR_INVALID, "null/empty argument");
  try {
    npmix::io::SyntheticDesign design;
    design.n = n;
    design.p = static_cast<int>(p);
    design.coords.assign(coords, coords + ncoords);
    auto* ds = new npmix_dataset;
    ds->raw = npmix::io::generate_synthetic(design, seed).data;
    ds->distinct = npmix::deduplicate(ds->raw, 0.0);
    *out = ds;
    return NPMIX_OK;
  } catch (const std::exception& e) {
    return fail(NPMIX_ERR_INVALID, e.what());
  }
}

long npmix_dataset_n(const npmix_dataset* ds) {
  return ds ? static_cast<long>(ds->distinct.total) : 0;
}
long npmix_dataset_d(const npmix_dataset* ds) { return ds ? ds->distinct.d() : 0; }
long npmix_dataset_p(const npmix_dataset* ds) { return ds ? ds->distinct.p() : 0; }

double npmix_dataset_count(const npmix_dataset* ds, long i) {
  if (!ds || i < 0 || i >= ds->distinct.d()) return -1.0;
  return ds->distinct.counts(i);
}

int npmix_dataset_distinct_row(const npmix_dataset* ds, long i, double* buf, long buflen) {
  if (!ds || !buf) return fail(NPMIX_ERR_INVALID, "null argument");
  if (i < 0 || i >= ds->distinct.d() || buflen < ds->distinct.p()) {
    return fail(NPMIX_ERR_INVALID, "row index or buffer size out of range");
  }
  for (npmix::Index j = 0; j < ds->distinct.p(); ++j) buf[j] = ds->distinct.y(i, j);
  return NPMIX_OK;
}

void npmix_dataset_free(npmix_dataset* ds) { delete ds; }

int npmix_support_from_data(const npmix_dataset* ds, npmix_support** out) {
  if (!ds || !out) return fail(NPMIX_ERR_INVALID, "null argument");
  *out = new npmix_support{npmix::support_from_data(ds->distinct)};
  return NPMIX_OK;
}

int npmix_support_grid_1d(double lo, double hi, double step, npmix_support** out) {
  if (!out) return fail(NPMIX_ERR_INVALID, "null argument");
  try {
    *out = new npmix_support{npmix::support_grid_1d(lo, hi, step)};
    return NPMIX_OK;
  } catch (const std::exception& e) {
    return fail(NPMIX_ERR_INVALID, e.what());
  }
}

int npmix_support_from_rows(const double* rows, long m, long p, npmix_support** out) {
  if (!rows || !out) return fail(NPMIX_ERR_INVALID, "null argument");
  try {
    npmix::Matrix t(m, p);
    for (long i = 0; i < m; ++i) {
      for (long j = 0; j < p; ++j) t(i, j) = rows[i * p + j];
    }
    *out = new npmix_support{npmix::make_support(std::move(t))};
    return NPMIX_OK;
  } catch (const std::exception& e) {
    return fail(NPMIX_ERR_INVALID, e.what());
  }
}

long npmix_support_m(const npmix_support* s) { return s ? s->s.m() : 0; }
long npmix_support_p(const npmix_support* s) { return s ? s->s.p() : 0; }

int npmix_support_row(const npmix_support* s, long j, double* buf, long buflen) {
  if (!s || !buf) return fail(NPMIX_ERR_INVALID, "null argument");
  if (j < 0 || j >= s->s.m() || buflen < s->s.p()) {
    return fail(NPMIX_ERR_INVALID, "row index or buffer size out of range");
  }
  for (npmix::Index k = 0; k < s->s.p(); ++k) buf[k] = s->s.theta(j, k);
  return NPMIX_OK;
}

void npmix_support_free(npmix_support* s) { delete s; }

void npmix_options_init(npmix_options* opt) {
  if (!opt) return;
  npmix::pd::SolverOptions d;
  opt->joint_tol = d.joint_tol;
  opt->psi_tol = d.psi_tol;
  opt->step_shrink = d.step_shrink;
  opt->prune_threshold = d.prune_threshold;
  opt->ridge_floor = d.ridge_floor;
  opt->gamma_cap = d.gamma_cap;
  opt->active_threshold = d.active_threshold;
  opt->max_iter_joint = d.max_iter_joint;
  opt->max_iter_fixed = d.max_iter_fixed;
  opt->max_iter_em = 1000000;
  opt->em_tol = -1.0;
}

namespace {

npmix::pd::SolverOptions to_cpp(const npmix_options* opt) {
  npmix::pd::SolverOptions o;
  if (!opt) return o;
  o.joint_tol = opt->joint_tol;
  o.psi_tol = opt->psi_tol;
  o.step_shrink = opt->step_shrink;
  o.prune_threshold = opt->prune_threshold;
  o.ridge_floor = opt->ridge_floor;
  o.gamma_cap = opt->gamma_cap;
  o.active_threshold = opt->active_threshold;
  o.max_iter_joint = opt->max_iter_joint;
  o.max_iter_fixed = opt->max_iter_fixed;
  return o;
}

npmix::ComponentFamily make_family(const npmix_dataset* ds, int family, double delta,
                                   const double* sigma) {
  if (family == NPMIX_FAMILY_POISSON) return npmix::ComponentFamily::poisson();
  if (family != NPMIX_FAMILY_NORMAL) throw std::invalid_argument("unknown family code");
  const npmix::Index p = ds->distinct.p();
  npmix::Matrix S(p, p);
  if (sigma) {
    for (npmix::Index i = 0; i < p; ++i) {
      for (npmix::Index j = 0; j < p; ++j) S(i, j) = sigma[i * p + j];
    }
  } else {
    S = npmix::sample_covariance(ds->raw).S;
  }
  return npmix::ComponentFamily::normal(S, delta);
}

npmix_fit* from_pd(const npmix::pd::PdResult& r, const npmix::SupportSet& sup) {
  auto* f = new npmix_fit;
  f->weights = r.pi;
  f->supports = sup.theta;
  f->loglik = r.loglik;
  f->psi = r.psi;
  f->gamma = r.state.gamma;
  f->iterations = r.iter_joint + r.iter_fixed;
  f->converged = r.converged;
  for (const auto& row : r.trace.rows) {
    f->trace.push_back({static_cast<double>(row.iteration), row.k, row.gamma, row.loglik,
                        row.psi});
  }
  return f;
}

}  // namespace

int npmix_fit_pd(const npmix_dataset* ds, const npmix_support* sup, int family,
                 double delta, const double* sigma, const npmix_options* opt, int prune,
                 npmix_fit** out) {
  if (!ds || !sup || !out) return fail(NPMIX_ERR_INVALID, "null argument");
  try {
    npmix::ComponentFamily fam = make_family(ds, family, delta, sigma);
    npmix::LikelihoodMatrix L = npmix::likelihood_matrix(fam, sup->s, ds->distinct);
    npmix::pd::PdResult r = npmix::pd::solve(L, ds->distinct.counts, to_cpp(opt), prune != 0);
    *out = from_pd(r, sup->s);
    if (!r.converged) return fail(NPMIX_ERR_NOT_CONVERGED, "penalized dual did not converge");
    return NPMIX_OK;
  } catch (const std::exception& e) {
    return fail(NPMIX_ERR_INVALID, e.what());
  }
}

int npmix_fit_dem(const npmix_dataset* ds, const npmix_support* sup, int family,
                  double delta, const double* sigma, const npmix_options* opt,
                  int stop_on_loglik_change, npmix_fit** out) {
  if (!ds || !sup || !out) return fail(NPMIX_ERR_INVALID, "null argument");
  try {
    npmix::ComponentFamily fam = make_family(ds, family, delta, sigma);
    npmix::LikelihoodMatrix L = npmix::likelihood_matrix(fam, sup->s, ds->distinct);
    npmix::pd::SolverOptions o = to_cpp(opt);
    double tol = opt && opt->em_tol > 0.0
                     ? opt->em_tol
                     : (stop_on_loglik_change ? 1e-4 : o.psi_tol);
    long max_iter = opt ? opt->max_iter_em : 1000000;
    npmix::em::DiscreteEmResult r = npmix::em::discrete_em_solve(
        L, ds->distinct.counts, npmix::Vector(),
        stop_on_loglik_change ? npmix::em::StopRule::kLoglikChange
                              : npmix::em::StopRule::kPsi,
        tol, max_iter);
    auto* f = new npmix_fit;
    f->weights = r.pi;
    f->supports = sup->s.theta;
    f->loglik = r.loglik;
    f->psi = r.psi;
    f->iterations = r.iterations;
    f->converged = r.converged;
    for (const auto& row : r.trace) {
      f->trace.push_back({static_cast<double>(row.iteration), kNaN, kNaN, row.loglik, row.psi});
    }
    *out = f;
    if (!r.converged) return fail(NPMIX_ERR_NOT_CONVERGED, "EM did not converge");
    return NPMIX_OK;
  } catch (const std::exception& e) {
    return fail(NPMIX_ERR_INVALID, e.what());
  }
}

int npmix_fit_two_stage(const npmix_dataset* ds, const npmix_support* sup, int family,
                        double delta, const double* sigma, const npmix_options* opt,
                        npmix_fit** step1, npmix_fit** step2) {
  if (!ds || !sup || (!step1 && !step2)) return fail(NPMIX_ERR_INVALID, "null argument");
  try {
    npmix::ComponentFamily fam = make_family(ds, family, delta, sigma);
    npmix::pd::SolverOptions o = to_cpp(opt);
    long max_iter = opt ? opt->max_iter_em : 100000;
    double tol = opt && opt->em_tol > 0.0 ? opt->em_tol : 1e-6;
    npmix::model::TwoStageResult r =
        npmix::model::two_stage_fit(ds->distinct, fam, sup->s, o, tol, max_iter);
    if (step1) *step1 = from_pd(r.step1, sup->s);
    if (step2) {
      auto* f = new npmix_fit;
      f->weights = r.step2.pi;
      f->supports = r.step2.mu;
      f->loglik = r.step2.loglik;
      f->iterations = r.step2.iterations;
      f->converged = r.step2.converged && !r.step2.collapsed;
      for (size_t t = 0; t < r.step2.loglik_trace.size(); ++t) {
        f->trace.push_back({static_cast<double>(t + 1), kNaN, kNaN, r.step2.loglik_trace[t],
                            kNaN});
      }
      *step2 = f;
    }
    bool ok = r.step1.converged && r.step2.converged && !r.step2.collapsed;
    if (!ok) return fail(NPMIX_ERR_NOT_CONVERGED, "two-stage fit did not converge");
    return NPMIX_OK;
  } catch (const std::exception& e) {
    return fail(NPMIX_ERR_INVALID, e.what());
  }
}

double npmix_fit_loglik(const npmix_fit* f) { return f ? f->loglik : kNaN; }
double npmix_fit_psi(const npmix_fit* f) { return f ? f->psi : kNaN; }
double npmix_fit_gamma(const npmix_fit* f) { return f ? f->gamma : kNaN; }
long npmix_fit_iterations(const npmix_fit* f) { return f ? f->iterations : 0; }
int npmix_fit_converged(const npmix_fit* f) { return f && f->converged ? 1 : 0; }
long npmix_fit_num_components(const npmix_fit* f) {
  return f ? static_cast<long>(f->weights.size()) : 0;
}

int npmix_fit_weights(const npmix_fit* f, double* buf, long buflen) {
  if (!f || !buf) return fail(NPMIX_ERR_INVALID, "null argument");
  if (buflen < f->weights.size()) return fail(NPMIX_ERR_INVALID, "buffer too small");
  std::memcpy(buf, f->weights.data(), sizeof(double) * f->weights.size());
  return NPMIX_OK;
}

long npmix_fit_num_active(const npmix_fit* f, double threshold) {
  if (!f) return 0;
  long k = 0;
  for (npmix::Index j = 0; j < f->weights.size(); ++j) {
    if (f->weights(j) > threshold) ++k;
  }
  return k;
}

int npmix_fit_component(const npmix_fit* f, long j, double* theta_buf, long buflen,
                        double* weight) {
  if (!f) return fail(NPMIX_ERR_INVALID, "null argument");
  if (j < 0 || j >= f->weights.size()) return fail(NPMIX_ERR_INVALID, "index out of range");
  if (theta_buf) {
    if (buflen < f->supports.cols()) return fail(NPMIX_ERR_INVALID, "buffer too small");
    for (npmix::Index k = 0; k < f->supports.cols(); ++k) theta_buf[k] = f->supports(j, k);
  }
  if (weight) *weight = f->weights(j);
  return NPMIX_OK;
}

long npmix_fit_trace_len(const npmix_fit* f) {
  return f ? static_cast<long>(f->trace.size()) : 0;
}

int npmix_fit_trace_row(const npmix_fit* f, long row, double* iteration, double* k,
                        double* gamma, double* loglik, double* psi) {
  if (!f) return fail(NPMIX_ERR_INVALID, "null argument");
  if (row < 0 || row >= static_cast<long>(f->trace.size())) {
    return fail(NPMIX_ERR_INVALID, "trace row out of range");
  }
  const auto& r = f->trace[static_cast<size_t>(row)];
  if (iteration) *iteration = r.iteration;
  if (k) *k = r.k;
  if (gamma) *gamma = r.gamma;
  if (loglik) *loglik = r.loglik;
  if (psi) *psi = r.psi;
  return NPMIX_OK;
}

void npmix_fit_free(npmix_fit* f) { delete f; }

int npmix_run_json(const char* config_json, char** report_json_out) {
  if (!config_json) return fail(NPMIX_ERR_INVALID, "null config");
  try {
    nlohmann::json j = nlohmann::json::parse(config_json);
    npmix::io::RunConfig cfg = npmix::io::config_from_json(j);
    npmix::io::RunOutcome outcome = npmix::io::run(cfg);
    if (report_json_out) {
      std::string s = outcome.report.dump(2);
      *report_json_out = new char[s.size() + 1];
      std::memcpy(*report_json_out, s.c_str(), s.size() + 1);
    }
    if (outcome.exit_code == 2) {
      return fail(NPMIX_ERR_NOT_CONVERGED, "run finished without convergence");
    }
    return NPMIX_OK;
  } catch (const nlohmann::json::exception& e) {
    return fail(NPMIX_ERR_INVALID, e.what());
  } catch (const std::exception& e) {
    return fail(NPMIX_ERR_INVALID, e.what());
  }
}

void npmix_string_free(char* s) { delete[] s; }

}  // extern "C"
