// Command-line front end; talks to the solver library through the C API.
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "npmix/npmix.h"

namespace {

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"npmix: nonparametric mixture estimation via the penalized dual method"};

  std::string data_path, support_spec = "data", algorithm = "pd", family = "normal";
  std::string sieve_csv, sieve_kind = "delta", out_dir, dem_stop = "psi";
  bool has_header = false, synthetic = false, verify = false, no_warm_start = false;
  double delta = 1.0, dedup_tol = 0.0, psi_tol = 0.005, joint_tol = 1e-6, tau = -1.0;
  double gamma_cap = 1e10;
  unsigned long long seed = 20260808ULL;
  long synthetic_n = 270;
  int synthetic_p = 3;
  std::string synthetic_coords = "-5,0,5";

  app.add_option("--data", data_path, "CSV dataset, one observation per row");
  app.add_flag("--header", has_header, "first CSV line is a header");
  app.add_flag("--synthetic", synthetic,
               "generate the equal-weight normal-grid design instead of reading --data");
  app.add_option("--synthetic-n", synthetic_n, "synthetic sample size")->capture_default_str();
  app.add_option("--synthetic-p", synthetic_p, "synthetic dimension")->capture_default_str();
  app.add_option("--synthetic-coords", synthetic_coords, "per-axis support coordinates")
      ->capture_default_str();
  app.add_option("--seed", seed, "seed for synthetic generation")->capture_default_str();
  app.add_option("--family", family, "normal | poisson")->capture_default_str();
  app.add_option("--support", support_spec, "data | grid:lo:hi:step | file:path")
      ->capture_default_str();
  app.add_option("--algorithm", algorithm, "pd | pd-ic | dem | cem | algorithm1 | sweep")
      ->capture_default_str();
  app.add_option("--delta", delta, "sieve scale on the common covariance")
      ->capture_default_str();
  app.add_option("--sieve", sieve_csv, "comma-separated sieve values for --algorithm sweep");
  app.add_option("--sieve-kind", sieve_kind, "delta | sigma (1-D component scale)")
      ->capture_default_str();
  app.add_option("--dedup-tol", dedup_tol, "row deduplication tolerance (max-norm)")
      ->capture_default_str();
  app.add_option("--psi-tol", psi_tol, "gradient-certificate stopping tolerance")
      ->capture_default_str();
  app.add_option("--joint-tol", joint_tol, "|dK| tolerance ending the joint phase")
      ->capture_default_str();
  app.add_option("--gamma-cap", gamma_cap, "penalty power handoff bound")
      ->capture_default_str();
  app.add_option("--dem-stop", dem_stop, "dem stopping rule: psi | dloglik")
      ->capture_default_str();
  app.add_option("--tau", tau, "dem tolerance (defaults: psi-tol, or 1e-4 for dloglik)");
  app.add_option("--out", out_dir, "output directory (default $NPMIX_OUT or .)");
  app.add_flag("--verify", verify, "append an independent oracle comparison to the report");
  app.add_flag("--no-warm-start", no_warm_start, "cold-start every sweep level");

  CLI11_PARSE(app, argc, argv);

  std::ostringstream cfg;
  cfg << "{";
  cfg << "\"data\":\"" << json_escape(data_path) << "\"";
  cfg << ",\"has_header\":" << (has_header ? "true" : "false");
  cfg << ",\"synthetic\":" << (synthetic ? "true" : "false");
  if (synthetic) {
    cfg << ",\"design\":{\"n\":" << synthetic_n << ",\"p\":" << synthetic_p << ",\"coords\":[";
    auto coords = parse_list(synthetic_coords);
    for (size_t i = 0; i < coords.size(); ++i) cfg << (i ? "," : "") << coords[i];
    cfg << "]}";
  }
  cfg << ",\"seed\":" << seed;
  cfg << ",\"dedup_tol\":" << dedup_tol;
  cfg << ",\"family\":\"" << json_escape(family) << "\"";
  cfg << ",\"delta\":" << delta;
  cfg << ",\"support\":\"" << json_escape(support_spec) << "\"";
  cfg << ",\"algorithm\":\"" << json_escape(algorithm) << "\"";
  if (!sieve_csv.empty()) {
    auto sieve = parse_list(sieve_csv);
    cfg << ",\"sieve\":[";
    for (size_t i = 0; i < sieve.size(); ++i) cfg << (i ? "," : "") << sieve[i];
    cfg << "],\"sieve_kind\":\"" << json_escape(sieve_kind) << "\"";
  }
  cfg << ",\"dem_stop\":\"" << json_escape(dem_stop) << "\"";
  cfg << ",\"dem_tol\":" << tau;
  cfg << ",\"warm_start\":" << (no_warm_start ? "false" : "true");
  if (!out_dir.empty()) cfg << ",\"out_dir\":\"" << json_escape(out_dir) << "\"";
  cfg << ",\"verify\":" << (verify ? "true" : "false");
  cfg << ",\"options\":{\"psi_tol\":" << psi_tol << ",\"joint_tol\":" << joint_tol
      << ",\"gamma_cap\":" << gamma_cap << "}";
  cfg << "}";

  char* report = nullptr;
  int rc = npmix_run_json(cfg.str().c_str(), &report);
  if (report) {
    std::printf("%s\n", report);
    npmix_string_free(report);
  }
  if (rc == NPMIX_OK) return 0;
  if (rc == NPMIX_ERR_NOT_CONVERGED) {
    std::fprintf(stderr, "npmix: %s\n", npmix_last_error());
    return 2;
  }
  std::fprintf(stderr, "npmix: error: %s\n", npmix_last_error());
  return 1;
}
