#ifndef NPMIX_RUNNER_HPP
#define NPMIX_RUNNER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "model_builder.hpp"
#include "oracle.hpp"
#include "synthetic.hpp"

namespace npmix::io {

/// One pipeline invocation: dataset, family, support source, algorithm and
/// tolerances. Built from CLI flags or a JSON object with the same field
/// names.
struct RunConfig {
  std::string data_path;
  bool has_header = false;
  bool synthetic = false;
  SyntheticDesign design;
  std::uint64_t seed = 20260808;
  double dedup_tol = 0.0;

  std::string family = "normal";  // normal | poisson
  double delta = 1.0;

  std::string support_source = "data";  // data | grid | file
  double grid_lo = 0.0, grid_hi = 0.0, grid_step = 0.0;
  std::string support_path;

  std::string algorithm = "pd";  // pd | pd-ic | dem | cem | algorithm1 | sweep
  std::vector<double> sieve;
  std::string sieve_kind = "delta";  // delta | sigma
  pd::SolverOptions options;
  std::string dem_stop = "psi";  // psi | dloglik
  double dem_tol = -1.0;         // <0: psi_tol for psi rule, 1e-4 for dloglik
  long dem_max_iter = 1000000;
  double cem_tol = 1e-6;
  long cem_max_iter = 200000;
  bool warm_start = true;

  std::string out_dir;  // empty: $NPMIX_OUT or "."
  bool write_outputs = true;
  bool verify = false;
  int verify_resolution = 50;
};

struct RunOutcome {
  nlohmann::json report;
  int exit_code = 0;  // 0 converged, 2 not converged; input errors throw
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);

/// Executes the configured pipeline and, unless write_outputs is off, writes
/// report.json plus trace.csv / tree.csv / cdf.csv as applicable under
/// out_dir.
RunOutcome run(const RunConfig& cfg);

/// Support-source string of the form "data", "grid:lo:hi:step" or
/// "file:path", as accepted on the command line.
void parse_support_spec(const std::string& spec, RunConfig* cfg);

}  // namespace npmix::io

#endif
