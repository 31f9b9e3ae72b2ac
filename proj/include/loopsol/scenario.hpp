#ifndef LOOPSOL_SCENARIO_HPP
#define LOOPSOL_SCENARIO_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "loopsol/matrix.hpp"

namespace loopsol {

inline constexpr const char* kVersion = "0.3.1";

/// Machine-readable description of a verification or generation run.
struct Scenario {
  std::string task;  // verify-splitting | derive-flow | evolve | gsge-check |
                     // inverse-scattering | dress
  std::string mode;  // task refinement, see scenarios/schema.json
  std::vector<std::pair<std::string, int>> cases;  // (family, n)
  int samples = 100;
  std::uint64_t seed = 7;
  int flow_i = 1;
  int flow_j = 2;
  // grid
  double x0 = -20.0, x1 = 20.0;
  int nx = 512;
  std::string boundary = "decaying";
  // evolution
  double T = 0.1, dt = 1e-4;
  // dressing
  Cplx pole{0.2, 0.45};
  std::vector<Cplx> lambda_probes{{0.5, 0.0}, {1.0, 0.0}, {2.0, 0.0}};
  double tolerance_scale = 1.0;
  std::map<std::string, double> tolerances;
  std::string out_dir;

  double tol(const std::string& name, double fallback) const;
};

Scenario scenario_from_json_text(const std::string& text);
Scenario scenario_from_file(const std::string& path);

struct CheckResult {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct RunReport {
  std::string task;
  std::string version = kVersion;
  std::uint64_t seed = 0;
  std::vector<CheckResult> checks;
  double elapsed_ms = 0.0;
  std::vector<std::string> artifacts;

  bool ok() const;
  /// Deterministic content excludes timing.
  std::string to_json(bool include_timing = true) const;
};

RunReport run_scenario(const Scenario& s);
void write_report(const RunReport& r, const std::string& path);

/// Atomic CSV + JSON manifest emission. Columns are dimensionless.
void emit_plot_csv(const std::string& path,
                   const std::vector<std::string>& columns,
                   const std::vector<std::vector<double>>& rows,
                   const std::string& description);

/// Simple index-sharded worker pool; results must be written to per-index
/// slots by the callable.
void parallel_for(int count, const std::function<void(int)>& fn);

}  // namespace loopsol

#endif
