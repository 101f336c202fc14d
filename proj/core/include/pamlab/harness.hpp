#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pamlab/covariance.hpp"
#include "pamlab/torus.hpp"

namespace pamlab {

enum class ExperimentKind {
  kernel_profile,
  noise_isometry,
  solve_moments,
  chaos_bounds,
  geometry_verify,
  fk_lower_bound
};

const char* kind_name(ExperimentKind kind);
std::optional<ExperimentKind> parse_kind(const std::string& name);
const std::vector<ExperimentKind>& all_kinds();

struct ManifoldSection {
  int d = 1;
  std::vector<double> lengths{1.0};
  bool operator==(const ManifoldSection&) const = default;
};

struct TruncationSection {
  int kmax = 16;
  int grid_factor = 2;
  bool operator==(const TruncationSection&) const = default;
};

struct RunSection {
  double t_final = 0.5;
  double dt = 1e-3;
  std::size_t paths = 10000;
  std::uint64_t seed = 1;
  std::vector<Point> probes{Point{0.5, 0.5, 0.5}};
  std::vector<double> times{0.1, 0.2, 0.5};
  std::string initial = "uniform";  // uniform | dirac
  double initial_value = 1.0;       // c for uniform data
  Point x0{0.5, 0.5, 0.5};          // dirac location
  unsigned threads = 0;
  bool operator==(const RunSection&) const = default;
};

struct KernelSection {
  double r_min = 1e-3;
  double r_max = 1e-2;
  std::size_t points = 12;
  std::string method = "spectral";  // spectral | integral
  std::size_t heat_samples = 100;
  double tolerance = 0.05;          // on the fitted singularity exponent
  bool operator==(const KernelSection&) const = default;
};

struct IsometrySection {
  std::size_t functions = 20;
  std::size_t samples = 10000;
  std::size_t steps = 20;
  bool operator==(const IsometrySection&) const = default;
};

struct ChaosSection {
  int n_max = 3;
  int kmax = 32;
  int time_nodes = 200;
  std::vector<double> s_grid{1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0, 3.0, 10.0};
  double fit_s_max = 1e-2;
  std::size_t sup_samples = 8;
  double lambda = 1.0;
  double h_dt = 1e-3;
  double t_end = 5.0;
  double fit_until = 2.5;
  std::size_t tuples = 50;
  double tuple_t_min = 0.05;
  double tuple_t_max = 0.5;
  bool operator==(const ChaosSection&) const = default;
};

struct GeometrySection {
  std::size_t samples = 100000;
  std::size_t pairs = 1000;
  bool operator==(const GeometrySection&) const = default;
};

struct FkSection {
  std::size_t pairs = 20000;
  double dt = 1e-2;
  int kmax = 8;
  std::size_t batches = 16;
  std::vector<double> times{0.5, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
  double t_lo = 5.0;
  double t_hi = 20.0;
  double half_step_t_max = 2.0;  // compare dt and dt/2 for times up to this
  double half_step_tolerance = 0.01;  // relative, on |E(dt) - E(dt/2)|
  bool operator==(const FkSection&) const = default;
};

struct OutputSection {
  std::string dir = "out";
  bool noise_dump = false;
  bool operator==(const OutputSection&) const = default;
};

struct ExperimentConfig {
  ManifoldSection manifold;
  TruncationSection truncation;
  NoiseParams noise{0.3, 1.0, 0.5};
  RunSection run;
  KernelSection kernel;
  IsometrySection isometry;
  ChaosSection chaos;
  GeometrySection geometry;
  FkSection fk;
  OutputSection output;

  TorusSpec torus() const;
  bool operator==(const ExperimentConfig& o) const;
};

// Sectioned key = value text. '#' starts a comment; lists are comma
// separated and points within a list are separated by ';'. Unknown sections
// or keys and malformed values throw InvalidConfig naming section.key.
ExperimentConfig parse_config(const std::string& text);
// Reads a config file, or the embedded config of a manifest.json.
ExperimentConfig load_config(const std::string& path);
// Canonical text with every key; doubles at 17 significant digits, so
// parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

// Field-level checks. Throws InvalidConfig, or DalangViolated unless
// override_dalang is set.
void validate_config(const ExperimentConfig& cfg, ExperimentKind kind, bool override_dalang);

// A downstream failure, tagged with the module that raised it.
struct ModuleError : std::runtime_error {
  ModuleError(const std::string& module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_name(module) {}
  std::string module_name;
};

struct Assertion {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunResult {
  std::vector<std::string> files;
  std::vector<Assertion> assertions;
  bool all_passed() const;
};

// Validates, dispatches and writes manifest.json, summary.json, config.ini,
// the CSV files, timings.txt and (if requested) noise.bin into out_dir.
RunResult run_experiment(ExperimentKind kind, const ExperimentConfig& cfg, const std::string& out_dir,
                         bool override_dalang = false);

// 17 significant digits, the CSV and config float format.
std::string format_double(double v);

}  // namespace pamlab
