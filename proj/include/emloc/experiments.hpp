#pragma once

#include <optional>
#include <string>
#include <vector>

#include "emloc/locate.hpp"
#include "emloc/ris_opt.hpp"
#include "emloc/scenario.hpp"
#include "emloc/types.hpp"

namespace emloc {

// Parsed and defaulted experiment description. Every omitted field falls back
// to the baseline simulation assumptions; `notices` records the substitutions.
struct ExperimentConfig {
  std::string experiment;  // lr-dist | gamma-map | locate | q-map | ris-opt | grouping
  std::uint64_t seed = 1;
  int trials = 100;
  int workers = 1;

  double carrier_hz = 28e9;
  DipoleDims dims;
  double z_load_ohm = 50.0;
  LinkKind link = LinkKind::Direct;
  ElementLayout bs;
  std::optional<ElementLayout> ris;
  double r0_ohm = 0.2;

  std::vector<Vec3> source_positions;
  std::vector<double> source_power_dbm;
  std::vector<double> power_dbm_list;  // sweep applied to all sources; empty = per-source powers
  double noise_dbm = -87.0;
  int t = 10;
  int t1 = 10, t2 = 10;  // two-stage protocol

  std::vector<ChannelModelKind> mm_kinds;
  bool grid_center_auto = true;
  double grid_center_x = 0.0, grid_center_z = 0.0;
  double grid_span_x = 1.4, grid_span_z = 1.4;
  int grid_nx = 15, grid_nz = 15;
  bool refine_enabled = true;
  int refine_nx = 50, refine_nz = 50;

  double p_beta = 0.01;
  int ref_draws = 10000;
  std::uint64_t ref_seed = 99;
  SymbolAlphabet alphabet = SymbolAlphabet::QPSK;

  double mu_profile_ohm = 100.0;
  std::vector<std::pair<std::string, OptimizationArea>> opt_areas;  // name -> area
  std::string protocol = "algorithm2";  // ris-opt: algorithm2 | two-stage
  int max_sweeps = 100;
  int gamma_k = 50;
  int grouping_peaks = 3;
  int lr_dist_n = 64;
  std::vector<int> lr_dist_t_list;

  double wavelength() const { return kSpeedOfLight / carrier_hz; }
  std::string effective_json;  // canonical serialized effective config
  std::vector<std::string> notices;
};

ExperimentConfig parse_experiment_config_text(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

// Full validation without execution; returns the effective config and prints
// diagnostics through `out` when non-null.
ExperimentConfig validate_config(const std::string& path, std::string* report);

// Executes the configured experiment; writes rows.csv, aggregates.json,
// timing.csv and manifest.json under out_dir. Returns 0 on success; a partial
// rows file plus a failure marker in the manifest is left behind on error.
int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

// Recomputes every aggregate from rows.csv and compares against
// aggregates.json; returns 0 when everything matches to 1e-9 relative.
int verify_out_dir(const std::string& out_dir, std::string* report);

std::uint64_t fnv1a_hash(const std::string& text);

}  // namespace emloc
