#pragma once

#include <gmpxx.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dampbeam/beam.hpp"
#include "dampbeam/domain.hpp"
#include "dampbeam/hum.hpp"
#include "dampbeam/io.hpp"

namespace dampbeam {

struct PotentialSpec {
  std::string kind = "zero";  // zero | separable | random
  double c0 = 0.0;
  std::vector<Potential::Term> terms;  // separable: "A:kx:phase_x:omega:phase_t; ..."
  std::uint64_t seed = 1;
  double sup = 1.0;
  int n_terms = 4;
  int max_k = 4;
  double max_omega = 4.0;

  Potential build(const DomainSpec& domain) const;
};

struct DataSpec {
  std::string kind = "modes";  // modes | random
  // (k, cos coefficient, sin coefficient) in the phase x - x0.
  std::vector<std::array<double, 3>> beta0, beta1;
  std::uint64_t seed = 1;
  int max_k = 8;
  double decay = 2.0;  // random coefficients ~ N(0,1) / (1 + k)^decay

  std::pair<std::vector<double>, std::vector<double>> sample(const SpatialGrid& grid,
                                                             std::uint64_t seed_offset = 0) const;
};

struct ExperimentConfig {
  std::string kind;  // weights-audit | spectrum | forward | carleman-audit | zeta-ledger | control

  DomainSpec domain;
  int n_modes = 64;
  int n_time = 256;
  int steps = 2000;
  Scheme scheme = Scheme::etdrk4;
  Normalization normalization = Normalization::physical;

  CarlemanParams carleman;
  double eta_scale = 0.1;
  double mollify_radius = 0.1;
  std::vector<double> lambdas{1.0, 2.0, 4.0};
  std::vector<double> s_grid{4.0, 8.0};
  std::vector<double> lambda_grid{2.0};
  int samples = 32;
  std::uint64_t seed_calibration = 1;
  std::uint64_t seed_held_out = 2;
  int max_mode = -1;  // -1: n_modes / 4
  int x_panels = 4;
  int t_panels = 8;
  std::vector<mpq_class> zetas;  // empty: carleman.zeta only

  PotentialSpec potential;
  DataSpec data;

  double hum_tol = 1e-7;
  int hum_max_iter = 200;
  double hum_eps = 1e-10;
  double hum_r0 = 0.3;
  double hum_r1 = 0.7;
  int hum_substeps = 4;
  Preconditioner hum_preconditioner = Preconditioner::banded_cholesky;
  int hum_family = 10;

  void validate() const;
  // Every field, defaults included, one "section.key = value" line each in fixed order.
  std::string canonical() const;
  std::string hash() const;  // SHA-256 hex of canonical()
};

ExperimentConfig parse_config(const std::string& ini_text);
ExperimentConfig load_config(const fs::path& path);

struct RunManifest {
  std::string config_hash;
  std::string versions;
  std::string kind;
  double wall_time = 0.0;
  fs::path dir;
  std::vector<std::string> files;
  KeyValues metrics;
  std::vector<std::pair<std::string, bool>> assertions;

  bool all_pass() const;
  std::string metric(const std::string& key) const;
};

std::string artifact_versions();

// Runs the experiment into root / ("run-" + first 16 hex digits of the hash).
RunManifest run_experiment(const ExperimentConfig& cfg, const fs::path& root);
RunManifest read_manifest(const fs::path& dir);

}  // namespace dampbeam
