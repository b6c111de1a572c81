#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dampbeam/beam.hpp"
#include "dampbeam/carleman_audit.hpp"
#include "dampbeam/hum.hpp"
#include "dampbeam/weights.hpp"

namespace dampbeam {

namespace fs = std::filesystem;

// Round-trip formatting (%.17g).
std::string fmt(double v);

void write_text(const fs::path& path, const std::string& text);
void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

using KeyValues = std::vector<std::pair<std::string, std::string>>;
void write_key_values(const fs::path& path, const KeyValues& kv);
KeyValues read_key_values(const fs::path& path);

// Binary snapshot, little-endian:
//   char[8] "DBTRAJ01"
//   uint64  n_times, n_nodes, n_fields
//   f64     circumference, x0
//   f64     times[n_times]
//   f64     values[n_times][n_fields][n_nodes]
struct Snapshot {
  double circumference = 0.0;
  double x0 = 0.0;
  std::uint64_t n_nodes = 0;
  std::vector<double> times;
  std::vector<std::vector<double>> fields;  // each n_times * n_nodes, time-major
};
void write_snapshot(const fs::path& path, const Snapshot& s);
Snapshot read_snapshot(const fs::path& path);

Snapshot trajectory_snapshot(const SpatialGrid& grid, const BeamTrajectory& tr);
Snapshot control_snapshot(const SpatialGrid& grid, const ControlField& v);

// t, x, beta, beta_t for every `stride`-th step.
void write_trajectory_csv(const fs::path& path, const SpatialGrid& grid, const BeamTrajectory& tr,
                          std::size_t stride = 1);
// x, t, phi, xi, then phi_tAxB and xi_tAxB for all recorded derivatives.
void write_weight_csv(const fs::path& path, const WeightField& w);
void write_bound_report_csv(const fs::path& path, const std::vector<BoundReport>& reports);
void write_ratio_report_csv(const fs::path& path, const RatioReport& r);
void write_control_csv(const fs::path& path, const SpatialGrid& grid, const ControlField& v);
KeyValues terminal_report_kv(const TerminalReport& r);

}  // namespace dampbeam
