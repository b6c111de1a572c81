#pragma once

#include <Eigen/Dense>

#include <array>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dampbeam/beam.hpp"
#include "dampbeam/weights.hpp"

namespace dampbeam {

// theta1 = 1 on [0, r0 T], 0 on [r1 T, T], smoothstep h(1-u) / (h(u) + h(1-u)) with
// h(u) = e^{-1/u} in between.
class Theta1Cutoff {
 public:
  Theta1Cutoff(double T, double r0, double r1);

  // theta1, theta1', theta1''.
  std::array<double, 3> eval(double t) const;
  double operator()(double t) const { return eval(t)[0]; }
  double T() const { return T_; }
  double r0() const { return r0_; }
  double r1() const { return r1_; }
  double begin() const { return r0_ * T_; }
  double end() const { return r1_ * T_; }

 private:
  double T_, r0_, r1_;
};

Theta1Cutoff build_theta1(double T, double r0 = 0.3, double r1 = 0.7);

// Uncontrolled forward solve from (beta0, beta1).
BeamTrajectory solve_free_q(const SpatialGrid& grid, std::span<const double> beta0,
                            std::span<const double> beta1, const Potential& a,
                            const TimeGrid& tg, Scheme scheme = Scheme::etdrk4);

// f = -theta1'' q - 2 theta1' q_t + theta1' q_xx, time-major on the requested times.
struct HumSource {
  std::size_t nx = 0;
  std::vector<double> times;
  std::vector<double> values;
  double support_begin = 0.0;  // transition band of theta1
  double support_end = 0.0;
};

// Times must coincide with steps of q.
HumSource assemble_source(const Theta1Cutoff& theta1, const SpatialGrid& grid,
                          const BeamTrajectory& q, const std::vector<double>& times);
// f as a forcing callback, valid at any step time of q.
Forcing source_forcing(const Theta1Cutoff& theta1, const SpatialGrid& grid, const BeamTrajectory& q);

// Banded finite-difference operator on the N interior nodes t_i = (i+1) tau.
// Centered fourth order in the interior, one-sided fourth order closures that use interior
// unknowns only.
class TimeStencil {
 public:
  static TimeStencil first(int n, double tau);
  static TimeStencil second(int n, double tau);

  int size() const { return static_cast<int>(rows_.size()); }
  const std::vector<std::pair<int, double>>& row(int j) const { return rows_[j]; }
  // out_j = sum_i D[j,i] in_i for blocks of `block` contiguous values.
  void apply(std::span<const double> in, std::span<double> out, std::size_t block) const;
  void apply_transpose(std::span<const double> in, std::span<double> out, std::size_t block) const;
  Eigen::MatrixXd dense() const;

 private:
  std::vector<std::vector<std::pair<int, double>>> rows_;
};

enum class Preconditioner { none, jacobi, banded_cholesky };

struct HumDiscretization {
  double s = 4.0;
  double eps_rel = 1e-10;  // eps = eps_rel * max W2
};

// G = L^T W1 L + W2 + eps I on interior space-time nodes, L = d_tt + d_txx + d_xxxx + a.
class QuadraticSystem {
 public:
  QuadraticSystem(const SpatialGrid& grid, const WeightField& w, const DomainSpec& domain,
                  const Potential& a, const HumSource& f, const HumDiscretization& disc);

  std::size_t size() const { return nx_ * nt_; }
  std::size_t nx() const { return nx_; }
  std::size_t nt() const { return nt_; }
  double tau() const { return tau_; }
  double eps() const { return eps_; }
  double scale() const { return scale_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& rhs() const { return F_; }
  const std::vector<double>& w1() const { return w1_; }
  const std::vector<double>& w2() const { return w2_; }

  void apply_L(std::span<const double> psi, std::span<double> out) const;
  void apply_Lt(std::span<const double> r, std::span<double> out) const;
  void apply(std::span<const double> psi, std::span<double> out) const;
  // J = (1/2) <G psi, psi> - <F, psi>, times the cell volume.
  double functional(std::span<const double> psi) const;

  // Explicit Kronecker assembly, for small oracle instances.
  Eigen::MatrixXd dense() const;
  std::vector<double> diagonal() const;

  // Upper band of G in LAPACK "U" storage, kd = half bandwidth in scalars.
  struct Band {
    int n = 0;
    int kd = 0;
    std::vector<double> ab;
  };
  Band band() const;

 private:
  // Block L_{j,i} = D2[j,i] I + D1[j,i] Dxx + delta_ji (Dxxxx + diag a_j).
  Eigen::MatrixXd l_block(int j, int i) const;
  int time_bandwidth() const;

  SpatialGrid grid_;
  std::size_t nx_, nt_;
  double tau_, s_;
  std::vector<double> times_;
  TimeStencil d1_, d2_;
  Eigen::MatrixXd dxx_, dxxxx_;
  std::vector<double> a_, w1_, w2_, F_;
  double eps_ = 0.0;
  double scale_ = 0.0;
};

class BandedCholesky {
 public:
  explicit BandedCholesky(QuadraticSystem::Band band);
  void solve(std::span<const double> b, std::span<double> x) const;

 private:
  QuadraticSystem::Band band_;
};

// The true residual has a roundoff floor near eps_mach ||G|| ||psi|| / ||F|| (about 1e-8
// at 64 x 256), so the default tolerance sits above it.
struct CgOptions {
  double tol = 1e-7;
  int max_iter = 200;
  Preconditioner preconditioner = Preconditioner::banded_cholesky;
};

struct HumSolution {
  std::vector<double> psi;
  std::vector<double> g_tilde;  // W1 L psi
  std::vector<double> v;        // -W2 psi, zero outside omega
  std::vector<double> residual_history;  // relative residuals, one per iteration
  double relative_residual = 0.0;
  double J = 0.0;
  int iterations = 0;
  bool converged = false;
};

HumSolution minimize_J(const QuadraticSystem& sys, const CgOptions& opt = {});

// v on t_0 = 0, interior nodes, t_{N+1} = T (zero at both ends), cubic Lagrange in time.
struct ControlField {
  std::size_t nx = 0;
  std::vector<double> times;
  std::vector<double> values;  // time-major

  static ControlField from_solution(const QuadraticSystem& sys, const HumSolution& sol, double T);
  void at(double t, std::span<double> out) const;
  Forcing forcing() const;
  // Space-time L2 norm by the trapezoid rule.
  double l2_norm(double dx) const;
};

struct TerminalReport {
  double controlled_norm = 0.0;    // ||(beta, beta_t)(T)||_{H^3 x H^1}
  double uncontrolled_norm = 0.0;  // same with v = 0
  double suppression_ratio = 1.0;
  double control_l2 = 0.0;
  double data_norm = 0.0;
  double bound_ratio = 0.0;       // control_l2 / data_norm
  double g_terminal_norm = 0.0;   // g-system from zero data with source v + f
  double superposition_error = 0.0;  // sup |beta - (theta1 q + g)| / sup |beta|
  bool support_ok = true;
  // (t, controlled, uncontrolled) H^3 x H^1 norms per verification step.
  std::vector<std::array<double, 3>> norm_history;
};

struct VerifyOptions {
  int substeps = 4;  // forward steps per HUM time cell
  Scheme scheme = Scheme::etdrk4;
};

// q must be sampled at half steps of the verification grid (see run_null_control).
TerminalReport verify_null_control(const SpatialGrid& grid, const DomainSpec& domain,
                                   std::span<const double> beta0, std::span<const double> beta1,
                                   const Potential& a, const ControlField& v,
                                   const Theta1Cutoff& theta1, const BeamTrajectory& q,
                                   const VerifyOptions& opt = {});

struct NullControlConfig {
  DomainSpec domain;
  CarlemanParams params;
  double eta_scale = 0.1;
  double mollify_radius = 0.1;
  int n_modes = 64;
  int n_time = 256;  // interior HUM nodes
  double r0 = 0.3, r1 = 0.7;
  HumDiscretization disc;
  CgOptions cg;
  VerifyOptions verify;
};

struct NullControlResult {
  BeamTrajectory q;
  HumSource source;
  HumSolution solution;
  ControlField control;
  TerminalReport report;
  std::vector<double> times;  // interior HUM nodes
  double eps = 0.0;
};

NullControlResult run_null_control(const NullControlConfig& cfg, std::span<const double> beta0,
                                   std::span<const double> beta1, const Potential& a);

}  // namespace dampbeam
