#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dampbeam/domain.hpp"
#include "dampbeam/spectral.hpp"

namespace dampbeam {

// forward: d_tt - d_txx + d_xxxx (damped beam);
// adjoint: d_tt + d_txx + d_xxxx (operator of the Carleman residual).
enum class Signature { forward, adjoint };

// Per-mode generator block acting on (beta_hat, beta_t_hat).
Eigen::Matrix2d modal_block(double kappa, Signature sig = Signature::forward);
std::vector<Eigen::Matrix2d> assemble_operator(const SpatialGrid& grid,
                                               Signature sig = Signature::forward);

// lambda_k = (-kappa^2 +- i sqrt(3) kappa^2) / 2 with mode (e^{i kappa x}, lambda_k e^{i kappa x}).
struct Eigenpair {
  int k = 0;
  double kappa = 0.0;
  cplx lambda_plus, lambda_minus;
  // Modal eigenvector (1, lambda) for each sign.
  std::array<cplx, 2> vector_plus() const { return {1.0, lambda_plus}; }
  std::array<cplx, 2> vector_minus() const { return {1.0, lambda_minus}; }
};
Eigenpair analytic_eigenpair(int k, const SpatialGrid& grid);
Eigenpair analytic_eigenpair(int k, Normalization norm, double circumference = 1.0);

// a(x,t) = c0 + sum_j A_j cos(2 pi k_j x / C + p_j) cos(w_j t + q_j).
class Potential {
 public:
  struct Term {
    double amplitude = 0.0;
    int kx = 0;
    double phase_x = 0.0;
    double omega = 0.0;
    double phase_t = 0.0;
  };

  static Potential zero(double circumference);
  static Potential separable(double circumference, double T, double c0, std::vector<Term> terms);
  // Seeded random trigonometric field rescaled so its lattice sup equals sup_bound.
  static Potential random_bounded(double circumference, double T, std::uint64_t seed,
                                  double sup_bound, int n_terms = 4, int max_k = 4,
                                  double max_omega = 4.0);

  double operator()(double x, double t) const;
  void sample(const SpatialGrid& grid, double t, std::span<double> out) const;
  bool is_zero() const { return zero_; }
  // max |a| over a 512 x 512 space-time sampling lattice of [x0, x0 + C) x [0, T].
  double sup_norm() const { return sup_; }
  double c0() const { return c0_; }
  const std::vector<Term>& terms() const { return terms_; }
  Potential scaled(double factor) const;

 private:
  void compute_sup(double T);

  double circumference_ = 1.0;
  double c0_ = 0.0;
  std::vector<Term> terms_;
  bool zero_ = true;
  double sup_ = 0.0;
};

// forcing(t, out): nodal source values at time t. Empty function means zero.
using Forcing = std::function<void(double, std::span<double>)>;

struct BeamState {
  std::vector<double> beta;
  std::vector<double> beta_t;
  double t = 0.0;
};

struct Energy {
  double E = 0.0;            // (||beta_t||^2 + ||beta_xx||^2) / 2
  double dissipation = 0.0;  // ||beta_tx||^2
};
Energy energy(const SpatialGrid& grid, const BeamState& state);

// sqrt(sum_k m_k C ((1 + kappa^2)^3 |b_k|^2 + (1 + kappa^2) |bt_k|^2)).
double sobolev_h3h1(const SpatialGrid& grid, std::span<const double> beta,
                    std::span<const double> beta_t);
double sobolev_norm(const SpatialGrid& grid, std::span<const double> u, int order);

struct BeamTrajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> beta;
  std::vector<std::vector<double>> beta_t;
  std::vector<Energy> diagnostics;

  std::size_t size() const { return times.size(); }
  BeamState state(std::size_t i) const { return {beta[i], beta_t[i], times[i]}; }
};

enum class Scheme { etdrk2, etdrk4 };

// Exponential integrator: the 2x2 modal blocks are propagated exactly, the
// potential and forcing enter through phi-function quadratures (Cox-Matthews
// ETDRK2 or ETDRK4).
class BeamStepper {
 public:
  BeamStepper(const SpatialGrid& grid, double dt, Scheme scheme = Scheme::etdrk4,
              Signature sig = Signature::forward);

  double dt() const { return dt_; }
  const SpatialGrid& grid() const { return grid_; }

  // One step of the modal state (b, bt) from time t.
  void step_modal(std::vector<cplx>& b, std::vector<cplx>& bt, double t, const Potential& a,
                  const Forcing& f) const;
  BeamState step(const BeamState& s, const Potential& a, const Forcing& f) const;

 private:
  struct ModeCoeffs {
    Eigen::Matrix2cd E, E2;
    // Second columns (source enters beta_t only), pre-multiplied by dt.
    Eigen::Vector2cd q, f1, f2, f3;
  };
  void nonlinear(double t, std::span<const cplx> b, const Potential& a, const Forcing& f,
                 std::vector<cplx>& out) const;

  SpatialGrid grid_;
  double dt_;
  Scheme scheme_;
  std::vector<ModeCoeffs> modes_;
};

BeamState step_forward(const SpatialGrid& grid, const BeamState& state, const Potential& a,
                       const Forcing& f, double dt, Scheme scheme = Scheme::etdrk4);

struct DivergenceError : ConstructionError {
  using ConstructionError::ConstructionError;
};

struct TimeGrid {
  double t0 = 0.0;
  double t1 = 1.0;
  int n_steps = 100;
  double dt() const { return (t1 - t0) / n_steps; }
};

BeamTrajectory solve_forward(const SpatialGrid& grid, std::span<const double> beta0,
                             std::span<const double> beta1, const Potential& a,
                             const Forcing& f, const TimeGrid& tg,
                             Scheme scheme = Scheme::etdrk4);

// Sup over the trajectory of the H^3 x H^1 norm of the pointwise difference.
double trajectory_distance(const SpatialGrid& grid, const BeamTrajectory& a,
                           const BeamTrajectory& b);
double trajectory_sup_norm(const SpatialGrid& grid, const BeamTrajectory& a);

struct ContractionReport {
  double kappa = 0.0;
  // Per Picard iteration, max over windows of the relative sup-in-time
  // H^3 x H^1 distance between successive iterates.
  std::vector<double> distances;
  // Operator-norm estimate of beta_hat -> beta from L^inf(L^2) to L^inf(H^3)
  // on one window (probe maximum over Fourier modes).
  double factor = 0.0;
  // factor / (sqrt(kappa) ||a||) and the implied threshold 1 / (C^2 ||a||^2).
  double constant = 0.0;
  double kappa_star = 0.0;
  int iterations = 0;  // max over windows
  int windows = 0;
  bool contracted = true;  // factor < 1
  bool converged = true;
};

struct FixedPointOptions {
  double tol = 1e-12;
  int max_iter = 100;
  Scheme scheme = Scheme::etdrk4;
};

double probe_contraction_factor(const SpatialGrid& grid, const Potential& a, double kappa,
                                int steps_per_window, Scheme scheme = Scheme::etdrk4);

std::pair<BeamTrajectory, ContractionReport> fixed_point_solve(
    const SpatialGrid& grid, std::span<const double> beta0, std::span<const double> beta1,
    const Potential& a, const Forcing& f, const TimeGrid& tg, double kappa,
    const FixedPointOptions& opt = {});

}  // namespace dampbeam
