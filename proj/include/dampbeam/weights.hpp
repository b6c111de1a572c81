#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "dampbeam/domain.hpp"

namespace dampbeam {

// Spatial profile eta: a triangle wave on the torus (minimum at -L/2, maximum
// at d + L/2, both in omega) mollified by a C-infinity bump of radius r around
// the two corners, then mapped affinely onto [0.1 * eta_scale, eta_scale].
// Outside the two mollified windows eta is exactly affine.
class EtaProfile {
 public:
  static constexpr int kOrder = 6;
  using Derivs = std::array<double, kOrder + 1>;

  static EtaProfile build(const DomainSpec& domain, double eta_scale, double mollify_radius);

  // eta, eta', ..., eta^(6) at x (any real x; wrapped onto the torus).
  Derivs eval(double x) const;
  std::vector<Derivs> sample(std::span<const double> xs) const;

  double eta_max() const { return eta_max_; }
  double eta_min() const { return eta_min_; }
  // Verified inf of |eta'| over the closed set torus \ omega.
  double slope_floor() const { return slope_floor_; }
  // Locations of the maximum and minimum of eta.
  double argmax() const { return argmax_; }
  double argmin() const { return argmin_; }
  const DomainSpec& domain() const { return domain_; }
  double radius() const { return radius_; }

 private:
  EtaProfile() = default;
  Derivs eval_unit(double x) const;

  DomainSpec domain_;
  double radius_ = 0.0;
  double slope_rise_ = 0.0;
  double slope_fall_ = 0.0;
  double corner_min_ = 0.0;
  double corner_max_ = 0.0;
  double unit_min_ = 0.0;
  double unit_max_ = 1.0;
  double offset_ = 0.0;
  double amplitude_ = 1.0;
  double eta_max_ = 0.0;
  double eta_min_ = 0.0;
  double slope_floor_ = 0.0;
  double argmax_ = 0.0;
  double argmin_ = 0.0;
};

// Temporal profile theta: 1/t^2 near 0, 1 on [2 T0, T - 2 T1], 1/(T-t)^2 near
// T, glued by degree-9 two-point Hermite blends (C^4 junctions).
class ThetaProfile {
 public:
  using Derivs = std::array<double, 5>;

  static ThetaProfile build(const CarlemanParams& params, double T);

  // theta and its first four derivatives at t in (0, T).
  Derivs eval(double t) const;

  double T() const { return T_; }
  double T0() const { return T0_; }
  double T1() const { return T1_; }
  std::array<double, 4> junctions() const { return {T0_, 2 * T0_, T_ - 2 * T1_, T_ - T1_}; }

  // Normalised blend polynomial q(u), u in [0, 1], coefficients in u^j.
  const std::array<double, 10>& left_blend() const { return left_; }
  const std::array<double, 10>& right_blend() const { return right_; }

  // Exact-rational blend coefficients re-expanded in powers of u and of (u - 1).
  struct Blend {
    std::array<double, 10> at0{};
    std::array<double, 10> at1{};
  };

 private:
  ThetaProfile() = default;

  double T_ = 0.0;
  double T0_ = 0.0;
  double T1_ = 0.0;
  std::array<double, 10> left_{};
  std::array<double, 10> right_{};
  Blend left_full_, right_full_;
};

// Hermite blend from the blow-up piece 1/t^2 at t = h to the constant 1 at
// t = 2h, in the normalised variable u = (t - h) / h. Throws ConstructionError
// if the blend is not strictly decreasing on (0, 1).
std::array<double, 10> hermite_blend(double h);
ThetaProfile::Blend hermite_blend_full(double h);

// Sampled Carleman weights
//   phi(x,t) = theta(t) (e^{6 lambda |eta|} - e^{lambda (eta + 4 |eta|)}),
//   xi(x,t)  = theta(t) e^{lambda (eta + 4 |eta|)},
// with all mixed derivatives d_t^a d_x^b for a <= 2, b <= 4 from closed-form
// chain rules. Arrays are time-major: index = it * nx + ix.
class WeightField {
 public:
  static constexpr int kMaxT = 2;
  static constexpr int kMaxX = 4;

  static WeightField evaluate(const EtaProfile& eta, const ThetaProfile& theta, double lambda,
                              std::vector<double> xs, std::vector<double> ts);

  std::size_t nx() const { return xs_.size(); }
  std::size_t nt() const { return ts_.size(); }
  std::size_t index(std::size_t it, std::size_t ix) const { return it * xs_.size() + ix; }
  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& ts() const { return ts_; }
  double lambda() const { return lambda_; }

  std::span<const double> phi(int a = 0, int b = 0) const { return phi_[a][b]; }
  std::span<const double> xi(int a = 0, int b = 0) const { return xi_[a][b]; }
  std::span<const double> log_xi() const { return log_xi_; }

  // log of s^sp lambda^lp xi^p e^{-2 s phi} at flat index i.
  double log_weight(std::size_t i, double s, double p, double sp, double lp) const;

 private:
  std::vector<double> xs_, ts_;
  double lambda_ = 1.0;
  std::array<std::array<std::vector<double>, kMaxX + 1>, kMaxT + 1> phi_;
  std::array<std::array<std::vector<double>, kMaxX + 1>, kMaxT + 1> xi_;
  std::vector<double> log_xi_;
};

enum class BoundKind { upper, positivity, identity };

struct BoundRecord {
  std::string id;
  BoundKind kind = BoundKind::upper;
  double lambda = 1.0;
  double constant = 0.0;  // empirical C (upper), floor c (positivity), max defect (identity)
  bool pass = false;
  double x_at = 0.0;
  double t_at = 0.0;
};

struct BoundReport {
  std::vector<BoundRecord> records;
  const BoundRecord* find(const std::string& id) const;
};

// Catalogue of the 22 upper bounds |d_t^a d_x^b w| <= C lambda^lp xi^p,
// w in {phi, xi}.
struct BoundSpec {
  std::string id;
  bool on_phi;
  int a, b;
  int lambda_power;
  double xi_power;
};
const std::vector<BoundSpec>& derivative_bound_catalogue();

BoundReport audit_derivative_bounds(const WeightField& w, const DomainSpec& domain);

struct SweepRow {
  std::string id;
  std::vector<double> lambdas;
  std::vector<double> constants;
  double variation = 0.0;  // max / min across the sweep
  bool grows = false;      // constant increases by > 2x and monotonically along the sweep
};

struct LambdaSweep {
  std::vector<double> lambdas;
  std::vector<BoundReport> reports;
  std::vector<SweepRow> rows;  // upper bounds only
  // Smallest swept lambda from which all positivity floors stay > 0.
  double positivity_threshold = 0.0;
  bool positivity_found = false;
};

LambdaSweep sweep_lambda(const EtaProfile& eta, const ThetaProfile& theta,
                         const std::vector<double>& lambdas, const std::vector<double>& xs,
                         const std::vector<double>& ts);

}  // namespace dampbeam
