#pragma once

#include <gmpxx.h>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dampbeam/beam.hpp"
#include "dampbeam/quadrature.hpp"
#include "dampbeam/weights.hpp"

namespace dampbeam {

// ---------------------------------------------------------------- test functions

// psi and the derivatives appearing in the estimate, at one point.
struct PsiJet {
  double psi = 0, x = 0, xx = 0, xxx = 0, xxxx = 0;
  double t = 0, tx = 0, txx = 0, tt = 0;
};

// psi(x, t) = sum_j X_j(x) e_j(t), every factor C-infinity with exact derivatives.
class TestFunction {
 public:
  // Trigonometric polynomial sum_k a_k cos(kappa_k (x - x0)) + b_k sin(kappa_k (x - x0)).
  struct Trig {
    std::vector<double> a, b;
  };
  // Bump exp(-1 / (1 - z^2)), z = (x - center) / radius, on the wrapped coordinate.
  struct Bump {
    double center = 0.0;
    double radius = 0.1;
  };
  struct Term {
    bool is_bump = false;
    Trig trig;
    Bump bump;
    std::array<double, 3> poly{};  // envelope P(u) = p0 + p1 u + p2 u^2, u = t / T
  };

  TestFunction(DomainSpec domain, std::vector<Term> terms);

  // d^m/dx^m of X_j, m = 0..4.
  std::array<double, 5> space(std::size_t j, double x) const;
  // d^n/dt^n of e_j, n = 0..2; e_j = P(u) exp(4 - 1 / (u (1 - u))).
  std::array<double, 3> time(std::size_t j, double t) const;
  PsiJet eval(double x, double t) const;
  std::size_t n_terms() const { return terms_.size(); }
  const DomainSpec& domain() const { return domain_; }

 private:
  DomainSpec domain_;
  std::vector<Term> terms_;
};

struct TestFunctionFamily {
  enum class Kind { trig, omega_bump };
  std::string id;
  Kind kind = Kind::trig;
  std::uint64_t seed = 1;
  int max_mode = 16;   // degree of the trigonometric polynomials
  int samples = 32;
  int terms = 3;       // separable terms per sample

  std::vector<TestFunction> generate(const DomainSpec& domain) const;
};

// Samples of a test function on a tensor grid, time-major (index = it * nx + ix).
struct PsiSamples {
  std::size_t nx = 0, nt = 0;
  std::vector<PsiJet> values;
};
PsiSamples sample_psi(const TestFunction& psi, const std::vector<double>& xs,
                      const std::vector<double>& ts);

// ---------------------------------------------------------------- quadrature

// Composite Gauss in x with breakpoints at -L, 0, d, d+L (omega split exactly)
// and composite Gauss in t on (0, T).
struct AuditGrid {
  QuadratureRule x, t;
  static AuditGrid build(const DomainSpec& domain, int x_panels, int t_panels, int order = 16);
};

// ---------------------------------------------------------------- terms

struct LhsBreakdown {
  // s^7 l^8 xi^7 |psi|^2, s^5 l^6 xi^5 |psi_x|^2, s^3 l^4 xi^3 (|psi_xx|^2 + |psi_t|^2),
  // s l^2 xi (|psi_tx|^2 + |psi_xxx|^2), s^-1 xi^-1 (|psi_tt|^2 + |psi_txx|^2 + |psi_xxxx|^2).
  std::array<double, 5> terms{};
  double total = 0.0;
};

struct RhsBreakdown {
  double residual = 0.0;     // |(d_tt + d_txx + d_xxxx [+ a]) psi|^2 e^{-2 s phi}
  double observation = 0.0;  // s^7 l^8 chi_omega xi^7 |psi|^2 e^{-2 s phi}
  double weighted_l2 = 0.0;  // |psi|^2 e^{-2 s phi}
  double total() const { return residual + observation; }
};

// Precomputed log-domain weights times quadrature weights for one (s, lambda).
class WeightedQuadrature {
 public:
  WeightedQuadrature(const WeightField& w, const AuditGrid& grid, const DomainSpec& domain,
                     double s, const Potential* a = nullptr);
  LhsBreakdown lhs(const PsiSamples& p) const;
  RhsBreakdown rhs(const PsiSamples& p) const;
  double s() const { return s_; }
  double lambda() const { return lambda_; }

 private:
  double s_, lambda_;
  std::array<std::vector<double>, 5> lhs_w_;
  std::vector<double> res_w_, obs_w_;
  std::vector<double> a_;  // potential at nodes (empty when absent)
};

LhsBreakdown lhs_terms(const PsiSamples& p, const WeightField& w, const AuditGrid& grid,
                       const DomainSpec& domain, double s);
RhsBreakdown rhs_terms(const PsiSamples& p, const WeightField& w, const AuditGrid& grid,
                       const DomainSpec& domain, double s, const Potential* a = nullptr);

// ---------------------------------------------------------------- audit

struct FamilyStats {
  std::string id;
  std::vector<double> ratios;
  double max = 0.0;
  double median = 0.0;
};

struct RatioReport {
  std::vector<double> s_grid, lambda_grid;
  // [il][is] family maxima.
  std::vector<std::vector<double>> calibration_max;
  std::vector<std::vector<std::vector<double>>> held_out_max;  // [family][il][is]
  // Per-sample ratios at every grid point of the calibration family and held-out families.
  std::vector<std::vector<FamilyStats>> calibration;            // [il][is]
  std::vector<std::vector<std::vector<FamilyStats>>> held_out;  // [family][il][is]
  // Smallest s per lambda from which max ratio(s_{j+1}) <= 2 max ratio(s_j) for all later j.
  std::vector<double> s_threshold;
  std::vector<bool> threshold_found;
  // Held-out max <= 10 * calibration max at every grid point.
  bool held_out_ok = true;
  std::vector<std::string> violations;
};

struct AuditSetup {
  DomainSpec domain;
  CarlemanParams params;
  double eta_scale = 0.1;
  double mollify_radius = 0.1;
  int x_panels = 8;  // per segment of [-L, 0, d, d+L]
  int t_panels = 8;
  int order = 16;
  const Potential* potential = nullptr;  // residual includes a psi when set
};

RatioReport audit_inequality(const AuditSetup& setup, const TestFunctionFamily& calibration,
                             const std::vector<TestFunctionFamily>& held_out,
                             const std::vector<double>& s_grid,
                             const std::vector<double>& lambda_grid);

// ---------------------------------------------------------------- zeta ledger

struct ZetaWitness {
  mpq_class zeta;
  std::array<mpq_class, 4> e_coeffs;  // -8+6z, -66-36z, -12+6z, -3-6z
  // Admissible windows lo < alpha < hi implied by the four absorption conditions.
  mpq_class lo1, hi1, lo2, hi2;
  mpq_class alpha1, alpha2;
  std::array<mpq_class, 4> quotients;  // each must be < 1
  std::array<mpq_class, 4> margins;    // 1 - quotient
  bool admissible = false;
  std::string violated;  // first violated condition, empty when admissible
};

ZetaWitness zeta_ledger(const mpq_class& zeta);
// Exact text: one "name = num/den" line per rational.
std::string zeta_witness_text(const ZetaWitness& w);
std::string zeta_witness_csv(const std::vector<ZetaWitness>& ws);

}  // namespace dampbeam
