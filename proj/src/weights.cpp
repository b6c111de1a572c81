#include "dampbeam/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <gmpxx.h>

#include "dampbeam/jet.hpp"
#include "dampbeam/quadrature.hpp"

namespace dampbeam {

namespace {

// Unnormalised bump exp(-1/(1-w^2)) on (-1, 1).
double bump(double w) {
  const double q = 1.0 - w * w;
  return q > 0.0 ? std::exp(-1.0 / q) : 0.0;
}

const QuadratureRule& unit_rule() {
  static const QuadratureRule rule = gauss_legendre(128, 0.0, 1.0);
  return rule;
}

double bump_mass() {
  static const double mass = [] {
    double acc = 0.0;
    const auto& r = unit_rule();
    for (std::size_t i = 0; i < r.size(); ++i) acc += 2.0 * r.weights[i] * bump(2.0 * r.nodes[i] - 1.0);
    return acc;
  }();
  return mass;
}

// Normalised kernel K and its cumulative moments on [-1, z]:
//   H(z)  = int_{-1}^z K(w) dw,
//   R1(z) = int_{-1}^z (z - w) K(w) dw.
struct KernelMoments {
  double H = 0.0;
  double R1 = 0.0;
};

KernelMoments kernel_moments(double z) {
  KernelMoments m;
  if (z <= -1.0) return m;
  if (z >= 1.0) {
    m.H = 1.0;
    m.R1 = z;  // int (z - w) K = z - E[w] = z
    return m;
  }
  const double len = z + 1.0;
  const auto& r = unit_rule();
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double w = -1.0 + len * r.nodes[i];
    const double k = bump(w) * r.weights[i] * len;
    m.H += k;
    m.R1 += (z - w) * k;
  }
  const double c = 1.0 / bump_mass();
  m.H *= c;
  m.R1 *= c;
  return m;
}

// K^{(j)}(z), j = 0..4, normalised.
std::array<double, 5> kernel_derivs(double z) {
  std::array<double, 5> out{};
  if (z <= -1.0 || z >= 1.0) return out;
  const auto w = Jet<4>::variable(z);
  const auto k = exp(-(1.0 / (1.0 - w * w)));
  const double c = 1.0 / bump_mass();
  for (int j = 0; j <= 4; ++j) out[j] = c * k.derivative(j);
  return out;
}

double wrap_centered(double u, double period) {
  u = std::fmod(u, period);
  if (u > 0.5 * period) u -= period;
  if (u <= -0.5 * period) u += period;
  return u;
}

// Solve H(z) = target on (-1, 1) by bisection.
double invert_cdf(double target) {
  double lo = -1.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kernel_moments(mid).H < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

EtaProfile::Derivs EtaProfile::eval_unit(double x) const {
  const DomainSpec& dom = domain_;
  const double C = dom.circumference();
  const double y = dom.wrap(x);
  Derivs out{};

  // Base triangle wave: rises on [corner_min, corner_max], falls elsewhere.
  if (y >= corner_min_ && y <= corner_max_) {
    out[0] = slope_rise_ * (y - corner_min_);
    out[1] = slope_rise_;
  } else {
    const double past = y > corner_max_ ? y - corner_max_ : y + C - corner_max_;
    out[0] = 1.0 + slope_fall_ * past;
    out[1] = slope_fall_;
  }

  // Corner corrections: jump * (R(u) - max(u, 0)), with R the mollified ramp.
  const auto correct = [&](double corner, double jump) {
    const double u = wrap_centered(y - corner, C);
    if (std::abs(u) >= radius_) return;
    const double r = radius_;
    const double z = u / r;
    const auto m = kernel_moments(z);
    out[0] += jump * (r * m.R1 - std::max(u, 0.0));
    out[1] += jump * (m.H - (u > 0.0 ? 1.0 : 0.0));
    const auto kd = kernel_derivs(z);
    double scale = 1.0 / r;
    for (int k = 2; k <= kOrder; ++k) {
      out[k] += jump * kd[k - 2] * scale;
      scale /= r;
    }
  };
  correct(corner_max_, slope_fall_ - slope_rise_);
  correct(corner_min_, slope_rise_ - slope_fall_);
  return out;
}

EtaProfile EtaProfile::build(const DomainSpec& domain, double eta_scale, double mollify_radius) {
  domain.validate();
  if (!(eta_scale > 0.0)) throw ValidationError("eta_scale must be > 0");
  if (!(mollify_radius > 0.0)) throw ValidationError("mollify_radius must be > 0");
  if (!(mollify_radius < 0.25 * domain.L)) throw ValidationError("mollify_radius must be < L/4");

  EtaProfile p;
  p.domain_ = domain;
  p.radius_ = mollify_radius;
  p.corner_min_ = -0.5 * domain.L;
  p.corner_max_ = domain.d + 0.5 * domain.L;
  p.slope_rise_ = 1.0 / (domain.d + domain.L);
  p.slope_fall_ = -1.0 / domain.L;

  // Extrema of the mollified wave: eta' = 0 inside each corner window.
  const double sr = p.slope_rise_, sf = p.slope_fall_;
  const double umax = mollify_radius * invert_cdf(sr / (sr - sf));
  const double umin = mollify_radius * invert_cdf(-sf / (sr - sf));
  p.argmax_ = domain.wrap(p.corner_max_ + umax);
  p.argmin_ = domain.wrap(p.corner_min_ + umin);
  p.unit_max_ = p.eval_unit(p.argmax_)[0];
  p.unit_min_ = p.eval_unit(p.argmin_)[0];

  const double lo = 0.1 * eta_scale;
  p.offset_ = lo;
  p.amplitude_ = (eta_scale - lo) / (p.unit_max_ - p.unit_min_);
  p.eta_max_ = eta_scale;
  p.eta_min_ = lo;

  // Verify positivity on a fine scan and the slope floor on [0, d] and on the
  // seam point d + L (the closed complement of omega).
  const int scan = 2048;
  double min_eta = std::numeric_limits<double>::infinity();
  const double C = domain.circumference();
  for (int i = 0; i < 4 * scan; ++i) {
    min_eta = std::min(min_eta, p.eval(domain.left() + C * i / (4.0 * scan))[0]);
  }
  if (!(min_eta > 0.0)) throw ConstructionError("eta: sampled value <= 0");
  double floor = std::abs(p.eval(domain.d + domain.L)[1]);
  for (int i = 0; i <= scan; ++i) {
    floor = std::min(floor, std::abs(p.eval(domain.d * i / scan)[1]));
  }
  if (!(floor > 0.0)) throw ConstructionError("eta: slope floor on torus \\ omega is not positive");
  p.slope_floor_ = floor;
  return p;
}

EtaProfile::Derivs EtaProfile::eval(double x) const {
  Derivs u = eval_unit(x);
  u[0] = offset_ + amplitude_ * (u[0] - unit_min_);
  for (int k = 1; k <= kOrder; ++k) u[k] *= amplitude_;
  return u;
}

std::vector<EtaProfile::Derivs> EtaProfile::sample(std::span<const double> xs) const {
  std::vector<Derivs> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(eval(x));
  return out;
}

ThetaProfile::Blend hermite_blend_full(double h) {
  // q(u) = theta(h + h u); q^(k)(0) = h^k d^k/dt^k t^{-2} at t = h, q(1) = 1,
  // q^(k)(1) = 0. Solved exactly over the rationals; h is taken as its exact
  // binary value.
  using Q = mpq_class;
  const Q hq(h);
  std::array<std::array<Q, 11>, 10> A;
  const auto fallfact = [](int j, int k) {
    long f = 1;
    for (int i = 0; i < k; ++i) f *= (j - i);
    return f;
  };
  long fact = 1;
  for (int k = 0; k <= 4; ++k) {
    if (k > 0) fact *= k;
    for (int j = 0; j < 10; ++j) {
      A[k][j] = j == k ? Q(fact) : Q(0);
      A[5 + k][j] = j >= k ? Q(fallfact(j, k)) : Q(0);
    }
    // h^k (d/dt)^k t^{-2} = (-1)^k (k+1)! h^{-2}
    A[k][10] = Q((k % 2 ? -1 : 1) * fact * (k + 1)) / (hq * hq);
    A[5 + k][10] = k == 0 ? Q(1) : Q(0);
  }
  for (int col = 0; col < 10; ++col) {
    int piv = col;
    while (A[piv][col] == 0) ++piv;
    std::swap(A[piv], A[col]);
    for (int r = 0; r < 10; ++r) {
      if (r == col || A[r][col] == 0) continue;
      const Q f = A[r][col] / A[col][col];
      for (int c = col; c <= 10; ++c) A[r][c] -= f * A[col][c];
    }
  }
  std::array<Q, 10> c;
  for (int j = 0; j < 10; ++j) c[j] = A[j][10] / A[j][j];

  ThetaProfile::Blend out;
  for (int j = 0; j < 10; ++j) {
    out.at0[j] = c[j].get_d();
    // Coefficient of (u - 1)^j: sum_i binom(i, j) c_i.
    Q d = 0;
    for (int i = j; i < 10; ++i) d += Q(fallfact(i, j) / fallfact(j, j)) * c[i];
    out.at1[j] = d.get_d();
  }

  // Certification: q' < 0 on a dense interior scan, and the leading term of
  // q' at u = 1, 5 d_5 (u - 1)^4, must be negative as well.
  const auto dq = [&](double u) {
    const auto& c = u < 0.5 ? out.at0 : out.at1;
    if (u >= 0.5) u -= 1.0;
    double acc = 0.0;
    for (int j = 9; j >= 1; --j) acc = acc * u + j * c[j];
    return acc;
  };
  const int scan = 8192;
  for (int i = 1; i < scan; ++i) {
    if (!(dq(static_cast<double>(i) / scan) < 0.0)) {
      throw ConstructionError("theta: Hermite blend is not strictly monotone; reduce T0/T1");
    }
  }
  if (!(out.at1[5] < 0.0)) throw ConstructionError("theta: Hermite blend is not monotone near its end");
  return out;
}

std::array<double, 10> hermite_blend(double h) { return hermite_blend_full(h).at0; }

ThetaProfile ThetaProfile::build(const CarlemanParams& params, double T) {
  params.validate(T);
  ThetaProfile th;
  th.T_ = T;
  th.T0_ = params.T0;
  th.T1_ = params.T1;
  th.left_full_ = hermite_blend_full(params.T0);
  th.right_full_ = hermite_blend_full(params.T1);
  th.left_ = th.left_full_.at0;
  th.right_ = th.right_full_.at0;
  return th;
}

namespace {

ThetaProfile::Derivs eval_blend(const ThetaProfile::Blend& q, double u, double h) {
  ThetaProfile::Derivs out{};
  // Expand about the nearer end so the matched derivatives stay exact.
  std::array<double, 10> c = u < 0.5 ? q.at0 : q.at1;
  if (u >= 0.5) u -= 1.0;
  double scale = 1.0;
  for (int k = 0; k <= 4; ++k) {
    double acc = 0.0;
    for (int j = 9 - k; j >= 0; --j) acc = acc * u + c[j];
    out[k] = acc * scale;
    for (int j = 0; j < 9 - k; ++j) c[j] = c[j + 1] * (j + 1);
    c[9 - k] = 0.0;
    scale /= h;
  }
  return out;
}

ThetaProfile::Derivs inverse_square(double tau) {
  const auto t = Jet<4>::variable(tau);
  return (1.0 / (t * t)).derivatives();
}

}  // namespace

ThetaProfile::Derivs ThetaProfile::eval(double t) const {
  Derivs out{};
  if (t <= T0_) return inverse_square(t);
  if (t < 2 * T0_) return eval_blend(left_full_, (t - T0_) / T0_, T0_);
  if (t <= T_ - 2 * T1_) {
    out[0] = 1.0;
    return out;
  }
  // Mirror: theta(t) = Theta(T - t); odd derivatives change sign.
  const double r = T_ - t;
  out = r <= T1_ ? inverse_square(r) : eval_blend(right_full_, (r - T1_) / T1_, T1_);
  out[1] = -out[1];
  out[3] = -out[3];
  return out;
}

WeightField WeightField::evaluate(const EtaProfile& eta, const ThetaProfile& theta, double lambda,
                                  std::vector<double> xs, std::vector<double> ts) {
  if (!(lambda >= 1.0)) throw ValidationError("lambda must be >= 1");
  for (double t : ts) {
    if (!(t > 0.0 && t < theta.T())) throw ValidationError("weights: time nodes must lie in (0, T)");
  }
  WeightField w;
  w.xs_ = std::move(xs);
  w.ts_ = std::move(ts);
  w.lambda_ = lambda;
  const std::size_t nx = w.xs_.size(), nt = w.ts_.size();
  for (auto& row : w.phi_)
    for (auto& v : row) v.assign(nx * nt, 0.0);
  for (auto& row : w.xi_)
    for (auto& v : row) v.assign(nx * nt, 0.0);
  w.log_xi_.assign(nx * nt, 0.0);

  const double M = eta.eta_max();
  const double E = std::exp(6.0 * lambda * M);
  // Z(x) = e^{lambda (eta + 4M)} and Z^(b) = Z * Bell_b(lambda eta', ..., lambda eta^(b)).
  std::vector<std::array<double, kMaxX + 1>> Zb(nx);
  std::vector<double> logZ(nx);
  for (std::size_t ix = 0; ix < nx; ++ix) {
    const auto e = eta.eval(w.xs_[ix]);
    std::array<double, kMaxX + 1> g{};
    for (int k = 1; k <= kMaxX; ++k) g[k] = lambda * e[k];
    const auto bell = bell_ratios<kMaxX>(g);
    logZ[ix] = lambda * (e[0] + 4.0 * M);
    const double Z = std::exp(logZ[ix]);
    for (int b = 0; b <= kMaxX; ++b) Zb[ix][b] = Z * bell[b];
  }
  for (std::size_t it = 0; it < nt; ++it) {
    const auto th = theta.eval(w.ts_[it]);
    const double log_theta = std::log(th[0]);
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const std::size_t i = w.index(it, ix);
      w.log_xi_[i] = log_theta + logZ[ix];
      for (int a = 0; a <= kMaxT; ++a) {
        for (int b = 0; b <= kMaxX; ++b) {
          w.xi_[a][b][i] = th[a] * Zb[ix][b];
          w.phi_[a][b][i] = th[a] * ((b == 0 ? E : 0.0) - Zb[ix][b]);
        }
      }
    }
  }
  return w;
}

double WeightField::log_weight(std::size_t i, double s, double p, double sp, double lp) const {
  return sp * std::log(s) + lp * std::log(lambda_) + p * log_xi_[i] - 2.0 * s * phi_[0][0][i];
}

const BoundRecord* BoundReport::find(const std::string& id) const {
  for (const auto& r : records)
    if (r.id == id) return &r;
  return nullptr;
}

const std::vector<BoundSpec>& derivative_bound_catalogue() {
  static const std::vector<BoundSpec> cat = [] {
    std::vector<BoundSpec> out;
    for (bool on_phi : {true, false}) {
      const std::string w = on_phi ? "phi" : "xi";
      for (int i = 1; i <= 4; ++i) out.push_back({"d_x" + std::to_string(i) + "_" + w, on_phi, 0, i, i, 1.0});
      out.push_back({"d_t_" + w, on_phi, 1, 0, 0, 1.5});
      out.push_back({"d_tt_" + w, on_phi, 2, 0, 0, 2.0});
      out.push_back({"d_tx_" + w, on_phi, 1, 1, 1, 1.5});
      out.push_back({"d_txx_" + w, on_phi, 1, 2, 2, 1.5});
      out.push_back({"d_txxx_" + w, on_phi, 1, 3, 3, 1.5});
      out.push_back({"d_ttx_" + w, on_phi, 2, 1, 1, 2.0});
      out.push_back({"d_ttxx_" + w, on_phi, 2, 2, 2, 2.0});
    }
    return out;
  }();
  return cat;
}

BoundReport audit_derivative_bounds(const WeightField& w, const DomainSpec& domain) {
  BoundReport rep;
  const double lambda = w.lambda();
  const auto xi0 = w.xi();
  for (const auto& spec : derivative_bound_catalogue()) {
    const auto lhs = spec.on_phi ? w.phi(spec.a, spec.b) : w.xi(spec.a, spec.b);
    BoundRecord rec{spec.id, BoundKind::upper, lambda, 0.0, false, 0.0, 0.0};
    const double lp = std::pow(lambda, spec.lambda_power);
    for (std::size_t it = 0; it < w.nt(); ++it) {
      for (std::size_t ix = 0; ix < w.nx(); ++ix) {
        const std::size_t i = w.index(it, ix);
        const double ratio = std::abs(lhs[i]) / (lp * std::pow(xi0[i], spec.xi_power));
        if (ratio > rec.constant) {
          rec.constant = ratio;
          rec.x_at = w.xs()[ix];
          rec.t_at = w.ts()[it];
        }
      }
    }
    rec.pass = std::isfinite(rec.constant);
    rep.records.push_back(rec);
  }
  for (int i = 1; i <= 4; ++i) {
    BoundRecord pos{"positivity_x" + std::to_string(i), BoundKind::positivity, lambda,
                    std::numeric_limits<double>::infinity(), false, 0.0, 0.0};
    BoundRecord ident{"identity_x" + std::to_string(i), BoundKind::identity, lambda, 0.0, false, 0.0, 0.0};
    const double lp = std::pow(lambda, i);
    const auto dphi = w.phi(0, i);
    const auto dxi = w.xi(0, i);
    for (std::size_t it = 0; it < w.nt(); ++it) {
      for (std::size_t ix = 0; ix < w.nx(); ++ix) {
        const std::size_t k = w.index(it, ix);
        const double defect = std::abs(dphi[k] + dxi[k]);
        if (defect > ident.constant) {
          ident.constant = defect;
          ident.x_at = w.xs()[ix];
          ident.t_at = w.ts()[it];
        }
        const double x = w.xs()[ix];
        if (x < 0.0 || x > domain.d) continue;
        const double c = dxi[k] / (lp * xi0[k]);
        if (c < pos.constant) {
          pos.constant = c;
          pos.x_at = x;
          pos.t_at = w.ts()[it];
        }
      }
    }
    pos.pass = std::isfinite(pos.constant) && pos.constant > 0.0;
    ident.pass = ident.constant == 0.0;
    rep.records.push_back(pos);
    rep.records.push_back(ident);
  }
  return rep;
}

LambdaSweep sweep_lambda(const EtaProfile& eta, const ThetaProfile& theta,
                         const std::vector<double>& lambdas, const std::vector<double>& xs,
                         const std::vector<double>& ts) {
  LambdaSweep sw;
  sw.lambdas = lambdas;
  for (double lam : lambdas) {
    const auto w = WeightField::evaluate(eta, theta, lam, xs, ts);
    sw.reports.push_back(audit_derivative_bounds(w, eta.domain()));
  }
  for (const auto& spec : derivative_bound_catalogue()) {
    SweepRow row;
    row.id = spec.id;
    row.lambdas = lambdas;
    for (const auto& rep : sw.reports) row.constants.push_back(rep.find(spec.id)->constant);
    const auto [mn, mx] = std::minmax_element(row.constants.begin(), row.constants.end());
    row.variation = *mx / *mn;
    bool increasing = true;
    for (std::size_t k = 1; k < row.constants.size(); ++k)
      increasing = increasing && row.constants[k] > row.constants[k - 1];
    row.grows = increasing && row.constants.back() > 2.0 * row.constants.front();
    sw.rows.push_back(row);
  }
  // Threshold: smallest lambda such that it and every larger swept lambda pass.
  sw.positivity_found = false;
  for (std::size_t k = lambdas.size(); k-- > 0;) {
    bool ok = true;
    for (int i = 1; i <= 4; ++i) ok = ok && sw.reports[k].find("positivity_x" + std::to_string(i))->pass;
    if (!ok) break;
    sw.positivity_threshold = lambdas[k];
    sw.positivity_found = true;
  }
  return sw;
}

}  // namespace dampbeam
