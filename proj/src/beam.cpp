#include "dampbeam/beam.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace dampbeam {

Eigen::Matrix2d modal_block(double kappa, Signature sig) {
  const double k2 = kappa * kappa;
  Eigen::Matrix2d A;
  A << 0.0, 1.0, -k2 * k2, sig == Signature::forward ? -k2 : k2;
  return A;
}

std::vector<Eigen::Matrix2d> assemble_operator(const SpatialGrid& grid, Signature sig) {
  std::vector<Eigen::Matrix2d> out;
  out.reserve(grid.n_modal());
  for (int j = 0; j < grid.n_modal(); ++j) out.push_back(modal_block(grid.kappa(j), sig));
  return out;
}

Eigenpair analytic_eigenpair(int k, Normalization norm, double circumference) {
  Eigenpair e;
  e.k = k;
  e.kappa = norm == Normalization::unit ? k : 2.0 * std::numbers::pi * k / circumference;
  const double k2 = e.kappa * e.kappa;
  e.lambda_plus = cplx(-k2, std::sqrt(3.0) * k2) / 2.0;
  e.lambda_minus = cplx(-k2, -std::sqrt(3.0) * k2) / 2.0;
  return e;
}

Eigenpair analytic_eigenpair(int k, const SpatialGrid& grid) {
  return analytic_eigenpair(k, grid.normalization(), grid.circumference());
}

// ---------------------------------------------------------------- potential

Potential Potential::zero(double circumference) {
  Potential p;
  p.circumference_ = circumference;
  return p;
}

Potential Potential::separable(double circumference, double T, double c0, std::vector<Term> terms) {
  if (!(circumference > 0.0) || !(T > 0.0)) throw ValidationError("potential: bad domain");
  Potential p;
  p.circumference_ = circumference;
  p.c0_ = c0;
  p.terms_ = std::move(terms);
  p.zero_ = c0 == 0.0 && std::all_of(p.terms_.begin(), p.terms_.end(),
                                     [](const Term& t) { return t.amplitude == 0.0; });
  p.compute_sup(T);
  return p;
}

Potential Potential::random_bounded(double circumference, double T, std::uint64_t seed,
                                    double sup_bound, int n_terms, int max_k, double max_omega) {
  if (!(sup_bound >= 0.0)) throw ValidationError("potential.sup_bound must be >= 0");
  if (n_terms < 1 || max_k < 0) throw ValidationError("potential: n_terms >= 1 and max_k >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> kdist(0, max_k);
  std::vector<Term> terms(n_terms);
  for (auto& t : terms) {
    t.amplitude = u(rng);
    t.kx = kdist(rng);
    t.phase_x = std::numbers::pi * u(rng);
    t.omega = max_omega * 0.5 * (1.0 + u(rng));
    t.phase_t = std::numbers::pi * u(rng);
  }
  const double c0 = 0.5 * u(rng);
  Potential p = separable(circumference, T, c0, terms);
  if (sup_bound == 0.0 || p.sup_ == 0.0) return zero(circumference);
  return p.scaled(sup_bound / p.sup_);
}

Potential Potential::scaled(double factor) const {
  Potential p = *this;
  p.c0_ *= factor;
  for (auto& t : p.terms_) t.amplitude *= factor;
  p.sup_ *= std::abs(factor);
  p.zero_ = zero_ || factor == 0.0;
  return p;
}

double Potential::operator()(double x, double t) const {
  if (zero_) return 0.0;
  double acc = c0_;
  const double w = 2.0 * std::numbers::pi / circumference_;
  for (const auto& term : terms_) {
    acc += term.amplitude * std::cos(w * term.kx * x + term.phase_x) *
           std::cos(term.omega * t + term.phase_t);
  }
  return acc;
}

void Potential::sample(const SpatialGrid& grid, double t, std::span<double> out) const {
  const auto& xs = grid.nodes();
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (*this)(xs[i], t);
}

void Potential::compute_sup(double T) {
  sup_ = 0.0;
  if (zero_) return;
  const int n = 512;
  for (int it = 0; it < n; ++it) {
    const double t = T * it / (n - 1);
    for (int ix = 0; ix < n; ++ix) sup_ = std::max(sup_, std::abs((*this)(circumference_ * ix / n, t)));
  }
}

// ---------------------------------------------------------------- norms

namespace {

Energy modal_energy(const SpatialGrid& g, std::span<const cplx> b, std::span<const cplx> bt) {
  Energy e;
  for (int j = 0; j < g.n_modal(); ++j) {
    const double k2 = g.kappa(j) * g.kappa(j);
    const double m = g.multiplicity(j);
    e.E += m * (std::norm(bt[j]) + k2 * k2 * std::norm(b[j]));
    e.dissipation += m * k2 * std::norm(bt[j]);
  }
  e.E *= 0.5 * g.circumference();
  e.dissipation *= g.circumference();
  return e;
}

double modal_h3h1_sq(const SpatialGrid& g, std::span<const cplx> b, std::span<const cplx> bt) {
  double acc = 0.0;
  for (int j = 0; j < g.n_modal(); ++j) {
    const double w = 1.0 + g.kappa(j) * g.kappa(j);
    acc += g.multiplicity(j) * (w * w * w * std::norm(b[j]) + w * std::norm(bt[j]));
  }
  return g.circumference() * acc;
}

}  // namespace

Energy energy(const SpatialGrid& grid, const BeamState& state) {
  return modal_energy(grid, grid.forward(state.beta), grid.forward(state.beta_t));
}

double sobolev_h3h1(const SpatialGrid& grid, std::span<const double> beta,
                    std::span<const double> beta_t) {
  return std::sqrt(modal_h3h1_sq(grid, grid.forward(beta), grid.forward(beta_t)));
}

double sobolev_norm(const SpatialGrid& grid, std::span<const double> u, int order) {
  const auto c = grid.forward(u);
  double acc = 0.0;
  for (int j = 0; j < grid.n_modal(); ++j) {
    acc += grid.multiplicity(j) * std::pow(1.0 + grid.kappa(j) * grid.kappa(j), order) * std::norm(c[j]);
  }
  return std::sqrt(grid.circumference() * acc);
}

// ---------------------------------------------------------------- phi functions

namespace {

constexpr int kSeriesTerms = 40;

double inv_factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f /= i;
  return f;
}

cplx phi_direct(int l, cplx z) {
  cplx p = std::exp(z);
  for (int i = 1; i <= l; ++i) p = (p - inv_factorial(i - 1)) / z;
  return p;
}

// phi_l(M) for a real 2x2 matrix through f(M) = f(z1) I + f[z1, z2] (M - z1 I).
Eigen::Matrix2cd phi_matrix(int l, const Eigen::Matrix2d& M) {
  const double tr = M.trace();
  const double det = M.determinant();
  const cplx sq = std::sqrt(cplx(tr * tr / 4.0 - det, 0.0));
  const cplx z1 = tr / 2.0 + sq, z2 = tr / 2.0 - sq;
  cplx fz1, dd;
  if (std::max(std::abs(z1), std::abs(z2)) < 1.0) {
    // Series: phi_l(z) = sum_j z^j / (j + l)!, f[z1,z2] = sum_j a_j h_{j-1}(z1, z2).
    fz1 = 0.0;
    dd = 0.0;
    cplx pow1 = 1.0, pow2 = 1.0, h = 1.0;
    for (int j = 0; j < kSeriesTerms; ++j) {
      const double a = inv_factorial(j + l);
      fz1 += a * pow1;
      if (j >= 1) {
        dd += a * h;
        pow2 *= z2;
        h = z1 * h + pow2;
      }
      pow1 *= z1;
    }
  } else {
    if (std::abs(z1 - z2) < 1e-6 * std::abs(z1))
      throw ConstructionError("phi_matrix: nearly defective block with large eigenvalues");
    fz1 = phi_direct(l, z1);
    dd = (fz1 - phi_direct(l, z2)) / (z1 - z2);
  }
  Eigen::Matrix2cd out = dd * (M.cast<cplx>() - z1 * Eigen::Matrix2cd::Identity());
  out += fz1 * Eigen::Matrix2cd::Identity();
  return out;
}

}  // namespace

// ---------------------------------------------------------------- stepper

BeamStepper::BeamStepper(const SpatialGrid& grid, double dt, Scheme scheme, Signature sig)
    : grid_(grid), dt_(dt), scheme_(scheme) {
  if (!(dt > 0.0)) throw ValidationError("step: dt must be > 0");
  modes_.resize(grid.n_modal());
  for (int j = 0; j < grid.n_modal(); ++j) {
    const Eigen::Matrix2d A = modal_block(grid.kappa(j), sig);
    auto& m = modes_[j];
    const Eigen::Matrix2d Ah = A * dt, Ah2 = A * (dt / 2.0);
    m.E = phi_matrix(0, Ah);
    m.E2 = phi_matrix(0, Ah2);
    const auto p1 = phi_matrix(1, Ah);
    const auto p2 = phi_matrix(2, Ah);
    if (scheme == Scheme::etdrk4) {
      const auto p3 = phi_matrix(3, Ah);
      m.q = (dt / 2.0) * phi_matrix(1, Ah2).col(1);
      m.f1 = dt * (p1 - 3.0 * p2 + 4.0 * p3).col(1);
      m.f2 = dt * (p2 - 2.0 * p3).col(1);
      m.f3 = dt * (-p2 + 4.0 * p3).col(1);
    } else {
      m.q = dt * p1.col(1);
      m.f1 = dt * p2.col(1);
    }
  }
}

void BeamStepper::nonlinear(double t, std::span<const cplx> b, const Potential& a,
                            const Forcing& f, std::vector<cplx>& out) const {
  const int n = grid_.n();
  out.assign(grid_.n_modal(), 0.0);
  if (a.is_zero() && !f) return;
  std::vector<double> src(n, 0.0);
  if (f) f(t, src);
  if (!a.is_zero()) {
    std::vector<double> beta(n), av(n);
    grid_.inverse(b, beta);
    a.sample(grid_, t, av);
    for (int i = 0; i < n; ++i) src[i] -= av[i] * beta[i];
  }
  grid_.forward(src, out);
}

void BeamStepper::step_modal(std::vector<cplx>& b, std::vector<cplx>& bt, double t,
                             const Potential& a, const Forcing& f) const {
  const int nm = grid_.n_modal();
  const double h = dt_;
  std::vector<cplx> Nu, Na, Nb, Nc;
  nonlinear(t, b, a, f, Nu);
  const auto apply = [&](const Eigen::Matrix2cd& E, cplx x, cplx y) {
    return Eigen::Vector2cd(E(0, 0) * x + E(0, 1) * y, E(1, 0) * x + E(1, 1) * y);
  };
  if (scheme_ == Scheme::etdrk2) {
    std::vector<cplx> ab(nm);
    for (int j = 0; j < nm; ++j) ab[j] = (apply(modes_[j].E, b[j], bt[j]) + modes_[j].q * Nu[j])(0);
    nonlinear(t + h, ab, a, f, Na);
    for (int j = 0; j < nm; ++j) {
      const auto& m = modes_[j];
      const Eigen::Vector2cd u = apply(m.E, b[j], bt[j]) + m.q * Nu[j] + m.f1 * (Na[j] - Nu[j]);
      b[j] = u(0);
      bt[j] = u(1);
    }
    return;
  }
  std::vector<Eigen::Vector2cd> sa(nm), sb(nm);
  std::vector<cplx> beta_stage(nm);
  for (int j = 0; j < nm; ++j) {
    sa[j] = apply(modes_[j].E2, b[j], bt[j]) + modes_[j].q * Nu[j];
    beta_stage[j] = sa[j](0);
  }
  nonlinear(t + h / 2, beta_stage, a, f, Na);
  for (int j = 0; j < nm; ++j) {
    sb[j] = apply(modes_[j].E2, b[j], bt[j]) + modes_[j].q * Na[j];
    beta_stage[j] = sb[j](0);
  }
  nonlinear(t + h / 2, beta_stage, a, f, Nb);
  for (int j = 0; j < nm; ++j) {
    const Eigen::Vector2cd sc = apply(modes_[j].E2, sa[j](0), sa[j](1)) + modes_[j].q * (2.0 * Nb[j] - Nu[j]);
    beta_stage[j] = sc(0);
  }
  nonlinear(t + h, beta_stage, a, f, Nc);
  for (int j = 0; j < nm; ++j) {
    const auto& m = modes_[j];
    const Eigen::Vector2cd u = apply(m.E, b[j], bt[j]) + m.f1 * Nu[j] + 2.0 * m.f2 * (Na[j] + Nb[j]) + m.f3 * Nc[j];
    b[j] = u(0);
    bt[j] = u(1);
  }
}

BeamState BeamStepper::step(const BeamState& s, const Potential& a, const Forcing& f) const {
  auto b = grid_.forward(s.beta);
  auto bt = grid_.forward(s.beta_t);
  step_modal(b, bt, s.t, a, f);
  return {grid_.inverse(b), grid_.inverse(bt), s.t + dt_};
}

BeamState step_forward(const SpatialGrid& grid, const BeamState& state, const Potential& a,
                       const Forcing& f, double dt, Scheme scheme) {
  return BeamStepper(grid, dt, scheme).step(state, a, f);
}

// ---------------------------------------------------------------- trajectories

namespace {

void record(const SpatialGrid& g, BeamTrajectory& tr, double t, std::span<const cplx> b,
            std::span<const cplx> bt) {
  tr.times.push_back(t);
  tr.beta.push_back(g.inverse(b));
  tr.beta_t.push_back(g.inverse(bt));
  tr.diagnostics.push_back(modal_energy(g, b, bt));
}

void check_sizes(const SpatialGrid& g, std::span<const double> b0, std::span<const double> b1) {
  if (static_cast<int>(b0.size()) != g.n() || static_cast<int>(b1.size()) != g.n())
    throw ValidationError("initial data size does not match grid.n_modes");
}

}  // namespace

BeamTrajectory solve_forward(const SpatialGrid& grid, std::span<const double> beta0,
                             std::span<const double> beta1, const Potential& a,
                             const Forcing& f, const TimeGrid& tg, Scheme scheme) {
  check_sizes(grid, beta0, beta1);
  if (tg.n_steps < 1 || !(tg.t1 > tg.t0)) throw ValidationError("time grid: need n_steps >= 1 and t1 > t0");
  const BeamStepper stepper(grid, tg.dt(), scheme);
  auto b = grid.forward(beta0);
  auto bt = grid.forward(beta1);
  BeamTrajectory tr;
  tr.times.reserve(tg.n_steps + 1);
  record(grid, tr, tg.t0, b, bt);
  double ref = std::sqrt(modal_h3h1_sq(grid, b, bt));
  for (int n = 0; n < tg.n_steps; ++n) {
    const double t = tg.t0 + n * tg.dt();
    stepper.step_modal(b, bt, t, a, f);
    const double norm = std::sqrt(modal_h3h1_sq(grid, b, bt));
    if (!std::isfinite(norm)) throw DivergenceError("solve_forward: non-finite state at step " + std::to_string(n + 1));
    if (ref > 0.0 && norm > 1e6 * ref) {
      throw DivergenceError("solve_forward: norm grew by more than 1e6 (step " + std::to_string(n + 1) +
                            ", t = " + std::to_string(t + tg.dt()) + ")");
    }
    record(grid, tr, tg.t0 + (n + 1) * tg.dt(), b, bt);
  }
  return tr;
}

double trajectory_distance(const SpatialGrid& grid, const BeamTrajectory& a, const BeamTrajectory& b) {
  if (a.size() != b.size()) throw std::invalid_argument("trajectory_distance: size mismatch");
  double d = 0.0;
  std::vector<double> db(grid.n()), dbt(grid.n());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int j = 0; j < grid.n(); ++j) {
      db[j] = a.beta[i][j] - b.beta[i][j];
      dbt[j] = a.beta_t[i][j] - b.beta_t[i][j];
    }
    d = std::max(d, sobolev_h3h1(grid, db, dbt));
  }
  return d;
}

double trajectory_sup_norm(const SpatialGrid& grid, const BeamTrajectory& a) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, sobolev_h3h1(grid, a.beta[i], a.beta_t[i]));
  return d;
}

// ---------------------------------------------------------------- fixed point

namespace {

// Cubic Hermite interpolation of beta in time from (beta, beta_t) samples.
void hermite_beta(const BeamTrajectory& tr, double t, std::span<double> out) {
  const double t0 = tr.times.front();
  const double h = tr.times[1] - t0;
  const std::size_t last = tr.size() - 1;
  const double r = (t - t0) / h;
  std::size_t j = static_cast<std::size_t>(std::clamp(std::floor(r), 0.0, static_cast<double>(last - 1)));
  const double s = r - static_cast<double>(j);
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = h00 * tr.beta[j][i] + h10 * h * tr.beta_t[j][i] + h01 * tr.beta[j + 1][i] +
             h11 * h * tr.beta_t[j + 1][i];
  }
}

}  // namespace

double probe_contraction_factor(const SpatialGrid& grid, const Potential& a, double kappa,
                                int steps_per_window, Scheme scheme) {
  if (a.is_zero()) return 0.0;
  const int n = grid.n();
  const std::vector<double> zero(n, 0.0);
  const Potential none = Potential::zero(grid.circumference());
  double best = 0.0;
  std::vector<double> av(n);
  for (int j = 0; j < grid.n_modal(); ++j) {
    std::vector<double> p(n);
    for (int i = 0; i < n; ++i) p[i] = std::cos(grid.kappa(j) * (grid.nodes()[i] - grid.x0()));
    const Forcing src = [&](double t, std::span<double> out) {
      a.sample(grid, t, av);
      for (int i = 0; i < n; ++i) out[i] = -av[i] * p[i];
    };
    const auto tr = solve_forward(grid, zero, zero, none, src, {0.0, kappa, steps_per_window}, scheme);
    double num = 0.0;
    for (const auto& b : tr.beta) num = std::max(num, sobolev_norm(grid, b, 3));
    best = std::max(best, num / sobolev_norm(grid, p, 0));
  }
  return best;
}

std::pair<BeamTrajectory, ContractionReport> fixed_point_solve(
    const SpatialGrid& grid, std::span<const double> beta0, std::span<const double> beta1,
    const Potential& a, const Forcing& f, const TimeGrid& tg, double kappa,
    const FixedPointOptions& opt) {
  check_sizes(grid, beta0, beta1);
  if (!(kappa > 0.0)) throw ValidationError("fixed_point: kappa must be > 0");
  const double dt = tg.dt();
  const int half = std::max(1, static_cast<int>(std::lround(kappa / (2.0 * dt))));
  const int window = 2 * half;

  ContractionReport rep;
  rep.kappa = window * dt;
  rep.factor = probe_contraction_factor(grid, a, rep.kappa, window, opt.scheme);
  if (!a.is_zero()) {
    rep.constant = rep.factor / (std::sqrt(rep.kappa) * a.sup_norm());
    rep.kappa_star = 1.0 / (rep.constant * rep.constant * a.sup_norm() * a.sup_norm());
  }
  rep.contracted = rep.factor < 1.0;

  const Potential none = Potential::zero(grid.circumference());
  const int n = grid.n();
  BeamTrajectory out;
  std::vector<double> b0(beta0.begin(), beta0.end()), b1(beta1.begin(), beta1.end());
  int start = 0;
  bool first = true;
  while (start < tg.n_steps) {
    const int end = std::min(start + window, tg.n_steps);
    const TimeGrid wg{tg.t0 + start * dt, tg.t0 + end * dt, end - start};
    BeamTrajectory prev = solve_forward(grid, b0, b1, none, f, wg, opt.scheme);
    int it = 0;
    std::vector<double> av(n), bh(n);
    for (; it < opt.max_iter;) {
      const Forcing src = [&](double t, std::span<double> o) {
        for (auto& v : o) v = 0.0;
        if (f) f(t, o);
        a.sample(grid, t, av);
        hermite_beta(prev, t, bh);
        for (int i = 0; i < n; ++i) o[i] -= av[i] * bh[i];
      };
      BeamTrajectory next = solve_forward(grid, b0, b1, none, src, wg, opt.scheme);
      const double scale = std::max(trajectory_sup_norm(grid, next), 1e-300);
      const double d = trajectory_distance(grid, next, prev) / scale;
      if (static_cast<int>(rep.distances.size()) <= it) rep.distances.push_back(0.0);
      rep.distances[it] = std::max(rep.distances[it], d);
      prev = std::move(next);
      ++it;
      if (d <= opt.tol) break;
    }
    rep.iterations = std::max(rep.iterations, it);
    if (it >= opt.max_iter && rep.distances.back() > opt.tol) rep.converged = false;
    ++rep.windows;
    const int keep = end == tg.n_steps ? end - start : half;
    for (int i = first ? 0 : 1; i <= keep; ++i) {
      out.times.push_back(prev.times[i]);
      out.beta.push_back(prev.beta[i]);
      out.beta_t.push_back(prev.beta_t[i]);
      out.diagnostics.push_back(prev.diagnostics[i]);
    }
    first = false;
    b0 = prev.beta[keep];
    b1 = prev.beta_t[keep];
    start += keep;
  }
  return {std::move(out), rep};
}

}  // namespace dampbeam
