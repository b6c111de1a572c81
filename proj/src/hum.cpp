#include "dampbeam/hum.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dampbeam/jet.hpp"

namespace dampbeam {

// ---------------------------------------------------------------- theta1

Theta1Cutoff::Theta1Cutoff(double T, double r0, double r1) : T_(T), r0_(r0), r1_(r1) {
  if (!(T > 0.0)) throw ValidationError("theta1: T must be > 0");
  if (!(r0 > 0.0 && r0 < r1 && r1 < 1.0)) throw ValidationError("theta1: need 0 < r0 < r1 < 1");
}

std::array<double, 3> Theta1Cutoff::eval(double t) const {
  const double width = (r1_ - r0_) * T_;
  const double u = (t - r0_ * T_) / width;
  if (u <= 0.0) return {1.0, 0.0, 0.0};
  if (u >= 1.0) return {0.0, 0.0, 0.0};
  const auto uj = Jet<2>::variable(u);
  const auto hu = exp(-1.0 * reciprocal(uj));
  const auto hv = exp(-1.0 * reciprocal(1.0 - uj));
  const auto d = (hv / (hu + hv)).derivatives();
  return {d[0], d[1] / width, d[2] / (width * width)};
}

Theta1Cutoff build_theta1(double T, double r0, double r1) { return Theta1Cutoff(T, r0, r1); }

BeamTrajectory solve_free_q(const SpatialGrid& grid, std::span<const double> beta0,
                            std::span<const double> beta1, const Potential& a, const TimeGrid& tg,
                            Scheme scheme) {
  return solve_forward(grid, beta0, beta1, a, Forcing{}, tg, scheme);
}

// ---------------------------------------------------------------- source

namespace {

std::size_t step_index(const BeamTrajectory& q, double t) {
  const double t0 = q.times.front();
  const double h = q.times[1] - t0;
  const double r = std::round((t - t0) / h);
  if (r < 0 || r >= static_cast<double>(q.size()))
    throw ValidationError("source: time " + std::to_string(t) + " outside the q trajectory");
  const auto idx = static_cast<std::size_t>(r);
  if (std::abs(q.times[idx] - t) > 1e-9 * std::max(1.0, std::abs(t)))
    throw ValidationError("source: time " + std::to_string(t) + " is not a step of q");
  return idx;
}

void source_at(const Theta1Cutoff& th, const SpatialGrid& grid, const BeamTrajectory& q,
               std::size_t idx, std::span<double> out) {
  const auto c = th.eval(q.times[idx]);
  if (c[1] == 0.0 && c[2] == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const auto qxx = grid.derivative(q.beta[idx], 2);
  for (int x = 0; x < grid.n(); ++x)
    out[x] = -c[2] * q.beta[idx][x] - 2.0 * c[1] * q.beta_t[idx][x] + c[1] * qxx[x];
}

}  // namespace

HumSource assemble_source(const Theta1Cutoff& theta1, const SpatialGrid& grid,
                          const BeamTrajectory& q, const std::vector<double>& times) {
  if (q.size() < 2) throw ValidationError("source: q trajectory needs at least two steps");
  HumSource s;
  s.nx = grid.n();
  s.times = times;
  s.values.assign(s.nx * times.size(), 0.0);
  s.support_begin = theta1.begin();
  s.support_end = theta1.end();
  for (std::size_t i = 0; i < times.size(); ++i)
    source_at(theta1, grid, q, step_index(q, times[i]),
              std::span<double>(s.values).subspan(i * s.nx, s.nx));
  return s;
}

Forcing source_forcing(const Theta1Cutoff& theta1, const SpatialGrid& grid, const BeamTrajectory& q) {
  auto qs = std::make_shared<const BeamTrajectory>(q);
  return [theta1, grid, qs](double t, std::span<double> out) {
    source_at(theta1, grid, *qs, step_index(*qs, t), out);
  };
}

// ---------------------------------------------------------------- time stencils

namespace {

constexpr double kD1Edge0[5] = {-25, 48, -36, 16, -3};
constexpr double kD1Edge1[5] = {-3, -10, 18, -6, 1};  // offsets -1..3
constexpr double kD1Mid[5] = {1, -8, 0, 8, -1};
constexpr double kD2Edge0[6] = {45, -154, 214, -156, 61, -10};
constexpr double kD2Edge1[6] = {10, -15, -4, 14, -6, 1};  // offsets -1..4
constexpr double kD2Mid[5] = {-1, 16, -30, 16, -1};

}  // namespace

TimeStencil TimeStencil::first(int n, double tau) {
  if (n < 8) throw ValidationError("time stencil: need at least 8 interior nodes");
  TimeStencil s;
  s.rows_.resize(n);
  const double c = 1.0 / (12.0 * tau);
  for (int m = 0; m < 5; ++m) {
    s.rows_[0].push_back({m, c * kD1Edge0[m]});
    s.rows_[1].push_back({m, c * kD1Edge1[m]});
    s.rows_[n - 1].push_back({n - 1 - m, -c * kD1Edge0[m]});
    s.rows_[n - 2].push_back({n - 1 - m, -c * kD1Edge1[m]});
  }
  for (int j = 2; j < n - 2; ++j)
    for (int m = 0; m < 5; ++m)
      if (kD1Mid[m] != 0.0) s.rows_[j].push_back({j - 2 + m, c * kD1Mid[m]});
  return s;
}

TimeStencil TimeStencil::second(int n, double tau) {
  if (n < 8) throw ValidationError("time stencil: need at least 8 interior nodes");
  TimeStencil s;
  s.rows_.resize(n);
  const double c = 1.0 / (12.0 * tau * tau);
  for (int m = 0; m < 6; ++m) {
    s.rows_[0].push_back({m, c * kD2Edge0[m]});
    s.rows_[1].push_back({m, c * kD2Edge1[m]});
    s.rows_[n - 1].push_back({n - 1 - m, c * kD2Edge0[m]});
    s.rows_[n - 2].push_back({n - 1 - m, c * kD2Edge1[m]});
  }
  for (int j = 2; j < n - 2; ++j)
    for (int m = 0; m < 5; ++m) s.rows_[j].push_back({j - 2 + m, c * kD2Mid[m]});
  return s;
}

void TimeStencil::apply(std::span<const double> in, std::span<double> out, std::size_t block) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < rows_.size(); ++j) {
    double* o = out.data() + j * block;
    for (const auto& [i, c] : rows_[j]) {
      const double* v = in.data() + static_cast<std::size_t>(i) * block;
      for (std::size_t x = 0; x < block; ++x) o[x] += c * v[x];
    }
  }
}

void TimeStencil::apply_transpose(std::span<const double> in, std::span<double> out,
                                  std::size_t block) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < rows_.size(); ++j) {
    const double* v = in.data() + j * block;
    for (const auto& [i, c] : rows_[j]) {
      double* o = out.data() + static_cast<std::size_t>(i) * block;
      for (std::size_t x = 0; x < block; ++x) o[x] += c * v[x];
    }
  }
}

Eigen::MatrixXd TimeStencil::dense() const {
  const int n = size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (const auto& [i, c] : rows_[j]) m(j, i) += c;
  return m;
}

// ---------------------------------------------------------------- quadratic system

namespace {

Eigen::MatrixXd circulant(const SpatialGrid& grid, int order) {
  const auto row = grid.circulant_row(order);
  const int n = grid.n();
  Eigen::MatrixXd m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) m(r, c) = row[(c - r + n) % n];
  return m;
}

double entry(const TimeStencil& s, int j, int i) {
  double v = 0.0;
  for (const auto& [col, c] : s.row(j))
    if (col == i) v += c;
  return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

QuadraticSystem::QuadraticSystem(const SpatialGrid& grid, const WeightField& w,
                                 const DomainSpec& domain, const Potential& a, const HumSource& f,
                                 const HumDiscretization& disc)
    : grid_(grid),
      nx_(grid.n()),
      nt_(w.nt()),
      tau_(w.ts().empty() ? 0.0 : w.ts().front()),
      s_(disc.s),
      times_(w.ts()),
      d1_(TimeStencil::first(static_cast<int>(w.nt()), tau_)),
      d2_(TimeStencil::second(static_cast<int>(w.nt()), tau_)),
      dxx_(circulant(grid, 2)),
      dxxxx_(circulant(grid, 4)) {
  if (!(disc.s > 0.0)) throw ValidationError("hum.s must be > 0");
  if (!(disc.eps_rel >= 0.0)) throw ValidationError("hum.eps must be >= 0");
  if (w.nx() != nx_) throw ValidationError("weight field x nodes do not match the spatial grid");
  for (std::size_t i = 0; i < nt_; ++i) {
    if (std::abs(times_[i] - (i + 1) * tau_) > 1e-12 * domain.T)
      throw ValidationError("hum time nodes must be uniform, t_i = i tau");
  }
  if (f.values.size() != nx_ * nt_) throw ValidationError("source does not match the HUM grid");
  for (std::size_t i = 0; i < nt_; ++i) {
    if (std::abs(f.times[i] - times_[i]) > 1e-12 * domain.T)
      throw ValidationError("source times do not match the HUM grid");
  }
  F_ = f.values;
  const std::size_t N = size();
  a_.assign(N, 0.0);
  if (!a.is_zero()) {
    for (std::size_t it = 0; it < nt_; ++it)
      a.sample(grid_, times_[it], std::span<double>(a_).subspan(it * nx_, nx_));
  }
  w1_.resize(N);
  w2_.resize(N);
  for (std::size_t it = 0; it < nt_; ++it) {
    for (std::size_t ix = 0; ix < nx_; ++ix) {
      const std::size_t i = w.index(it, ix);
      w1_[i] = std::exp(-2.0 * s_ * w.phi()[i]);
      w2_[i] = domain.in_omega(grid_.nodes()[ix]) ? std::exp(w.log_weight(i, s_, 7, 7, 8)) : 0.0;
    }
  }
  // Norm scale: the observation weight, which does not grow under grid refinement
  // (the diagonal of L^T W1 L grows like n^8 / tau^4).
  scale_ = *std::max_element(w2_.begin(), w2_.end());
  if (!(scale_ > 0.0)) {
    const auto d = diagonal();
    scale_ = *std::max_element(d.begin(), d.end());
  }
  eps_ = disc.eps_rel * scale_;
}

void QuadraticSystem::apply_L(std::span<const double> psi, std::span<double> out) const {
  const std::size_t N = size();
  std::vector<double> pxx(N), tmp(N);
  for (std::size_t it = 0; it < nt_; ++it) {
    const auto slice = psi.subspan(it * nx_, nx_);
    const auto d2 = grid_.derivative(slice, 2);
    const auto d4 = grid_.derivative(slice, 4);
    std::copy(d2.begin(), d2.end(), pxx.begin() + it * nx_);
    for (std::size_t x = 0; x < nx_; ++x) out[it * nx_ + x] = d4[x] + a_[it * nx_ + x] * slice[x];
  }
  d2_.apply(psi, tmp, nx_);
  for (std::size_t i = 0; i < N; ++i) out[i] += tmp[i];
  d1_.apply(pxx, tmp, nx_);
  for (std::size_t i = 0; i < N; ++i) out[i] += tmp[i];
}

void QuadraticSystem::apply_Lt(std::span<const double> r, std::span<double> out) const {
  const std::size_t N = size();
  std::vector<double> z(N);
  d2_.apply_transpose(r, out, nx_);
  d1_.apply_transpose(r, z, nx_);
  for (std::size_t it = 0; it < nt_; ++it) {
    const auto zxx = grid_.derivative(std::span<const double>(z).subspan(it * nx_, nx_), 2);
    const auto rxxxx = grid_.derivative(r.subspan(it * nx_, nx_), 4);
    for (std::size_t x = 0; x < nx_; ++x) {
      const std::size_t i = it * nx_ + x;
      out[i] += zxx[x] + rxxxx[x] + a_[i] * r[i];
    }
  }
}

void QuadraticSystem::apply(std::span<const double> psi, std::span<double> out) const {
  const std::size_t N = size();
  std::vector<double> l(N);
  apply_L(psi, l);
  for (std::size_t i = 0; i < N; ++i) l[i] *= w1_[i];
  apply_Lt(l, out);
  for (std::size_t i = 0; i < N; ++i) out[i] += (w2_[i] + eps_) * psi[i];
}

double QuadraticSystem::functional(std::span<const double> psi) const {
  std::vector<double> g(size());
  apply(psi, g);
  return (0.5 * dot(g, psi) - dot(F_, psi)) * tau_ * grid_.spacing();
}

Eigen::MatrixXd QuadraticSystem::l_block(int j, int i) const {
  const int n = static_cast<int>(nx_);
  Eigen::MatrixXd m = entry(d1_, j, i) * dxx_;
  m.diagonal().array() += entry(d2_, j, i);
  if (i == j) {
    m += dxxxx_;
    for (int x = 0; x < n; ++x) m(x, x) += a_[j * nx_ + x];
  }
  return m;
}

namespace {

std::vector<int> row_support(const TimeStencil& d1, const TimeStencil& d2, int j) {
  std::vector<int> s{j};
  for (const auto& [i, c] : d1.row(j)) s.push_back(i);
  for (const auto& [i, c] : d2.row(j)) s.push_back(i);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

}  // namespace

int QuadraticSystem::time_bandwidth() const {
  int bw = 0;
  for (int j = 0; j < static_cast<int>(nt_); ++j) {
    const auto s = row_support(d1_, d2_, j);
    bw = std::max(bw, s.back() - s.front());
  }
  return bw;
}

std::vector<double> QuadraticSystem::diagonal() const {
  std::vector<double> d(size(), 0.0);
  for (int j = 0; j < static_cast<int>(nt_); ++j) {
    const Eigen::Map<const Eigen::VectorXd> wj(w1_.data() + j * nx_, static_cast<int>(nx_));
    for (int i : row_support(d1_, d2_, j)) {
      const Eigen::MatrixXd L = l_block(j, i);
      const Eigen::VectorXd col = L.array().square().matrix().transpose() * wj;
      for (std::size_t x = 0; x < nx_; ++x) d[i * nx_ + x] += col[static_cast<int>(x)];
    }
  }
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += w2_[i] + eps_;
  return d;
}

Eigen::MatrixXd QuadraticSystem::dense() const {
  const int N = static_cast<int>(size()), n = static_cast<int>(nx_), m = static_cast<int>(nt_);
  const Eigen::MatrixXd D1 = d1_.dense(), D2 = d2_.dense();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(N, N);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      L.block(j * n, i * n, n, n) += D2(j, i) * Eigen::MatrixXd::Identity(n, n) + D1(j, i) * dxx_;
    }
    L.block(j * n, j * n, n, n) += dxxxx_;
  }
  for (int i = 0; i < N; ++i) L(i, i) += a_[i];
  const Eigen::Map<const Eigen::VectorXd> w1(w1_.data(), N), w2(w2_.data(), N);
  Eigen::MatrixXd G = L.transpose() * w1.asDiagonal() * L;
  G.diagonal() += w2;
  G.diagonal().array() += eps_;
  return G;
}

QuadraticSystem::Band QuadraticSystem::band() const {
  const int n = static_cast<int>(nx_);
  Band b;
  b.n = static_cast<int>(size());
  b.kd = (time_bandwidth() + 1) * n - 1;
  const std::size_t ld = static_cast<std::size_t>(b.kd) + 1;
  b.ab.assign(ld * b.n, 0.0);
  auto at = [&](int r, int c) -> double& {
    return b.ab[static_cast<std::size_t>(b.kd + r - c) + static_cast<std::size_t>(c) * ld];
  };
  for (int j = 0; j < static_cast<int>(nt_); ++j) {
    const auto sup = row_support(d1_, d2_, j);
    const Eigen::Map<const Eigen::VectorXd> wj(w1_.data() + j * nx_, n);
    std::vector<Eigen::MatrixXd> Lb, WL;
    for (int i : sup) {
      Lb.push_back(l_block(j, i));
      WL.push_back(wj.asDiagonal() * Lb.back());
    }
    for (std::size_t p = 0; p < sup.size(); ++p) {
      for (std::size_t q = p; q < sup.size(); ++q) {
        const Eigen::MatrixXd blk = Lb[p].transpose() * WL[q];
        const int r0 = sup[p] * n, c0 = sup[q] * n;
        for (int y = 0; y < n; ++y)
          for (int x = 0; x < (p == q ? y + 1 : n); ++x) at(r0 + x, c0 + y) += blk(x, y);
      }
    }
  }
  for (int i = 0; i < b.n; ++i) at(i, i) += w2_[i] + eps_;
  return b;
}

BandedCholesky::BandedCholesky(QuadraticSystem::Band band) : band_(std::move(band)) {
  const lapack_int info = LAPACKE_dpbtrf(LAPACK_COL_MAJOR, 'U', band_.n, band_.kd, band_.ab.data(),
                                         band_.kd + 1);
  if (info != 0) {
    throw ConstructionError("banded Cholesky failed (info " + std::to_string(info) +
                            "): system not numerically positive definite, raise hum.eps");
  }
}

void BandedCholesky::solve(std::span<const double> b, std::span<double> x) const {
  std::copy(b.begin(), b.end(), x.begin());
  const lapack_int info = LAPACKE_dpbtrs(LAPACK_COL_MAJOR, 'U', band_.n, band_.kd, 1,
                                         band_.ab.data(), band_.kd + 1, x.data(), band_.n);
  if (info != 0) throw ConstructionError("banded Cholesky solve failed");
}

// ---------------------------------------------------------------- minimisation

HumSolution minimize_J(const QuadraticSystem& sys, const CgOptions& opt) {
  if (!(opt.tol > 0.0)) throw ValidationError("hum.tol must be > 0");
  if (opt.max_iter < 1) throw ValidationError("hum.max_iter must be >= 1");
  const std::size_t N = sys.size();
  HumSolution sol;
  sol.psi.assign(N, 0.0);
  const auto& F = sys.rhs();
  const double fnorm = std::sqrt(dot(F, F));
  if (fnorm == 0.0) {
    sol.g_tilde.assign(N, 0.0);
    sol.v.assign(N, 0.0);
    sol.converged = true;
    return sol;
  }

  std::unique_ptr<BandedCholesky> chol;
  std::vector<double> jac;
  if (opt.preconditioner == Preconditioner::banded_cholesky) chol = std::make_unique<BandedCholesky>(sys.band());
  if (opt.preconditioner == Preconditioner::jacobi) jac = sys.diagonal();
  auto precond = [&](std::span<const double> r, std::span<double> z) {
    if (chol) {
      chol->solve(r, z);
    } else if (!jac.empty()) {
      for (std::size_t i = 0; i < N; ++i) z[i] = r[i] / jac[i];
    } else {
      std::copy(r.begin(), r.end(), z.begin());
    }
  };

  std::vector<double> r = F, z(N), p(N), Ap(N);
  precond(r, z);
  p = z;
  double rz = dot(r, z);
  for (int k = 0; k < opt.max_iter; ++k) {
    sys.apply(p, Ap);
    const double alpha = rz / dot(p, Ap);
    for (std::size_t i = 0; i < N; ++i) {
      sol.psi[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    const double rel = std::sqrt(dot(r, r)) / fnorm;
    sol.residual_history.push_back(rel);
    sol.iterations = k + 1;
    if (rel <= opt.tol) break;
    precond(r, z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < N; ++i) p[i] = z[i] + beta * p[i];
  }

  std::vector<double> g(N);
  sys.apply(sol.psi, g);
  double res = 0.0;
  for (std::size_t i = 0; i < N; ++i) res += (F[i] - g[i]) * (F[i] - g[i]);
  sol.relative_residual = std::sqrt(res) / fnorm;
  sol.converged = sol.relative_residual <= opt.tol;
  sol.J = sys.functional(sol.psi);

  sol.g_tilde.resize(N);
  sys.apply_L(sol.psi, sol.g_tilde);
  sol.v.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    sol.g_tilde[i] *= sys.w1()[i];
    sol.v[i] = sys.w2()[i] == 0.0 ? 0.0 : -sys.w2()[i] * sol.psi[i];
  }
  return sol;
}

// ---------------------------------------------------------------- control field

ControlField ControlField::from_solution(const QuadraticSystem& sys, const HumSolution& sol, double T) {
  ControlField c;
  c.nx = sys.nx();
  c.times.push_back(0.0);
  c.times.insert(c.times.end(), sys.times().begin(), sys.times().end());
  c.times.push_back(T);
  c.values.assign(c.nx, 0.0);
  c.values.insert(c.values.end(), sol.v.begin(), sol.v.end());
  c.values.insert(c.values.end(), c.nx, 0.0);
  return c;
}

void ControlField::at(double t, std::span<double> out) const {
  const int m = static_cast<int>(times.size());
  int j = static_cast<int>(std::upper_bound(times.begin(), times.end(), t) - times.begin()) - 1;
  j = std::clamp(j, 0, m - 2);
  const int start = std::clamp(j - 1, 0, m - 4);
  std::fill(out.begin(), out.end(), 0.0);
  for (int a = start; a < start + 4; ++a) {
    double l = 1.0;
    for (int b = start; b < start + 4; ++b)
      if (b != a) l *= (t - times[b]) / (times[a] - times[b]);
    if (l == 0.0) continue;
    const double* v = values.data() + static_cast<std::size_t>(a) * nx;
    for (std::size_t x = 0; x < nx; ++x) out[x] += l * v[x];
  }
}

Forcing ControlField::forcing() const {
  auto self = std::make_shared<const ControlField>(*this);
  return [self](double t, std::span<double> out) { self->at(t, out); };
}

double ControlField::l2_norm(double dx) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double wl = i > 0 ? times[i] - times[i - 1] : 0.0;
    const double wr = i + 1 < times.size() ? times[i + 1] - times[i] : 0.0;
    double s = 0.0;
    for (std::size_t x = 0; x < nx; ++x) s += values[i * nx + x] * values[i * nx + x];
    acc += 0.5 * (wl + wr) * s * dx;
  }
  return std::sqrt(acc);
}

// ---------------------------------------------------------------- verification

TerminalReport verify_null_control(const SpatialGrid& grid, const DomainSpec& domain,
                                   std::span<const double> beta0, std::span<const double> beta1,
                                   const Potential& a, const ControlField& v,
                                   const Theta1Cutoff& theta1, const BeamTrajectory& q,
                                   const VerifyOptions& opt) {
  if (opt.substeps < 1) throw ValidationError("verify.substeps must be >= 1");
  if (v.nx != static_cast<std::size_t>(grid.n())) throw ValidationError("control does not match the grid");
  TerminalReport rep;
  for (std::size_t ix = 0; ix < v.nx; ++ix) {
    if (domain.in_omega(grid.nodes()[ix])) continue;
    for (std::size_t it = 0; it < v.times.size(); ++it)
      if (v.values[it * v.nx + ix] != 0.0) rep.support_ok = false;
  }
  const int steps = static_cast<int>(v.times.size() - 1) * opt.substeps;
  if (q.size() != static_cast<std::size_t>(2 * steps + 1))
    throw ValidationError("q must be sampled at half steps of the verification grid");
  const TimeGrid tg{0.0, domain.T, steps};

  const auto beta = solve_forward(grid, beta0, beta1, a, v.forcing(), tg, opt.scheme);
  const Forcing vf = v.forcing();
  const Forcing ff = source_forcing(theta1, grid, q);
  const Forcing gsrc = [vf, ff](double t, std::span<double> out) {
    std::vector<double> tmp(out.size());
    vf(t, out);
    ff(t, tmp);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += tmp[i];
  };
  const std::vector<double> zero(grid.n(), 0.0);
  const auto g = solve_forward(grid, zero, zero, a, gsrc, tg, opt.scheme);

  rep.controlled_norm = sobolev_h3h1(grid, beta.beta.back(), beta.beta_t.back());
  rep.uncontrolled_norm = sobolev_h3h1(grid, q.beta.back(), q.beta_t.back());
  rep.g_terminal_norm = sobolev_h3h1(grid, g.beta.back(), g.beta_t.back());
  rep.suppression_ratio = rep.uncontrolled_norm > 0.0 ? rep.controlled_norm / rep.uncontrolled_norm : 1.0;
  double diff = 0.0, ref = 0.0;
  for (std::size_t n = 0; n < beta.size(); ++n) {
    const double th = theta1(beta.times[n]);
    for (int x = 0; x < grid.n(); ++x) {
      const double b = beta.beta[n][x];
      diff = std::max(diff, std::abs(b - (th * q.beta[2 * n][x] + g.beta[n][x])));
      ref = std::max(ref, std::abs(b));
    }
  }
  rep.superposition_error = ref > 0.0 ? diff / ref : diff;
  for (std::size_t n = 0; n < beta.size(); ++n)
    rep.norm_history.push_back({beta.times[n], sobolev_h3h1(grid, beta.beta[n], beta.beta_t[n]),
                                sobolev_h3h1(grid, q.beta[2 * n], q.beta_t[2 * n])});
  rep.data_norm = sobolev_h3h1(grid, beta0, beta1);
  rep.control_l2 = v.l2_norm(grid.spacing());
  rep.bound_ratio = rep.data_norm > 0.0 ? rep.control_l2 / rep.data_norm : 0.0;
  return rep;
}

NullControlResult run_null_control(const NullControlConfig& cfg, std::span<const double> beta0,
                                   std::span<const double> beta1, const Potential& a) {
  cfg.domain.validate();
  cfg.params.validate(cfg.domain.T);
  if (cfg.n_time < 8) throw ValidationError("grid.n_time must be >= 8");
  if (cfg.verify.substeps < 1) throw ValidationError("verify.substeps must be >= 1");
  const SpatialGrid grid(cfg.n_modes, cfg.domain.circumference(), cfg.domain.left());
  if (beta0.size() != static_cast<std::size_t>(grid.n()) || beta1.size() != beta0.size())
    throw ValidationError("initial data size must equal grid.n_modes");
  NullControlResult out;
  const double T = cfg.domain.T;
  const double tau = T / (cfg.n_time + 1);
  for (int i = 1; i <= cfg.n_time; ++i) out.times.push_back(i * tau);

  const int steps = (cfg.n_time + 1) * cfg.verify.substeps;
  out.q = solve_free_q(grid, beta0, beta1, a, TimeGrid{0.0, T, 2 * steps}, cfg.verify.scheme);
  const auto theta1 = build_theta1(T, cfg.r0, cfg.r1);
  out.source = assemble_source(theta1, grid, out.q, out.times);

  const auto eta = EtaProfile::build(cfg.domain, cfg.eta_scale, cfg.mollify_radius);
  const auto theta = ThetaProfile::build(cfg.params, T);
  const auto w = WeightField::evaluate(eta, theta, cfg.params.lambda, grid.nodes(), out.times);
  HumDiscretization disc = cfg.disc;
  disc.s = cfg.params.s;
  const QuadraticSystem sys(grid, w, cfg.domain, a, out.source, disc);
  out.eps = sys.eps();
  out.solution = minimize_J(sys, cfg.cg);
  out.control = ControlField::from_solution(sys, out.solution, T);
  out.report = verify_null_control(grid, cfg.domain, beta0, beta1, a, out.control, theta1, out.q, cfg.verify);
  return out;
}

}  // namespace dampbeam
