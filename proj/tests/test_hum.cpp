#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "dampbeam/hum.hpp"

using namespace dampbeam;

namespace {

struct Instance {
  DomainSpec dom;
  CarlemanParams params;
  SpatialGrid grid;
  std::vector<double> times;
  BeamTrajectory q;
  HumSource source;
  WeightField w;
};

std::vector<double> smooth_data(const SpatialGrid& g, double c0, double c1, double c2) {
  std::vector<double> u(g.n());
  for (int j = 0; j < g.n(); ++j) {
    const double y = 2 * std::numbers::pi * (g.nodes()[j] + 1.0) / 3.0;
    u[j] = c0 + c1 * std::cos(y) + c2 * std::sin(2 * y);
  }
  return u;
}

Instance make_instance(int n_modes, int n_time, const Potential& a, double scale = 1.0) {
  DomainSpec dom;
  CarlemanParams params;
  SpatialGrid grid(n_modes, dom.circumference(), dom.left());
  const double tau = dom.T / (n_time + 1);
  std::vector<double> times;
  for (int i = 1; i <= n_time; ++i) times.push_back(i * tau);
  auto b0 = smooth_data(grid, 1.0, 0.5, 0.2);
  auto b1 = smooth_data(grid, 0.0, 0.3, -0.1);
  for (auto& v : b0) v *= scale;
  for (auto& v : b1) v *= scale;
  auto q = solve_free_q(grid, b0, b1, a, TimeGrid{0.0, dom.T, 8 * (n_time + 1)});
  const auto th1 = build_theta1(dom.T);
  auto src = assemble_source(th1, grid, q, times);
  const auto eta = EtaProfile::build(dom, 0.1, 0.1);
  const auto theta = ThetaProfile::build(params, dom.T);
  auto w = WeightField::evaluate(eta, theta, params.lambda, grid.nodes(), times);
  return {dom, params, grid, times, std::move(q), std::move(src), std::move(w)};
}

std::vector<double> random_field(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0, r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::abs(a[i] - b[i]));
    r = std::max(r, std::abs(b[i]));
  }
  return r > 0 ? d / r : d;
}

}  // namespace

TEST_CASE("theta1 plateaus, symmetry and range") {
  const auto th = build_theta1(2.0, 0.3, 0.7);
  CHECK(th(0.1) == 1.0);
  CHECK(th.eval(0.6)[1] == 0.0);
  CHECK(th.eval(0.6)[2] == 0.0);
  CHECK(th(1.4) == 0.0);
  CHECK(th(1.9) == 0.0);
  CHECK(th(1.0) == doctest::Approx(0.5).epsilon(1e-15));
  for (int i = 0; i <= 200; ++i) {
    const double t = 2.0 * i / 200.0;
    const double v = th(t);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    // symmetric about the midpoint of the transition
    CHECK(th(t) + th(2.0 - t) == doctest::Approx(1.0).epsilon(1e-13));
  }
  const double h = 1e-5;
  for (double t : {0.7, 0.9, 1.1, 1.3}) {
    CHECK((th(t + h) - th(t - h)) / (2 * h) == doctest::Approx(th.eval(t)[1]).epsilon(1e-6));
    CHECK((th.eval(t + h)[1] - th.eval(t - h)[1]) / (2 * h) == doctest::Approx(th.eval(t)[2]).epsilon(1e-5));
  }
  CHECK_THROWS_AS(build_theta1(2.0, 0.7, 0.3), ValidationError);
  CHECK_THROWS_AS(build_theta1(2.0, 0.5, 0.5), ValidationError);
}

TEST_CASE("time stencils are exact on quartics at every row") {
  const int n = 12;
  const double tau = 0.1;
  const auto d1 = TimeStencil::first(n, tau).dense();
  const auto d2 = TimeStencil::second(n, tau).dense();
  for (int p = 0; p <= 4; ++p) {
    Eigen::VectorXd u(n), du(n), ddu(n);
    for (int i = 0; i < n; ++i) {
      const double t = (i + 1) * tau;
      u[i] = std::pow(t, p);
      du[i] = p >= 1 ? p * std::pow(t, p - 1) : 0.0;
      ddu[i] = p >= 2 ? p * (p - 1) * std::pow(t, p - 2) : 0.0;
    }
    CHECK((d1 * u - du).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((d2 * u - ddu).lpNorm<Eigen::Infinity>() < 1e-8);
  }
  std::vector<double> in(n * 3), a(n * 3), b(n * 3);
  for (std::size_t i = 0; i < in.size(); ++i) in[i] = std::sin(0.3 * i);
  const auto s = TimeStencil::first(n, tau);
  s.apply(in, a, 3);
  const auto r = random_field(n * 3, 4);
  s.apply_transpose(r, b, 3);
  CHECK(dot(a, r) == doctest::Approx(dot(in, b)).epsilon(1e-13));
  CHECK_THROWS_AS(TimeStencil::first(6, tau), ValidationError);
}

TEST_CASE("free solve: zero data stays zero") {
  const SpatialGrid grid(16, 3.0, -1.0);
  const std::vector<double> z(16, 0.0);
  const auto q = solve_free_q(grid, z, z, Potential::zero(3.0), TimeGrid{0.0, 2.0, 40});
  for (const auto& b : q.beta)
    for (double v : b) CHECK(v == 0.0);
}

TEST_CASE("source vanishes on the plateaus and matches a manufactured q") {
  const SpatialGrid grid(16, 3.0, -1.0);
  const auto th = build_theta1(2.0);
  const double kap = 2 * std::numbers::pi / 3.0;
  BeamTrajectory q;
  const int steps = 200;
  for (int n = 0; n <= steps; ++n) {
    const double t = 2.0 * n / steps;
    std::vector<double> b(16), bt(16);
    for (int j = 0; j < 16; ++j) {
      b[j] = std::sin(kap * (grid.nodes()[j] + 1.0)) * t;
      bt[j] = std::sin(kap * (grid.nodes()[j] + 1.0));
    }
    q.times.push_back(t);
    q.beta.push_back(b);
    q.beta_t.push_back(bt);
  }
  const std::vector<double> times{0.2, 0.5, 0.8, 1.0, 1.3, 1.5};
  const auto f = assemble_source(th, grid, q, times);
  for (std::size_t it = 0; it < times.size(); ++it) {
    const auto c = th.eval(times[it]);
    const double t = times[it];
    for (int j = 0; j < 16; ++j) {
      const double s = std::sin(kap * (grid.nodes()[j] + 1.0));
      const double expect = -c[2] * s * t - 2 * c[1] * s - c[1] * kap * kap * s * t;
      CHECK(f.values[it * 16 + j] == doctest::Approx(expect).epsilon(1e-10).scale(1.0));
    }
    if (t < th.begin() || t > th.end())
      for (int j = 0; j < 16; ++j) CHECK(f.values[it * 16 + j] == 0.0);
  }
  CHECK_THROWS_AS(assemble_source(th, grid, q, {0.0123}), ValidationError);
}

TEST_CASE("G is self-adjoint, positive and equals its dense assembly") {
  const auto a = Potential::random_bounded(3.0, 2.0, 7, 1.0);
  auto in = make_instance(8, 16, a);
  const QuadraticSystem sys(in.grid, in.w, in.dom, a, in.source, {});
  const std::size_t N = sys.size();
  const auto p = random_field(N, 1), c = random_field(N, 2);
  std::vector<double> gp(N), gc(N);
  sys.apply(p, gp);
  sys.apply(c, gc);
  CHECK(std::abs(dot(gp, c) - dot(p, gc)) <= 1e-10 * std::abs(dot(gp, c)));
  CHECK(dot(gp, p) >= sys.eps() * dot(p, p));

  const auto G = sys.dense();
  const Eigen::Map<const Eigen::VectorXd> pv(p.data(), static_cast<int>(N));
  const Eigen::VectorXd dense_gp = G * pv;
  CHECK((dense_gp - Eigen::Map<const Eigen::VectorXd>(gp.data(), static_cast<int>(N))).norm() <=
        1e-10 * dense_gp.norm());
  CHECK((G - G.transpose()).norm() <= 1e-12 * G.norm());

  const auto band = sys.band();
  double worst = 0.0;
  for (int c2 = 0; c2 < band.n; ++c2)
    for (int r = std::max(0, c2 - band.kd); r <= c2; ++r)
      worst = std::max(worst, std::abs(band.ab[band.kd + r - c2 + c2 * (band.kd + 1)] - G(r, c2)));
  CHECK(worst <= 1e-12 * G.lpNorm<Eigen::Infinity>());
  for (int r = 0; r < band.n; ++r)
    for (int c2 = r + band.kd + 1; c2 < band.n; ++c2) CHECK(G(r, c2) == 0.0);
  const auto d = sys.diagonal();
  for (int i = 0; i < band.n; ++i) CHECK(d[i] == doctest::Approx(G(i, i)).epsilon(1e-12));
}

TEST_CASE("potential enters G through its linear and quadratic terms") {
  const auto a = Potential::random_bounded(3.0, 2.0, 9, 1.0);
  const auto zero = Potential::zero(3.0);
  auto in = make_instance(8, 16, zero);
  const QuadraticSystem s0(in.grid, in.w, in.dom, zero, in.source, {});
  const QuadraticSystem sa(in.grid, in.w, in.dom, a, in.source, {});
  const std::size_t N = s0.size();
  const auto p = random_field(N, 3);
  std::vector<double> av(N);
  for (std::size_t it = 0; it < s0.nt(); ++it)
    a.sample(in.grid, in.times[it], std::span<double>(av).subspan(it * s0.nx(), s0.nx()));
  std::vector<double> g0(N), ga(N), l0(N), tmp(N), lin(N);
  s0.apply(p, g0);
  sa.apply(p, ga);
  s0.apply_L(p, l0);
  for (std::size_t i = 0; i < N; ++i) tmp[i] = s0.w1()[i] * av[i] * p[i];
  s0.apply_Lt(tmp, lin);
  std::vector<double> expect(N);
  for (std::size_t i = 0; i < N; ++i)
    expect[i] = lin[i] + av[i] * s0.w1()[i] * l0[i] + av[i] * s0.w1()[i] * av[i] * p[i] +
                (sa.eps() - s0.eps()) * p[i];
  std::vector<double> diff(N);
  for (std::size_t i = 0; i < N; ++i) diff[i] = ga[i] - g0[i];
  CHECK(rel_diff(diff, expect) < 1e-9);
}

TEST_CASE("CG minimiser matches a dense direct solve at 8 x 16") {
  const auto a = Potential::random_bounded(3.0, 2.0, 5, 1.0);
  auto in = make_instance(8, 16, a);
  const QuadraticSystem sys(in.grid, in.w, in.dom, a, in.source, {});
  const auto G = sys.dense();
  const Eigen::Map<const Eigen::VectorXd> F(sys.rhs().data(), static_cast<int>(sys.size()));
  const Eigen::VectorXd x = G.ldlt().solve(F);
  for (auto pc : {Preconditioner::banded_cholesky, Preconditioner::jacobi}) {
    CgOptions opt;
    opt.tol = 1e-13;
    opt.max_iter = 20000;
    opt.preconditioner = pc;
    const auto sol = minimize_J(sys, opt);
    const Eigen::Map<const Eigen::VectorXd> psi(sol.psi.data(), static_cast<int>(sys.size()));
    MESSAGE("preconditioner " << static_cast<int>(pc) << ": " << sol.iterations << " iterations, "
                              << (psi - x).norm() / x.norm());
    CHECK((psi - x).norm() <= 1e-8 * x.norm());
    CHECK(sol.residual_history.size() == static_cast<std::size_t>(sol.iterations));
  }
}

TEST_CASE("minimiser: zero source, linearity, support and optimality") {
  const auto zero = Potential::zero(3.0);
  auto in = make_instance(16, 32, zero);
  HumSource none = in.source;
  std::fill(none.values.begin(), none.values.end(), 0.0);
  const auto s0 = minimize_J(QuadraticSystem(in.grid, in.w, in.dom, zero, none, {}));
  for (double v : s0.psi) CHECK(v == 0.0);
  CHECK(s0.J == 0.0);

  const QuadraticSystem sys(in.grid, in.w, in.dom, zero, in.source, {});
  CgOptions opt;
  opt.tol = 1e-12;
  const auto sol = minimize_J(sys, opt);
  CHECK(sol.converged);
  CHECK(sol.J < 0.0);
  HumSource tripled = in.source;
  for (auto& v : tripled.values) v *= 3.0;
  const auto sol3 = minimize_J(QuadraticSystem(in.grid, in.w, in.dom, zero, tripled, {}), opt);
  std::vector<double> s3(sol.psi.size()), v3(sol.v.size()), g3(sol.g_tilde.size());
  for (std::size_t i = 0; i < s3.size(); ++i) {
    s3[i] = 3.0 * sol.psi[i];
    v3[i] = 3.0 * sol.v[i];
    g3[i] = 3.0 * sol.g_tilde[i];
  }
  CHECK(rel_diff(sol3.psi, s3) < 1e-10);
  CHECK(rel_diff(sol3.v, v3) < 1e-10);
  CHECK(rel_diff(sol3.g_tilde, g3) < 1e-10);

  for (std::size_t it = 0; it < sys.nt(); ++it)
    for (std::size_t ix = 0; ix < sys.nx(); ++ix)
      if (!in.dom.in_omega(in.grid.nodes()[ix])) CHECK(sol.v[it * sys.nx() + ix] == 0.0);

  const auto dir = random_field(sol.psi.size(), 8);
  const double norm = std::sqrt(dot(sol.psi, sol.psi) / dot(dir, dir));
  for (double sgn : {-1.0, 1.0}) {
    std::vector<double> p = sol.psi;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += sgn * 1e-3 * norm * dir[i];
    CHECK(sys.functional(p) > sol.J);
  }
}

TEST_CASE("control field interpolation is exact on cubics in time") {
  ControlField c;
  c.nx = 2;
  for (int i = 0; i <= 10; ++i) {
    const double t = 0.2 * i;
    c.times.push_back(t);
    c.values.push_back(t * t * t - t);
    c.values.push_back(2.0);
  }
  std::vector<double> out(2);
  for (double t : {0.0, 0.05, 0.31, 1.0, 1.77, 2.0}) {
    c.at(t, out);
    CHECK(out[0] == doctest::Approx(t * t * t - t).epsilon(1e-12).scale(1.0));
    CHECK(out[1] == doctest::Approx(2.0).epsilon(1e-13));
  }
}

TEST_CASE("null control at 32 x 64: support, suppression, superposition and linearity") {
  NullControlConfig cfg;
  cfg.n_modes = 32;
  cfg.n_time = 64;
  const SpatialGrid grid(32, 3.0, -1.0);
  const auto b0 = smooth_data(grid, 1.0, 0.5, 0.2), b1 = smooth_data(grid, 0.0, 0.3, -0.1);
  const auto a = Potential::random_bounded(3.0, 2.0, 3, 1.0);
  const auto r = run_null_control(cfg, b0, b1, a);
  const auto& rep = r.report;
  MESSAGE("suppression " << rep.suppression_ratio << " superposition " << rep.superposition_error
                         << " bound " << rep.bound_ratio);
  CHECK(rep.support_ok);
  CHECK(rep.suppression_ratio < 1e-3);
  CHECK(rep.superposition_error < 1e-6);
  CHECK(rep.g_terminal_norm == doctest::Approx(rep.controlled_norm).epsilon(1e-3));

  std::vector<double> c0 = b0, c1 = b1;
  for (auto& v : c0) v *= 3.0;
  for (auto& v : c1) v *= 3.0;
  const auto r3 = run_null_control(cfg, c0, c1, a);
  std::vector<double> v3 = r.control.values;
  for (auto& v : v3) v *= 3.0;
  CHECK(rel_diff(r3.control.values, v3) < 1e-10);
  CHECK(r3.report.bound_ratio == doctest::Approx(rep.bound_ratio).epsilon(1e-10));

  const std::vector<double> z(32, 0.0);
  const auto rz = run_null_control(cfg, z, z, a);
  CHECK(rz.report.suppression_ratio == 1.0);
  CHECK(rz.report.control_l2 == 0.0);
}

TEST_CASE("g_tilde decays with the weight near T") {
  const auto zero = Potential::zero(3.0);
  auto in = make_instance(16, 64, zero);
  const QuadraticSystem sys(in.grid, in.w, in.dom, zero, in.source, {});
  const auto sol = minimize_J(sys);
  auto slice_max = [&](const std::vector<double>& f, std::size_t it) {
    double m = 0.0;
    for (std::size_t x = 0; x < sys.nx(); ++x) m = std::max(m, std::abs(f[it * sys.nx() + x]));
    return m;
  };
  double prev = slice_max(sol.g_tilde, sys.nt() / 2);
  for (std::size_t it = sys.nt() * 3 / 4; it < sys.nt(); ++it) {
    const double g = slice_max(sol.g_tilde, it);
    CHECK(g <= prev * (1 + 1e-12));
    prev = g;
  }
  CHECK(slice_max(sol.g_tilde, sys.nt() - 1) < 1e-100);
}
