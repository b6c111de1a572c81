#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "dampbeam/beam.hpp"

using namespace dampbeam;

namespace {

constexpr double kPi = std::numbers::pi;

std::pair<std::vector<double>, std::vector<double>> smooth_data(const SpatialGrid& g, int max_k,
                                                                unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> b(g.n(), 0.0), bt(g.n(), 0.0);
  for (int k = 1; k <= max_k; ++k) {
    const double a1 = nd(rng) / (k * k), a2 = nd(rng) / (k * k), a3 = nd(rng) / k, a4 = nd(rng) / k;
    for (int i = 0; i < g.n(); ++i) {
      const double x = g.nodes()[i] - g.x0();
      b[i] += a1 * std::cos(g.kappa(k) * x) + a2 * std::sin(g.kappa(k) * x);
      bt[i] += a3 * std::cos(g.kappa(k) * x) + a4 * std::sin(g.kappa(k) * x);
    }
  }
  return {b, bt};
}

double rel_max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0, s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::abs(a[i] - b[i]));
    s = std::max(s, std::abs(b[i]));
  }
  return s > 0 ? d / s : d;
}

}  // namespace

TEST_CASE("transforms are mutually inverse and differentiate exactly") {
  SpatialGrid g(32, 3.0, -1.0);
  std::vector<double> u(32), du(32), d4(32);
  for (int i = 0; i < 32; ++i) {
    const double x = g.nodes()[i];
    u[i] = std::sin(g.kappa(3) * (x + 1.0)) + 0.5 * std::cos(g.kappa(5) * (x + 1.0));
    du[i] = g.kappa(3) * std::cos(g.kappa(3) * (x + 1.0)) - 2.5 * g.kappa(5) / 5.0 * std::sin(g.kappa(5) * (x + 1.0));
    d4[i] = std::pow(g.kappa(3), 4) * std::sin(g.kappa(3) * (x + 1.0)) +
            0.5 * std::pow(g.kappa(5), 4) * std::cos(g.kappa(5) * (x + 1.0));
  }
  const auto back = g.inverse(g.forward(u));
  CHECK(rel_max_diff(back, u) < 1e-14);
  CHECK(rel_max_diff(g.derivative(u, 1), du) < 1e-12);
  CHECK(rel_max_diff(g.derivative(u, 4), d4) < 1e-12);

  const auto row = g.circulant_row(2);
  const auto d2 = g.derivative(u, 2);
  for (int p = 0; p < 32; ++p) {
    double acc = 0.0;
    for (int q = 0; q < 32; ++q) acc += row[(q - p + 32) % 32] * u[q];
    CHECK(acc == doctest::Approx(d2[p]).epsilon(1e-10).scale(1.0));
  }
  CHECK(g.squared_norm(g.forward(u)) == doctest::Approx(3.0 * (0.5 + 0.125)).epsilon(1e-13));
}

TEST_CASE("grid rejects odd mode counts") {
  CHECK_THROWS_AS(SpatialGrid(31, 1.0, 0.0), ValidationError);
}

TEST_CASE("analytic eigenpairs in the unit normalisation") {
  const auto e1 = analytic_eigenpair(1, Normalization::unit);
  CHECK(e1.lambda_plus.real() == doctest::Approx(-0.5));
  CHECK(e1.lambda_plus.imag() == doctest::Approx(std::sqrt(3.0) / 2));
  const auto e2 = analytic_eigenpair(2, Normalization::unit);
  CHECK(e2.lambda_plus.real() == doctest::Approx(-2.0));
  CHECK(e2.lambda_minus.imag() == doctest::Approx(-2.0 * std::sqrt(3.0)));
  const auto e0 = analytic_eigenpair(0, Normalization::unit);
  CHECK(e0.lambda_plus == cplx(0.0));
  CHECK(e0.lambda_minus == cplx(0.0));
}

TEST_CASE("operator blocks reproduce the analytic spectrum") {
  for (auto norm : {Normalization::physical, Normalization::unit}) {
    SpatialGrid g(64, 3.0, -1.0, norm);
    const auto blocks = assemble_operator(g);
    for (int j = 0; j < g.n_modal(); ++j) {
      const auto& A = blocks[j];
      const double k2 = g.kappa(j) * g.kappa(j);
      CHECK(A.trace() == doctest::Approx(-k2));
      CHECK(A.determinant() == doctest::Approx(k2 * k2));
      Eigen::EigenSolver<Eigen::Matrix2d> es(A);
      const auto ev = analytic_eigenpair(j, g);
      for (int i = 0; i < 2; ++i) {
        const cplx mu = es.eigenvalues()(i);
        const cplx ref = mu.imag() >= 0 ? ev.lambda_plus : ev.lambda_minus;
        const double scale = std::max(std::abs(ref), 1.0);
        CHECK(std::abs(mu - ref) / scale < 1e-12);
      }
    }
  }
  const auto A0 = modal_block(0.0);
  CHECK(A0(0, 1) == 1.0);
  CHECK(A0(1, 0) == 0.0);
  CHECK(A0(1, 1) == 0.0);
  CHECK(modal_block(2.0, Signature::adjoint)(1, 1) == 4.0);
}

TEST_CASE("single mode is propagated by e^{lambda dt}") {
  SpatialGrid g(16, 2 * kPi, 0.0, Normalization::unit);
  for (auto scheme : {Scheme::etdrk2, Scheme::etdrk4}) {
    const BeamStepper st(g, 0.013, scheme);
    for (int k = 1; k < g.n_modal(); ++k) {
      const auto ev = analytic_eigenpair(k, g);
      std::vector<cplx> b(g.n_modal(), 0.0), bt(g.n_modal(), 0.0);
      b[k] = 1.0;
      bt[k] = ev.lambda_plus;
      st.step_modal(b, bt, 0.0, Potential::zero(g.circumference()), {});
      const cplx ref = std::exp(ev.lambda_plus * 0.013);
      CHECK(std::abs(b[k] - ref) <= 1e-12 * std::max(1e-300, std::abs(ref)) + 1e-300);
      CHECK(std::abs(bt[k] - ev.lambda_plus * ref) <= 1e-12 * std::abs(ev.lambda_plus * ref) + 1e-300);
    }
  }
}

TEST_CASE("zero state stays zero and k = 0 is a Jordan block") {
  SpatialGrid g(16, 3.0, -1.0);
  const auto a = Potential::separable(3.0, 1.0, 0.3, {{0.5, 1, 0.0, 1.0, 0.0}});
  BeamState z{std::vector<double>(16, 0.0), std::vector<double>(16, 0.0), 0.0};
  const auto s = step_forward(g, z, a, {}, 0.1);
  for (double v : s.beta) CHECK(v == 0.0);
  BeamState c{std::vector<double>(16, 0.7), std::vector<double>(16, -0.2), 0.0};
  const auto tr = solve_forward(g, c.beta, c.beta_t, Potential::zero(3.0), {}, {0.0, 1.0, 10});
  for (double v : tr.beta.back()) CHECK(v == doctest::Approx(0.5).epsilon(1e-13));
  for (double v : tr.beta_t.back()) CHECK(v == doctest::Approx(-0.2).epsilon(1e-13));
  CHECK_THROWS_AS(step_forward(g, z, a, {}, 0.0), ValidationError);
}

TEST_CASE("single-mode data matches the semigroup at T = 1") {
  SpatialGrid g(64, 3.0, -1.0);
  const BeamStepper st(g, 1.0 / 50, Scheme::etdrk4);
  const auto none = Potential::zero(3.0);
  for (int k = 1; k < g.n_modal(); ++k) {
    const auto ev = analytic_eigenpair(k, g);
    const cplx ref = std::exp(ev.lambda_plus);
    if (std::abs(ref) < 1e-250) break;
    std::vector<cplx> b(g.n_modal(), 0.0), bt(g.n_modal(), 0.0);
    b[k] = 1.0;
    bt[k] = ev.lambda_plus;
    for (int n = 0; n < 50; ++n) st.step_modal(b, bt, n / 50.0, none, {});
    CHECK(std::abs(b[k] - ref) / std::abs(ref) < 1e-8);
    CHECK(std::abs(bt[k] - ev.lambda_plus * ref) / std::abs(ev.lambda_plus * ref) < 1e-8);
  }
  // Nodal round trip for the slowest mode.
  const auto ev = analytic_eigenpair(1, g);
  std::vector<double> b(64), bt(64);
  for (int i = 0; i < 64; ++i) {
    const cplx m = std::exp(cplx(0.0, g.kappa(1) * (g.nodes()[i] - g.x0())));
    b[i] = m.real();
    bt[i] = (ev.lambda_plus * m).real();
  }
  const auto tr = solve_forward(g, b, bt, none, {}, {0.0, 1.0, 50});
  double err = 0.0;
  for (int i = 0; i < 64; ++i) {
    const cplx m = std::exp(ev.lambda_plus + cplx(0.0, g.kappa(1) * (g.nodes()[i] - g.x0())));
    err = std::max(err, std::abs(tr.beta.back()[i] - m.real()));
  }
  CHECK(err / std::abs(std::exp(ev.lambda_plus)) < 1e-8);
}

TEST_CASE("energy is non-increasing with an O(dt^2) identity defect") {
  SpatialGrid g(64, 3.0, -1.0);
  const auto [b, bt] = smooth_data(g, 4, 7);
  double prev_defect = 0.0;
  for (int n : {400, 800}) {
    const auto tr = solve_forward(g, b, bt, Potential::zero(3.0), {}, {0.0, 0.5, n});
    const double dt = 0.5 / n;
    double defect = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto& e0 = tr.diagnostics[i];
      const auto& e1 = tr.diagnostics[i + 1];
      CHECK(e1.E <= e0.E);
      defect = std::max(defect, std::abs((e1.E - e0.E) / dt + 0.5 * (e0.dissipation + e1.dissipation)));
    }
    if (prev_defect > 0.0) CHECK(prev_defect / defect > 3.5);
    prev_defect = defect;
  }
}

TEST_CASE("forward solve is linear in data and forcing") {
  SpatialGrid g(32, 3.0, -1.0);
  const auto a = Potential::random_bounded(3.0, 1.0, 5, 1.0);
  const auto [b, bt] = smooth_data(g, 5, 3);
  const Forcing f = [&](double t, std::span<double> o) {
    for (int i = 0; i < 32; ++i) o[i] = std::sin(g.nodes()[i]) * t;
  };
  const auto r1 = solve_forward(g, b, bt, a, {}, {0.0, 1.0, 40});
  std::vector<double> b3 = b, bt3 = bt;
  for (auto& v : b3) v *= 3;
  for (auto& v : bt3) v *= 3;
  const auto r3 = solve_forward(g, b3, bt3, a, {}, {0.0, 1.0, 40});
  for (int i = 0; i < 32; ++i) CHECK(r3.beta.back()[i] == doctest::Approx(3 * r1.beta.back()[i]).epsilon(1e-12).scale(1e-300));
  const std::vector<double> zero(32, 0.0);
  const auto rf = solve_forward(g, zero, zero, a, f, {0.0, 1.0, 40});
  const auto rsum = solve_forward(g, b, bt, a, f, {0.0, 1.0, 40});
  for (int i = 0; i < 32; ++i) {
    CHECK(rsum.beta.back()[i] == doctest::Approx(r1.beta.back()[i] + rf.beta.back()[i]).epsilon(1e-11));
  }
}

TEST_CASE("self-convergence order under dt halving") {
  SpatialGrid g(32, 3.0, -1.0);
  const auto a = Potential::separable(3.0, 1.0, 0.5, {{0.5, 1, 0.3, 2.0, 0.1}});
  const auto [b, bt] = smooth_data(g, 3, 11);
  const Forcing f = [&](double t, std::span<double> o) {
    for (int i = 0; i < 32; ++i) o[i] = std::cos(g.kappa(1) * g.nodes()[i]) * std::sin(3 * t);
  };
  for (auto scheme : {Scheme::etdrk2, Scheme::etdrk4}) {
    std::vector<std::vector<double>> finals;
    for (int n : {10, 20, 40, 80}) finals.push_back(solve_forward(g, b, bt, a, f, {0.0, 1.0, n}, scheme).beta.back());
    const double e1 = rel_max_diff(finals[1], finals[2]);
    const double e2 = rel_max_diff(finals[2], finals[3]);
    const double order = std::log2(e1 / e2);
    CHECK(order >= (scheme == Scheme::etdrk4 ? 3.5 : 1.8));
  }
}

TEST_CASE("trajectory norm over data norm is scale invariant") {
  SpatialGrid g(32, 3.0, -1.0);
  const auto a = Potential::random_bounded(3.0, 1.0, 9, 1.0);
  const auto [b, bt] = smooth_data(g, 6, 13);
  std::vector<double> ratios;
  for (double s : {1e-3, 1.0, 1e3}) {
    std::vector<double> bs = b, bts = bt;
    for (auto& v : bs) v *= s;
    for (auto& v : bts) v *= s;
    const auto tr = solve_forward(g, bs, bts, a, {}, {0.0, 1.0, 40});
    ratios.push_back(trajectory_sup_norm(g, tr) / sobolev_h3h1(g, bs, bts));
  }
  for (double r : ratios) CHECK(r == doctest::Approx(ratios[1]).epsilon(1e-10));
}

TEST_CASE("potential sup norm and seeding") {
  const auto a = Potential::random_bounded(3.0, 2.0, 42, 1.0);
  const auto b = Potential::random_bounded(3.0, 2.0, 42, 1.0);
  CHECK(a.sup_norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(a(0.3, 0.7) == b(0.3, 0.7));
  CHECK(Potential::zero(3.0).is_zero());
  CHECK(Potential::zero(3.0).sup_norm() == 0.0);
}

TEST_CASE("fixed point with a = 0 converges in one iteration") {
  SpatialGrid g(32, 3.0, -1.0);
  const auto [b, bt] = smooth_data(g, 3, 1);
  const auto [tr, rep] = fixed_point_solve(g, b, bt, Potential::zero(3.0), {}, {0.0, 0.4, 40}, 0.1);
  CHECK(rep.iterations == 1);
  CHECK(rep.factor == 0.0);
  const auto direct = solve_forward(g, b, bt, Potential::zero(3.0), {}, {0.0, 0.4, 40});
  CHECK(tr.size() == direct.size());
  CHECK(trajectory_distance(g, tr, direct) <= 1e-12 * trajectory_sup_norm(g, direct));
}

TEST_CASE("fixed point agrees with the direct solve and contracts for small windows") {
  SpatialGrid g(32, 3.0, -1.0);
  const auto a = Potential::separable(3.0, 0.5, 0.4, {{0.6, 1, 0.0, 1.0, 0.0}});
  const auto [b, bt] = smooth_data(g, 3, 2);
  const auto [tr, rep] = fixed_point_solve(g, b, bt, a, {}, {0.0, 0.5, 100}, 0.05);
  CHECK(rep.converged);
  CHECK(rep.contracted);
  CHECK(rep.windows > 1);
  for (std::size_t i = 1; i < rep.distances.size(); ++i) CHECK(rep.distances[i] < rep.distances[i - 1]);
  const auto direct = solve_forward(g, b, bt, a, {}, {0.0, 0.5, 100});
  const auto fine = solve_forward(g, b, bt, a, {}, {0.0, 0.5, 200});
  double tol = 0.0;
  for (std::size_t i = 0; i < direct.size(); ++i) {
    tol = std::max(tol, sobolev_h3h1(g, direct.beta[i], direct.beta_t[i]));
  }
  const double scheme_tol = [&] {
    double d = 0.0;
    for (std::size_t i = 0; i < direct.size(); ++i) {
      std::vector<double> db(32), dbt(32);
      for (int j = 0; j < 32; ++j) {
        db[j] = direct.beta[i][j] - fine.beta[2 * i][j];
        dbt[j] = direct.beta_t[i][j] - fine.beta_t[2 * i][j];
      }
      d = std::max(d, sobolev_h3h1(g, db, dbt));
    }
    return d;
  }();
  CHECK(trajectory_distance(g, tr, direct) <= 10.0 * scheme_tol);
  const double f_small = probe_contraction_factor(g, a, 0.0125, 8);
  const double f_big = probe_contraction_factor(g, a, 0.05, 32);
  CHECK(f_small < f_big);
}
