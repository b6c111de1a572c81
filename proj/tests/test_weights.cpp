#include "doctest.h"

#include <cmath>
#include <vector>

#include "dampbeam/weights.hpp"

using namespace dampbeam;

namespace {

CarlemanParams params(double T0, double T1) {
  CarlemanParams p;
  p.T0 = T0;
  p.T1 = T1;
  return p;
}

std::vector<double> uniform(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * (i + 0.5) / n;
  return v;
}

}  // namespace

TEST_CASE("theta pieces take their closed-form values") {
  const auto th = ThetaProfile::build(params(0.5, 0.5), 4.0);
  CHECK(th.eval(0.25)[0] == doctest::Approx(16.0).epsilon(1e-14));
  CHECK(th.eval(0.5)[0] == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(th.eval(2.0)[0] == 1.0);
  CHECK(th.eval(3.75)[0] == doctest::Approx(16.0).epsilon(1e-14));
  CHECK(th.eval(0.25)[1] == doctest::Approx(-2.0 / std::pow(0.25, 3)));
  CHECK(th.eval(3.75)[1] == doctest::Approx(2.0 / std::pow(0.25, 3)));
}

TEST_CASE("theta rejects T0 >= 1") {
  CHECK_THROWS_AS(ThetaProfile::build(params(1.5, 0.5), 4.0), ValidationError);
  CHECK_THROWS_AS(ThetaProfile::build(params(0.5, 0.5), 1.9), ValidationError);
}

TEST_CASE("theta is C4 across junctions, monotone in the blends and >= 1") {
  for (double h : {0.1, 0.3, 0.45}) {
    const double T = 4.0 * h + 1.0;
    const auto th = ThetaProfile::build(params(h, h), T);
    for (double tj : th.junctions()) {
      const double dt = 1e-9 * h;
      const auto lo = th.eval(tj - dt);
      const auto hi = th.eval(tj + dt);
      double fact = 1.0;
      for (int k = 0; k <= 4; ++k) {
        fact *= k + 1;
        // natural size of theta^(k) near the blow-up piece: (k+1)! / h^(k+2)
        const double scale = fact / std::pow(h, k + 2);
        CHECK(std::abs(lo[k] - hi[k]) <= 1e-6 * scale);
      }
    }
    double prev = th.eval(h)[0];
    for (int i = 1; i <= 400; ++i) {
      const double v = th.eval(h + h * i / 400.0)[0];
      CHECK(v < prev + 1e-15);
      prev = v;
    }
    for (double t : uniform(0.0, T, 3000)) CHECK(th.eval(t)[0] >= 1.0 - 1e-15);
  }
}

TEST_CASE("theta derivatives match finite differences inside the blend") {
  const auto th = ThetaProfile::build(params(0.3, 0.25), 2.0);
  const double e = 1e-6;
  for (double t : {0.37, 0.51, 2.0 - 0.31, 2.0 - 0.44}) {
    for (int k = 0; k < 4; ++k) {
      const double fd = (th.eval(t + e)[k] - th.eval(t - e)[k]) / (2 * e);
      CHECK(fd == doctest::Approx(th.eval(t)[k + 1]).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("hermite blend matches its end conditions") {
  const auto q = hermite_blend(0.4);
  double one = 0.0;
  for (double c : q) one += c;
  CHECK(one == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(q[0] == doctest::Approx(1.0 / 0.16));
  CHECK(q[1] == doctest::Approx(0.4 * (-2.0 / 0.064)));
}

TEST_CASE("eta profile: positivity, extrema in omega and slope floor") {
  DomainSpec dom;
  const auto eta = EtaProfile::build(dom, 0.1, 0.1);
  CHECK(eta.eta_max() == doctest::Approx(0.1));
  CHECK(dom.in_omega(eta.argmax()));
  CHECK(dom.in_omega(eta.argmin()));
  CHECK(eta.eval(eta.argmax())[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(std::abs(eta.eval(eta.argmax())[1]) < 1e-9);
  CHECK(std::abs(eta.eval(eta.argmin())[1]) < 1e-9);
  CHECK(eta.slope_floor() > 0.0);

  double mn = 1e300, mx = -1e300;
  for (double x : uniform(-1.0, 2.0, 9000)) {
    const double v = eta.eval(x)[0];
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  CHECK(mn > 0.0);
  CHECK(mx <= 0.1 * (1 + 1e-12));
  for (int i = 0; i <= 2048; ++i) CHECK(eta.eval(i / 2048.0)[1] > 0.0);
}

TEST_CASE("eta is exactly affine on [0, d]") {
  const auto eta = EtaProfile::build(DomainSpec{}, 0.1, 0.2);
  const double slope = eta.eval(0.5)[1];
  for (double x : uniform(0.0, 1.0, 50)) {
    const auto e = eta.eval(x);
    CHECK(e[1] == doctest::Approx(slope).epsilon(1e-13));
    for (int k = 2; k <= EtaProfile::kOrder; ++k) CHECK(e[k] == 0.0);
  }
}

TEST_CASE("eta rejects a mollifier wider than L/4") {
  DomainSpec dom;
  CHECK_THROWS_AS(EtaProfile::build(dom, 0.1, 1.0), ValidationError);
  CHECK_THROWS_AS(EtaProfile::build(dom, -1.0, 0.1), ValidationError);
}

TEST_CASE("eta derivatives are consistent and periodic") {
  DomainSpec dom{1.0, 0.8, 2.0};
  const auto eta = EtaProfile::build(dom, 0.1, 0.15);
  const double e = 1e-6;
  // Points inside both corner windows.
  for (double x : {-0.4 + 0.03, -0.4 - 0.07, 1.4 + 0.05, 1.4 - 0.1, 1.4 + 0.12}) {
    for (int k = 0; k < EtaProfile::kOrder; ++k) {
      const double fd = (eta.eval(x + e)[k] - eta.eval(x - e)[k]) / (2 * e);
      const double ref = eta.eval(x)[k + 1];
      CHECK(std::abs(fd - ref) <= 1e-5 * std::max(1.0, std::abs(ref)));
    }
  }
  const double C = dom.circumference();
  const auto a = eta.eval(dom.left() + 1e-12);
  const auto b = eta.eval(dom.left() + C - 1e-12);
  for (int k = 0; k <= EtaProfile::kOrder; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-6));
}

TEST_CASE("weights satisfy the closed-form identities") {
  DomainSpec dom;
  const auto eta = EtaProfile::build(dom, 0.1, 0.1);
  const auto th = ThetaProfile::build(params(0.3, 0.3), 2.0);
  const double lambda = 2.0;
  const auto w = WeightField::evaluate(eta, th, lambda, uniform(-1.0, 2.0, 96), uniform(0.0, 2.0, 40));
  const double E = std::exp(6.0 * lambda * eta.eta_max());
  for (std::size_t it = 0; it < w.nt(); ++it) {
    const double theta = th.eval(w.ts()[it])[0];
    for (std::size_t ix = 0; ix < w.nx(); ++ix) {
      const auto i = w.index(it, ix);
      CHECK(w.phi()[i] + w.xi()[i] == doctest::Approx(theta * E).epsilon(1e-14));
      CHECK(w.phi()[i] > 0.0);
      CHECK(w.xi()[i] > 0.0);
      CHECK(std::log(w.xi()[i]) == doctest::Approx(w.log_xi()[i]).epsilon(1e-14));
      for (int a = 0; a <= 2; ++a)
        for (int b = 1; b <= 4; ++b) CHECK(w.phi(a, b)[i] == -w.xi(a, b)[i]);
    }
  }
}

TEST_CASE("weights at a spot node with eta = 0.05") {
  DomainSpec dom;
  const auto eta = EtaProfile::build(dom, 0.1, 0.1);
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (eta.eval(mid)[0] < 0.05 ? lo : hi) = mid;
  }
  const double x = 0.5 * (lo + hi);
  const auto th = ThetaProfile::build(params(0.3, 0.3), 2.0);
  const auto w = WeightField::evaluate(eta, th, 2.0, {x}, {1.0});
  CHECK(w.xi()[0] == doctest::Approx(std::exp(0.9)).epsilon(1e-12));
  CHECK(w.phi()[0] == doctest::Approx(std::exp(1.2) - std::exp(0.9)).epsilon(1e-12));
  CHECK(w.log_weight(0, 4.0, 7.0, 7.0, 8.0) ==
        doctest::Approx(7 * std::log(4.0) + 8 * std::log(2.0) + 7 * 0.9 - 8.0 * (std::exp(1.2) - std::exp(0.9))));
}

TEST_CASE("mixed derivatives match finite differences of lower orders") {
  DomainSpec dom;
  const auto eta = EtaProfile::build(dom, 0.1, 0.1);
  const auto th = ThetaProfile::build(params(0.3, 0.3), 2.0);
  const double e = 1e-6;
  const double x = 1.47, t = 0.41;
  const auto c = WeightField::evaluate(eta, th, 3.0, {x}, {t});
  const auto px = WeightField::evaluate(eta, th, 3.0, {x + e}, {t});
  const auto mx = WeightField::evaluate(eta, th, 3.0, {x - e}, {t});
  const auto pt = WeightField::evaluate(eta, th, 3.0, {x}, {t + e});
  const auto mt = WeightField::evaluate(eta, th, 3.0, {x}, {t - e});
  for (int a = 0; a <= 2; ++a) {
    for (int b = 0; b <= 4; ++b) {
      if (b < 4) {
        const double fd = (px.xi(a, b)[0] - mx.xi(a, b)[0]) / (2 * e);
        CHECK(fd == doctest::Approx(c.xi(a, b + 1)[0]).epsilon(1e-5));
      }
      if (a < 2) {
        const double fd = (pt.phi(a, b)[0] - mt.phi(a, b)[0]) / (2 * e);
        CHECK(fd == doctest::Approx(c.phi(a + 1, b)[0]).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("weights reject time nodes outside (0, T)") {
  const auto eta = EtaProfile::build(DomainSpec{}, 0.1, 0.1);
  const auto th = ThetaProfile::build(params(0.3, 0.3), 2.0);
  CHECK_THROWS_AS(WeightField::evaluate(eta, th, 2.0, {0.0}, {0.0}), ValidationError);
  CHECK_THROWS_AS(WeightField::evaluate(eta, th, 2.0, {0.0}, {2.0}), ValidationError);
}

TEST_CASE("bound audit has one record per inequality and exact identities") {
  DomainSpec dom;
  const auto eta = EtaProfile::build(dom, 0.1, 0.1);
  const auto th = ThetaProfile::build(params(0.3, 0.3), 2.0);
  const auto w = WeightField::evaluate(eta, th, 2.0, uniform(-1.0, 2.0, 128), uniform(0.0, 2.0, 64));
  const auto rep = audit_derivative_bounds(w, dom);
  const auto& cat = derivative_bound_catalogue();
  CHECK(cat.size() == 22);
  for (const auto& spec : cat) {
    int count = 0;
    for (const auto& r : rep.records) count += r.id == spec.id;
    CHECK(count == 1);
    CHECK(rep.find(spec.id)->pass);
  }
  for (int i = 1; i <= 4; ++i) {
    CHECK(rep.find("identity_x" + std::to_string(i))->pass);
    CHECK(rep.find("positivity_x" + std::to_string(i))->constant > 0.0);
  }
  // Affine eta on [0, d]: xi_x^(i) / (lambda^i xi) = (eta')^i exactly.
  const double slope = eta.eval(0.5)[1];
  CHECK(rep.find("positivity_x1")->constant == doctest::Approx(slope).epsilon(1e-12));
  CHECK(rep.find("positivity_x3")->constant == doctest::Approx(std::pow(slope, 3)).epsilon(1e-12));
}

TEST_CASE("bound constants do not increase under grid refinement of a nested grid") {
  DomainSpec dom;
  const auto eta = EtaProfile::build(dom, 0.1, 0.1);
  const auto th = ThetaProfile::build(params(0.3, 0.3), 2.0);
  double prev_dx1 = 0.0;
  for (int n : {64, 128, 256, 512}) {
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = -1.0 + 3.0 * i / n;
    const auto w = WeightField::evaluate(eta, th, 2.0, xs, uniform(0.0, 2.0, 32));
    const auto c = audit_derivative_bounds(w, dom).find("d_x2_xi")->constant;
    CHECK(std::isfinite(c));
    CHECK(c >= prev_dx1 * (1 - 1e-12));  // nested grids: sup estimates increase to the limit
    prev_dx1 = c;
  }
}

TEST_CASE("lambda sweep records a positivity threshold") {
  DomainSpec dom;
  const auto eta = EtaProfile::build(dom, 0.1, 0.1);
  const auto th = ThetaProfile::build(params(0.3, 0.3), 2.0);
  const auto sw = sweep_lambda(eta, th, {1.0, 2.0, 4.0}, uniform(-1.0, 2.0, 96), uniform(0.0, 2.0, 24));
  CHECK(sw.positivity_found);
  CHECK(sw.positivity_threshold == 1.0);
  CHECK(sw.rows.size() == derivative_bound_catalogue().size());
  const auto& row = sw.rows.front();
  CHECK(row.id == "d_x1_phi");
  CHECK(row.variation < 2.0);
}
