#include "dampbeam/carleman_audit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "dampbeam/jet.hpp"

namespace dampbeam {

TestFunction::TestFunction(DomainSpec domain, std::vector<Term> terms)
    : domain_(domain), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    if (t.is_bump && !(t.bump.radius > 0.0)) throw ValidationError("bump.radius must be > 0");
    if (!t.is_bump && t.trig.a.size() != t.trig.b.size())
      throw ValidationError("trig coefficients a and b must have equal length");
  }
}

std::array<double, 5> TestFunction::space(std::size_t j, double x) const {
  const Term& term = terms_.at(j);
  std::array<double, 5> out{};
  if (term.is_bump) {
    const double z = (domain_.wrap(x) - term.bump.center) / term.bump.radius;
    if (std::abs(z) >= 1.0) return out;
    auto zj = Jet<4>::variable(z);
    const auto b = exp(-1.0 * reciprocal(1.0 - zj * zj)).derivatives();
    double scale = 1.0;
    for (int m = 0; m <= 4; ++m) {
      out[m] = b[m] * scale * std::exp(1.0);
      scale /= term.bump.radius;
    }
    return out;
  }
  const double C = domain_.circumference();
  const double y = x - domain_.left();
  for (std::size_t k = 0; k < term.trig.a.size(); ++k) {
    const double kap = 2.0 * std::numbers::pi * static_cast<double>(k) / C;
    const double c = std::cos(kap * y), s = std::sin(kap * y);
    const double a = term.trig.a[k], b = term.trig.b[k];
    // d^m/dx^m of a cos + b sin cycles through (c, -s, -c, s).
    const double v0 = a * c + b * s;
    const double v1 = -a * s + b * c;
    const double k2 = kap * kap;
    out[0] += v0;
    out[1] += kap * v1;
    out[2] -= k2 * v0;
    out[3] -= k2 * kap * v1;
    out[4] += k2 * k2 * v0;
  }
  return out;
}

std::array<double, 3> TestFunction::time(std::size_t j, double t) const {
  const Term& term = terms_.at(j);
  const double T = domain_.T;
  const double u = t / T;
  std::array<double, 3> out{};
  if (!(u > 0.0 && u < 1.0)) return out;
  auto uj = Jet<2>::variable(u);
  const auto& p = term.poly;
  const auto env = exp(4.0 - reciprocal(uj * (1.0 - uj)));
  const auto e = (p[0] + p[1] * uj + p[2] * uj * uj) * env;
  const auto d = e.derivatives();
  out[0] = d[0];
  out[1] = d[1] / T;
  out[2] = d[2] / (T * T);
  return out;
}

PsiJet TestFunction::eval(double x, double t) const {
  PsiJet r;
  for (std::size_t j = 0; j < terms_.size(); ++j) {
    const auto X = space(j, x);
    const auto e = time(j, t);
    r.psi += X[0] * e[0];
    r.x += X[1] * e[0];
    r.xx += X[2] * e[0];
    r.xxx += X[3] * e[0];
    r.xxxx += X[4] * e[0];
    r.t += X[0] * e[1];
    r.tx += X[1] * e[1];
    r.txx += X[2] * e[1];
    r.tt += X[0] * e[2];
  }
  return r;
}

std::vector<TestFunction> TestFunctionFamily::generate(const DomainSpec& domain) const {
  if (samples < 1) throw ValidationError("family.samples must be >= 1");
  if (terms < 1) throw ValidationError("family.terms must be >= 1");
  if (max_mode < 0) throw ValidationError("family.max_mode must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<TestFunction> out;
  out.reserve(samples);
  for (int n = 0; n < samples; ++n) {
    std::vector<TestFunction::Term> ts;
    for (int j = 0; j < terms; ++j) {
      TestFunction::Term t;
      if (kind == Kind::omega_bump) {
        t.is_bump = true;
        const double r = domain.L * (0.1 + 0.3 * unif(rng));
        const bool left = unif(rng) < 0.5;
        const double lo = left ? -domain.L + r : domain.d + r;
        const double hi = left ? -r : domain.d + domain.L - r;
        t.bump.center = lo + (hi - lo) * unif(rng);
        t.bump.radius = r;
      } else {
        t.trig.a.resize(max_mode + 1);
        t.trig.b.resize(max_mode + 1);
        for (int k = 0; k <= max_mode; ++k) {
          t.trig.a[k] = gauss(rng);
          t.trig.b[k] = k == 0 ? 0.0 : gauss(rng);
        }
      }
      for (auto& c : t.poly) c = gauss(rng);
      ts.push_back(std::move(t));
    }
    out.emplace_back(domain, std::move(ts));
  }
  return out;
}

PsiSamples sample_psi(const TestFunction& psi, const std::vector<double>& xs,
                      const std::vector<double>& ts) {
  PsiSamples p;
  p.nx = xs.size();
  p.nt = ts.size();
  p.values.assign(p.nx * p.nt, PsiJet{});
  std::vector<std::array<double, 5>> X(p.nx);
  std::vector<std::array<double, 3>> E(p.nt);
  for (std::size_t j = 0; j < psi.n_terms(); ++j) {
    for (std::size_t ix = 0; ix < p.nx; ++ix) X[ix] = psi.space(j, xs[ix]);
    for (std::size_t it = 0; it < p.nt; ++it) E[it] = psi.time(j, ts[it]);
    for (std::size_t it = 0; it < p.nt; ++it) {
      const auto& e = E[it];
      if (e[0] == 0.0 && e[1] == 0.0 && e[2] == 0.0) continue;
      for (std::size_t ix = 0; ix < p.nx; ++ix) {
        const auto& x = X[ix];
        PsiJet& r = p.values[it * p.nx + ix];
        r.psi += x[0] * e[0];
        r.x += x[1] * e[0];
        r.xx += x[2] * e[0];
        r.xxx += x[3] * e[0];
        r.xxxx += x[4] * e[0];
        r.t += x[0] * e[1];
        r.tx += x[1] * e[1];
        r.txx += x[2] * e[1];
        r.tt += x[0] * e[2];
      }
    }
  }
  return p;
}

AuditGrid AuditGrid::build(const DomainSpec& domain, int x_panels, int t_panels, int order) {
  domain.validate();
  if (x_panels < 1) throw ValidationError("x_panels must be >= 1");
  if (t_panels < 1) throw ValidationError("t_panels must be >= 1");
  AuditGrid g;
  g.x = composite_gauss({-domain.L, 0.0, domain.d, domain.d + domain.L}, x_panels, order);
  g.t = composite_gauss({0.0, domain.T}, t_panels, order);
  return g;
}

WeightedQuadrature::WeightedQuadrature(const WeightField& w, const AuditGrid& grid,
                                       const DomainSpec& domain, double s, const Potential* a)
    : s_(s), lambda_(w.lambda()) {
  if (!(s > 0.0)) throw ValidationError("s must be > 0");
  const std::size_t nx = w.nx(), nt = w.nt();
  if (nx != grid.x.size() || nt != grid.t.size())
    throw ValidationError("weight field does not match the audit grid");
  static constexpr std::array<std::array<double, 3>, 5> powers{
      {{7, 7, 8}, {5, 5, 6}, {3, 3, 4}, {1, 1, 2}, {-1, -1, 0}}};
  for (auto& v : lhs_w_) v.resize(nx * nt);
  res_w_.resize(nx * nt);
  obs_w_.resize(nx * nt);
  if (a && !a->is_zero()) a_.resize(nx * nt);
  for (std::size_t it = 0; it < nt; ++it) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const std::size_t i = w.index(it, ix);
      const double qw = grid.x.weights[ix] * grid.t.weights[it];
      for (int p = 0; p < 5; ++p)
        lhs_w_[p][i] = std::exp(w.log_weight(i, s, powers[p][0], powers[p][1], powers[p][2])) * qw;
      res_w_[i] = std::exp(-2.0 * s * w.phi()[i]) * qw;
      obs_w_[i] = domain.in_omega(grid.x.nodes[ix]) ? lhs_w_[0][i] : 0.0;
      if (!a_.empty()) a_[i] = (*a)(grid.x.nodes[ix], grid.t.nodes[it]);
    }
  }
}

LhsBreakdown WeightedQuadrature::lhs(const PsiSamples& p) const {
  if (p.values.size() != res_w_.size()) throw ValidationError("samples do not match the grid");
  LhsBreakdown b;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const PsiJet& v = p.values[i];
    b.terms[0] += lhs_w_[0][i] * v.psi * v.psi;
    b.terms[1] += lhs_w_[1][i] * v.x * v.x;
    b.terms[2] += lhs_w_[2][i] * (v.xx * v.xx + v.t * v.t);
    b.terms[3] += lhs_w_[3][i] * (v.tx * v.tx + v.xxx * v.xxx);
    b.terms[4] += lhs_w_[4][i] * (v.tt * v.tt + v.txx * v.txx + v.xxxx * v.xxxx);
  }
  for (double t : b.terms) b.total += t;
  return b;
}

RhsBreakdown WeightedQuadrature::rhs(const PsiSamples& p) const {
  if (p.values.size() != res_w_.size()) throw ValidationError("samples do not match the grid");
  RhsBreakdown r;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const PsiJet& v = p.values[i];
    double res = v.tt + v.txx + v.xxxx;
    if (!a_.empty()) res += a_[i] * v.psi;
    r.residual += res_w_[i] * res * res;
    r.observation += obs_w_[i] * v.psi * v.psi;
    r.weighted_l2 += res_w_[i] * v.psi * v.psi;
  }
  return r;
}

LhsBreakdown lhs_terms(const PsiSamples& p, const WeightField& w, const AuditGrid& grid,
                       const DomainSpec& domain, double s) {
  return WeightedQuadrature(w, grid, domain, s).lhs(p);
}

RhsBreakdown rhs_terms(const PsiSamples& p, const WeightField& w, const AuditGrid& grid,
                       const DomainSpec& domain, double s, const Potential* a) {
  return WeightedQuadrature(w, grid, domain, s, a).rhs(p);
}

namespace {

void finish(FamilyStats& f) {
  if (f.ratios.empty()) return;
  f.max = *std::max_element(f.ratios.begin(), f.ratios.end());
  std::vector<double> tmp = f.ratios;
  const auto mid = tmp.begin() + static_cast<std::ptrdiff_t>(tmp.size() / 2);
  std::nth_element(tmp.begin(), mid, tmp.end());
  f.median = *mid;
}

}  // namespace

RatioReport audit_inequality(const AuditSetup& setup, const TestFunctionFamily& calibration,
                             const std::vector<TestFunctionFamily>& held_out,
                             const std::vector<double>& s_grid,
                             const std::vector<double>& lambda_grid) {
  setup.domain.validate();
  setup.params.validate(setup.domain.T);
  if (s_grid.empty()) throw ValidationError("s_grid must not be empty");
  if (lambda_grid.empty()) throw ValidationError("lambda_grid must not be empty");
  const auto eta = EtaProfile::build(setup.domain, setup.eta_scale, setup.mollify_radius);
  const auto theta = ThetaProfile::build(setup.params, setup.domain.T);
  const auto grid = AuditGrid::build(setup.domain, setup.x_panels, setup.t_panels, setup.order);

  const std::size_t nl = lambda_grid.size(), ns = s_grid.size(), nf = held_out.size();
  std::vector<WeightedQuadrature> wq;
  wq.reserve(nl * ns);
  for (double lam : lambda_grid) {
    const auto w = WeightField::evaluate(eta, theta, lam, grid.x.nodes, grid.t.nodes);
    for (double s : s_grid) wq.emplace_back(w, grid, setup.domain, s, setup.potential);
  }

  RatioReport rep;
  rep.s_grid = s_grid;
  rep.lambda_grid = lambda_grid;
  auto run_family = [&](const TestFunctionFamily& fam) {
    std::vector<std::vector<FamilyStats>> stats(nl, std::vector<FamilyStats>(ns));
    for (auto& row : stats)
      for (auto& st : row) st.id = fam.id;
    for (const auto& psi : fam.generate(setup.domain)) {
      const auto p = sample_psi(psi, grid.x.nodes, grid.t.nodes);
      for (std::size_t il = 0; il < nl; ++il) {
        for (std::size_t is = 0; is < ns; ++is) {
          const auto& q = wq[il * ns + is];
          const double lhs = q.lhs(p).total;
          const double rhs = q.rhs(p).total();
          stats[il][is].ratios.push_back(rhs > 0.0 ? lhs / rhs : 0.0);
        }
      }
    }
    for (auto& row : stats)
      for (auto& st : row) finish(st);
    return stats;
  };

  rep.calibration = run_family(calibration);
  rep.calibration_max.assign(nl, std::vector<double>(ns));
  for (std::size_t il = 0; il < nl; ++il)
    for (std::size_t is = 0; is < ns; ++is) rep.calibration_max[il][is] = rep.calibration[il][is].max;

  for (std::size_t f = 0; f < nf; ++f) {
    rep.held_out.push_back(run_family(held_out[f]));
    std::vector<std::vector<double>> mx(nl, std::vector<double>(ns));
    for (std::size_t il = 0; il < nl; ++il) {
      for (std::size_t is = 0; is < ns; ++is) {
        mx[il][is] = rep.held_out[f][il][is].max;
        if (!(mx[il][is] <= 10.0 * rep.calibration_max[il][is])) {
          rep.held_out_ok = false;
          std::ostringstream os;
          os << held_out[f].id << " at s=" << s_grid[is] << " lambda=" << lambda_grid[il]
             << ": " << mx[il][is] << " > 10 * " << rep.calibration_max[il][is];
          rep.violations.push_back(os.str());
        }
      }
    }
    rep.held_out_max.push_back(std::move(mx));
  }

  rep.s_threshold.assign(nl, 0.0);
  rep.threshold_found.assign(nl, false);
  for (std::size_t il = 0; il < nl; ++il) {
    std::size_t start = ns;
    for (std::size_t i = ns - 1; i-- > 0;) {
      double worst = rep.calibration_max[il][i];
      double next = rep.calibration_max[il][i + 1];
      for (const auto& mx : rep.held_out_max) {
        worst = std::max(worst, mx[il][i]);
        next = std::max(next, mx[il][i + 1]);
      }
      if (next <= 2.0 * worst) start = i;
      else break;
    }
    if (start < ns) {
      rep.threshold_found[il] = true;
      rep.s_threshold[il] = s_grid[start];
    }
  }
  return rep;
}

}  // namespace dampbeam
