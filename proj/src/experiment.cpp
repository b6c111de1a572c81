#include "dampbeam/experiment.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/version.hpp>
#include <fftw3.h>
#include <gsl/gsl_version.h>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "dampbeam/carleman_audit.hpp"
#include "dampbeam/weights.hpp"

namespace dampbeam {

namespace {

const std::set<std::string> kKinds{"weights-audit", "spectrum",    "forward",
                                   "carleman-audit", "zeta-ledger", "control"};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& field, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ValidationError(field + ": expected a number, got '" + v + "'");
  }
}

long long to_int(const std::string& field, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ValidationError(field + ": expected an integer, got '" + v + "'");
  }
}

mpq_class to_rational(const std::string& field, const std::string& v) {
  try {
    // GMP raises SIGFPE on a zero denominator, so reject it first.
    const auto slash = v.find('/');
    if (slash != std::string::npos && mpz_class(v.substr(slash + 1)) == 0) throw std::invalid_argument(v);
    mpq_class q(v);
    q.canonicalize();
    return q;
  } catch (const std::exception&) {
    throw ValidationError(field + ": expected a rational p/q, got '" + v + "'");
  }
}

std::vector<double> to_list(const std::string& field, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ',')) out.push_back(to_double(field, item));
  if (out.empty()) throw ValidationError(field + ": empty list");
  return out;
}

// "k:c:s; k:c:s"
std::vector<std::array<double, 3>> to_modes(const std::string& field, const std::string& v) {
  std::vector<std::array<double, 3>> out;
  for (const auto& item : split(v, ';')) {
    const auto parts = split(item, ':');
    if (parts.size() != 3) throw ValidationError(field + ": expected k:cos:sin, got '" + item + "'");
    out.push_back({static_cast<double>(to_int(field, parts[0])), to_double(field, parts[1]),
                   to_double(field, parts[2])});
  }
  return out;
}

// "A:kx:phase_x:omega:phase_t; ..."
std::vector<Potential::Term> to_terms(const std::string& field, const std::string& v) {
  std::vector<Potential::Term> out;
  for (const auto& item : split(v, ';')) {
    const auto p = split(item, ':');
    if (p.size() != 5)
      throw ValidationError(field + ": expected A:kx:phase_x:omega:phase_t, got '" + item + "'");
    out.push_back({to_double(field, p[0]), static_cast<int>(to_int(field, p[1])), to_double(field, p[2]),
                   to_double(field, p[3]), to_double(field, p[4])});
  }
  return out;
}

Scheme to_scheme(const std::string& field, const std::string& v) {
  if (v == "etdrk4") return Scheme::etdrk4;
  if (v == "etdrk2") return Scheme::etdrk2;
  throw ValidationError(field + ": expected etdrk4 or etdrk2, got '" + v + "'");
}

Preconditioner to_preconditioner(const std::string& field, const std::string& v) {
  if (v == "banded_cholesky") return Preconditioner::banded_cholesky;
  if (v == "jacobi") return Preconditioner::jacobi;
  if (v == "none") return Preconditioner::none;
  throw ValidationError(field + ": expected banded_cholesky, jacobi or none, got '" + v + "'");
}

const char* name(Scheme s) { return s == Scheme::etdrk4 ? "etdrk4" : "etdrk2"; }
const char* name(Preconditioner p) {
  switch (p) {
    case Preconditioner::banded_cholesky: return "banded_cholesky";
    case Preconditioner::jacobi: return "jacobi";
    default: return "none";
  }
}

using Setter = std::function<void(ExperimentConfig&, const std::string& field, const std::string& v)>;

int as_int(const std::string& f, const std::string& v) { return static_cast<int>(to_int(f, v)); }
std::uint64_t as_seed(const std::string& f, const std::string& v) {
  const auto x = to_int(f, v);
  if (x < 0) throw ValidationError(f + ": seed must be non-negative");
  return static_cast<std::uint64_t>(x);
}

const std::map<std::string, Setter>& setters() {
  using C = ExperimentConfig;
  using S = const std::string&;
  static const std::map<std::string, Setter> m{
      {"experiment.kind", [](C& c, S, S v) { c.kind = v; }},
      {"domain.d", [](C& c, S f, S v) { c.domain.d = to_double(f, v); }},
      {"domain.L", [](C& c, S f, S v) { c.domain.L = to_double(f, v); }},
      {"domain.T", [](C& c, S f, S v) { c.domain.T = to_double(f, v); }},
      {"grid.n_modes", [](C& c, S f, S v) { c.n_modes = as_int(f, v); }},
      {"grid.n_time", [](C& c, S f, S v) { c.n_time = as_int(f, v); }},
      {"grid.steps", [](C& c, S f, S v) { c.steps = as_int(f, v); }},
      {"grid.scheme", [](C& c, S f, S v) { c.scheme = to_scheme(f, v); }},
      {"grid.normalization",
       [](C& c, S f, S v) {
         if (v == "physical") c.normalization = Normalization::physical;
         else if (v == "unit") c.normalization = Normalization::unit;
         else throw ValidationError(f + ": expected physical or unit, got '" + v + "'");
       }},
      {"carleman.s", [](C& c, S f, S v) { c.carleman.s = to_double(f, v); }},
      {"carleman.lambda", [](C& c, S f, S v) { c.carleman.lambda = to_double(f, v); }},
      {"carleman.T0", [](C& c, S f, S v) { c.carleman.T0 = to_double(f, v); }},
      {"carleman.T1", [](C& c, S f, S v) { c.carleman.T1 = to_double(f, v); }},
      {"carleman.zeta", [](C& c, S f, S v) { c.carleman.zeta = to_rational(f, v); }},
      {"carleman.eta_scale", [](C& c, S f, S v) { c.eta_scale = to_double(f, v); }},
      {"carleman.mollify_radius", [](C& c, S f, S v) { c.mollify_radius = to_double(f, v); }},
      {"weights.lambdas", [](C& c, S f, S v) { c.lambdas = to_list(f, v); }},
      {"audit.s_grid", [](C& c, S f, S v) { c.s_grid = to_list(f, v); }},
      {"audit.lambda_grid", [](C& c, S f, S v) { c.lambda_grid = to_list(f, v); }},
      {"audit.samples", [](C& c, S f, S v) { c.samples = as_int(f, v); }},
      {"audit.seed_calibration", [](C& c, S f, S v) { c.seed_calibration = as_seed(f, v); }},
      {"audit.seed_held_out", [](C& c, S f, S v) { c.seed_held_out = as_seed(f, v); }},
      {"audit.max_mode", [](C& c, S f, S v) { c.max_mode = as_int(f, v); }},
      {"audit.x_panels", [](C& c, S f, S v) { c.x_panels = as_int(f, v); }},
      {"audit.t_panels", [](C& c, S f, S v) { c.t_panels = as_int(f, v); }},
      {"zeta.values",
       [](C& c, S f, S v) {
         c.zetas.clear();
         for (const auto& item : split(v, ',')) c.zetas.push_back(to_rational(f, item));
       }},
      {"potential.kind", [](C& c, S, S v) { c.potential.kind = v; }},
      {"potential.c0", [](C& c, S f, S v) { c.potential.c0 = to_double(f, v); }},
      {"potential.terms", [](C& c, S f, S v) { c.potential.terms = to_terms(f, v); }},
      {"potential.seed", [](C& c, S f, S v) { c.potential.seed = as_seed(f, v); }},
      {"potential.sup", [](C& c, S f, S v) { c.potential.sup = to_double(f, v); }},
      {"potential.n_terms", [](C& c, S f, S v) { c.potential.n_terms = as_int(f, v); }},
      {"potential.max_k", [](C& c, S f, S v) { c.potential.max_k = as_int(f, v); }},
      {"potential.max_omega", [](C& c, S f, S v) { c.potential.max_omega = to_double(f, v); }},
      {"data.kind", [](C& c, S, S v) { c.data.kind = v; }},
      {"data.beta0", [](C& c, S f, S v) { c.data.beta0 = to_modes(f, v); }},
      {"data.beta1", [](C& c, S f, S v) { c.data.beta1 = to_modes(f, v); }},
      {"data.seed", [](C& c, S f, S v) { c.data.seed = as_seed(f, v); }},
      {"data.max_k", [](C& c, S f, S v) { c.data.max_k = as_int(f, v); }},
      {"data.decay", [](C& c, S f, S v) { c.data.decay = to_double(f, v); }},
      {"hum.tol", [](C& c, S f, S v) { c.hum_tol = to_double(f, v); }},
      {"hum.max_iter", [](C& c, S f, S v) { c.hum_max_iter = as_int(f, v); }},
      {"hum.eps", [](C& c, S f, S v) { c.hum_eps = to_double(f, v); }},
      {"hum.r0", [](C& c, S f, S v) { c.hum_r0 = to_double(f, v); }},
      {"hum.r1", [](C& c, S f, S v) { c.hum_r1 = to_double(f, v); }},
      {"hum.substeps", [](C& c, S f, S v) { c.hum_substeps = as_int(f, v); }},
      {"hum.preconditioner", [](C& c, S f, S v) { c.hum_preconditioner = to_preconditioner(f, v); }},
      {"hum.family", [](C& c, S f, S v) { c.hum_family = as_int(f, v); }},
  };
  return m;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

std::string join_modes(const std::vector<std::array<double, 3>>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? ";" : "") + fmt(v[i][0]) + ":" + fmt(v[i][1]) + ":" + fmt(v[i][2]);
  return s;
}

std::string join_terms(const std::vector<Potential::Term>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? ";" : "") + fmt(v[i].amplitude) + ":" + std::to_string(v[i].kx) + ":" + fmt(v[i].phase_x) +
         ":" + fmt(v[i].omega) + ":" + fmt(v[i].phase_t);
  return s;
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ValidationError(field + ": " + what);
}

std::vector<double> uniform(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * (i + 0.5) / n;
  return v;
}

const std::vector<std::array<double, 3>> kDefaultBeta0{{1, 1.0, 0.0}, {2, 0.5, 0.2}};
const std::vector<std::array<double, 3>> kDefaultBeta1{{1, 0.3, -0.1}};

}  // namespace

// ---------------------------------------------------------------- specs

Potential PotentialSpec::build(const DomainSpec& domain) const {
  const double C = domain.circumference();
  if (kind == "zero") return Potential::zero(C);
  if (kind == "separable") return Potential::separable(C, domain.T, c0, terms);
  if (kind == "random") return Potential::random_bounded(C, domain.T, seed, sup, n_terms, max_k, max_omega);
  throw ValidationError("potential.kind: expected zero, separable or random, got '" + kind + "'");
}

std::pair<std::vector<double>, std::vector<double>> DataSpec::sample(const SpatialGrid& grid,
                                                                     std::uint64_t seed_offset) const {
  std::vector<std::array<double, 3>> m0, m1;
  if (kind == "random") {
    std::mt19937_64 rng(seed + seed_offset);
    std::normal_distribution<double> n01;
    for (int k = 1; k <= max_k; ++k) {
      const double s = 1.0 / std::pow(1.0 + k, decay);
      const double c0 = n01(rng) * s, s0 = n01(rng) * s, c1 = n01(rng) * s, s1 = n01(rng) * s;
      m0.push_back({double(k), c0, s0});
      m1.push_back({double(k), c1, s1});
    }
  } else {
    m0 = beta0.empty() && beta1.empty() ? kDefaultBeta0 : beta0;
    m1 = beta0.empty() && beta1.empty() ? kDefaultBeta1 : beta1;
  }
  const auto eval = [&](const std::vector<std::array<double, 3>>& modes) {
    std::vector<double> u(grid.n(), 0.0);
    for (const auto& [k, c, s] : modes) {
      const double kappa = grid.normalization() == Normalization::physical
                               ? 2.0 * M_PI * k / grid.circumference()
                               : k;
      for (int j = 0; j < grid.n(); ++j) {
        const double ph = kappa * (grid.nodes()[j] - grid.x0());
        u[j] += c * std::cos(ph) + s * std::sin(ph);
      }
    }
    return u;
  };
  return {eval(m0), eval(m1)};
}

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  require(kKinds.count(kind) > 0, "experiment.kind",
          "expected one of weights-audit, spectrum, forward, carleman-audit, zeta-ledger, control; got '" +
              kind + "'");
  domain.validate();
  // The weight profiles are only built by these kinds.
  if (kind == "weights-audit" || kind == "carleman-audit" || kind == "control") carleman.validate(domain.T);
  require(n_modes >= 4 && n_modes % 2 == 0, "grid.n_modes", "must be even and >= 4");
  require(n_time >= 8, "grid.n_time", "must be >= 8");
  require(steps >= 1, "grid.steps", "must be >= 1");
  require(eta_scale > 0.0, "carleman.eta_scale", "must be positive");
  require(mollify_radius > 0.0 && mollify_radius < std::min(domain.d, domain.L) / 2.0,
          "carleman.mollify_radius", "must lie in (0, min(d, L) / 2)");
  for (double l : lambdas) require(l > 0.0, "weights.lambdas", "entries must be positive");
  for (double s : s_grid) require(s > 0.0, "audit.s_grid", "entries must be positive");
  require(std::is_sorted(s_grid.begin(), s_grid.end()), "audit.s_grid", "must be increasing");
  for (double l : lambda_grid) require(l > 0.0, "audit.lambda_grid", "entries must be positive");
  require(samples >= 1, "audit.samples", "must be >= 1");
  require(seed_calibration != seed_held_out, "audit.seed_held_out", "must differ from audit.seed_calibration");
  require(max_mode == -1 || max_mode >= 1, "audit.max_mode", "must be >= 1 (or -1 for n_modes / 4)");
  require(x_panels >= 1, "audit.x_panels", "must be >= 1");
  require(t_panels >= 1, "audit.t_panels", "must be >= 1");
  require(potential.kind == "zero" || potential.kind == "separable" || potential.kind == "random",
          "potential.kind", "expected zero, separable or random, got '" + potential.kind + "'");
  require(potential.sup >= 0.0, "potential.sup", "must be non-negative");
  require(potential.n_terms >= 1, "potential.n_terms", "must be >= 1");
  require(potential.max_k >= 0, "potential.max_k", "must be >= 0");
  require(data.kind == "modes" || data.kind == "random", "data.kind",
          "expected modes or random, got '" + data.kind + "'");
  for (const auto* modes : {&data.beta0, &data.beta1})
    for (const auto& m : *modes)
      require(m[0] >= 0 && m[0] < n_modes / 2, modes == &data.beta0 ? "data.beta0" : "data.beta1",
              "wavenumbers must lie in [0, n_modes / 2)");
  require(data.max_k >= 1 && data.max_k < n_modes / 2, "data.max_k", "must lie in [1, n_modes / 2)");
  require(hum_tol > 0.0, "hum.tol", "must be positive");
  require(hum_max_iter >= 1, "hum.max_iter", "must be >= 1");
  require(hum_eps >= 0.0, "hum.eps", "must be non-negative");
  require(0.0 < hum_r0 && hum_r0 < hum_r1 && hum_r1 < 1.0, "hum.r0", "need 0 < hum.r0 < hum.r1 < 1");
  require(hum_substeps >= 1, "hum.substeps", "must be >= 1");
  require(hum_family >= 0, "hum.family", "must be >= 0");
}

std::string ExperimentConfig::canonical() const {
  KeyValues kv{
      {"experiment.kind", kind},
      {"domain.d", fmt(domain.d)},
      {"domain.L", fmt(domain.L)},
      {"domain.T", fmt(domain.T)},
      {"grid.n_modes", std::to_string(n_modes)},
      {"grid.n_time", std::to_string(n_time)},
      {"grid.steps", std::to_string(steps)},
      {"grid.scheme", name(scheme)},
      {"grid.normalization", normalization == Normalization::physical ? "physical" : "unit"},
      {"carleman.s", fmt(carleman.s)},
      {"carleman.lambda", fmt(carleman.lambda)},
      {"carleman.T0", fmt(carleman.T0)},
      {"carleman.T1", fmt(carleman.T1)},
      {"carleman.zeta", carleman.zeta.get_str()},
      {"carleman.eta_scale", fmt(eta_scale)},
      {"carleman.mollify_radius", fmt(mollify_radius)},
      {"weights.lambdas", join(lambdas)},
      {"audit.s_grid", join(s_grid)},
      {"audit.lambda_grid", join(lambda_grid)},
      {"audit.samples", std::to_string(samples)},
      {"audit.seed_calibration", std::to_string(seed_calibration)},
      {"audit.seed_held_out", std::to_string(seed_held_out)},
      {"audit.max_mode", std::to_string(max_mode)},
      {"audit.x_panels", std::to_string(x_panels)},
      {"audit.t_panels", std::to_string(t_panels)},
  };
  std::string zs;
  for (std::size_t i = 0; i < zetas.size(); ++i) zs += (i ? "," : "") + zetas[i].get_str();
  kv.insert(kv.end(), {
      {"zeta.values", zs},
      {"potential.kind", potential.kind},
      {"potential.c0", fmt(potential.c0)},
      {"potential.terms", join_terms(potential.terms)},
      {"potential.seed", std::to_string(potential.seed)},
      {"potential.sup", fmt(potential.sup)},
      {"potential.n_terms", std::to_string(potential.n_terms)},
      {"potential.max_k", std::to_string(potential.max_k)},
      {"potential.max_omega", fmt(potential.max_omega)},
      {"data.kind", data.kind},
      {"data.beta0", join_modes(data.beta0)},
      {"data.beta1", join_modes(data.beta1)},
      {"data.seed", std::to_string(data.seed)},
      {"data.max_k", std::to_string(data.max_k)},
      {"data.decay", fmt(data.decay)},
      {"hum.tol", fmt(hum_tol)},
      {"hum.max_iter", std::to_string(hum_max_iter)},
      {"hum.eps", fmt(hum_eps)},
      {"hum.r0", fmt(hum_r0)},
      {"hum.r1", fmt(hum_r1)},
      {"hum.substeps", std::to_string(hum_substeps)},
      {"hum.preconditioner", name(hum_preconditioner)},
      {"hum.family", std::to_string(hum_family)},
  });
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string ExperimentConfig::hash() const {
  const std::string text = canonical();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw ConstructionError("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

ExperimentConfig parse_config(const std::string& ini_text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is(ini_text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  ExperimentConfig cfg;
  std::set<std::string> seen;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ValidationError("unknown key: " + section + " (keys must sit inside a section)");
    for (const auto& [key, value] : body) {
      const std::string field = section + "." + key;
      const auto it = setters().find(field);
      if (it == setters().end()) throw ValidationError("unknown key: " + field);
      it->second(cfg, field, trim(value.data()));
      seen.insert(field);
    }
  }
  for (const char* f : {"experiment.kind", "domain.T"})
    if (!seen.count(f)) throw ValidationError(std::string(f) + ": required field missing");
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------- manifest

bool RunManifest::all_pass() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const auto& a) { return a.second; });
}

std::string RunManifest::metric(const std::string& key) const {
  for (const auto& [k, v] : metrics)
    if (k == key) return v;
  throw std::out_of_range("manifest has no metric " + key);
}

std::string artifact_versions() {
  std::ostringstream os;
  os << "dampbeam 1.0.0; fftw " << fftw_version << "; gsl " << GSL_VERSION << "; gmp " << gmp_version
     << "; eigen " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION
     << "; boost " << BOOST_LIB_VERSION << "; " << OPENSSL_VERSION_TEXT;
  return os.str();
}

namespace {

void write_manifest(const RunManifest& m) {
  KeyValues kv{{"config_hash", m.config_hash},
               {"kind", m.kind},
               {"versions", m.versions},
               {"wall_time_s", fmt(m.wall_time)}};
  for (const auto& f : m.files) kv.emplace_back("file", f);
  for (const auto& [k, v] : m.metrics) kv.emplace_back("metric." + k, v);
  for (const auto& [k, v] : m.assertions) kv.emplace_back("assert." + k, v ? "PASS" : "FAIL");
  kv.emplace_back("all_pass", m.all_pass() ? "true" : "false");
  write_key_values(m.dir / "manifest.txt", kv);
}

std::string b(bool v) { return v ? "true" : "false"; }

class Run {
 public:
  Run(const ExperimentConfig& cfg, RunManifest& m) : cfg_(cfg), m_(m) {}

  fs::path file(const std::string& name) {
    m_.files.push_back(name);
    return m_.dir / name;
  }
  void metric(const std::string& k, const std::string& v) { m_.metrics.emplace_back(k, v); }
  void metric(const std::string& k, double v) { metric(k, fmt(v)); }
  void check(const std::string& k, bool v) { m_.assertions.emplace_back(k, v); }

  SpatialGrid grid() const {
    return SpatialGrid(cfg_.n_modes, cfg_.domain.circumference(), cfg_.domain.left(), cfg_.normalization);
  }

  void spectrum();
  void forward();
  void weights_audit();
  void carleman_audit();
  void zeta();
  void control();

 private:
  const ExperimentConfig& cfg_;
  RunManifest& m_;
};

void Run::spectrum() {
  const auto g = grid();
  const auto blocks = assemble_operator(g);
  std::vector<std::vector<double>> rows;
  double max_err = 0.0;
  for (int j = 0; j < g.n_modal(); ++j) {
    const Eigen::EigenSolver<Eigen::Matrix2d> es(blocks[j], false);
    auto ev = es.eigenvalues();
    if (ev(0).imag() < ev(1).imag()) std::swap(ev(0), ev(1));
    const auto ep = analytic_eigenpair(j, g);
    cplx ap = ep.lambda_plus, am = ep.lambda_minus;
    if (ap.imag() < am.imag()) std::swap(ap, am);
    const auto rel = [](cplx x, cplx ref) {
      return std::abs(ref) > 0.0 ? std::abs(x - ref) / std::abs(ref) : std::abs(x);
    };
    const double e0 = rel(ev(0), ap), e1 = rel(ev(1), am);
    max_err = std::max({max_err, e0, e1});
    rows.push_back({double(j), g.kappa(j), ev(0).real(), ev(0).imag(), ev(1).real(), ev(1).imag(),
                    ap.real(), ap.imag(), e0, e1});
  }
  write_csv(file("spectrum.csv"),
            {"k", "kappa", "re_plus", "im_plus", "re_minus", "im_minus", "re_exact", "im_exact", "err_plus",
             "err_minus"},
            rows);
  metric("headline", "max relative eigenvalue error: " + fmt(max_err));
  metric("max_relative_error", max_err);
  metric("n_modes", std::to_string(g.n_modal()));
  check("eigenvalue_error_below_1e-10", max_err < 1e-10);
}

void Run::forward() {
  const auto g = grid();
  const auto [b0, b1] = cfg_.data.sample(g);
  const auto a = cfg_.potential.build(cfg_.domain);
  const TimeGrid tg{0.0, cfg_.domain.T, cfg_.steps};
  const auto tr = solve_forward(g, b0, b1, a, {}, tg, cfg_.scheme);
  std::vector<std::vector<double>> rows;
  bool monotone = true, finite = true;
  double defect = 0.0;
  const double E0 = tr.diagnostics.front().E;
  for (std::size_t n = 0; n < tr.size(); ++n) {
    const auto& d = tr.diagnostics[n];
    const double h = sobolev_h3h1(g, tr.beta[n], tr.beta_t[n]);
    finite = finite && std::isfinite(d.E) && std::isfinite(h);
    rows.push_back({tr.times[n], d.E, d.dissipation, h});
    if (n > 0) {
      const auto& p = tr.diagnostics[n - 1];
      monotone = monotone && d.E <= p.E * (1.0 + 1e-12);
      const double dt = tr.times[n] - tr.times[n - 1];
      defect = std::max(defect, std::abs((d.E - p.E) / dt + 0.5 * (d.dissipation + p.dissipation)));
    }
  }
  write_csv(file("energy.csv"), {"t", "E", "dissipation", "h3h1"}, rows);
  write_trajectory_csv(file("trajectory.csv"), g, tr, std::max(1, cfg_.steps / 50));
  write_snapshot(file("trajectory.bin"), trajectory_snapshot(g, tr));
  metric("headline", "terminal H3xH1 norm: " + fmt(rows.back()[3]));
  metric("E0", E0);
  metric("E_T", tr.diagnostics.back().E);
  metric("terminal_h3h1", rows.back()[3]);
  metric("energy_defect_relative", E0 > 0.0 ? defect / E0 : defect);
  metric("energy_non_increasing", b(monotone));
  check("trajectory_finite", finite);
  if (a.is_zero()) check("energy_non_increasing", monotone);
}

void Run::weights_audit() {
  const auto eta = EtaProfile::build(cfg_.domain, cfg_.eta_scale, cfg_.mollify_radius);
  const auto theta = ThetaProfile::build(cfg_.carleman, cfg_.domain.T);
  const double lo = cfg_.domain.left(), hi = cfg_.domain.d + cfg_.domain.L, T = cfg_.domain.T;
  const auto sw = sweep_lambda(eta, theta, cfg_.lambdas, uniform(lo, hi, 96), uniform(0.0, T, 24));
  write_bound_report_csv(file("bounds.csv"), sw.reports);
  {
    std::ofstream os(file("sweep.csv"));
    os << "id";
    for (double l : sw.lambdas) os << ",C_lambda" << fmt(l);
    os << ",variation,grows\n";
    for (const auto& r : sw.rows) {
      os << r.id;
      for (double c : r.constants) os << "," << fmt(c);
      os << "," << fmt(r.variation) << "," << (r.grows ? 1 : 0) << "\n";
    }
  }
  std::vector<std::vector<double>> th, et;
  for (double t : uniform(0.0, T, 400)) {
    const auto d = theta.eval(t);
    th.push_back({t, d[0], d[1], d[2], d[3], d[4]});
  }
  write_csv(file("theta.csv"), {"t", "theta", "theta_1", "theta_2", "theta_3", "theta_4"}, th);
  for (double x : uniform(lo, hi, 400)) {
    const auto d = eta.eval(x);
    et.push_back({x, d[0], d[1], d[2], d[3], d[4]});
  }
  write_csv(file("eta.csv"), {"x", "eta", "eta_1", "eta_2", "eta_3", "eta_4"}, et);
  write_weight_csv(file("weights.csv"),
                   WeightField::evaluate(eta, theta, cfg_.carleman.lambda, uniform(lo, hi, 64), uniform(0.0, T, 64)));

  double max_var = 0.0;
  int growing = 0;
  bool finite = true;
  for (const auto& r : sw.rows) {
    max_var = std::max(max_var, r.variation);
    growing += r.grows;
    for (double c : r.constants) finite = finite && std::isfinite(c);
  }
  std::size_t n_records = 0;
  for (const auto& rep : sw.reports) n_records += rep.records.size();
  metric("headline", "positivity threshold: " + fmt(sw.positivity_threshold) +
                         ", max constant variation: " + fmt(max_var));
  metric("positivity_threshold", sw.positivity_threshold);
  metric("positivity_found", b(sw.positivity_found));
  metric("max_constant_variation", max_var);
  metric("n_growing", std::to_string(growing));
  metric("n_records", std::to_string(n_records));
  check("constants_finite", finite);
  check("constant_variation_below_2x", max_var < 2.0);
  check("positivity_floor_positive", sw.positivity_found);
}

void Run::carleman_audit() {
  const auto a = cfg_.potential.build(cfg_.domain);
  AuditSetup setup;
  setup.domain = cfg_.domain;
  setup.params = cfg_.carleman;
  setup.eta_scale = cfg_.eta_scale;
  setup.mollify_radius = cfg_.mollify_radius;
  setup.x_panels = cfg_.x_panels;
  setup.t_panels = cfg_.t_panels;
  setup.potential = a.is_zero() ? nullptr : &a;
  const int mm = cfg_.max_mode > 0 ? cfg_.max_mode : cfg_.n_modes / 4;
  TestFunctionFamily cal{"calibration", TestFunctionFamily::Kind::trig, cfg_.seed_calibration, mm, cfg_.samples};
  TestFunctionFamily held{"held_out", TestFunctionFamily::Kind::trig, cfg_.seed_held_out, mm, cfg_.samples};
  const auto rep = audit_inequality(setup, cal, {held}, cfg_.s_grid, cfg_.lambda_grid);
  write_ratio_report_csv(file("ratio.csv"), rep);

  double worst_doubling = 0.0;
  for (std::size_t il = 0; il < rep.lambda_grid.size(); ++il) {
    const auto combined = [&](std::size_t is) {
      double m = rep.calibration_max[il][is];
      for (const auto& h : rep.held_out_max) m = std::max(m, h[il][is]);
      return m;
    };
    const std::string tag = "_lambda" + fmt(rep.lambda_grid[il]);
    for (std::size_t is = 0; is < rep.s_grid.size(); ++is) {
      const std::string st = tag + "_s" + fmt(rep.s_grid[is]);
      metric("calibration_max" + st, rep.calibration_max[il][is]);
      metric("held_out_max" + st, rep.held_out_max[0][il][is]);
      if (is > 0 && std::abs(rep.s_grid[is] - 2.0 * rep.s_grid[is - 1]) < 1e-12)
        worst_doubling = std::max(worst_doubling, combined(is) / combined(is - 1));
    }
    metric("s_threshold" + tag, rep.threshold_found[il] ? fmt(rep.s_threshold[il]) : "none");
  }
  metric("headline", "held-out within 10x: " + b(rep.held_out_ok) + ", worst s-doubling ratio: " +
                         fmt(worst_doubling));
  metric("worst_doubling_ratio", worst_doubling);
  check("held_out_within_10x_calibration", rep.held_out_ok);
  check("s_doubling_within_2x", worst_doubling <= 2.0);
}

void Run::zeta() {
  std::vector<mpq_class> zs = cfg_.zetas;
  if (zs.empty()) zs.push_back(cfg_.carleman.zeta);
  std::vector<ZetaWitness> ws;
  std::string text;
  for (const auto& z : zs) {
    ws.push_back(zeta_ledger(z));
    text += zeta_witness_text(ws.back()) + "\n";
  }
  std::ofstream(file("zeta.csv")) << zeta_witness_csv(ws);
  write_text(file("zeta.txt"), text);

  bool consistent = true;
  int n_adm = 0;
  for (const auto& w : ws) {
    bool ok = std::all_of(w.e_coeffs.begin(), w.e_coeffs.end(), [](const mpq_class& e) { return e < 0; });
    if (ok) ok = w.lo1 < w.hi1 && w.lo2 < w.hi2;
    if (ok) ok = std::all_of(w.quotients.begin(), w.quotients.end(), [](const mpq_class& q) { return q < 1; });
    if (w.admissible) {
      ++n_adm;
      consistent = consistent && ok && w.violated.empty() && w.lo1 < w.alpha1 && w.alpha1 < w.hi1 &&
                   w.lo2 < w.alpha2 && w.alpha2 < w.hi2;
    } else {
      consistent = consistent && !ok && !w.violated.empty();
    }
  }
  const auto primary = zeta_ledger(cfg_.carleman.zeta);
  metric("headline", "admissible: " + b(primary.admissible));
  metric("zeta", primary.zeta.get_str());
  metric("admissible", b(primary.admissible));
  for (int i = 0; i < 4; ++i) metric("E" + std::to_string(i + 1), primary.e_coeffs[i].get_str());
  if (primary.admissible) {
    metric("alpha1", primary.alpha1.get_str());
    metric("alpha2", primary.alpha2.get_str());
  } else {
    metric("violated", primary.violated);
  }
  metric("n_admissible", std::to_string(n_adm) + "/" + std::to_string(ws.size()));
  check("ledger_consistent", consistent);
}

void Run::control() {
  NullControlConfig nc;
  nc.domain = cfg_.domain;
  nc.params = cfg_.carleman;
  nc.eta_scale = cfg_.eta_scale;
  nc.mollify_radius = cfg_.mollify_radius;
  nc.n_modes = cfg_.n_modes;
  nc.n_time = cfg_.n_time;
  nc.r0 = cfg_.hum_r0;
  nc.r1 = cfg_.hum_r1;
  nc.disc.eps_rel = cfg_.hum_eps;
  nc.cg = {cfg_.hum_tol, cfg_.hum_max_iter, cfg_.hum_preconditioner};
  nc.verify = {cfg_.hum_substeps, cfg_.scheme};
  const auto g = grid();
  const auto a = cfg_.potential.build(cfg_.domain);
  const auto [b0, b1] = cfg_.data.sample(g);
  const auto res = run_null_control(nc, b0, b1, a);
  const auto& rep = res.report;

  write_control_csv(file("control.csv"), g, res.control);
  write_snapshot(file("control.bin"), control_snapshot(g, res.control));
  std::vector<std::vector<double>> cg;
  for (std::size_t i = 0; i < res.solution.residual_history.size(); ++i)
    cg.push_back({double(i + 1), res.solution.residual_history[i]});
  write_csv(file("cg_residuals.csv"), {"iteration", "relative_residual"}, cg);
  std::vector<std::vector<double>> norms;
  for (const auto& r : rep.norm_history) norms.push_back({r[0], r[1], r[2]});
  write_csv(file("norms.csv"), {"t", "controlled", "uncontrolled"}, norms);
  auto term = terminal_report_kv(rep);
  term.insert(term.end(), {{"cg_iterations", std::to_string(res.solution.iterations)},
                           {"cg_relative_residual", fmt(res.solution.relative_residual)},
                           {"cg_converged", b(res.solution.converged)},
                           {"eps", fmt(res.eps)},
                           {"J", fmt(res.solution.J)}});
  write_key_values(file("terminal.txt"), term);

  metric("headline", "suppression ratio: " + fmt(rep.suppression_ratio));
  for (const auto& [k, v] : term) metric(k, v);
  check("cg_converged", res.solution.converged);
  check("control_support_in_omega", rep.support_ok);
  check("suppression_below_1e-3", rep.suppression_ratio <= 1e-3);
  check("superposition_below_1e-8", rep.superposition_error < 1e-8);

  if (cfg_.hum_family > 0) {
    DataSpec fam = cfg_.data;
    fam.kind = "random";
    std::vector<std::vector<double>> rows;
    double lo = INFINITY, hi = 0.0, worst = 0.0;
    for (int i = 0; i < cfg_.hum_family; ++i) {
      const auto [c0, c1] = fam.sample(g, static_cast<std::uint64_t>(i));
      const auto r = run_null_control(nc, c0, c1, a).report;
      rows.push_back({double(i), double(fam.seed + i), r.data_norm, r.control_l2, r.bound_ratio,
                      r.suppression_ratio});
      lo = std::min(lo, r.bound_ratio);
      hi = std::max(hi, r.bound_ratio);
      worst = std::max(worst, r.suppression_ratio);
    }
    write_csv(file("family.csv"), {"member", "seed", "data_norm", "control_l2", "bound_ratio", "suppression"},
              rows);
    metric("family_bound_ratio_min", lo);
    metric("family_bound_ratio_max", hi);
    metric("family_suppression_max", worst);
    check("family_bound_ratio_spread_below_10x", hi <= 10.0 * lo);
  }
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& cfg, const fs::path& root) {
  cfg.validate();
  RunManifest m;
  m.config_hash = cfg.hash();
  m.kind = cfg.kind;
  m.versions = artifact_versions();
  m.dir = root / ("run-" + m.config_hash.substr(0, 16));
  fs::create_directories(m.dir);
  write_text(m.dir / "config.ini", cfg.canonical());
  m.files.push_back("config.ini");

  const auto t0 = std::chrono::steady_clock::now();
  Run run(cfg, m);
  try {
    if (cfg.kind == "spectrum") run.spectrum();
    else if (cfg.kind == "forward") run.forward();
    else if (cfg.kind == "weights-audit") run.weights_audit();
    else if (cfg.kind == "carleman-audit") run.carleman_audit();
    else if (cfg.kind == "zeta-ledger") run.zeta();
    else run.control();
  } catch (const ValidationError& e) {
    throw ValidationError(cfg.kind + ": " + e.what());
  } catch (const std::exception& e) {
    throw ConstructionError(cfg.kind + ": " + e.what());
  }
  m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  m.files.push_back("manifest.txt");
  write_manifest(m);
  return m;
}

RunManifest read_manifest(const fs::path& dir) {
  RunManifest m;
  m.dir = dir;
  for (const auto& [k, v] : read_key_values(dir / "manifest.txt")) {
    if (k == "config_hash") m.config_hash = v;
    else if (k == "kind") m.kind = v;
    else if (k == "versions") m.versions = v;
    else if (k == "wall_time_s") m.wall_time = std::stod(v);
    else if (k == "file") m.files.push_back(v);
    else if (k.rfind("metric.", 0) == 0) m.metrics.emplace_back(k.substr(7), v);
    else if (k.rfind("assert.", 0) == 0) m.assertions.emplace_back(k.substr(7), v == "PASS");
  }
  return m;
}

}  // namespace dampbeam
