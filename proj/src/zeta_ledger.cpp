#include <sstream>

#include "dampbeam/carleman_audit.hpp"

namespace dampbeam {

namespace {

mpq_class qabs(const mpq_class& q) { return q < 0 ? mpq_class(-q) : q; }

// Dyadic rational strictly inside (lo, hi), found by halving the step.
mpq_class dyadic_inside(const mpq_class& lo, const mpq_class& hi) {
  mpz_class den = 1;
  for (int d = 0; d < 4096; ++d) {
    mpz_class num;
    const mpq_class scaled = lo * den;
    mpz_fdiv_q(num.get_mpz_t(), scaled.get_num_mpz_t(), scaled.get_den_mpz_t());
    mpq_class cand(num + 1, den);
    cand.canonicalize();
    if (cand > lo && cand < hi) return cand;
    den *= 2;
  }
  mpq_class mid = (lo + hi) / 2;
  return mid;
}

}  // namespace

ZetaWitness zeta_ledger(const mpq_class& zeta) {
  ZetaWitness w;
  w.zeta = zeta;
  w.e_coeffs = {-8 + 6 * zeta, -66 - 36 * zeta, -12 + 6 * zeta, -3 - 6 * zeta};
  static const char* e_names[4] = {"E1: -8+6*zeta < 0", "E2: -66-36*zeta < 0",
                                   "E3: -12+6*zeta < 0", "E4: -3-6*zeta < 0"};
  for (int i = 0; i < 4; ++i) {
    if (!(w.e_coeffs[i] < 0)) {
      w.violated = e_names[i];
      return w;
    }
  }
  // With the E-conditions holding, 66+36z, 3+6z, 12-6z and 32+12z are all positive, so
  //   (32+12z) / (2 a1 |66+36z|) < 1  <=>  a1 > (8+3z)/(33+18z),
  //   (32+12z) a1 / (2 |3+6z|)   < 1  <=>  a1 < (3+6z)/(16+6z),
  //   12 a2 / 14                 < 1  <=>  a2 < 7/6,
  //   12 / (2 a2 |12-6z|)        < 1  <=>  a2 > 1/(2-z).
  const mpq_class c1 = 32 + 12 * zeta;
  const mpq_class m66 = qabs(66 + 36 * zeta), m3 = qabs(3 + 6 * zeta), m12 = qabs(12 - 6 * zeta);
  w.lo1 = c1 / (2 * m66);
  w.hi1 = 2 * m3 / c1;
  w.lo2 = mpq_class(12) / (2 * m12);
  w.hi2 = mpq_class(7, 6);
  if (!(w.lo1 < w.hi1)) {
    w.violated = "alpha1 window: (8+3*zeta)/(33+18*zeta) < (3+6*zeta)/(16+6*zeta)";
    return w;
  }
  if (!(w.lo2 < w.hi2)) {
    w.violated = "alpha2 window: 1/(2-zeta) < 7/6";
    return w;
  }
  w.alpha1 = dyadic_inside(w.lo1, w.hi1);
  w.alpha2 = dyadic_inside(w.lo2, w.hi2);
  w.quotients = {c1 / (2 * w.alpha1 * m66), c1 * w.alpha1 / (2 * m3), 12 * w.alpha2 / 14,
                 mpq_class(12) / (2 * w.alpha2 * m12)};
  for (auto& q : w.quotients) q.canonicalize();
  w.admissible = true;
  for (int i = 0; i < 4; ++i) {
    w.margins[i] = 1 - w.quotients[i];
    if (!(w.quotients[i] < 1)) {
      w.admissible = false;
      w.violated = "absorption quotient " + std::to_string(i + 1) + " < 1";
      return w;
    }
  }
  return w;
}

std::string zeta_witness_text(const ZetaWitness& w) {
  std::ostringstream os;
  os << "zeta = " << w.zeta.get_str() << "\n";
  for (int i = 0; i < 4; ++i) os << "E" << i + 1 << " = " << w.e_coeffs[i].get_str() << "\n";
  os << "admissible = " << (w.admissible ? "true" : "false") << "\n";
  if (!w.violated.empty()) os << "violated = " << w.violated << "\n";
  if (w.violated.rfind("E", 0) != 0) {
    os << "alpha1_window = (" << w.lo1.get_str() << ", " << w.hi1.get_str() << ")\n";
    os << "alpha2_window = (" << w.lo2.get_str() << ", " << w.hi2.get_str() << ")\n";
  }
  if (w.admissible) {
    os << "alpha1 = " << w.alpha1.get_str() << "\n";
    os << "alpha2 = " << w.alpha2.get_str() << "\n";
    for (int i = 0; i < 4; ++i) {
      os << "quotient" << i + 1 << " = " << w.quotients[i].get_str() << "\n";
      os << "margin" << i + 1 << " = " << w.margins[i].get_str() << "\n";
    }
  }
  return os.str();
}

std::string zeta_witness_csv(const std::vector<ZetaWitness>& ws) {
  std::ostringstream os;
  os << "zeta,E1,E2,E3,E4,admissible,alpha1,alpha2,q1,q2,q3,q4,violated\n";
  for (const auto& w : ws) {
    os << w.zeta.get_str();
    for (const auto& e : w.e_coeffs) os << "," << e.get_str();
    os << "," << (w.admissible ? "true" : "false");
    if (w.admissible) {
      os << "," << w.alpha1.get_str() << "," << w.alpha2.get_str();
      for (const auto& q : w.quotients) os << "," << q.get_str();
    } else {
      os << ",,,,,,";
    }
    os << ",\"" << w.violated << "\"\n";
  }
  return os.str();
}

}  // namespace dampbeam
