#pragma once

#include <gmpxx.h>

#include <stdexcept>
#include <string>

namespace dampbeam {

// Input or precondition violation. The message names the offending field.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A construction or numerical certification step failed.
struct ConstructionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Torus identified with (-L, d+L] and the two-sided control collar
// omega = (-L, 0) U (d, d+L).
struct DomainSpec {
  double d = 1.0;
  double L = 1.0;
  double T = 2.0;

  double circumference() const { return d + 2.0 * L; }
  double left() const { return -L; }

  // Open-interval membership; x is first wrapped into (-L, d+L].
  bool in_omega(double x) const;
  double wrap(double x) const;

  void validate() const;
};

struct CarlemanParams {
  double s = 4.0;
  double lambda = 2.0;
  double T0 = 0.3;
  double T1 = 0.3;
  mpq_class zeta{1};

  void validate(double T) const;
};

}  // namespace dampbeam
