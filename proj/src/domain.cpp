#include "dampbeam/domain.hpp"

#include <cmath>

namespace dampbeam {

double DomainSpec::wrap(double x) const {
  const double c = circumference();
  double y = std::fmod(x - left(), c);
  if (y <= 0.0) y += c;
  return left() + y;
}

bool DomainSpec::in_omega(double x) const {
  const double y = wrap(x);
  return (y > -L && y < 0.0) || (y > d && y < d + L);
}

void DomainSpec::validate() const {
  if (!(d > 0.0)) throw ValidationError("domain.d must be > 0");
  if (!(L > 0.0)) throw ValidationError("domain.L must be > 0");
  if (!(T > 0.0)) throw ValidationError("domain.T must be > 0");
}

void CarlemanParams::validate(double T) const {
  if (!(s >= 1.0)) throw ValidationError("carleman.s must be >= 1");
  if (!(lambda >= 1.0)) throw ValidationError("carleman.lambda must be >= 1");
  if (!(T0 > 0.0) || !(T1 > 0.0)) throw ValidationError("carleman.T0 and carleman.T1 must be > 0");
  if (!(T0 < 1.0)) throw ValidationError("carleman.T0 must be < 1 so that 1/T0^2 > 1");
  if (!(T1 < 1.0)) throw ValidationError("carleman.T1 must be < 1 so that 1/T1^2 > 1");
  if (!(2.0 * T0 + 2.0 * T1 < T)) throw ValidationError("carleman: 2*T0 + 2*T1 must be < T");
}

}  // namespace dampbeam
