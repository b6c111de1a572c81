#pragma once

#include <vector>

namespace dampbeam {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

// Gauss-Legendre rule with `order` points on [a, b].
QuadratureRule gauss_legendre(int order, double a, double b);

// Composite Gauss-Legendre: each consecutive pair of breakpoints is split into
// `panels_per_segment` equal panels carrying an `order`-point rule.
QuadratureRule composite_gauss(const std::vector<double>& breakpoints, int panels_per_segment,
                               int order);

// Uniform periodic trapezoid on [a, a + period) with n nodes.
QuadratureRule periodic_trapezoid(double a, double period, int n);

}  // namespace dampbeam
