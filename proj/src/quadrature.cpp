#include "dampbeam/quadrature.hpp"

#include <gsl/gsl_integration.h>

#include <memory>
#include <stdexcept>

namespace dampbeam {

QuadratureRule gauss_legendre(int order, double a, double b) {
  if (order < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  std::unique_ptr<gsl_integration_glfixed_table, decltype(&gsl_integration_glfixed_table_free)>
      table(gsl_integration_glfixed_table_alloc(static_cast<std::size_t>(order)),
            &gsl_integration_glfixed_table_free);
  QuadratureRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < order; ++i) {
    gsl_integration_glfixed_point(a, b, static_cast<std::size_t>(i), &rule.nodes[i],
                                  &rule.weights[i], table.get());
  }
  return rule;
}

QuadratureRule composite_gauss(const std::vector<double>& breakpoints, int panels_per_segment,
                               int order) {
  if (breakpoints.size() < 2) throw std::invalid_argument("composite_gauss: need two breakpoints");
  if (panels_per_segment < 1) throw std::invalid_argument("composite_gauss: panels must be >= 1");
  QuadratureRule rule;
  for (std::size_t s = 0; s + 1 < breakpoints.size(); ++s) {
    const double a = breakpoints[s];
    const double h = (breakpoints[s + 1] - a) / panels_per_segment;
    if (!(h > 0.0)) throw std::invalid_argument("composite_gauss: breakpoints must increase");
    for (int p = 0; p < panels_per_segment; ++p) {
      const auto panel = gauss_legendre(order, a + p * h, a + (p + 1) * h);
      rule.nodes.insert(rule.nodes.end(), panel.nodes.begin(), panel.nodes.end());
      rule.weights.insert(rule.weights.end(), panel.weights.begin(), panel.weights.end());
    }
  }
  return rule;
}

QuadratureRule periodic_trapezoid(double a, double period, int n) {
  if (n < 1) throw std::invalid_argument("periodic_trapezoid: n must be >= 1");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.assign(n, period / n);
  for (int i = 0; i < n; ++i) rule.nodes[i] = a + period * i / n;
  return rule;
}

}  // namespace dampbeam
