#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

namespace dampbeam {

using cplx = std::complex<double>;

// kappa = 2 pi k / circumference (physical) or kappa = k (unit normalisation).
enum class Normalization { physical, unit };

// Uniform periodic grid x_j = x0 + j h, j = 0..n-1, with real FFTs.
// Modal convention: u(x) = sum_k c_k e^{i kappa_k (x - x0)}, c_k = (1/n) sum_j u_j e^{-i kappa_k (x_j - x0)};
// only k = 0..n/2 is stored (Hermitian symmetry).
class SpatialGrid {
 public:
  SpatialGrid(int n_modes, double circumference, double x0,
              Normalization norm = Normalization::physical);

  int n() const { return n_; }
  int n_modal() const { return n_ / 2 + 1; }
  double circumference() const { return circumference_; }
  double x0() const { return x0_; }
  double spacing() const { return circumference_ / n_; }
  Normalization normalization() const { return norm_; }
  const std::vector<double>& nodes() const { return nodes_; }

  int wavenumber(int j) const { return j; }
  double kappa(int j) const { return kappa_[j]; }
  // Multiplicity of mode j in Parseval sums: 1 for k = 0 and Nyquist, else 2.
  double multiplicity(int j) const { return (j == 0 || 2 * j == n_) ? 1.0 : 2.0; }

  void forward(std::span<const double> u, std::span<cplx> c) const;
  void inverse(std::span<const cplx> c, std::span<double> u) const;
  std::vector<cplx> forward(std::span<const double> u) const;
  std::vector<double> inverse(std::span<const cplx> c) const;

  // Spectral derivative of the given order (Nyquist dropped for odd orders).
  std::vector<double> derivative(std::span<const double> u, int order) const;
  // Modal symbol (i kappa)^order, Nyquist dropped for odd orders.
  cplx symbol(int j, int order) const;

  // First row of the circulant matrix of d^order/dx^order on the nodes.
  std::vector<double> circulant_row(int order) const;

  // ||d^order u||^2 over the torus by Parseval. The c2r transform enforces
  // Hermitian symmetry, so nodal fields are real by construction.
  double squared_norm(std::span<const cplx> c, int order = 0) const;

 private:
  struct Plans;
  int n_;
  double circumference_;
  double x0_;
  Normalization norm_;
  std::vector<double> nodes_;
  std::vector<double> kappa_;
  std::shared_ptr<Plans> plans_;
};

}  // namespace dampbeam
