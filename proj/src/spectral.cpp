#include "dampbeam/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "dampbeam/domain.hpp"

namespace dampbeam {

namespace {
// Planner calls are not thread-safe in FFTW; execution with the new-array
// interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct SpatialGrid::Plans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (r2c) fftw_destroy_plan(r2c);
    if (c2r) fftw_destroy_plan(c2r);
  }
};

SpatialGrid::SpatialGrid(int n_modes, double circumference, double x0, Normalization norm)
    : n_(n_modes), circumference_(circumference), x0_(x0), norm_(norm) {
  if (n_modes < 2 || n_modes % 2 != 0) throw ValidationError("grid.n_modes must be even and >= 2");
  if (!(circumference > 0.0)) throw ValidationError("grid: circumference must be > 0");
  nodes_.resize(n_);
  for (int j = 0; j < n_; ++j) nodes_[j] = x0 + circumference * j / n_;
  kappa_.resize(n_modal());
  for (int j = 0; j < n_modal(); ++j) {
    kappa_[j] = norm == Normalization::unit ? j : 2.0 * std::numbers::pi * j / circumference;
  }
  plans_ = std::make_shared<Plans>();
  std::vector<double> r(n_);
  std::vector<cplx> c(n_modal());
  std::lock_guard lock(planner_mutex());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  plans_->r2c = fftw_plan_dft_r2c_1d(n_, r.data(), reinterpret_cast<fftw_complex*>(c.data()), flags);
  plans_->c2r = fftw_plan_dft_c2r_1d(n_, reinterpret_cast<fftw_complex*>(c.data()), r.data(),
                                     flags | FFTW_PRESERVE_INPUT);
  if (!plans_->r2c || !plans_->c2r) throw ConstructionError("grid: FFTW planning failed");
}

void SpatialGrid::forward(std::span<const double> u, std::span<cplx> c) const {
  if (static_cast<int>(u.size()) != n_ || static_cast<int>(c.size()) != n_modal())
    throw std::invalid_argument("SpatialGrid::forward: size mismatch");
  fftw_execute_dft_r2c(plans_->r2c, const_cast<double*>(u.data()),
                       reinterpret_cast<fftw_complex*>(c.data()));
  const double inv = 1.0 / n_;
  for (auto& v : c) v *= inv;
}

void SpatialGrid::inverse(std::span<const cplx> c, std::span<double> u) const {
  if (static_cast<int>(u.size()) != n_ || static_cast<int>(c.size()) != n_modal())
    throw std::invalid_argument("SpatialGrid::inverse: size mismatch");
  fftw_execute_dft_c2r(plans_->c2r, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(c.data())),
                       u.data());
}

std::vector<cplx> SpatialGrid::forward(std::span<const double> u) const {
  std::vector<cplx> c(n_modal());
  forward(u, c);
  return c;
}

std::vector<double> SpatialGrid::inverse(std::span<const cplx> c) const {
  std::vector<double> u(n_);
  inverse(c, u);
  return u;
}

cplx SpatialGrid::symbol(int j, int order) const {
  if (order % 2 == 1 && 2 * j == n_) return 0.0;
  cplx s = 1.0;
  const cplx ik(0.0, kappa_[j]);
  for (int i = 0; i < order; ++i) s *= ik;
  return s;
}

std::vector<double> SpatialGrid::derivative(std::span<const double> u, int order) const {
  auto c = forward(u);
  for (int j = 0; j < n_modal(); ++j) c[j] *= symbol(j, order);
  return inverse(c);
}

std::vector<double> SpatialGrid::circulant_row(int order) const {
  // Row 0 of D: (D e_m)_0 = (1/n) sum_k symbol_k e^{-2 pi i k m / n}, real.
  std::vector<double> row(n_, 0.0);
  for (int m = 0; m < n_; ++m) {
    double acc = 0.0;
    for (int j = 0; j < n_modal(); ++j) {
      const double ang = -2.0 * std::numbers::pi * j * m / n_;
      acc += multiplicity(j) * (symbol(j, order) * cplx(std::cos(ang), std::sin(ang))).real();
    }
    row[m] = acc / n_;
  }
  return row;
}

double SpatialGrid::squared_norm(std::span<const cplx> c, int order) const {
  double acc = 0.0;
  for (int j = 0; j < n_modal(); ++j) acc += multiplicity(j) * std::norm(symbol(j, order) * c[j]);
  return circumference_ * acc;
}

}  // namespace dampbeam
