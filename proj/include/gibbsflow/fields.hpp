#ifndef GIBBSFLOW_FIELDS_HPP
#define GIBBSFLOW_FIELDS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

#include "gibbsflow/spectral.hpp"

namespace gibbsflow {

using Complex = std::complex<double>;

/// u = sum_j alpha_j u_j in the eigenbasis of h.
struct FieldCoeffs {
  BasisPtr basis;
  Eigen::VectorXcd alpha;

  FieldCoeffs() = default;
  FieldCoeffs(BasisPtr b, Eigen::VectorXcd a);

  static FieldCoeffs zero(BasisPtr b);
  /// alpha_j = 1 for the given 0-based mode, all others 0.
  static FieldCoeffs unit(BasisPtr b, Index mode);

  Index size() const { return alpha.size(); }
  const Eigen::VectorXd& lambdas() const { return basis->eigenvalues(); }
};

/// Smooth cutoff chi on [0, inf): 1 on [0, 1/2], 0 on [1, inf),
/// chi(t) = phi(2-2t) / (phi(2-2t) + phi(2t-1)), phi(r) = exp(-1/r), between.
struct CutoffProfile {
  double operator()(double t) const;
};

/// chi(lambda_j / cut) for every mode of the basis.
Eigen::VectorXd cutoff_multipliers(const SpectralBasis& basis, double cut,
                                   const CutoffProfile& profile = {});

/// Trapezoidal integral of grid samples with spacing dx.
template <typename Derived>
typename Derived::Scalar trapezoid(const Eigen::DenseBase<Derived>& values,
                                   double dx) {
  const Index n = values.size();
  if (n == 0) return typename Derived::Scalar(0);
  if (n == 1) return values(0) * dx;
  return dx * (values.sum() - 0.5 * (values(0) + values(n - 1)));
}

/// Trapezoidal L^p norm of grid samples (real or complex), p >= 1 or inf.
template <typename Derived>
double lp_norm(const Eigen::DenseBase<Derived>& values, double dx, double p) {
  const Eigen::ArrayXd mod = values.derived().array().abs().template cast<double>();
  if (std::isinf(p)) return mod.maxCoeff();
  if (p == 2.0) return std::sqrt(trapezoid(mod.square(), dx));
  if (p == 4.0) return std::pow(trapezoid(mod.square().square(), dx), 0.25);
  return std::pow(trapezoid(mod.pow(p), dx), 1.0 / p);
}

/// Grid values of the field, sum_j alpha_j u_j(x_i).
Eigen::VectorXcd synthesize(const FieldCoeffs& u);

/// Quadrature projection alpha_j = sum_i u_j(x_i) f(x_i) dx.
FieldCoeffs analyze(const Eigen::Ref<const Eigen::VectorXcd>& values,
                    BasisPtr basis);

FieldCoeffs project_low(const FieldCoeffs& u, double cut);
FieldCoeffs project_high(const FieldCoeffs& u, double cut);

/// Q_cut u: alpha_j -> chi(lambda_j / cut) alpha_j.
FieldCoeffs smooth_cutoff(const FieldCoeffs& u, double cut,
                          const CutoffProfile& profile = {});

/// (sum_j lambda_j^theta |alpha_j|^2)^{1/2}.
double sobolev_norm(const FieldCoeffs& u, double theta);

/// ||h^{beta/2} u||_{L^p} on the grid; p must be a positive even integer.
double wbp_norm(const FieldCoeffs& u, double beta, int p);

/// (1/2) int |u|^4 dx on the full grid.
double quartic_functional(const FieldCoeffs& u);

/// ||<D>^beta f||_{L^p} with <D>^beta applied as a discrete Fourier
/// multiplier (1 + k^2)^{beta/2} on the grid samples.
double bessel_lp_norm(const Eigen::Ref<const Eigen::VectorXcd>& values,
                      const Grid& grid, double beta, double p);

/// ||<x>^{weight} f||_{L^p} on the grid.
double weighted_lp_norm(const Eigen::Ref<const Eigen::VectorXcd>& values,
                        const Grid& grid, double weight, double p);

/// Reduced quadrature for polynomial products of a band-limited set of
/// modes: every `stride`-th grid point over the region where those modes
/// are not negligible. Exact Hamiltonian structure only needs the same rule
/// on both sides of a product, so the flow and its energy both use it.
struct ProductQuadrature {
  std::vector<Index> nodes;   // indices into the basis grid
  Eigen::VectorXd weights;    // stride * dx
  Eigen::MatrixXd modes;      // u_j(x_node), nodes x n_modes
  Index stride = 1;
};

/// Rule for the first `n_modes` eigenvectors with at least
/// `points_per_wavelength` nodes per shortest local wavelength 2 pi /
/// sqrt(lambda_max). `negligible` bounds the dropped amplitudes relative to
/// the largest one.
ProductQuadrature make_product_quadrature(const SpectralBasis& basis,
                                          Index n_modes,
                                          double points_per_wavelength = 8.0,
                                          double negligible = 1e-9);

/// Q_cut-dressed products of the low block on a ProductQuadrature. Only the
/// `active` modes with chi(lambda_j / cut) > 0 enter; v = Q_cut u on the
/// nodes.
class CutoffQuadrature {
 public:
  CutoffQuadrature(BasisPtr basis, double cut,
                   const CutoffProfile& profile = {},
                   double points_per_wavelength = 8.0);

  const BasisPtr& basis() const { return basis_; }
  double cut() const { return cut_; }
  Index active_modes() const { return active_; }
  const Eigen::VectorXd& chi() const { return chi_; }
  const ProductQuadrature& rule() const { return rule_; }

  /// ||Q_cut u||_{L^4}^4.
  double quartic_norm(const Eigen::Ref<const Eigen::VectorXcd>& alpha) const;

  /// Coefficients of Q_cut(|Q_cut u|^2 Q_cut u); zero outside the active
  /// block. `out` is resized to alpha.size().
  void cubic(const Eigen::Ref<const Eigen::VectorXcd>& alpha,
             Eigen::VectorXcd& out) const;

 private:
  BasisPtr basis_;
  double cut_;
  Index active_ = 0;
  Eigen::VectorXd chi_;
  ProductQuadrature rule_;
  Eigen::MatrixXd dressed_;   // chi_j u_j(x_node), nodes x active
};

void write_field_csv(const FieldCoeffs& u, std::ostream& out);
void write_field_csv(const FieldCoeffs& u, const std::string& path);

/// Reads the write_field_csv layout back; the row count must match the basis.
FieldCoeffs read_field_csv(std::istream& in, BasisPtr basis);
FieldCoeffs read_field_csv(const std::string& path, BasisPtr basis);

}  // namespace gibbsflow

#endif  // GIBBSFLOW_FIELDS_HPP
