#ifndef GIBBSFLOW_SPECTRAL_HPP
#define GIBBSFLOW_SPECTRAL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>

namespace gibbsflow {

using Index = Eigen::Index;

/// Uniform symmetric grid x_i = -L + i*dx on [-L, L], endpoints included.
/// Fields are taken to vanish outside [-L, L].
struct Grid {
  Eigen::VectorXd points;
  double spacing = 0.0;
  double half_extent = 0.0;

  Index size() const { return points.size(); }
};

Grid make_grid(Index n_points, double half_extent);

/// Trapping potential sampled on a grid. `s` is the growth exponent of
/// V ~ <x>^s.
struct Potential {
  double s = 2.0;
  Eigen::VectorXd values;

  /// min(V(-L), V(L)), the height of the confining wall.
  double wall_height() const;
};

/// V(x) = (1 + x^2)^{s/2}. Throws InvalidArgument unless s > 1.
Potential build_potential(double s, const Grid& grid);

/// Symmetric banded matrix with two off-diagonals, stored by diagonals:
/// band(k, i) = A(i, i + k) for k = 0, 1, 2.
class BandedSymmetric {
 public:
  BandedSymmetric() = default;
  explicit BandedSymmetric(Index n);

  Index size() const { return bands_.cols(); }
  double& band(int k, Index i) { return bands_(k, i); }
  double band(int k, Index i) const { return bands_(k, i); }

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  Eigen::MatrixXd to_dense() const;

  /// Number of eigenvalues strictly below `shift` (Sylvester inertia of
  /// A - shift*I via banded LDL^T).
  Index count_below(double shift) const;

  /// Gershgorin interval containing the whole spectrum.
  std::pair<double, double> gershgorin() const;

 private:
  Eigen::Matrix<double, 3, Eigen::Dynamic> bands_;
};

/// Finite-difference realisation of h = -d^2/dx^2 + V on a grid.
struct OperatorMatrix {
  Grid grid;
  Potential potential;
  BandedSymmetric matrix;
  int order = 4;

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& v) const {
    return matrix.apply(v);
  }
};

/// Second (order = 2) or fourth (order = 4, default) order central
/// differences plus diag(V), Dirichlet outside the grid.
OperatorMatrix discretize_hamiltonian(const Potential& potential,
                                      const Grid& grid, int order = 4);

struct EigenOptions {
  double tol_eig = 1e-8;       // relative residual ||h u - lambda u|| / lambda
  double guard_factor = 2.0;   // require V(L) >= guard_factor * lambda_J
  double orthonormal_tol = 1e-8;
  int inverse_iterations = 3;
};

/// Lowest eigenpairs of h. Eigenvectors are columns of `eigenvectors()`,
/// normalised so that sum_i u_j(x_i)^2 dx = 1, and sign-fixed so that the
/// first grid value with |u_j| > 1e-6 is positive.
class SpectralBasis {
 public:
  SpectralBasis(Grid grid, Potential potential, Eigen::VectorXd eigenvalues,
                Eigen::MatrixXd eigenvectors);

  const Grid& grid() const { return grid_; }
  const Potential& potential() const { return potential_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }

  Index n_modes() const { return eigenvalues_.size(); }
  Index grid_size() const { return grid_.size(); }
  double s() const { return potential_.s; }
  double lambda(Index j) const { return eigenvalues_(j); }
  double lambda_max() const { return eigenvalues_(eigenvalues_.size() - 1); }

  /// Number of modes with lambda_j <= cut.
  Index modes_below(double cut) const;

  /// Quadrature Gram matrix U^T U dx.
  Eigen::MatrixXd gram() const;

 private:
  Grid grid_;
  Potential potential_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
};

using BasisPtr = std::shared_ptr<const SpectralBasis>;

SpectralBasis eigendecompose(const OperatorMatrix& op, Index n_modes,
                             const EigenOptions& options = {});

/// Convenience: grid + potential + discretisation + eigendecomposition.
BasisPtr build_basis(double s, Index n_modes, Index grid_points = 2048,
                     double half_extent = 12.0,
                     const EigenOptions& options = {});

/// Largest residual ||h u_j - lambda_j u_j||_{L^2} / lambda_j over the basis.
double max_relative_residual(const OperatorMatrix& op,
                             const SpectralBasis& basis);

struct TracePower {
  double value = 0.0;       // sum_{j <= J} lambda_j^{-p}
  bool converged = false;   // p > 1/2 + 1/s
  double threshold = 0.0;   // 1/2 + 1/s
};

TracePower trace_power(const SpectralBasis& basis, double p);

/// g(x_i) = sum_j lambda_j^{beta-1} u_j(x_i)^2, 0 <= beta < 1/2.
Eigen::VectorXd green_diagonal(const SpectralBasis& basis, double beta);

/// Quadrature L^p norm of green_diagonal for admissible
/// max{1, 2/(s(1-2 beta))} < p <= inf. Pass infinity for the sup norm.
double green_lp_norm(const SpectralBasis& basis, double beta, double p);

struct EigenCount {
  Index count = 0;
  bool censored = false;   // lam > lambda_J: the true count may be larger
};

EigenCount count_eigenvalues(const SpectralBasis& basis, double lam);

/// (1/pi) * int (lam - V(x))_+^{1/2} dx by trapezoidal quadrature.
double weyl_count(const Potential& potential, const Grid& grid, double lam);

// Basis cache, see basis_io.cpp for the layout.
void save_basis(const SpectralBasis& basis, const std::string& path);
SpectralBasis load_basis(const std::string& path);

}  // namespace gibbsflow

#endif  // GIBBSFLOW_SPECTRAL_HPP
