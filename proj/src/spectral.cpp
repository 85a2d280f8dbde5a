#include "gibbsflow/spectral.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "gibbsflow/errors.hpp"

namespace gibbsflow {

Grid make_grid(Index n_points, double half_extent) {
  if (n_points < 64) {
    throw InvalidArgument("grid needs at least 64 points, got " +
                          std::to_string(n_points));
  }
  if (!(half_extent > 0.0)) {
    throw InvalidArgument("grid half extent must be positive");
  }
  Grid grid;
  grid.half_extent = half_extent;
  grid.spacing = 2.0 * half_extent / static_cast<double>(n_points - 1);
  grid.points.resize(n_points);
  // Fill symmetrically so that x_{n-1-i} == -x_i exactly.
  for (Index i = 0; i < n_points; ++i) {
    const double x = -half_extent + static_cast<double>(i) * grid.spacing;
    grid.points(i) = x;
  }
  for (Index i = 0; i < n_points / 2; ++i) {
    grid.points(n_points - 1 - i) = -grid.points(i);
  }
  if (n_points % 2 == 1) grid.points(n_points / 2) = 0.0;
  return grid;
}

double Potential::wall_height() const {
  return std::min(values(0), values(values.size() - 1));
}

Potential build_potential(double s, const Grid& grid) {
  if (!(s > 1.0)) {
    throw InvalidArgument("potential exponent must satisfy s > 1, got " +
                          std::to_string(s));
  }
  Potential v;
  v.s = s;
  v.values = (1.0 + grid.points.array().square()).pow(0.5 * s).matrix();
  return v;
}

BandedSymmetric::BandedSymmetric(Index n)
    : bands_(Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, n)) {}

Eigen::VectorXd BandedSymmetric::apply(
    const Eigen::Ref<const Eigen::VectorXd>& v) const {
  const Index n = size();
  if (v.size() != n) throw DimensionError("banded apply: size mismatch");
  Eigen::VectorXd out = bands_.row(0).transpose().cwiseProduct(v);
  for (int k = 1; k <= 2; ++k) {
    for (Index i = 0; i + k < n; ++i) {
      out(i) += bands_(k, i) * v(i + k);
      out(i + k) += bands_(k, i) * v(i);
    }
  }
  return out;
}

Eigen::MatrixXd BandedSymmetric::to_dense() const {
  const Index n = size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    a(i, i) = bands_(0, i);
    for (int k = 1; k <= 2; ++k) {
      if (i + k < n) a(i, i + k) = a(i + k, i) = bands_(k, i);
    }
  }
  return a;
}

Index BandedSymmetric::count_below(double shift) const {
  const Index n = size();
  const double tiny = std::numeric_limits<double>::min() * 1e10;
  Index negatives = 0;
  // d_i and the two sub-diagonal multipliers of the previous rows.
  double d_prev2 = 0.0, d_prev1 = 0.0;
  double l1_prev2 = 0.0, l1_prev1 = 0.0;  // L(i-1, i-2), L(i, i-1)
  double l2_prev2 = 0.0, l2_prev1 = 0.0;  // L(i, i-2), L(i+1, i-1)
  for (Index i = 0; i < n; ++i) {
    double d = bands_(0, i) - shift;
    if (i >= 1) d -= l1_prev1 * l1_prev1 * d_prev1;
    if (i >= 2) d -= l2_prev2 * l2_prev2 * d_prev2;
    if (d == 0.0) d = -tiny;
    if (d < 0.0) ++negatives;

    double l1 = 0.0, l2 = 0.0;
    if (i + 1 < n) {
      double a = bands_(1, i);
      if (i >= 1) a -= l2_prev1 * l1_prev1 * d_prev1;
      l1 = a / d;
    }
    if (i + 2 < n) l2 = bands_(2, i) / d;

    d_prev2 = d_prev1;
    d_prev1 = d;
    l1_prev2 = l1_prev1;
    l1_prev1 = l1;
    l2_prev2 = l2_prev1;
    l2_prev1 = l2;
  }
  (void)l1_prev2;
  return negatives;
}

std::pair<double, double> BandedSymmetric::gershgorin() const {
  const Index n = size();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (Index i = 0; i < n; ++i) {
    double r = 0.0;
    for (int k = 1; k <= 2; ++k) {
      if (i + k < n) r += std::abs(bands_(k, i));
      if (i - k >= 0) r += std::abs(bands_(k, i - k));
    }
    lo = std::min(lo, bands_(0, i) - r);
    hi = std::max(hi, bands_(0, i) + r);
  }
  return {lo, hi};
}

OperatorMatrix discretize_hamiltonian(const Potential& potential,
                                      const Grid& grid, int order) {
  const Index n = grid.size();
  if (potential.values.size() != n) {
    throw DimensionError("potential has " +
                         std::to_string(potential.values.size()) +
                         " values on a grid of " + std::to_string(n));
  }
  if (order != 2 && order != 4) {
    throw InvalidArgument("finite-difference order must be 2 or 4");
  }
  const double inv_dx2 = 1.0 / (grid.spacing * grid.spacing);
  double c0, c1, c2;
  if (order == 4) {
    c0 = 30.0 / 12.0 * inv_dx2;
    c1 = -16.0 / 12.0 * inv_dx2;
    c2 = 1.0 / 12.0 * inv_dx2;
  } else {
    c0 = 2.0 * inv_dx2;
    c1 = -inv_dx2;
    c2 = 0.0;
  }
  OperatorMatrix op{grid, potential, BandedSymmetric(n), order};
  for (Index i = 0; i < n; ++i) {
    op.matrix.band(0, i) = c0 + potential.values(i);
    if (i + 1 < n) op.matrix.band(1, i) = c1;
    if (i + 2 < n) op.matrix.band(2, i) = c2;
  }
  return op;
}

SpectralBasis::SpectralBasis(Grid grid, Potential potential,
                             Eigen::VectorXd eigenvalues,
                             Eigen::MatrixXd eigenvectors)
    : grid_(std::move(grid)),
      potential_(std::move(potential)),
      eigenvalues_(std::move(eigenvalues)),
      eigenvectors_(std::move(eigenvectors)) {
  if (eigenvectors_.rows() != grid_.size() ||
      eigenvectors_.cols() != eigenvalues_.size()) {
    throw DimensionError("basis eigenvector block does not match grid/modes");
  }
  if (potential_.values.size() != grid_.size()) {
    throw DimensionError("basis potential does not match grid");
  }
  for (Index j = 0; j < eigenvalues_.size(); ++j) {
    if (!(eigenvalues_(j) > 0.0)) {
      throw EigensolverError("non-positive eigenvalue in basis");
    }
    if (j > 0 && eigenvalues_(j) < eigenvalues_(j - 1)) {
      throw EigensolverError("eigenvalues not sorted");
    }
  }
}

Index SpectralBasis::modes_below(double cut) const {
  const auto* begin = eigenvalues_.data();
  const auto* end = begin + eigenvalues_.size();
  return static_cast<Index>(std::upper_bound(begin, end, cut) - begin);
}

Eigen::MatrixXd SpectralBasis::gram() const {
  return grid_.spacing * (eigenvectors_.transpose() * eigenvectors_);
}

namespace {

// k-th smallest eigenvalue (1-based) by Sturm-count bisection.
double bisect_eigenvalue(const BandedSymmetric& a, Index k, double lo,
                         double hi) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() *
                       std::max(std::abs(lo), std::abs(hi))) {
      break;
    }
    if (a.count_below(mid) >= k) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Eigen::SparseMatrix<double> shifted_sparse(const BandedSymmetric& a,
                                           double shift) {
  const Index n = a.size();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(5 * n));
  for (Index i = 0; i < n; ++i) {
    triplets.emplace_back(i, i, a.band(0, i) - shift);
    for (int k = 1; k <= 2; ++k) {
      if (i + k < n) {
        triplets.emplace_back(i, i + k, a.band(k, i));
        triplets.emplace_back(i + k, i, a.band(k, i));
      }
    }
  }
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

Eigen::VectorXd inverse_iteration(const BandedSymmetric& a, double lambda,
                                  int iterations) {
  const Index n = a.size();
  // A relative nudge keeps the factorisation away from an exact zero pivot.
  const double shift =
      lambda + 1e-11 * std::max(1.0, std::abs(lambda));
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(shifted_sparse(a, shift));
  if (lu.info() != Eigen::Success) {
    throw EigensolverError("shifted factorisation failed at lambda = " +
                           std::to_string(lambda));
  }
  // Deterministic start vector with components along every mode.
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) {
    v(i) = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(i) + 0.3);
  }
  v.normalize();
  for (int it = 0; it < iterations; ++it) {
    v = lu.solve(v);
    if (lu.info() != Eigen::Success || !v.allFinite()) {
      throw EigensolverError("inverse iteration diverged at lambda = " +
                             std::to_string(lambda));
    }
    v.normalize();
  }
  return v;
}

}  // namespace

SpectralBasis eigendecompose(const OperatorMatrix& op, Index n_modes,
                             const EigenOptions& options) {
  const BandedSymmetric& a = op.matrix;
  const Index n = a.size();
  if (n_modes < 1 || n_modes > n) {
    throw InvalidArgument("n_modes must lie in [1, grid size]");
  }
  if (op.potential.values.minCoeff() < 1.0 - 1e-12) {
    throw InvalidArgument("potential must satisfy V >= 1 on the grid");
  }

  auto [glo, ghi] = a.gershgorin();
  Eigen::VectorXd lambdas(n_modes);
  double lo = glo;
  for (Index k = 1; k <= n_modes; ++k) {
    lambdas(k - 1) = bisect_eigenvalue(a, k, lo, ghi);
    lo = std::max(lo, lambdas(k - 1) - 1e-9 * std::abs(lambdas(k - 1)));
  }

  const double lambda_top = lambdas(n_modes - 1);
  if (op.potential.wall_height() < options.guard_factor * lambda_top) {
    throw TruncationTooDeep(
        "lambda_J = " + std::to_string(lambda_top) + " needs V(L) >= " +
        std::to_string(options.guard_factor * lambda_top) + " but V(L) = " +
        std::to_string(op.potential.wall_height()) +
        "; enlarge the grid extent or request fewer modes");
  }
  const double dx = op.grid.spacing;
  if (dx > std::numbers::pi / (2.0 * std::sqrt(lambda_top))) {
    throw InvalidArgument(
        "grid too coarse: fewer than 4 points per wavelength of mode J");
  }

  Eigen::MatrixXd vectors(n, n_modes);
  for (Index j = 0; j < n_modes; ++j) {
    Eigen::VectorXd v =
        inverse_iteration(a, lambdas(j), options.inverse_iterations);
    // Rayleigh quotient refines the bisection value to the vector's energy.
    lambdas(j) = v.dot(a.apply(v)) / v.squaredNorm();
    v /= std::sqrt(dx) * v.norm();
    for (Index i = 0; i < n; ++i) {
      if (std::abs(v(i)) > 1e-6) {
        if (v(i) < 0.0) v = -v;
        break;
      }
    }
    vectors.col(j) = v;
  }
  // Rayleigh refinement can reorder exact ties only; keep them sorted.
  for (Index j = 1; j < n_modes; ++j) {
    if (lambdas(j) < lambdas(j - 1)) lambdas(j) = lambdas(j - 1);
  }

  SpectralBasis basis(op.grid, op.potential, std::move(lambdas),
                      std::move(vectors));

  const Eigen::MatrixXd gram = basis.gram();
  const double ortho_err =
      (gram - Eigen::MatrixXd::Identity(n_modes, n_modes)).cwiseAbs().maxCoeff();
  if (ortho_err > options.orthonormal_tol) {
    throw EigensolverError("eigenvectors not orthonormal (max deviation " +
                           std::to_string(ortho_err) + ")");
  }
  const double residual = max_relative_residual(op, basis);
  if (residual > options.tol_eig) {
    throw EigensolverError("eigen residual " + std::to_string(residual) +
                           " exceeds tolerance");
  }
  return basis;
}

BasisPtr build_basis(double s, Index n_modes, Index grid_points,
                     double half_extent, const EigenOptions& options) {
  const Grid grid = make_grid(grid_points, half_extent);
  const Potential potential = build_potential(s, grid);
  const OperatorMatrix op = discretize_hamiltonian(potential, grid);
  return std::make_shared<const SpectralBasis>(
      eigendecompose(op, n_modes, options));
}

double max_relative_residual(const OperatorMatrix& op,
                             const SpectralBasis& basis) {
  double worst = 0.0;
  const double sqrt_dx = std::sqrt(op.grid.spacing);
  for (Index j = 0; j < basis.n_modes(); ++j) {
    const Eigen::VectorXd u = basis.eigenvectors().col(j);
    const double r =
        sqrt_dx * (op.apply(u) - basis.lambda(j) * u).norm() / basis.lambda(j);
    worst = std::max(worst, r);
  }
  return worst;
}

TracePower trace_power(const SpectralBasis& basis, double p) {
  if (!(p > 0.0)) throw InvalidArgument("trace power needs p > 0");
  TracePower out;
  out.value = basis.eigenvalues().array().pow(-p).sum();
  out.threshold = 0.5 + 1.0 / basis.s();
  out.converged = p > out.threshold;
  return out;
}

Eigen::VectorXd green_diagonal(const SpectralBasis& basis, double beta) {
  if (!(beta >= 0.0 && beta < 0.5)) {
    throw InvalidArgument("green_diagonal needs 0 <= beta < 1/2");
  }
  const Eigen::VectorXd weights =
      basis.eigenvalues().array().pow(beta - 1.0).matrix();
  return basis.eigenvectors().array().square().matrix() * weights;
}

double green_lp_norm(const SpectralBasis& basis, double beta, double p) {
  const Eigen::VectorXd g = green_diagonal(basis, beta);
  const double lower = std::max(1.0, 2.0 / (basis.s() * (1.0 - 2.0 * beta)));
  if (!(p > lower)) {
    throw InvalidArgument("p = " + std::to_string(p) +
                          " outside the admissible range p > " +
                          std::to_string(lower));
  }
  if (std::isinf(p)) return g.cwiseAbs().maxCoeff();
  return std::pow(basis.grid().spacing * g.cwiseAbs().array().pow(p).sum(),
                  1.0 / p);
}

EigenCount count_eigenvalues(const SpectralBasis& basis, double lam) {
  return {basis.modes_below(lam), lam > basis.lambda_max()};
}

double weyl_count(const Potential& potential, const Grid& grid, double lam) {
  if (potential.values.size() != grid.size()) {
    throw DimensionError("weyl_count: potential/grid mismatch");
  }
  const Eigen::ArrayXd integrand =
      (lam - potential.values.array()).max(0.0).sqrt();
  const Index n = grid.size();
  const double interior = integrand.segment(1, n - 2).sum();
  const double ends = 0.5 * (integrand(0) + integrand(n - 1));
  return grid.spacing * (interior + ends) / std::numbers::pi;
}

}  // namespace gibbsflow
