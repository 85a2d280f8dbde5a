#include "gibbsflow/fields.hpp"

#include <unsupported/Eigen/FFT>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>
#include <vector>

#include "gibbsflow/errors.hpp"

namespace gibbsflow {

FieldCoeffs::FieldCoeffs(BasisPtr b, Eigen::VectorXcd a)
    : basis(std::move(b)), alpha(std::move(a)) {
  if (!basis) throw InvalidArgument("field needs a basis");
  if (alpha.size() != basis->n_modes()) {
    throw DimensionError("field has " + std::to_string(alpha.size()) +
                         " coefficients for a basis of " +
                         std::to_string(basis->n_modes()) + " modes");
  }
  if (!alpha.allFinite()) throw InvalidArgument("non-finite field coefficient");
}

FieldCoeffs FieldCoeffs::zero(BasisPtr b) {
  const Index n = b->n_modes();
  return {std::move(b), Eigen::VectorXcd::Zero(n)};
}

FieldCoeffs FieldCoeffs::unit(BasisPtr b, Index mode) {
  FieldCoeffs u = zero(std::move(b));
  u.alpha(mode) = 1.0;
  return u;
}

double CutoffProfile::operator()(double t) const {
  if (t <= 0.5) return 1.0;
  if (t >= 1.0) return 0.0;
  auto phi = [](double r) { return r > 0.0 ? std::exp(-1.0 / r) : 0.0; };
  const double a = phi(2.0 - 2.0 * t);
  const double b = phi(2.0 * t - 1.0);
  return a / (a + b);
}

Eigen::VectorXd cutoff_multipliers(const SpectralBasis& basis, double cut,
                                   const CutoffProfile& profile) {
  Eigen::VectorXd chi(basis.n_modes());
  for (Index j = 0; j < chi.size(); ++j) chi(j) = profile(basis.lambda(j) / cut);
  return chi;
}

Eigen::VectorXcd synthesize(const FieldCoeffs& u) {
  const Eigen::MatrixXd& modes = u.basis->eigenvectors();
  Eigen::VectorXcd out(modes.rows());
  out.real() = modes * u.alpha.real();
  out.imag() = modes * u.alpha.imag();
  return out;
}

FieldCoeffs analyze(const Eigen::Ref<const Eigen::VectorXcd>& values,
                    BasisPtr basis) {
  if (values.size() != basis->grid_size()) {
    throw DimensionError("analyze: grid function has " +
                         std::to_string(values.size()) + " samples, grid has " +
                         std::to_string(basis->grid_size()));
  }
  const Eigen::MatrixXd& modes = basis->eigenvectors();
  const double dx = basis->grid().spacing;
  Eigen::VectorXcd alpha(modes.cols());
  alpha.real() = dx * (modes.transpose() * values.real());
  alpha.imag() = dx * (modes.transpose() * values.imag());
  return {std::move(basis), std::move(alpha)};
}

FieldCoeffs project_low(const FieldCoeffs& u, double cut) {
  FieldCoeffs out = u;
  const Index keep = u.basis->modes_below(cut);
  out.alpha.tail(u.size() - keep).setZero();
  return out;
}

FieldCoeffs project_high(const FieldCoeffs& u, double cut) {
  FieldCoeffs out = u;
  const Index keep = u.basis->modes_below(cut);
  out.alpha.head(keep).setZero();
  return out;
}

FieldCoeffs smooth_cutoff(const FieldCoeffs& u, double cut,
                          const CutoffProfile& profile) {
  FieldCoeffs out = u;
  out.alpha = cutoff_multipliers(*u.basis, cut, profile).cwiseProduct(u.alpha);
  return out;
}

double sobolev_norm(const FieldCoeffs& u, double theta) {
  return std::sqrt(
      (u.lambdas().array().pow(theta) * u.alpha.array().abs2()).sum());
}

double wbp_norm(const FieldCoeffs& u, double beta, int p) {
  if (p < 2 || p % 2 != 0) {
    throw InvalidArgument("wbp_norm needs a positive even p >= 2");
  }
  FieldCoeffs v = u;
  v.alpha = u.lambdas().array().pow(0.5 * beta).matrix().cwiseProduct(u.alpha);
  return lp_norm(synthesize(v), u.basis->grid().spacing, static_cast<double>(p));
}

double quartic_functional(const FieldCoeffs& u) {
  const Eigen::ArrayXd mod2 = synthesize(u).array().abs2();
  return 0.5 * trapezoid(mod2.square(), u.basis->grid().spacing);
}

double bessel_lp_norm(const Eigen::Ref<const Eigen::VectorXcd>& values,
                      const Grid& grid, double beta, double p) {
  const Index n = values.size();
  if (n != grid.size()) throw DimensionError("bessel_lp_norm: size mismatch");
  Eigen::FFT<double> fft;
  std::vector<Complex> in(values.data(), values.data() + n);
  std::vector<Complex> spectrum;
  fft.fwd(spectrum, in);
  const double dk = 2.0 * std::numbers::pi / (static_cast<double>(n) * grid.spacing);
  for (Index m = 0; m < n; ++m) {
    const Index wrapped = m <= n / 2 ? m : m - n;
    const double k = dk * static_cast<double>(wrapped);
    spectrum[static_cast<std::size_t>(m)] *= std::pow(1.0 + k * k, 0.5 * beta);
  }
  std::vector<Complex> out;
  fft.inv(out, spectrum);
  const Eigen::Map<const Eigen::VectorXcd> filtered(out.data(), n);
  return lp_norm(filtered, grid.spacing, p);
}

double weighted_lp_norm(const Eigen::Ref<const Eigen::VectorXcd>& values,
                        const Grid& grid, double weight, double p) {
  if (values.size() != grid.size()) {
    throw DimensionError("weighted_lp_norm: size mismatch");
  }
  const Eigen::ArrayXd w =
      (1.0 + grid.points.array().square()).pow(0.5 * weight);
  const Eigen::ArrayXd mod = values.array().abs() * w;
  return lp_norm(mod, grid.spacing, p);
}

ProductQuadrature make_product_quadrature(const SpectralBasis& basis,
                                          Index n_modes,
                                          double points_per_wavelength,
                                          double negligible) {
  if (n_modes < 1 || n_modes > basis.n_modes()) {
    throw InvalidArgument("product quadrature: bad mode count");
  }
  const Grid& grid = basis.grid();
  const auto block = basis.eigenvectors().leftCols(n_modes);
  const double lam = basis.lambda(n_modes - 1);
  const double h_target =
      2.0 * std::numbers::pi / (points_per_wavelength * std::sqrt(lam));
  ProductQuadrature q;
  q.stride = std::max<Index>(1, static_cast<Index>(std::floor(h_target / grid.spacing)));

  const Eigen::VectorXd envelope = block.cwiseAbs().rowwise().maxCoeff();
  const double threshold = negligible * envelope.maxCoeff();
  Index first = 0, last = grid.size() - 1;
  while (first < last && envelope(first) <= threshold) ++first;
  while (last > first && envelope(last) <= threshold) --last;
  // Centre the node lattice on the grid midpoint so the rule is symmetric.
  const Index mid = grid.size() / 2;
  Index start = mid - ((mid - first) / q.stride) * q.stride;
  if (start > first) start -= q.stride;
  start = std::max<Index>(start, 0);
  for (Index i = start; i <= last; i += q.stride) q.nodes.push_back(i);
  if (q.nodes.back() < last && q.nodes.back() + q.stride < grid.size()) {
    q.nodes.push_back(q.nodes.back() + q.stride);
  }

  const auto n_nodes = static_cast<Index>(q.nodes.size());
  q.weights = Eigen::VectorXd::Constant(n_nodes, static_cast<double>(q.stride) * grid.spacing);
  q.modes.resize(n_nodes, n_modes);
  for (Index k = 0; k < n_nodes; ++k) q.modes.row(k) = block.row(q.nodes[static_cast<std::size_t>(k)]);
  return q;
}

void write_field_csv(const FieldCoeffs& u, std::ostream& out) {
  out << "j,lambda_j,re_alpha_j,im_alpha_j\n";
  out << std::setprecision(17);
  for (Index j = 0; j < u.size(); ++j) {
    out << (j + 1) << ',' << u.basis->lambda(j) << ',' << u.alpha(j).real()
        << ',' << u.alpha(j).imag() << '\n';
  }
}

void write_field_csv(const FieldCoeffs& u, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_field_csv(u, out);
}

FieldCoeffs read_field_csv(std::istream& in, BasisPtr basis) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("j,lambda_j,re_alpha_j,im_alpha_j", 0) != 0) {
    throw IoError("field CSV: missing header");
  }
  std::vector<Complex> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell[4];
    for (auto& c : cell) {
      if (!std::getline(row, c, ',')) throw IoError("field CSV: short row '" + line + "'");
    }
    try {
      if (std::stoll(cell[0]) != static_cast<long long>(values.size()) + 1) {
        throw IoError("field CSV: rows out of order at '" + line + "'");
      }
      values.emplace_back(std::stod(cell[2]), std::stod(cell[3]));
    } catch (const std::logic_error&) {
      throw IoError("field CSV: bad number in '" + line + "'");
    }
  }
  const auto n = static_cast<Index>(values.size());
  return {std::move(basis), Eigen::Map<const Eigen::VectorXcd>(values.data(), n)};
}

FieldCoeffs read_field_csv(const std::string& path, BasisPtr basis) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_field_csv(in, std::move(basis));
}

CutoffQuadrature::CutoffQuadrature(BasisPtr basis, double cut,
                                   const CutoffProfile& profile,
                                   double points_per_wavelength)
    : basis_(std::move(basis)), cut_(cut) {
  chi_ = cutoff_multipliers(*basis_, cut, profile);
  while (active_ < chi_.size() && chi_(active_) > 0.0) ++active_;
  if (active_ == 0) return;
  rule_ = make_product_quadrature(*basis_, active_, points_per_wavelength);
  dressed_ = rule_.modes * chi_.head(active_).asDiagonal();
}

double CutoffQuadrature::quartic_norm(
    const Eigen::Ref<const Eigen::VectorXcd>& alpha) const {
  if (active_ == 0) return 0.0;
  const Eigen::VectorXd re = dressed_ * alpha.head(active_).real();
  const Eigen::VectorXd im = dressed_ * alpha.head(active_).imag();
  const Eigen::ArrayXd mod2 = re.array().square() + im.array().square();
  return (rule_.weights.array() * mod2.square()).sum();
}

void CutoffQuadrature::cubic(const Eigen::Ref<const Eigen::VectorXcd>& alpha,
                             Eigen::VectorXcd& out) const {
  out.setZero(alpha.size());
  if (active_ == 0) return;
  const Eigen::ArrayXd re = (dressed_ * alpha.head(active_).real()).array();
  const Eigen::ArrayXd im = (dressed_ * alpha.head(active_).imag()).array();
  const Eigen::ArrayXd g = rule_.weights.array() * (re.square() + im.square());
  out.head(active_).real() = dressed_.transpose() * (g * re).matrix();
  out.head(active_).imag() = dressed_.transpose() * (g * im).matrix();
}

}  // namespace gibbsflow
