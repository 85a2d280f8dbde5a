#ifndef GIBBSFLOW_STATS_HPP
#define GIBBSFLOW_STATS_HPP

#include <Eigen/Dense>
#include <cmath>

namespace gibbsflow::stats {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

/// Sample mean with the standard error sqrt(var / n).
template <typename Derived>
MeanSe mean_se(const Eigen::DenseBase<Derived>& x) {
  const auto n = static_cast<double>(x.size());
  const double m = x.derived().array().mean();
  if (x.size() < 2) return {m, 0.0};
  const double var = (x.derived().array() - m).square().sum() / (n - 1.0);
  return {m, std::sqrt(var / n)};
}

/// Unbiased sample variance and a delta-method standard error for it,
/// SE^2 ~ (m4 - var^2) / n.
template <typename Derived>
MeanSe variance_se(const Eigen::DenseBase<Derived>& x) {
  const auto n = static_cast<double>(x.size());
  const Eigen::ArrayXd c = x.derived().array() - x.derived().array().mean();
  const double var = c.square().sum() / (n - 1.0);
  const double m4 = c.square().square().mean();
  return {var, std::sqrt(std::max(0.0, m4 - var * var) / n)};
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_se = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
LineFit fit_line(const Eigen::Ref<const Eigen::VectorXd>& x,
                 const Eigen::Ref<const Eigen::VectorXd>& y);

/// Weighted least squares with weights 1 / sigma^2.
LineFit fit_line_weighted(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y,
                          const Eigen::Ref<const Eigen::VectorXd>& sigma);

}  // namespace gibbsflow::stats

#endif  // GIBBSFLOW_STATS_HPP
