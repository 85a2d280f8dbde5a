#include "gibbsflow/stats.hpp"

#include "gibbsflow/errors.hpp"

namespace gibbsflow::stats {

LineFit fit_line_weighted(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y,
                          const Eigen::Ref<const Eigen::VectorXd>& sigma) {
  if (x.size() != y.size() || x.size() != sigma.size()) {
    throw DimensionError("fit_line: length mismatch");
  }
  if (x.size() < 2) throw InvalidArgument("fit_line needs two points");
  const Eigen::ArrayXd w = sigma.array().square().inverse();
  const double sw = w.sum();
  const double xm = (w * x.array()).sum() / sw;
  const double ym = (w * y.array()).sum() / sw;
  const Eigen::ArrayXd dx = x.array() - xm;
  const Eigen::ArrayXd dy = y.array() - ym;
  const double sxx = (w * dx.square()).sum();
  const double sxy = (w * dx * dy).sum();
  const double syy = (w * dy.square()).sum();
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = ym - fit.slope * xm;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  const auto n = static_cast<double>(x.size());
  if (n > 2) {
    const Eigen::ArrayXd resid = dy - fit.slope * dx;
    // Scale by the residual variance so the SE is meaningful for unit sigmas.
    const double s2 = (w * resid.square()).sum() / (n - 2.0);
    fit.slope_se = std::sqrt(s2 / sxx);
  }
  return fit;
}

LineFit fit_line(const Eigen::Ref<const Eigen::VectorXd>& x,
                 const Eigen::Ref<const Eigen::VectorXd>& y) {
  return fit_line_weighted(x, y, Eigen::VectorXd::Ones(x.size()));
}

}  // namespace gibbsflow::stats
