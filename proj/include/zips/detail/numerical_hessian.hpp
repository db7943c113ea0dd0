#ifndef ZIPS_DETAIL_NUMERICAL_HESSIAN_HPP
#define ZIPS_DETAIL_NUMERICAL_HESSIAN_HPP

#include <algorithm>
#include <cmath>

namespace zips {

template <typename Fn>
Matrix numerical_hessian(const Fn& fn, const Vector& x, double rel_step) {
  const Eigen::Index k = x.size();
  Vector h(k);
  for (Eigen::Index i = 0; i < k; ++i) h[i] = rel_step * std::max(1.0, std::abs(x[i]));
  const double f0 = fn(x);
  Matrix hess(k, k);
  Vector xp = x;
  for (Eigen::Index i = 0; i < k; ++i) {
    xp[i] = x[i] + h[i];
    const double fp = fn(xp);
    xp[i] = x[i] - h[i];
    const double fm = fn(xp);
    xp[i] = x[i];
    hess(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      xp[i] = x[i] + h[i];
      xp[j] = x[j] + h[j];
      const double fpp = fn(xp);
      xp[j] = x[j] - h[j];
      const double fpm = fn(xp);
      xp[i] = x[i] - h[i];
      const double fmm = fn(xp);
      xp[j] = x[j] + h[j];
      const double fmp = fn(xp);
      xp[i] = x[i];
      xp[j] = x[j];
      hess(i, j) = hess(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
    }
  }
  return hess;
}

}  // namespace zips

#endif  // ZIPS_DETAIL_NUMERICAL_HESSIAN_HPP
