#ifndef ZIPS_NUMERIC_HPP
#define ZIPS_NUMERIC_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>

namespace zips {

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// log(1 + exp(x))
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// log(exp(a) + exp(b))
inline double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -INFINITY) return a;
  return a + std::log1p(std::exp(b - a));
}

// Fixed-order pairwise summation; the result depends only on the input order.
inline double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kBlock = 64;
  if (values.size() <= kBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace zips

#endif  // ZIPS_NUMERIC_HPP
