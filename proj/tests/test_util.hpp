#ifndef SUBSPEC_TESTS_TEST_UTIL_HPP_
#define SUBSPEC_TESTS_TEST_UTIL_HPP_

#include <cmath>
#include <functional>

#include "subspec/rng.hpp"
#include "subspec/tensor.hpp"

namespace testutil {

inline subspec::Tensor4 random_tensor(std::size_t n, std::size_t c, std::size_t f, std::size_t t,
                                      subspec::Rng& rng, double stddev = 1.0) {
  subspec::Tensor4 x(n, c, f, t);
  for (double& v : x.data) v = rng.gaussian(0.0, stddev);
  return x;
}

inline double max_abs_diff(const subspec::Tensor4& a, const subspec::Tensor4& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline bool bit_equal(const subspec::Tensor4& a, const subspec::Tensor4& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

// Central differences of a scalar function with respect to one slot.
inline double central_diff(double* slot, const std::function<double()>& fn, double h = 1e-5) {
  const double keep = *slot;
  *slot = keep + h;
  const double lp = fn();
  *slot = keep - h;
  const double lm = fn();
  *slot = keep;
  return (lp - lm) / (2.0 * h);
}

}  // namespace testutil

#endif  // SUBSPEC_TESTS_TEST_UTIL_HPP_
