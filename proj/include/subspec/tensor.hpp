#ifndef SUBSPEC_TENSOR_HPP_
#define SUBSPEC_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "subspec/error.hpp"

namespace subspec {

// Dense rank-4 tensor, axes (batch N, channel C, frequency F, time T),
// contiguous row-major doubles.
struct Tensor4 {
  std::size_t n = 1, c = 1, f = 1, t = 1;
  std::vector<double> data;

  Tensor4() : data(1, 0.0) {}
  Tensor4(std::size_t n_, std::size_t c_, std::size_t f_, std::size_t t_)
      : n(n_), c(c_), f(f_), t(t_) {
    if (n_ == 0 || c_ == 0 || f_ == 0 || t_ == 0)
      throw ShapeMismatch("Tensor4: all shape components must be >= 1");
    data.assign(n_ * c_ * f_ * t_, 0.0);
  }

  std::size_t size() const { return data.size(); }

  std::size_t index(std::size_t in, std::size_t ic, std::size_t jf, std::size_t jt) const {
    return ((in * c + ic) * f + jf) * t + jt;
  }
  double& at(std::size_t in, std::size_t ic, std::size_t jf, std::size_t jt) {
    return data[index(in, ic, jf, jt)];
  }
  double at(std::size_t in, std::size_t ic, std::size_t jf, std::size_t jt) const {
    return data[index(in, ic, jf, jt)];
  }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && f == o.f && t == o.t;
  }
  std::string shape_str() const;
};

// Small dense row-major matrix; used for per-(channel, band) statistics,
// affine parameters, filterbanks and dense-layer weights.
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  std::size_t size() const { return v.size(); }
};

// Weights and bias of a stride-1 zero-padded 2-D cross-correlation.
// Kernels are odd-sized; weight layout is (c_out, c_in, k_f, k_t) row-major.
struct Conv2dParams {
  std::size_t c_out = 0, c_in = 0, k_f = 1, k_t = 1;
  std::size_t pad_f = 0, pad_t = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  Conv2dParams() = default;
  Conv2dParams(std::size_t co, std::size_t ci, std::size_t kf, std::size_t kt,
               std::size_t pf, std::size_t pt);

  std::size_t windex(std::size_t o, std::size_t i, std::size_t a, std::size_t b) const {
    return ((o * c_in + i) * k_f + a) * k_t + b;
  }
  double w(std::size_t o, std::size_t i, std::size_t a, std::size_t b) const {
    return weight[windex(o, i, a, b)];
  }
  void validate() const;
};

// --- TNS4 binary format ---------------------------------------------------
// Header: magic "TNS4", then 4 little-endian u32 dims (n, c, f, t),
// then n*c*f*t IEEE-754 doubles in row-major order.

void save_tensor(const std::string& path, const Tensor4& x);
Tensor4 load_tensor(const std::string& path);

// Mats travel as TNS4 blobs of shape (1, 1, rows, cols).
void save_mat(const std::string& path, const Mat& m);
Mat load_mat(const std::string& path);

}  // namespace subspec

#endif  // SUBSPEC_TENSOR_HPP_
