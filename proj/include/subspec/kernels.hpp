#ifndef SUBSPEC_KERNELS_HPP_
#define SUBSPEC_KERNELS_HPP_

#include <cstddef>
#include <vector>

#include "subspec/tensor.hpp"

namespace subspec {

// Forward/backward kernels over Tensor4. All functions are pure and
// deterministic: every output element is produced by one fixed
// ascending-index summation, so results are bit-identical for any thread
// count and match the serial reference in subspec::serial exactly.

// Contiguous frequency rows [band*f/n_bands, (band+1)*f/n_bands).
Tensor4 band_slice(const Tensor4& x, std::size_t band, std::size_t n_bands);

// Per-(channel, band) mean and biased variance over all n*(f/s)*t elements.
struct BandMoments {
  Mat mean;  // (c, s)
  Mat var;   // (c, s)
};
BandMoments moments_per_channel_band(const Tensor4& x, std::size_t s);

// Cross-correlation, zero padding, stride 1.
Tensor4 conv2d_forward(const Tensor4& x, const Conv2dParams& p);

struct Conv2dGrads {
  Tensor4 grad_x;
  std::vector<double> grad_w;  // same layout as Conv2dParams::weight
  std::vector<double> grad_b;
};
Conv2dGrads conv2d_backward(const Tensor4& grad_y, const Tensor4& x, const Conv2dParams& p);

Tensor4 relu_forward(const Tensor4& x);
Tensor4 relu_backward(const Tensor4& grad_y, const Tensor4& x);

// Mean over F and T: (n,c,f,t) -> (n,c,1,1).
Tensor4 global_average_pool(const Tensor4& x);
Tensor4 global_average_pool_backward(const Tensor4& grad_y, std::size_t f, std::size_t t);

// Fully connected head over (n, c, 1, 1) activations.
struct DenseParams {
  std::size_t in = 0, out = 0;
  std::vector<double> weight;  // (out, in) row-major
  std::vector<double> bias;    // (out)

  DenseParams() = default;
  DenseParams(std::size_t out_, std::size_t in_)
      : in(in_), out(out_), weight(out_ * in_, 0.0), bias(out_, 0.0) {}
};
Tensor4 dense_forward(const Tensor4& x, const DenseParams& p);

struct DenseGrads {
  Tensor4 grad_x;
  std::vector<double> grad_w;
  std::vector<double> grad_b;
};
DenseGrads dense_backward(const Tensor4& grad_y, const Tensor4& x, const DenseParams& p);

// Mean cross-entropy over the batch; grad_logits is d(mean loss)/d(logits).
struct SoftmaxXent {
  double loss = 0.0;
  Tensor4 grad_logits;
};
SoftmaxXent softmax_cross_entropy(const Tensor4& logits, const std::vector<int>& labels);

}  // namespace subspec

#endif  // SUBSPEC_KERNELS_HPP_
