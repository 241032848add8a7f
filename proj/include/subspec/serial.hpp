#ifndef SUBSPEC_SERIAL_HPP_
#define SUBSPEC_SERIAL_HPP_

#include "subspec/kernels.hpp"

namespace subspec::serial {

// Single-threaded reference versions of the hot kernels. The parallel
// kernels must match these bit-for-bit (same per-element summation order);
// tests assert exact equality and the benchmark compares throughput.

Tensor4 conv2d_forward(const Tensor4& x, const Conv2dParams& p);
Conv2dGrads conv2d_backward(const Tensor4& grad_y, const Tensor4& x, const Conv2dParams& p);
BandMoments moments_per_channel_band(const Tensor4& x, std::size_t s);

}  // namespace subspec::serial

#endif  // SUBSPEC_SERIAL_HPP_
