#ifndef SUBSPEC_NORM_HPP_
#define SUBSPEC_NORM_HPP_

#include <cstdint>

#include "subspec/kernels.hpp"
#include "subspec/tensor.hpp"

namespace subspec {

// Whether the learnable scale/shift is shared across the whole frequency
// dimension (All) or distinct per sub-band (Sub).
enum class AffineType { All, Sub };

struct SsnConfig {
  std::size_t s = 1;
  AffineType affine = AffineType::All;
  double eps = 1e-5;
  double momentum = 0.1;

  std::size_t affine_bands() const { return affine == AffineType::Sub ? s : 1; }
  void validate() const;
};

// Learnable per-channel scale/shift, one column per affine band.
struct SsnParams {
  Mat gamma;  // (c, affine_bands)
  Mat beta;   // (c, affine_bands)

  SsnParams() = default;
  SsnParams(std::size_t channels, const SsnConfig& cfg)
      : gamma(channels, cfg.affine_bands(), 1.0), beta(channels, cfg.affine_bands(), 0.0) {}
};

// Exponential running statistics, one column per statistics band.
struct SsnRunningStats {
  Mat mean;  // (c, stat_bands)
  Mat var;   // (c, stat_bands)
  std::uint64_t batches_seen = 0;

  SsnRunningStats() = default;
  SsnRunningStats(std::size_t channels, std::size_t stat_bands)
      : mean(channels, stat_bands, 0.0), var(channels, stat_bands, 1.0) {}
};

// Intermediates saved by the training-mode forward for the backward pass.
struct SsnCache {
  Tensor4 xhat;  // pre-affine normalized activations
  Mat mean;      // batch means, (c, stat_bands)
  Mat inv_std;   // 1/sqrt(var + eps), (c, stat_bands)
};

struct SsnTrainResult {
  Tensor4 y;
  SsnCache cache;
  SsnRunningStats stats;
};

struct SsnGrads {
  Tensor4 grad_x;
  Mat grad_gamma;
  Mat grad_beta;
};

// SubSpectral Normalization: batch statistics per (channel, sub-band),
// affine per band (Sub) or shared (All). y_i = gamma*(x_i - mu_i)/sqrt(var_i
// + eps) + beta; running stats updated as r <- (1-momentum)*r +
// momentum*batch_stat.
SsnTrainResult ssn_forward_train(const Tensor4& x, const SsnParams& params,
                                 const SsnRunningStats& stats, const SsnConfig& cfg);

// Same affine map with running statistics substituted; no state mutation.
Tensor4 ssn_forward_infer(const Tensor4& x, const SsnParams& params,
                          const SsnRunningStats& stats, const SsnConfig& cfg);

// Exact gradients of the training-mode forward, treating the batch moments
// as functions of x. gamma/beta gradients collapse to one column when
// affine=All.
SsnGrads ssn_backward(const Tensor4& grad_y, const SsnCache& cache, const SsnParams& params,
                      const SsnConfig& cfg);

// BN-Sub ablation: whole-channel statistics (as plain BN) but per-band
// affine parameters. Stats mats carry a single column.
SsnTrainResult bn_sub_forward_train(const Tensor4& x, const SsnParams& params,
                                    const SsnRunningStats& stats, const SsnConfig& cfg);
Tensor4 bn_sub_forward_infer(const Tensor4& x, const SsnParams& params,
                             const SsnRunningStats& stats, const SsnConfig& cfg);
SsnGrads bn_sub_backward(const Tensor4& grad_y, const SsnCache& cache, const SsnParams& params,
                         const SsnConfig& cfg);

// Learnable parameter count of one layer: 2*c per affine band.
std::size_t param_count(const SsnConfig& cfg, std::size_t channels);

}  // namespace subspec

#endif  // SUBSPEC_NORM_HPP_
