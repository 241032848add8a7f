#ifndef SUBSPEC_FUSION_HPP_
#define SUBSPEC_FUSION_HPP_

#include <string>
#include <vector>

#include "subspec/norm.hpp"
#include "subspec/tensor.hpp"

namespace subspec {

// Per-sub-band convolution parameters produced by merging a normalization
// affine into the following convolution: block i holds gamma_i-scaled
// weights and the beta_i contribution folded through the kernel sum into
// the bias. All blocks share kernel shape and padding.
struct FusedBandedConv {
  std::size_t s = 1;
  std::vector<Conv2dParams> blocks;
};

// Merge the affine of an SSN layer into conv. gamma_i scales each input-
// channel slab of the weights; beta_i folds into the bias as
// b_i[o] = b[o] + sum_{c,kf,kt} w[o,c,kf,kt] * beta_i[c].
FusedBandedConv fuse(const SsnParams& params, const SsnConfig& cfg, const Conv2dParams& conv);

// Fold running statistics into the affine first (standard BN folding:
// gamma' = gamma*inv_std, beta' = beta - gamma*mean*inv_std), then merge.
// The fused conv then consumes raw activations instead of normalized ones.
FusedBandedConv fuse_with_stats(const SsnParams& params, const SsnRunningStats& stats,
                                const SsnConfig& cfg, const Conv2dParams& conv);

// Convolution that selects the weight/bias block of the band containing
// each output frequency row. Requires size-preserving frequency padding so
// output rows map onto input bands. Rows whose receptive field stays inside
// one band equal the unfused affine-then-conv pipeline exactly.
Tensor4 banded_conv_forward(const Tensor4& x_hat, const FusedBandedConv& fused);

// Max-abs differences between the fused and unfused paths for one
// (norm, conv) pair, split into rows at frequency distance >= floor(k_f/2)
// from band boundaries and padded edges (interior) and the rest (boundary).
struct FusionPairReport {
  std::size_t norm_layer = 0;
  std::size_t conv_layer = 0;
  std::size_t s = 1;
  std::size_t k_f = 1;
  double interior_max_abs_diff = 0.0;
  double boundary_max_abs_diff = 0.0;
  std::size_t trials = 0;
};

struct FusionReportOptions {
  bool fold_stats = false;
  std::uint64_t seed = 1;
  std::size_t trials = 8;
  std::size_t batch = 2;
  std::size_t time = 5;
};

// Runs the equivalence check for every (norm, following conv) pair in a
// serialized model checkpoint.
std::vector<FusionPairReport> fusion_report(const std::string& checkpoint_dir,
                                            const FusionReportOptions& opts);

}  // namespace subspec

#endif  // SUBSPEC_FUSION_HPP_
