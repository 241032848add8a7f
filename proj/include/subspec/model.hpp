#ifndef SUBSPEC_MODEL_HPP_
#define SUBSPEC_MODEL_HPP_

#include <string>
#include <vector>

#include "subspec/kernels.hpp"
#include "subspec/norm.hpp"
#include "subspec/rng.hpp"

namespace subspec {

enum class NormKind { BN, SSN, BNSub };

NormKind norm_kind_from_string(const std::string& s);
std::string to_string(NormKind k);
std::string to_string(AffineType a);
AffineType affine_from_string(const std::string& s);

// Small stand-in CNN: per block conv(3x3, same padding) -> norm -> relu,
// then global average pool and a dense classifier.
struct ModelSpec {
  NormKind norm_kind = NormKind::BN;
  std::size_t s = 1;
  AffineType affine = AffineType::All;
  std::vector<std::size_t> widths = {8, 16, 32};
  std::size_t kernel = 3;
  std::size_t n_classes = 4;

  // Effective normalization config of one layer. BN is SSN with a single
  // band and shared affine.
  SsnConfig norm_config() const;
};

struct NormLayer {
  SsnParams params;
  SsnRunningStats stats;
};

struct Model {
  ModelSpec spec;
  std::size_t in_c = 1, in_f = 0, in_t = 0;
  std::vector<Conv2dParams> convs;
  std::vector<NormLayer> norms;
  DenseParams dense;

  std::size_t param_total() const;
};

Model init_model(const ModelSpec& spec, std::size_t in_c, std::size_t in_f, std::size_t in_t,
                 Rng& rng);

// Activations cached by the training-mode forward pass.
struct ForwardCache {
  std::vector<Tensor4> conv_in;    // input of conv i
  std::vector<Tensor4> norm_in;    // conv output = norm input
  std::vector<SsnCache> norm_cache;
  std::vector<Tensor4> relu_in;    // norm output = relu input
  Tensor4 gap_in;                  // last relu output
  Tensor4 dense_in;                // pooled features
  Tensor4 logits;
};

// Training-mode forward; updates running statistics in place.
ForwardCache model_forward_train(Model& model, const Tensor4& x);

// Inference-mode forward using running statistics.
Tensor4 model_forward_infer(const Model& model, const Tensor4& x);

// Conv output (pre-norm) of block layer_index, inference mode.
Tensor4 model_conv_output_infer(const Model& model, const Tensor4& x, std::size_t layer_index);

struct ModelGrads {
  std::vector<std::vector<double>> conv_w, conv_b;
  std::vector<Mat> gamma, beta;
  std::vector<double> dense_w, dense_b;
};

ModelGrads model_backward(const Model& model, const ForwardCache& cache,
                          const Tensor4& grad_logits);

void sgd_step(Model& model, const ModelGrads& grads, double lr);

}  // namespace subspec

#endif  // SUBSPEC_MODEL_HPP_
