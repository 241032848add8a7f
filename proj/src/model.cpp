#include "subspec/model.hpp"

#include <cmath>

namespace subspec {

NormKind norm_kind_from_string(const std::string& s) {
  if (s == "bn") return NormKind::BN;
  if (s == "ssn") return NormKind::SSN;
  if (s == "bnsub") return NormKind::BNSub;
  throw InvalidConfig("unknown norm kind: " + s + " (expected bn|ssn|bnsub)");
}

std::string to_string(NormKind k) {
  switch (k) {
    case NormKind::BN: return "bn";
    case NormKind::SSN: return "ssn";
    default: return "bnsub";
  }
}

std::string to_string(AffineType a) { return a == AffineType::All ? "all" : "sub"; }

AffineType affine_from_string(const std::string& s) {
  if (s == "all") return AffineType::All;
  if (s == "sub") return AffineType::Sub;
  throw InvalidConfig("unknown affine type: " + s + " (expected all|sub)");
}

SsnConfig ModelSpec::norm_config() const {
  SsnConfig cfg;
  switch (norm_kind) {
    case NormKind::BN:
      cfg.s = 1;
      cfg.affine = AffineType::All;
      break;
    case NormKind::SSN:
      cfg.s = s;
      cfg.affine = affine;
      break;
    case NormKind::BNSub:
      cfg.s = s;
      cfg.affine = AffineType::Sub;
      break;
  }
  return cfg;
}

namespace {

std::size_t stat_bands_of(const ModelSpec& spec) {
  // BN-Sub keeps whole-channel statistics regardless of s.
  return spec.norm_kind == NormKind::BNSub ? 1 : spec.norm_config().s;
}

SsnTrainResult norm_forward_train(const ModelSpec& spec, const Tensor4& x, NormLayer& layer) {
  const SsnConfig cfg = spec.norm_config();
  if (spec.norm_kind == NormKind::BNSub)
    return bn_sub_forward_train(x, layer.params, layer.stats, cfg);
  return ssn_forward_train(x, layer.params, layer.stats, cfg);
}

Tensor4 norm_forward_infer(const ModelSpec& spec, const Tensor4& x, const NormLayer& layer) {
  const SsnConfig cfg = spec.norm_config();
  if (spec.norm_kind == NormKind::BNSub)
    return bn_sub_forward_infer(x, layer.params, layer.stats, cfg);
  return ssn_forward_infer(x, layer.params, layer.stats, cfg);
}

SsnGrads norm_backward(const ModelSpec& spec, const Tensor4& grad_y, const SsnCache& cache,
                       const NormLayer& layer) {
  const SsnConfig cfg = spec.norm_config();
  if (spec.norm_kind == NormKind::BNSub)
    return bn_sub_backward(grad_y, cache, layer.params, cfg);
  return ssn_backward(grad_y, cache, layer.params, cfg);
}

}  // namespace

std::size_t Model::param_total() const {
  std::size_t total = 0;
  for (const auto& cv : convs) total += cv.weight.size() + cv.bias.size();
  for (const auto& nl : norms) total += nl.params.gamma.size() + nl.params.beta.size();
  total += dense.weight.size() + dense.bias.size();
  return total;
}

Model init_model(const ModelSpec& spec, std::size_t in_c, std::size_t in_f, std::size_t in_t,
                 Rng& rng) {
  if (spec.widths.empty()) throw InvalidConfig("ModelSpec: at least one conv block required");
  if (spec.kernel % 2 == 0) throw InvalidConfig("ModelSpec: kernel must be odd");
  const SsnConfig cfg = spec.norm_config();
  if (in_f % cfg.s != 0)
    throw IndivisibleFrequency("input F=" + std::to_string(in_f) + " not divisible by s=" +
                               std::to_string(cfg.s));
  Model m;
  m.spec = spec;
  m.in_c = in_c;
  m.in_f = in_f;
  m.in_t = in_t;
  const std::size_t pad = (spec.kernel - 1) / 2;
  std::size_t prev = in_c;
  for (const std::size_t width : spec.widths) {
    Conv2dParams cv(width, prev, spec.kernel, spec.kernel, pad, pad);
    const double scale = std::sqrt(2.0 / static_cast<double>(prev * spec.kernel * spec.kernel));
    for (double& w : cv.weight) w = rng.gaussian(0.0, scale);
    m.convs.push_back(std::move(cv));
    NormLayer nl;
    nl.params = SsnParams(width, cfg);
    nl.stats = SsnRunningStats(width, stat_bands_of(spec));
    m.norms.push_back(std::move(nl));
    prev = width;
  }
  m.dense = DenseParams(spec.n_classes, prev);
  const double dscale = std::sqrt(1.0 / static_cast<double>(prev));
  for (double& w : m.dense.weight) w = rng.gaussian(0.0, dscale);
  return m;
}

ForwardCache model_forward_train(Model& model, const Tensor4& x) {
  ForwardCache cache;
  Tensor4 cur = x;
  for (std::size_t i = 0; i < model.convs.size(); ++i) {
    cache.conv_in.push_back(cur);
    Tensor4 z = conv2d_forward(cur, model.convs[i]);
    cache.norm_in.push_back(z);
    SsnTrainResult r = norm_forward_train(model.spec, z, model.norms[i]);
    model.norms[i].stats = r.stats;
    cache.norm_cache.push_back(std::move(r.cache));
    cache.relu_in.push_back(r.y);
    cur = relu_forward(r.y);
  }
  cache.gap_in = cur;
  cache.dense_in = global_average_pool(cur);
  cache.logits = dense_forward(cache.dense_in, model.dense);
  return cache;
}

Tensor4 model_forward_infer(const Model& model, const Tensor4& x) {
  Tensor4 cur = x;
  for (std::size_t i = 0; i < model.convs.size(); ++i) {
    Tensor4 z = conv2d_forward(cur, model.convs[i]);
    Tensor4 y = norm_forward_infer(model.spec, z, model.norms[i]);
    cur = relu_forward(y);
  }
  return dense_forward(global_average_pool(cur), model.dense);
}

Tensor4 model_conv_output_infer(const Model& model, const Tensor4& x, std::size_t layer_index) {
  if (layer_index >= model.convs.size())
    throw IndexOutOfRange("layer index " + std::to_string(layer_index) + " out of range (" +
                          std::to_string(model.convs.size()) + " blocks)");
  Tensor4 cur = x;
  for (std::size_t i = 0; i <= layer_index; ++i) {
    Tensor4 z = conv2d_forward(cur, model.convs[i]);
    if (i == layer_index) return z;
    cur = relu_forward(norm_forward_infer(model.spec, z, model.norms[i]));
  }
  return cur;  // unreachable
}

ModelGrads model_backward(const Model& model, const ForwardCache& cache,
                          const Tensor4& grad_logits) {
  const std::size_t blocks = model.convs.size();
  ModelGrads g;
  g.conv_w.resize(blocks);
  g.conv_b.resize(blocks);
  g.gamma.resize(blocks);
  g.beta.resize(blocks);

  DenseGrads dg = dense_backward(grad_logits, cache.dense_in, model.dense);
  g.dense_w = std::move(dg.grad_w);
  g.dense_b = std::move(dg.grad_b);
  Tensor4 cur = global_average_pool_backward(dg.grad_x, cache.gap_in.f, cache.gap_in.t);

  for (std::size_t i = blocks; i-- > 0;) {
    cur = relu_backward(cur, cache.relu_in[i]);
    SsnGrads ng = norm_backward(model.spec, cur, cache.norm_cache[i], model.norms[i]);
    g.gamma[i] = std::move(ng.grad_gamma);
    g.beta[i] = std::move(ng.grad_beta);
    Conv2dGrads cg = conv2d_backward(ng.grad_x, cache.conv_in[i], model.convs[i]);
    g.conv_w[i] = std::move(cg.grad_w);
    g.conv_b[i] = std::move(cg.grad_b);
    cur = std::move(cg.grad_x);
  }
  return g;
}

void sgd_step(Model& model, const ModelGrads& grads, double lr) {
  for (std::size_t i = 0; i < model.convs.size(); ++i) {
    auto& cv = model.convs[i];
    for (std::size_t k = 0; k < cv.weight.size(); ++k) cv.weight[k] -= lr * grads.conv_w[i][k];
    for (std::size_t k = 0; k < cv.bias.size(); ++k) cv.bias[k] -= lr * grads.conv_b[i][k];
    auto& nl = model.norms[i];
    for (std::size_t k = 0; k < nl.params.gamma.size(); ++k)
      nl.params.gamma.v[k] -= lr * grads.gamma[i].v[k];
    for (std::size_t k = 0; k < nl.params.beta.size(); ++k)
      nl.params.beta.v[k] -= lr * grads.beta[i].v[k];
  }
  for (std::size_t k = 0; k < model.dense.weight.size(); ++k)
    model.dense.weight[k] -= lr * grads.dense_w[k];
  for (std::size_t k = 0; k < model.dense.bias.size(); ++k)
    model.dense.bias[k] -= lr * grads.dense_b[k];
}

}  // namespace subspec
