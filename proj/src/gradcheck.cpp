#include "subspec/gradcheck.hpp"

#include <cmath>

#include "subspec/rng.hpp"

namespace subspec {

namespace {

double loss_of(NormKind kind, const Tensor4& x, const SsnParams& params,
               const SsnRunningStats& stats, const SsnConfig& cfg, const Tensor4& grad_y) {
  const SsnTrainResult r = kind == NormKind::BNSub ? bn_sub_forward_train(x, params, stats, cfg)
                                                   : ssn_forward_train(x, params, stats, cfg);
  double loss = 0.0;
  for (std::size_t i = 0; i < r.y.size(); ++i) loss += grad_y.data[i] * r.y.data[i];
  return loss;
}

}  // namespace

GradCheckResult gradcheck_norm(NormKind kind, std::size_t s, AffineType affine,
                               std::size_t trials, std::uint64_t seed, double h, double tol) {
  if (kind == NormKind::BN) {
    kind = NormKind::SSN;
    s = 1;
  }
  SsnConfig cfg;
  cfg.s = s;
  cfg.affine = kind == NormKind::BNSub ? AffineType::Sub : affine;
  const std::size_t stat_bands = kind == NormKind::BNSub ? 1 : s;

  Rng rng(seed);
  GradCheckResult result;
  result.trials = trials;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::size_t n = 2 + rng.below(3);
    const std::size_t c = 1 + rng.below(3);
    const std::size_t f = s * (1 + rng.below(3));
    const std::size_t t = 2 + rng.below(4);
    Tensor4 x(n, c, f, t);
    for (double& v : x.data) v = rng.gaussian(0.0, 2.0);
    SsnParams params(c, cfg);
    for (double& v : params.gamma.v) v = rng.uniform(0.5, 1.5);
    for (double& v : params.beta.v) v = rng.gaussian(0.0, 0.5);
    SsnRunningStats stats(c, stat_bands);
    Tensor4 grad_y(n, c, f, t);
    for (double& v : grad_y.data) v = rng.gaussian();

    const SsnTrainResult fwd = kind == NormKind::BNSub
                                   ? bn_sub_forward_train(x, params, stats, cfg)
                                   : ssn_forward_train(x, params, stats, cfg);
    const SsnGrads analytic = kind == NormKind::BNSub
                                  ? bn_sub_backward(grad_y, fwd.cache, params, cfg)
                                  : ssn_backward(grad_y, fwd.cache, params, cfg);

    double max_abs_diff = 0.0, max_abs_fd = 0.0;
    auto probe = [&](double* slot, double analytic_value) {
      const double keep = *slot;
      *slot = keep + h;
      const double lp = loss_of(kind, x, params, stats, cfg, grad_y);
      *slot = keep - h;
      const double lm = loss_of(kind, x, params, stats, cfg, grad_y);
      *slot = keep;
      const double fd = (lp - lm) / (2.0 * h);
      max_abs_diff = std::max(max_abs_diff, std::fabs(analytic_value - fd));
      max_abs_fd = std::max(max_abs_fd, std::fabs(fd));
    };
    for (std::size_t i = 0; i < x.size(); ++i) probe(&x.data[i], analytic.grad_x.data[i]);
    for (std::size_t i = 0; i < params.gamma.size(); ++i)
      probe(&params.gamma.v[i], analytic.grad_gamma.v[i]);
    for (std::size_t i = 0; i < params.beta.size(); ++i)
      probe(&params.beta.v[i], analytic.grad_beta.v[i]);

    result.max_rel_err =
        std::max(result.max_rel_err, max_abs_diff / std::max(1.0, max_abs_fd));
  }
  result.pass = result.max_rel_err < tol;
  return result;
}

}  // namespace subspec
