#include "subspec/norm.hpp"

#include <cmath>
#include <cstdio>

namespace subspec {

void SsnConfig::validate() const {
  if (s == 0) throw InvalidConfig("SsnConfig: s must be >= 1");
  if (!(eps > 0.0)) throw InvalidConfig("SsnConfig: eps must be > 0");
  if (!(momentum > 0.0) || momentum > 1.0)
    throw InvalidConfig("SsnConfig: momentum must be in (0, 1]");
}

namespace {

void check_inputs(const Tensor4& x, const SsnParams& params, const SsnRunningStats& stats,
                  const SsnConfig& cfg, std::size_t stat_bands) {
  cfg.validate();
  if (x.f % cfg.s != 0)
    throw IndivisibleFrequency("F=" + std::to_string(x.f) + " not divisible by s=" +
                               std::to_string(cfg.s));
  const std::size_t ab = cfg.affine_bands();
  if (params.gamma.rows != x.c || params.gamma.cols != ab || params.beta.rows != x.c ||
      params.beta.cols != ab)
    throw ShapeMismatch("SsnParams dims do not match (c, affine bands)");
  if (stats.mean.rows != x.c || stats.mean.cols != stat_bands || stats.var.rows != x.c ||
      stats.var.cols != stat_bands)
    throw ShapeMismatch("SsnRunningStats dims do not match (c, stat bands)");
}

// Normalize with the given per-(c, stat-band) moments, then apply the
// per-(c, affine-band) transform. stat_bands and affine banding may differ
// (BN-Sub uses one stat band with s affine bands).
void normalize_apply(const Tensor4& x, const Mat& mean, const Mat& inv_std,
                     const SsnParams& params, std::size_t stat_bands, std::size_t affine_s,
                     bool affine_per_band, Tensor4& y, Tensor4* xhat) {
  const std::size_t fb_stat = x.f / stat_bands;
  const std::size_t fb_aff = x.f / affine_s;
  const std::ptrdiff_t slabs = static_cast<std::ptrdiff_t>(x.n * x.c);
#pragma omp parallel for if (x.size() >= 4096)
  for (std::ptrdiff_t nc = 0; nc < slabs; ++nc) {
    const std::size_t in = static_cast<std::size_t>(nc) / x.c;
    const std::size_t ic = static_cast<std::size_t>(nc) % x.c;
    for (std::size_t jf = 0; jf < x.f; ++jf) {
      const std::size_t sb = jf / fb_stat;
      const std::size_t ab = affine_per_band ? jf / fb_aff : 0;
      const double mu = mean.at(ic, sb);
      const double is = inv_std.at(ic, sb);
      const double g = params.gamma.at(ic, ab);
      const double b = params.beta.at(ic, ab);
      for (std::size_t jt = 0; jt < x.t; ++jt) {
        const double xh = (x.at(in, ic, jf, jt) - mu) * is;
        if (xhat) xhat->at(in, ic, jf, jt) = xh;
        y.at(in, ic, jf, jt) = g * xh + b;
      }
    }
  }
}

SsnRunningStats updated_stats(const SsnRunningStats& stats, const BandMoments& batch,
                              double momentum) {
  SsnRunningStats next = stats;
  for (std::size_t i = 0; i < next.mean.size(); ++i) {
    next.mean.v[i] = (1.0 - momentum) * stats.mean.v[i] + momentum * batch.mean.v[i];
    next.var.v[i] = (1.0 - momentum) * stats.var.v[i] + momentum * batch.var.v[i];
  }
  next.batches_seen = stats.batches_seen + 1;
  return next;
}

Mat inv_std_of(const Mat& var, double eps) {
  Mat is(var.rows, var.cols);
  for (std::size_t i = 0; i < var.size(); ++i) is.v[i] = 1.0 / std::sqrt(var.v[i] + eps);
  return is;
}

SsnTrainResult forward_train_impl(const Tensor4& x, const SsnParams& params,
                                  const SsnRunningStats& stats, const SsnConfig& cfg,
                                  std::size_t stat_bands) {
  check_inputs(x, params, stats, cfg, stat_bands);
  const BandMoments bm = moments_per_channel_band(x, stat_bands);
  SsnTrainResult r;
  r.cache.mean = bm.mean;
  r.cache.inv_std = inv_std_of(bm.var, cfg.eps);
  r.cache.xhat = Tensor4(x.n, x.c, x.f, x.t);
  r.y = Tensor4(x.n, x.c, x.f, x.t);
  normalize_apply(x, r.cache.mean, r.cache.inv_std, params, stat_bands, cfg.s,
                  cfg.affine == AffineType::Sub, r.y, &r.cache.xhat);
  r.stats = updated_stats(stats, bm, cfg.momentum);
  return r;
}

Tensor4 forward_infer_impl(const Tensor4& x, const SsnParams& params,
                           const SsnRunningStats& stats, const SsnConfig& cfg,
                           std::size_t stat_bands) {
  check_inputs(x, params, stats, cfg, stat_bands);
  if (stats.batches_seen == 0)
    std::fprintf(stderr,
                 "subspec: warning: inference with freshly initialized running statistics\n");
  const Mat inv_std = inv_std_of(stats.var, cfg.eps);
  Tensor4 y(x.n, x.c, x.f, x.t);
  normalize_apply(x, stats.mean, inv_std, params, stat_bands, cfg.s,
                  cfg.affine == AffineType::Sub, y, nullptr);
  return y;
}

// Full batch-norm backward applied per statistics cell:
//   dx = inv_std * (dxhat - (sum(dxhat) + xhat * sum(dxhat*xhat)) / m)
// with dxhat = dy * gamma. Affine gradients are per affine band and sum
// across bands when the affine is shared.
SsnGrads backward_impl(const Tensor4& grad_y, const SsnCache& cache, const SsnParams& params,
                       const SsnConfig& cfg, std::size_t stat_bands) {
  cfg.validate();
  const Tensor4& xhat = cache.xhat;
  if (!grad_y.same_shape(xhat)) throw ShapeMismatch("ssn_backward: grad_y shape mismatch");
  if (cache.mean.rows != xhat.c || cache.mean.cols != stat_bands)
    throw ShapeMismatch("ssn_backward: cache does not match config");
  const std::size_t ab_count = cfg.affine_bands();
  if (params.gamma.rows != xhat.c || params.gamma.cols != ab_count)
    throw ShapeMismatch("ssn_backward: params shape mismatch");

  const std::size_t fb_stat = xhat.f / stat_bands;
  const std::size_t fb_aff = xhat.f / cfg.s;
  const bool per_band = cfg.affine == AffineType::Sub;
  const std::size_t m = xhat.n * fb_stat * xhat.t;

  SsnGrads g;
  g.grad_x = Tensor4(xhat.n, xhat.c, xhat.f, xhat.t);
  g.grad_gamma = Mat(xhat.c, ab_count, 0.0);
  g.grad_beta = Mat(xhat.c, ab_count, 0.0);

  // Per-affine-band reductions of dy and dy*xhat (ascending index order).
  Mat sum_dy_aff(xhat.c, cfg.s, 0.0);
  Mat sum_dyx_aff(xhat.c, cfg.s, 0.0);
  const std::ptrdiff_t cells = static_cast<std::ptrdiff_t>(xhat.c * cfg.s);
#pragma omp parallel for if (xhat.size() >= 4096)
  for (std::ptrdiff_t cell = 0; cell < cells; ++cell) {
    const std::size_t ic = static_cast<std::size_t>(cell) / cfg.s;
    const std::size_t ib = static_cast<std::size_t>(cell) % cfg.s;
    double sdy = 0.0, sdyx = 0.0;
    for (std::size_t in = 0; in < xhat.n; ++in)
      for (std::size_t jf = ib * fb_aff; jf < (ib + 1) * fb_aff; ++jf)
        for (std::size_t jt = 0; jt < xhat.t; ++jt) {
          const double dy = grad_y.at(in, ic, jf, jt);
          sdy += dy;
          sdyx += dy * xhat.at(in, ic, jf, jt);
        }
    sum_dy_aff.at(ic, ib) = sdy;
    sum_dyx_aff.at(ic, ib) = sdyx;
  }
  for (std::size_t ic = 0; ic < xhat.c; ++ic)
    for (std::size_t ib = 0; ib < cfg.s; ++ib) {
      const std::size_t a = per_band ? ib : 0;
      g.grad_beta.at(ic, a) += sum_dy_aff.at(ic, ib);
      g.grad_gamma.at(ic, a) += sum_dyx_aff.at(ic, ib);
    }

  // Per-stat-cell sums of dxhat and dxhat*xhat.
  Mat sum_gx(xhat.c, stat_bands, 0.0);
  Mat sum_gxx(xhat.c, stat_bands, 0.0);
  const std::ptrdiff_t scells = static_cast<std::ptrdiff_t>(xhat.c * stat_bands);
#pragma omp parallel for if (xhat.size() >= 4096)
  for (std::ptrdiff_t cell = 0; cell < scells; ++cell) {
    const std::size_t ic = static_cast<std::size_t>(cell) / stat_bands;
    const std::size_t sb = static_cast<std::size_t>(cell) % stat_bands;
    double sg = 0.0, sgx = 0.0;
    for (std::size_t in = 0; in < xhat.n; ++in)
      for (std::size_t jf = sb * fb_stat; jf < (sb + 1) * fb_stat; ++jf) {
        const std::size_t a = per_band ? jf / fb_aff : 0;
        const double gamma = params.gamma.at(ic, a);
        for (std::size_t jt = 0; jt < xhat.t; ++jt) {
          const double gx = grad_y.at(in, ic, jf, jt) * gamma;
          sg += gx;
          sgx += gx * xhat.at(in, ic, jf, jt);
        }
      }
    sum_gx.at(ic, sb) = sg;
    sum_gxx.at(ic, sb) = sgx;
  }

  const double invm = 1.0 / static_cast<double>(m);
  const std::ptrdiff_t slabs = static_cast<std::ptrdiff_t>(xhat.n * xhat.c);
#pragma omp parallel for if (xhat.size() >= 4096)
  for (std::ptrdiff_t nc = 0; nc < slabs; ++nc) {
    const std::size_t in = static_cast<std::size_t>(nc) / xhat.c;
    const std::size_t ic = static_cast<std::size_t>(nc) % xhat.c;
    for (std::size_t jf = 0; jf < xhat.f; ++jf) {
      const std::size_t sb = jf / fb_stat;
      const std::size_t a = per_band ? jf / fb_aff : 0;
      const double gamma = params.gamma.at(ic, a);
      const double is = cache.inv_std.at(ic, sb);
      const double sg = sum_gx.at(ic, sb);
      const double sgx = sum_gxx.at(ic, sb);
      for (std::size_t jt = 0; jt < xhat.t; ++jt) {
        const double gx = grad_y.at(in, ic, jf, jt) * gamma;
        const double xh = xhat.at(in, ic, jf, jt);
        g.grad_x.at(in, ic, jf, jt) = is * (gx - (sg + xh * sgx) * invm);
      }
    }
  }
  return g;
}

}  // namespace

SsnTrainResult ssn_forward_train(const Tensor4& x, const SsnParams& params,
                                 const SsnRunningStats& stats, const SsnConfig& cfg) {
  return forward_train_impl(x, params, stats, cfg, cfg.s);
}

Tensor4 ssn_forward_infer(const Tensor4& x, const SsnParams& params,
                          const SsnRunningStats& stats, const SsnConfig& cfg) {
  return forward_infer_impl(x, params, stats, cfg, cfg.s);
}

SsnGrads ssn_backward(const Tensor4& grad_y, const SsnCache& cache, const SsnParams& params,
                      const SsnConfig& cfg) {
  return backward_impl(grad_y, cache, params, cfg, cfg.s);
}

SsnTrainResult bn_sub_forward_train(const Tensor4& x, const SsnParams& params,
                                    const SsnRunningStats& stats, const SsnConfig& cfg) {
  return forward_train_impl(x, params, stats, cfg, 1);
}

Tensor4 bn_sub_forward_infer(const Tensor4& x, const SsnParams& params,
                             const SsnRunningStats& stats, const SsnConfig& cfg) {
  return forward_infer_impl(x, params, stats, cfg, 1);
}

SsnGrads bn_sub_backward(const Tensor4& grad_y, const SsnCache& cache, const SsnParams& params,
                         const SsnConfig& cfg) {
  return backward_impl(grad_y, cache, params, cfg, 1);
}

std::size_t param_count(const SsnConfig& cfg, std::size_t channels) {
  return 2 * channels * cfg.affine_bands();
}

}  // namespace subspec
