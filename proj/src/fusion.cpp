#include "subspec/fusion.hpp"

#include <cmath>

#include "subspec/checkpoint.hpp"
#include "subspec/rng.hpp"

namespace subspec {

namespace {

// Per-band effective affine (gamma_i[c], beta_i[c]) as dense (s, c) tables.
struct AffineTable {
  std::size_t s = 1;
  Mat gamma;  // (s, c)
  Mat beta;   // (s, c)
};

AffineTable affine_table(const SsnParams& params, const SsnConfig& cfg) {
  cfg.validate();
  const std::size_t c = params.gamma.rows;
  AffineTable tbl{cfg.s, Mat(cfg.s, c), Mat(cfg.s, c)};
  for (std::size_t i = 0; i < cfg.s; ++i) {
    const std::size_t a = cfg.affine == AffineType::Sub ? i : 0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      tbl.gamma.at(i, ch) = params.gamma.at(ch, a);
      tbl.beta.at(i, ch) = params.beta.at(ch, a);
    }
  }
  return tbl;
}

FusedBandedConv fuse_table(const AffineTable& tbl, const Conv2dParams& conv) {
  conv.validate();
  if (conv.c_in != tbl.gamma.cols)
    throw ShapeMismatch("fuse: conv c_in=" + std::to_string(conv.c_in) +
                        " but affine has " + std::to_string(tbl.gamma.cols) + " channels");
  FusedBandedConv fused;
  fused.s = tbl.s;
  fused.blocks.reserve(tbl.s);
  for (std::size_t i = 0; i < tbl.s; ++i) {
    Conv2dParams blk = conv;
    for (std::size_t o = 0; o < conv.c_out; ++o) {
      double fold = 0.0;
      for (std::size_t ch = 0; ch < conv.c_in; ++ch) {
        const double g = tbl.gamma.at(i, ch);
        const double b = tbl.beta.at(i, ch);
        for (std::size_t kf = 0; kf < conv.k_f; ++kf)
          for (std::size_t kt = 0; kt < conv.k_t; ++kt) {
            blk.weight[blk.windex(o, ch, kf, kt)] = g * conv.w(o, ch, kf, kt);
            fold += conv.w(o, ch, kf, kt) * b;
          }
      }
      blk.bias[o] = conv.bias[o] + fold;
    }
    fused.blocks.push_back(std::move(blk));
  }
  return fused;
}

// gamma_band(f) * x + beta_band(f); the unfused half of the equivalence.
Tensor4 apply_banded_affine(const Tensor4& x, const AffineTable& tbl) {
  if (x.f % tbl.s != 0) throw IndivisibleFrequency("affine: F not divisible by s");
  if (x.c != tbl.gamma.cols) throw ShapeMismatch("affine: channel mismatch");
  const std::size_t fb = x.f / tbl.s;
  Tensor4 y(x.n, x.c, x.f, x.t);
  for (std::size_t in = 0; in < x.n; ++in)
    for (std::size_t ic = 0; ic < x.c; ++ic)
      for (std::size_t jf = 0; jf < x.f; ++jf) {
        const std::size_t band = jf / fb;
        const double g = tbl.gamma.at(band, ic);
        const double b = tbl.beta.at(band, ic);
        for (std::size_t jt = 0; jt < x.t; ++jt) y.at(in, ic, jf, jt) = g * x.at(in, ic, jf, jt) + b;
      }
  return y;
}

}  // namespace

FusedBandedConv fuse(const SsnParams& params, const SsnConfig& cfg, const Conv2dParams& conv) {
  return fuse_table(affine_table(params, cfg), conv);
}

FusedBandedConv fuse_with_stats(const SsnParams& params, const SsnRunningStats& stats,
                                const SsnConfig& cfg, const Conv2dParams& conv) {
  AffineTable tbl = affine_table(params, cfg);
  if (stats.mean.rows != tbl.gamma.cols || stats.mean.cols != cfg.s)
    throw ShapeMismatch("fuse_with_stats: stats dims do not match (c, s)");
  for (std::size_t i = 0; i < cfg.s; ++i)
    for (std::size_t ch = 0; ch < tbl.gamma.cols; ++ch) {
      const double inv_std = 1.0 / std::sqrt(stats.var.at(ch, i) + cfg.eps);
      const double g = tbl.gamma.at(i, ch);
      tbl.gamma.at(i, ch) = g * inv_std;
      tbl.beta.at(i, ch) -= g * stats.mean.at(ch, i) * inv_std;
    }
  return fuse_table(tbl, conv);
}

Tensor4 banded_conv_forward(const Tensor4& x_hat, const FusedBandedConv& fused) {
  if (fused.s == 0 || fused.blocks.size() != fused.s)
    throw ShapeMismatch("banded_conv_forward: malformed fused blocks");
  if (x_hat.f % fused.s != 0)
    throw IndivisibleFrequency("banded_conv_forward: F=" + std::to_string(x_hat.f) +
                               " not divisible by s=" + std::to_string(fused.s));
  const Conv2dParams& p0 = fused.blocks[0];
  if (x_hat.c != p0.c_in) throw ShapeMismatch("banded_conv_forward: channel mismatch");
  if (p0.pad_f != (p0.k_f - 1) / 2)
    throw ShapeMismatch(
        "banded_conv_forward: frequency padding must preserve size so output rows map to bands");
  const std::size_t fb = x_hat.f / fused.s;
  const std::size_t to = x_hat.t + 2 * p0.pad_t + 1 - p0.k_t;
  if (x_hat.t + 2 * p0.pad_t < p0.k_t)
    throw ShapeMismatch("banded_conv_forward: kernel larger than padded input");
  Tensor4 y(x_hat.n, p0.c_out, x_hat.f, to);
  const std::ptrdiff_t slabs = static_cast<std::ptrdiff_t>(x_hat.n * p0.c_out);
#pragma omp parallel for if (y.size() * p0.c_in * p0.k_f * p0.k_t >= 4096)
  for (std::ptrdiff_t no = 0; no < slabs; ++no) {
    const std::size_t in = static_cast<std::size_t>(no) / p0.c_out;
    const std::size_t oc = static_cast<std::size_t>(no) % p0.c_out;
    for (std::size_t of = 0; of < x_hat.f; ++of) {
      const Conv2dParams& p = fused.blocks[of / fb];
      for (std::size_t ot = 0; ot < to; ++ot) {
        double acc = p.bias[oc];
        for (std::size_t ic = 0; ic < p.c_in; ++ic)
          for (std::size_t kf = 0; kf < p.k_f; ++kf) {
            const std::ptrdiff_t jf =
                static_cast<std::ptrdiff_t>(of + kf) - static_cast<std::ptrdiff_t>(p.pad_f);
            if (jf < 0 || jf >= static_cast<std::ptrdiff_t>(x_hat.f)) continue;
            for (std::size_t kt = 0; kt < p.k_t; ++kt) {
              const std::ptrdiff_t jt =
                  static_cast<std::ptrdiff_t>(ot + kt) - static_cast<std::ptrdiff_t>(p.pad_t);
              if (jt < 0 || jt >= static_cast<std::ptrdiff_t>(x_hat.t)) continue;
              acc += p.w(oc, ic, kf, kt) * x_hat.at(in, ic, static_cast<std::size_t>(jf),
                                                    static_cast<std::size_t>(jt));
            }
          }
        y.at(in, oc, of, ot) = acc;
      }
    }
  }
  return y;
}

std::vector<FusionPairReport> fusion_report(const std::string& checkpoint_dir,
                                            const FusionReportOptions& opts) {
  const Model model = load_checkpoint(checkpoint_dir);
  const SsnConfig cfg = model.spec.norm_config();
  Rng rng(opts.seed);

  std::vector<FusionPairReport> reports;
  for (std::size_t i = 0; i + 1 < model.convs.size(); ++i) {
    const Conv2dParams& conv = model.convs[i + 1];
    const SsnParams& params = model.norms[i].params;
    const SsnRunningStats& stats = model.norms[i].stats;

    // BN-Sub statistics live on one band; expanding them across s bands
    // gives the per-band table the merge expects.
    SsnRunningStats banded_stats = stats;
    if (stats.mean.cols == 1 && cfg.s > 1) {
      banded_stats = SsnRunningStats(stats.mean.rows, cfg.s);
      banded_stats.batches_seen = stats.batches_seen;
      for (std::size_t ch = 0; ch < stats.mean.rows; ++ch)
        for (std::size_t b = 0; b < cfg.s; ++b) {
          banded_stats.mean.at(ch, b) = stats.mean.at(ch, 0);
          banded_stats.var.at(ch, b) = stats.var.at(ch, 0);
        }
    }

    const FusedBandedConv fused = opts.fold_stats
                                      ? fuse_with_stats(params, banded_stats, cfg, conv)
                                      : fuse(params, cfg, conv);
    const AffineTable tbl = affine_table(params, cfg);

    FusionPairReport rep;
    rep.norm_layer = i;
    rep.conv_layer = i + 1;
    rep.s = cfg.s;
    rep.k_f = conv.k_f;
    rep.trials = opts.trials;

    const std::size_t f = model.in_f;
    const std::size_t fb = f / cfg.s;
    const std::size_t half = conv.k_f / 2;
    for (std::size_t trial = 0; trial < opts.trials; ++trial) {
      Tensor4 x(opts.batch, conv.c_in, f, opts.time);
      for (double& v : x.data) v = rng.gaussian();
      Tensor4 ref;
      if (opts.fold_stats) {
        ref = conv2d_forward(ssn_forward_infer(x, params, banded_stats, cfg), conv);
      } else {
        ref = conv2d_forward(apply_banded_affine(x, tbl), conv);
      }
      const Tensor4 got = banded_conv_forward(x, fused);
      for (std::size_t in = 0; in < got.n; ++in)
        for (std::size_t oc = 0; oc < got.c; ++oc)
          for (std::size_t of = 0; of < got.f; ++of) {
            const std::size_t off = of % fb;
            const bool interior = off >= half && off + half < fb;
            for (std::size_t ot = 0; ot < got.t; ++ot) {
              const double d = std::fabs(got.at(in, oc, of, ot) - ref.at(in, oc, of, ot));
              if (interior)
                rep.interior_max_abs_diff = std::max(rep.interior_max_abs_diff, d);
              else
                rep.boundary_max_abs_diff = std::max(rep.boundary_max_abs_diff, d);
            }
          }
    }
    reports.push_back(rep);
  }
  return reports;
}

}  // namespace subspec
