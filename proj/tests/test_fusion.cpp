#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "subspec/checkpoint.hpp"
#include "subspec/fusion.hpp"
#include "test_util.hpp"

using namespace subspec;

namespace {

// Reference pipeline: per-band affine on the normalized activations, then a
// plain convolution. The fused path must reproduce this wherever the
// receptive field stays inside one band.
Tensor4 ref_affine(const Tensor4& x, const SsnParams& params, const SsnConfig& cfg) {
  const std::size_t fb = x.f / cfg.s;
  Tensor4 y(x.n, x.c, x.f, x.t);
  for (std::size_t in = 0; in < x.n; ++in)
    for (std::size_t ic = 0; ic < x.c; ++ic)
      for (std::size_t jf = 0; jf < x.f; ++jf) {
        const std::size_t band = jf / fb;
        const std::size_t a = cfg.affine == AffineType::Sub ? band : 0;
        for (std::size_t jt = 0; jt < x.t; ++jt)
          y.at(in, ic, jf, jt) =
              params.gamma.at(ic, a) * x.at(in, ic, jf, jt) + params.beta.at(ic, a);
      }
  return y;
}

SsnConfig make_cfg(std::size_t s, AffineType a) {
  SsnConfig cfg;
  cfg.s = s;
  cfg.affine = a;
  return cfg;
}

SsnParams random_params(std::size_t c, const SsnConfig& cfg, Rng& rng, bool zero_beta = false) {
  SsnParams p(c, cfg);
  for (double& v : p.gamma.v) v = rng.uniform(0.5, 2.0);
  if (!zero_beta)
    for (double& v : p.beta.v) v = rng.gaussian();
  return p;
}

Conv2dParams random_conv(std::size_t co, std::size_t ci, std::size_t k, Rng& rng) {
  Conv2dParams p(co, ci, k, k, (k - 1) / 2, (k - 1) / 2);
  for (double& v : p.weight) v = rng.gaussian();
  for (double& v : p.bias) v = rng.gaussian();
  return p;
}

}  // namespace

TEST_CASE("identity affine fuses to the original conv, bit for bit") {
  Rng rng(3);
  const SsnConfig cfg = make_cfg(4, AffineType::Sub);
  SsnParams params(3, cfg);  // gamma 1, beta 0
  const Conv2dParams conv = random_conv(2, 3, 3, rng);
  const FusedBandedConv fused = fuse(params, cfg, conv);
  REQUIRE(fused.blocks.size() == 4);
  for (const Conv2dParams& blk : fused.blocks) {
    CHECK(blk.weight == conv.weight);
    CHECK(blk.bias == conv.bias);
  }
}

TEST_CASE("fused weights are exactly gamma-scaled weights") {
  Rng rng(5);
  const SsnConfig cfg = make_cfg(2, AffineType::Sub);
  const SsnParams params = random_params(3, cfg, rng);
  const Conv2dParams conv = random_conv(4, 3, 3, rng);
  const FusedBandedConv fused = fuse(params, cfg, conv);
  for (std::size_t i = 0; i < cfg.s; ++i)
    for (std::size_t o = 0; o < conv.c_out; ++o)
      for (std::size_t ch = 0; ch < conv.c_in; ++ch)
        for (std::size_t kf = 0; kf < conv.k_f; ++kf)
          for (std::size_t kt = 0; kt < conv.k_t; ++kt)
            CHECK(fused.blocks[i].w(o, ch, kf, kt) ==
                  params.gamma.at(ch, i) * conv.w(o, ch, kf, kt));
}

TEST_CASE("s=1 fusion equals folding a plain BN affine") {
  Rng rng(7);
  const SsnConfig cfg = make_cfg(1, AffineType::All);
  const SsnParams params = random_params(2, cfg, rng);
  const Conv2dParams conv = random_conv(3, 2, 3, rng);
  const FusedBandedConv fused = fuse(params, cfg, conv);
  REQUIRE(fused.blocks.size() == 1);
  for (std::size_t o = 0; o < conv.c_out; ++o) {
    double want_bias = conv.bias[o];
    for (std::size_t ch = 0; ch < conv.c_in; ++ch)
      for (std::size_t kf = 0; kf < conv.k_f; ++kf)
        for (std::size_t kt = 0; kt < conv.k_t; ++kt) {
          CHECK(fused.blocks[0].w(o, ch, kf, kt) ==
                params.gamma.at(ch, 0) * conv.w(o, ch, kf, kt));
          want_bias += conv.w(o, ch, kf, kt) * params.beta.at(ch, 0);
        }
    CHECK(fused.blocks[0].bias[o] == doctest::Approx(want_bias).epsilon(1e-15));
  }
}

TEST_CASE("1x1 kernels: fused path equals affine-then-conv everywhere") {
  Rng rng(11);
  for (int round = 0; round < 25; ++round) {
    const std::size_t s = 1 + rng.below(4);
    const std::size_t c_in = 1 + rng.below(3);
    const std::size_t c_out = 1 + rng.below(3);
    const std::size_t f = s * (1 + rng.below(4));
    const AffineType a = rng.below(2) ? AffineType::Sub : AffineType::All;
    const SsnConfig cfg = make_cfg(s, a);
    const SsnParams params = random_params(c_in, cfg, rng);
    const Conv2dParams conv = random_conv(c_out, c_in, 1, rng);
    const Tensor4 x = testutil::random_tensor(2, c_in, f, 3, rng);

    const Tensor4 want = conv2d_forward(ref_affine(x, params, cfg), conv);
    const Tensor4 got = banded_conv_forward(x, fuse(params, cfg, conv));
    CHECK(testutil::max_abs_diff(got, want) < 1e-12);
  }
}

TEST_CASE("gamma=1 beta=0 banded conv equals a plain conv") {
  Rng rng(13);
  const SsnConfig cfg = make_cfg(2, AffineType::Sub);
  SsnParams params(2, cfg);
  const Conv2dParams conv = random_conv(3, 2, 3, rng);
  const Tensor4 x = testutil::random_tensor(1, 2, 8, 4, rng);
  const Tensor4 got = banded_conv_forward(x, fuse(params, cfg, conv));
  const Tensor4 want = conv2d_forward(x, conv);
  CHECK(testutil::max_abs_diff(got, want) < 1e-15);
}

TEST_CASE("3x3 kernels with zero beta: interior rows of an 8-row input match") {
  Rng rng(17);
  const SsnConfig cfg = make_cfg(2, AffineType::Sub);
  const SsnParams params = random_params(2, cfg, rng, /*zero_beta=*/true);
  const Conv2dParams conv = random_conv(3, 2, 3, rng);
  const Tensor4 x = testutil::random_tensor(2, 2, 8, 5, rng);

  const Tensor4 want = conv2d_forward(ref_affine(x, params, cfg), conv);
  const Tensor4 got = banded_conv_forward(x, fuse(params, cfg, conv));

  // band boundary sits between rows 3 and 4; with beta=0 the padded edge
  // rows are exact as well
  for (std::size_t in = 0; in < got.n; ++in)
    for (std::size_t oc = 0; oc < got.c; ++oc)
      for (std::size_t of : {0u, 1u, 2u, 5u, 6u, 7u})
        for (std::size_t ot = 0; ot < got.t; ++ot)
          CHECK(std::fabs(got.at(in, oc, of, ot) - want.at(in, oc, of, ot)) < 1e-12);
}

TEST_CASE("3x3 kernels: rows away from boundaries and edges match the reference") {
  Rng rng(19);
  for (int round = 0; round < 25; ++round) {
    const std::size_t s = 1 + rng.below(3);
    const std::size_t f = s * (2 + rng.below(3));
    const SsnConfig cfg = make_cfg(s, AffineType::Sub);
    const SsnParams params = random_params(2, cfg, rng);
    const Conv2dParams conv = random_conv(2, 2, 3, rng);
    const Tensor4 x = testutil::random_tensor(1, 2, f, 4, rng);

    const Tensor4 want = conv2d_forward(ref_affine(x, params, cfg), conv);
    const Tensor4 got = banded_conv_forward(x, fuse(params, cfg, conv));
    const std::size_t fb = f / s;
    const std::size_t half = conv.k_f / 2;
    for (std::size_t of = 0; of < f; ++of) {
      const std::size_t off = of % fb;
      if (off < half || off + half >= fb) continue;
      for (std::size_t in = 0; in < got.n; ++in)
        for (std::size_t oc = 0; oc < got.c; ++oc)
          for (std::size_t ot = 0; ot < got.t; ++ot)
            CHECK(std::fabs(got.at(in, oc, of, ot) - want.at(in, oc, of, ot)) < 1e-12);
    }
  }
}

TEST_CASE("fold-stats merges inference normalization into the conv") {
  Rng rng(23);
  const SsnConfig cfg = make_cfg(2, AffineType::Sub);
  const SsnParams params = random_params(2, cfg, rng);
  SsnRunningStats stats(2, 2);
  for (double& v : stats.mean.v) v = rng.gaussian();
  for (double& v : stats.var.v) v = rng.uniform(0.5, 2.0);
  stats.batches_seen = 1;
  const Conv2dParams conv = random_conv(3, 2, 1, rng);
  const Tensor4 x = testutil::random_tensor(2, 2, 8, 4, rng);

  const Tensor4 want = conv2d_forward(ssn_forward_infer(x, params, stats, cfg), conv);
  const Tensor4 got = banded_conv_forward(x, fuse_with_stats(params, stats, cfg, conv));
  CHECK(testutil::max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("banded conv errors") {
  Rng rng(29);
  const SsnConfig cfg = make_cfg(3, AffineType::Sub);
  SsnParams params(2, cfg);
  const Conv2dParams conv = random_conv(2, 2, 3, rng);
  const FusedBandedConv fused = fuse(params, cfg, conv);
  Tensor4 x(1, 2, 8, 4);  // 8 % 3 != 0
  CHECK_THROWS_AS(banded_conv_forward(x, fused), IndivisibleFrequency);

  Conv2dParams bad_pad = conv;
  bad_pad.pad_f = 0;
  const SsnConfig cfg2 = make_cfg(2, AffineType::Sub);
  SsnParams params2(2, cfg2);
  const FusedBandedConv fused2 = fuse(params2, cfg2, bad_pad);
  CHECK_THROWS_AS(banded_conv_forward(x, fused2), ShapeMismatch);
}

TEST_CASE("fusion_report on an identity-affine checkpoint is exactly zero") {
  Rng rng(31);
  ModelSpec spec;
  spec.norm_kind = NormKind::SSN;
  spec.s = 2;
  spec.affine = AffineType::Sub;
  spec.widths = {4, 6, 8};
  Model model = init_model(spec, 1, 16, 5, rng);
  const std::string dir =
      (std::filesystem::temp_directory_path() / "subspec_fusion_ckpt").string();
  save_checkpoint(dir, model);

  FusionReportOptions opts;
  opts.trials = 3;
  const std::vector<FusionPairReport> reports = fusion_report(dir, opts);
  REQUIRE(reports.size() == 2);
  for (const FusionPairReport& r : reports) {
    CHECK(r.interior_max_abs_diff == 0.0);
    CHECK(r.boundary_max_abs_diff == 0.0);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("fusion_report error paths") {
  namespace fs = std::filesystem;
  FusionReportOptions opts;
  CHECK_THROWS_AS(fusion_report("/nonexistent/subspec_dir", opts), MissingBlob);

  const std::string dir = (fs::temp_directory_path() / "subspec_badckpt").string();
  fs::create_directories(dir);
  {
    std::ofstream out(dir + "/checkpoint.json");
    out << "{ not json";
  }
  CHECK_THROWS_AS(fusion_report(dir, opts), ManifestParse);
  fs::remove_all(dir);
}
