// Throughput comparison of the OpenMP kernels against the serial reference,
// plus a bitwise agreement check on every measured case.

#include <chrono>
#include <cstdio>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "subspec/kernels.hpp"
#include "subspec/norm.hpp"
#include "subspec/rng.hpp"
#include "subspec/serial.hpp"

using namespace subspec;

namespace {

double time_best_of(const std::function<void()>& fn, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (dt < best) best = dt;
  }
  return best;
}

void report(const char* name, double serial_s, double parallel_s, bool equal) {
  std::printf("%-28s serial %9.4f ms   parallel %9.4f ms   speedup %5.2fx   %s\n", name,
              serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
              equal ? "bitwise-equal" : "MISMATCH");
}

bool tensors_equal(const Tensor4& a, const Tensor4& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (OpenMP disabled)\n");
#endif
  Rng rng(1);
  const int reps = 3;

  // conv2d on a mid-size feature map
  {
    Tensor4 x(8, 16, 64, 64);
    for (double& v : x.data) v = rng.gaussian();
    Conv2dParams p(16, 16, 3, 3, 1, 1);
    for (double& v : p.weight) v = rng.gaussian();
    Tensor4 ys, yp;
    const double ts = time_best_of([&] { ys = serial::conv2d_forward(x, p); }, reps);
    const double tp = time_best_of([&] { yp = conv2d_forward(x, p); }, reps);
    report("conv2d_forward 8x16x64x64", ts, tp, tensors_equal(ys, yp));

    Tensor4 gy(8, 16, 64, 64);
    for (double& v : gy.data) v = rng.gaussian();
    Conv2dGrads gs, gp;
    const double bs = time_best_of([&] { gs = serial::conv2d_backward(gy, x, p); }, reps);
    const double bp = time_best_of([&] { gp = conv2d_backward(gy, x, p); }, reps);
    report("conv2d_backward 8x16x64x64", bs, bp,
           tensors_equal(gs.grad_x, gp.grad_x) && gs.grad_w == gp.grad_w && gs.grad_b == gp.grad_b);
  }

  // per-(channel, band) moments
  {
    Tensor4 x(16, 32, 64, 128);
    for (double& v : x.data) v = rng.gaussian();
    BandMoments ms, mp;
    const double ts = time_best_of([&] { ms = serial::moments_per_channel_band(x, 8); }, reps);
    const double tp = time_best_of([&] { mp = moments_per_channel_band(x, 8); }, reps);
    report("moments 16x32x64x128 s=8", ts, tp, ms.mean.v == mp.mean.v && ms.var.v == mp.var.v);
  }

  // full SSN training forward (moments + normalize)
  {
    Tensor4 x(16, 32, 64, 128);
    for (double& v : x.data) v = rng.gaussian();
    SsnConfig cfg;
    cfg.s = 8;
    cfg.affine = AffineType::Sub;
    SsnParams params(32, cfg);
    SsnRunningStats stats(32, 8);
    Tensor4 y;
    const double tp = time_best_of([&] { y = ssn_forward_train(x, params, stats, cfg).y; }, reps);
    std::printf("%-28s parallel %9.4f ms (no serial twin; uses the checked kernels)\n",
                "ssn_forward_train s=8", tp * 1e3);
  }
  return 0;
}
