#include "subspec/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace subspec {

namespace {

// Parallelising tiny tensors costs more than it saves (the gradient checker
// runs thousands of small forwards).
constexpr std::size_t kParThreshold = 1 << 12;

void check_band_args(const Tensor4& x, std::size_t s) {
  if (s == 0 || x.f % s != 0)
    throw IndivisibleFrequency("frequency dim " + std::to_string(x.f) +
                               " not divisible into " + std::to_string(s) + " bands");
}

}  // namespace

Tensor4 band_slice(const Tensor4& x, std::size_t band, std::size_t n_bands) {
  check_band_args(x, n_bands);
  if (band >= n_bands)
    throw BandOutOfRange("band " + std::to_string(band) + " out of range for s=" +
                         std::to_string(n_bands));
  const std::size_t fb = x.f / n_bands;
  const std::size_t f0 = band * fb;
  Tensor4 y(x.n, x.c, fb, x.t);
  const std::ptrdiff_t slabs = static_cast<std::ptrdiff_t>(x.n * x.c);
#pragma omp parallel for if (y.size() >= kParThreshold)
  for (std::ptrdiff_t nc = 0; nc < slabs; ++nc) {
    const std::size_t in = static_cast<std::size_t>(nc) / x.c;
    const std::size_t ic = static_cast<std::size_t>(nc) % x.c;
    for (std::size_t jf = 0; jf < fb; ++jf)
      for (std::size_t jt = 0; jt < x.t; ++jt)
        y.at(in, ic, jf, jt) = x.at(in, ic, f0 + jf, jt);
  }
  return y;
}

BandMoments moments_per_channel_band(const Tensor4& x, std::size_t s) {
  check_band_args(x, s);
  const std::size_t fb = x.f / s;
  const std::size_t count = x.n * fb * x.t;
  BandMoments out{Mat(x.c, s), Mat(x.c, s)};
  const std::ptrdiff_t cells = static_cast<std::ptrdiff_t>(x.c * s);
  // Two-pass per (channel, band); ascending-index order inside each cell.
#pragma omp parallel for if (x.size() >= kParThreshold)
  for (std::ptrdiff_t cell = 0; cell < cells; ++cell) {
    const std::size_t ic = static_cast<std::size_t>(cell) / s;
    const std::size_t ib = static_cast<std::size_t>(cell) % s;
    const std::size_t f0 = ib * fb;
    double sum = 0.0;
    for (std::size_t in = 0; in < x.n; ++in)
      for (std::size_t jf = f0; jf < f0 + fb; ++jf)
        for (std::size_t jt = 0; jt < x.t; ++jt) sum += x.at(in, ic, jf, jt);
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t in = 0; in < x.n; ++in)
      for (std::size_t jf = f0; jf < f0 + fb; ++jf)
        for (std::size_t jt = 0; jt < x.t; ++jt) {
          const double d = x.at(in, ic, jf, jt) - mean;
          ss += d * d;
        }
    out.mean.at(ic, ib) = mean;
    out.var.at(ic, ib) = ss / static_cast<double>(count);
  }
  return out;
}

Tensor4 conv2d_forward(const Tensor4& x, const Conv2dParams& p) {
  p.validate();
  if (x.c != p.c_in)
    throw ShapeMismatch("conv2d_forward: input has " + std::to_string(x.c) +
                        " channels, kernel expects " + std::to_string(p.c_in));
  const std::size_t fo = x.f + 2 * p.pad_f + 1 - p.k_f;
  const std::size_t to = x.t + 2 * p.pad_t + 1 - p.k_t;
  if (x.f + 2 * p.pad_f < p.k_f || x.t + 2 * p.pad_t < p.k_t)
    throw ShapeMismatch("conv2d_forward: kernel larger than padded input");
  Tensor4 y(x.n, p.c_out, fo, to);
  const std::ptrdiff_t slabs = static_cast<std::ptrdiff_t>(x.n * p.c_out);
#pragma omp parallel for if (y.size() * p.c_in * p.k_f * p.k_t >= kParThreshold)
  for (std::ptrdiff_t no = 0; no < slabs; ++no) {
    const std::size_t in = static_cast<std::size_t>(no) / p.c_out;
    const std::size_t oc = static_cast<std::size_t>(no) % p.c_out;
    for (std::size_t of = 0; of < fo; ++of) {
      for (std::size_t ot = 0; ot < to; ++ot) {
        double acc = p.bias[oc];
        for (std::size_t ic = 0; ic < p.c_in; ++ic)
          for (std::size_t kf = 0; kf < p.k_f; ++kf) {
            const std::ptrdiff_t jf =
                static_cast<std::ptrdiff_t>(of + kf) - static_cast<std::ptrdiff_t>(p.pad_f);
            if (jf < 0 || jf >= static_cast<std::ptrdiff_t>(x.f)) continue;
            for (std::size_t kt = 0; kt < p.k_t; ++kt) {
              const std::ptrdiff_t jt =
                  static_cast<std::ptrdiff_t>(ot + kt) - static_cast<std::ptrdiff_t>(p.pad_t);
              if (jt < 0 || jt >= static_cast<std::ptrdiff_t>(x.t)) continue;
              acc += p.w(oc, ic, kf, kt) *
                     x.at(in, ic, static_cast<std::size_t>(jf), static_cast<std::size_t>(jt));
            }
          }
        y.at(in, oc, of, ot) = acc;
      }
    }
  }
  return y;
}

Conv2dGrads conv2d_backward(const Tensor4& grad_y, const Tensor4& x, const Conv2dParams& p) {
  p.validate();
  if (x.c != p.c_in) throw ShapeMismatch("conv2d_backward: x channels != c_in");
  const std::size_t fo = x.f + 2 * p.pad_f + 1 - p.k_f;
  const std::size_t to = x.t + 2 * p.pad_t + 1 - p.k_t;
  if (grad_y.n != x.n || grad_y.c != p.c_out || grad_y.f != fo || grad_y.t != to)
    throw ShapeMismatch("conv2d_backward: grad_y shape " + grad_y.shape_str() +
                        " inconsistent with forward output");

  Conv2dGrads g{Tensor4(x.n, x.c, x.f, x.t),
                std::vector<double>(p.weight.size(), 0.0),
                std::vector<double>(p.c_out, 0.0)};

  // grad_x[n,ic,jf,jt] = sum_{oc,kf,kt} grad_y[n,oc,jf+pf-kf,jt+pt-kt] * w[oc,ic,kf,kt]
  const std::ptrdiff_t xslabs = static_cast<std::ptrdiff_t>(x.n * x.c);
#pragma omp parallel for if (x.size() * p.c_out * p.k_f * p.k_t >= kParThreshold)
  for (std::ptrdiff_t ni = 0; ni < xslabs; ++ni) {
    const std::size_t in = static_cast<std::size_t>(ni) / x.c;
    const std::size_t ic = static_cast<std::size_t>(ni) % x.c;
    for (std::size_t jf = 0; jf < x.f; ++jf)
      for (std::size_t jt = 0; jt < x.t; ++jt) {
        double acc = 0.0;
        for (std::size_t oc = 0; oc < p.c_out; ++oc)
          for (std::size_t kf = 0; kf < p.k_f; ++kf) {
            const std::ptrdiff_t of =
                static_cast<std::ptrdiff_t>(jf + p.pad_f) - static_cast<std::ptrdiff_t>(kf);
            if (of < 0 || of >= static_cast<std::ptrdiff_t>(fo)) continue;
            for (std::size_t kt = 0; kt < p.k_t; ++kt) {
              const std::ptrdiff_t ot =
                  static_cast<std::ptrdiff_t>(jt + p.pad_t) - static_cast<std::ptrdiff_t>(kt);
              if (ot < 0 || ot >= static_cast<std::ptrdiff_t>(to)) continue;
              acc += grad_y.at(in, oc, static_cast<std::size_t>(of), static_cast<std::size_t>(ot)) *
                     p.w(oc, ic, kf, kt);
            }
          }
        g.grad_x.at(in, ic, jf, jt) = acc;
      }
  }

  // grad_w[oc,ic,kf,kt] = sum_{n,of,ot} grad_y * x[n,ic,of+kf-pf,ot+kt-pt]
  const std::ptrdiff_t wcells = static_cast<std::ptrdiff_t>(p.weight.size());
#pragma omp parallel for if (grad_y.size() >= kParThreshold)
  for (std::ptrdiff_t wi = 0; wi < wcells; ++wi) {
    std::size_t rem = static_cast<std::size_t>(wi);
    const std::size_t kt = rem % p.k_t;
    rem /= p.k_t;
    const std::size_t kf = rem % p.k_f;
    rem /= p.k_f;
    const std::size_t ic = rem % p.c_in;
    const std::size_t oc = rem / p.c_in;
    double acc = 0.0;
    for (std::size_t in = 0; in < x.n; ++in)
      for (std::size_t of = 0; of < fo; ++of) {
        const std::ptrdiff_t jf =
            static_cast<std::ptrdiff_t>(of + kf) - static_cast<std::ptrdiff_t>(p.pad_f);
        if (jf < 0 || jf >= static_cast<std::ptrdiff_t>(x.f)) continue;
        for (std::size_t ot = 0; ot < to; ++ot) {
          const std::ptrdiff_t jt =
              static_cast<std::ptrdiff_t>(ot + kt) - static_cast<std::ptrdiff_t>(p.pad_t);
          if (jt < 0 || jt >= static_cast<std::ptrdiff_t>(x.t)) continue;
          acc += grad_y.at(in, oc, of, ot) *
                 x.at(in, ic, static_cast<std::size_t>(jf), static_cast<std::size_t>(jt));
        }
      }
    g.grad_w[static_cast<std::size_t>(wi)] = acc;
  }

  for (std::size_t oc = 0; oc < p.c_out; ++oc) {
    double acc = 0.0;
    for (std::size_t in = 0; in < x.n; ++in)
      for (std::size_t of = 0; of < fo; ++of)
        for (std::size_t ot = 0; ot < to; ++ot) acc += grad_y.at(in, oc, of, ot);
    g.grad_b[oc] = acc;
  }
  return g;
}

Tensor4 relu_forward(const Tensor4& x) {
  Tensor4 y = x;
  const std::ptrdiff_t nn = static_cast<std::ptrdiff_t>(y.size());
#pragma omp parallel for if (nn >= static_cast<std::ptrdiff_t>(kParThreshold))
  for (std::ptrdiff_t i = 0; i < nn; ++i)
    y.data[static_cast<std::size_t>(i)] = std::max(0.0, y.data[static_cast<std::size_t>(i)]);
  return y;
}

Tensor4 relu_backward(const Tensor4& grad_y, const Tensor4& x) {
  if (!grad_y.same_shape(x)) throw ShapeMismatch("relu_backward: shape mismatch");
  Tensor4 g(x.n, x.c, x.f, x.t);
  const std::ptrdiff_t nn = static_cast<std::ptrdiff_t>(g.size());
#pragma omp parallel for if (nn >= static_cast<std::ptrdiff_t>(kParThreshold))
  for (std::ptrdiff_t i = 0; i < nn; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    g.data[k] = x.data[k] > 0.0 ? grad_y.data[k] : 0.0;
  }
  return g;
}

Tensor4 global_average_pool(const Tensor4& x) {
  Tensor4 y(x.n, x.c, 1, 1);
  const double inv = 1.0 / static_cast<double>(x.f * x.t);
  const std::ptrdiff_t slabs = static_cast<std::ptrdiff_t>(x.n * x.c);
#pragma omp parallel for if (x.size() >= kParThreshold)
  for (std::ptrdiff_t nc = 0; nc < slabs; ++nc) {
    const std::size_t in = static_cast<std::size_t>(nc) / x.c;
    const std::size_t ic = static_cast<std::size_t>(nc) % x.c;
    double acc = 0.0;
    for (std::size_t jf = 0; jf < x.f; ++jf)
      for (std::size_t jt = 0; jt < x.t; ++jt) acc += x.at(in, ic, jf, jt);
    y.at(in, ic, 0, 0) = acc * inv;
  }
  return y;
}

Tensor4 global_average_pool_backward(const Tensor4& grad_y, std::size_t f, std::size_t t) {
  if (grad_y.f != 1 || grad_y.t != 1)
    throw ShapeMismatch("global_average_pool_backward: expected (n,c,1,1) gradient");
  Tensor4 g(grad_y.n, grad_y.c, f, t);
  const double inv = 1.0 / static_cast<double>(f * t);
  for (std::size_t in = 0; in < g.n; ++in)
    for (std::size_t ic = 0; ic < g.c; ++ic) {
      const double v = grad_y.at(in, ic, 0, 0) * inv;
      for (std::size_t jf = 0; jf < f; ++jf)
        for (std::size_t jt = 0; jt < t; ++jt) g.at(in, ic, jf, jt) = v;
    }
  return g;
}

Tensor4 dense_forward(const Tensor4& x, const DenseParams& p) {
  if (x.c != p.in || x.f != 1 || x.t != 1)
    throw ShapeMismatch("dense_forward: expected (n," + std::to_string(p.in) + ",1,1) input");
  Tensor4 y(x.n, p.out, 1, 1);
#pragma omp parallel for if (x.n * p.out * p.in >= kParThreshold)
  for (std::ptrdiff_t in = 0; in < static_cast<std::ptrdiff_t>(x.n); ++in)
    for (std::size_t o = 0; o < p.out; ++o) {
      double acc = p.bias[o];
      for (std::size_t i = 0; i < p.in; ++i)
        acc += p.weight[o * p.in + i] * x.at(static_cast<std::size_t>(in), i, 0, 0);
      y.at(static_cast<std::size_t>(in), o, 0, 0) = acc;
    }
  return y;
}

DenseGrads dense_backward(const Tensor4& grad_y, const Tensor4& x, const DenseParams& p) {
  if (grad_y.n != x.n || grad_y.c != p.out || x.c != p.in)
    throw ShapeMismatch("dense_backward: shape mismatch");
  DenseGrads g{Tensor4(x.n, x.c, 1, 1), std::vector<double>(p.weight.size(), 0.0),
               std::vector<double>(p.out, 0.0)};
  for (std::size_t in = 0; in < x.n; ++in)
    for (std::size_t i = 0; i < p.in; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < p.out; ++o)
        acc += grad_y.at(in, o, 0, 0) * p.weight[o * p.in + i];
      g.grad_x.at(in, i, 0, 0) = acc;
    }
  for (std::size_t o = 0; o < p.out; ++o) {
    for (std::size_t i = 0; i < p.in; ++i) {
      double acc = 0.0;
      for (std::size_t in = 0; in < x.n; ++in) acc += grad_y.at(in, o, 0, 0) * x.at(in, i, 0, 0);
      g.grad_w[o * p.in + i] = acc;
    }
    double acc = 0.0;
    for (std::size_t in = 0; in < x.n; ++in) acc += grad_y.at(in, o, 0, 0);
    g.grad_b[o] = acc;
  }
  return g;
}

SoftmaxXent softmax_cross_entropy(const Tensor4& logits, const std::vector<int>& labels) {
  if (logits.f != 1 || logits.t != 1)
    throw ShapeMismatch("softmax_cross_entropy: expected (n,k,1,1) logits");
  if (labels.size() != logits.n)
    throw ShapeMismatch("softmax_cross_entropy: label count != batch size");
  const std::size_t k = logits.c;
  SoftmaxXent out;
  out.grad_logits = Tensor4(logits.n, k, 1, 1);
  const double invn = 1.0 / static_cast<double>(logits.n);
  double loss = 0.0;
  for (std::size_t in = 0; in < logits.n; ++in) {
    const int label = labels[in];
    if (label < 0 || static_cast<std::size_t>(label) >= k)
      throw IndexOutOfRange("softmax_cross_entropy: label out of range");
    double mx = logits.at(in, 0, 0, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at(in, j, 0, 0));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(logits.at(in, j, 0, 0) - mx);
    const double logz = std::log(z) + mx;
    loss += (logz - logits.at(in, static_cast<std::size_t>(label), 0, 0)) * invn;
    for (std::size_t j = 0; j < k; ++j) {
      const double pj = std::exp(logits.at(in, j, 0, 0) - logz);
      out.grad_logits.at(in, j, 0, 0) =
          (pj - (static_cast<std::size_t>(label) == j ? 1.0 : 0.0)) * invn;
    }
  }
  out.loss = loss;
  return out;
}

}  // namespace subspec
