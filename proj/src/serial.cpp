#include "subspec/serial.hpp"

namespace subspec::serial {

Tensor4 conv2d_forward(const Tensor4& x, const Conv2dParams& p) {
  p.validate();
  if (x.c != p.c_in) throw ShapeMismatch("serial::conv2d_forward: x channels != c_in");
  if (x.f + 2 * p.pad_f < p.k_f || x.t + 2 * p.pad_t < p.k_t)
    throw ShapeMismatch("serial::conv2d_forward: kernel larger than padded input");
  const std::size_t fo = x.f + 2 * p.pad_f + 1 - p.k_f;
  const std::size_t to = x.t + 2 * p.pad_t + 1 - p.k_t;
  Tensor4 y(x.n, p.c_out, fo, to);
  for (std::size_t in = 0; in < x.n; ++in)
    for (std::size_t oc = 0; oc < p.c_out; ++oc)
      for (std::size_t of = 0; of < fo; ++of)
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
  return y;
}

Conv2dGrads conv2d_backward(const Tensor4& grad_y, const Tensor4& x, const Conv2dParams& p) {
  p.validate();
  const std::size_t fo = x.f + 2 * p.pad_f + 1 - p.k_f;
  const std::size_t to = x.t + 2 * p.pad_t + 1 - p.k_t;
  if (grad_y.n != x.n || grad_y.c != p.c_out || grad_y.f != fo || grad_y.t != to)
    throw ShapeMismatch("serial::conv2d_backward: grad_y shape inconsistent");
  Conv2dGrads g{Tensor4(x.n, x.c, x.f, x.t),
                std::vector<double>(p.weight.size(), 0.0),
                std::vector<double>(p.c_out, 0.0)};
  for (std::size_t in = 0; in < x.n; ++in)
    for (std::size_t ic = 0; ic < x.c; ++ic)
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
                acc += grad_y.at(in, oc, static_cast<std::size_t>(of),
                                 static_cast<std::size_t>(ot)) *
                       p.w(oc, ic, kf, kt);
              }
            }
          g.grad_x.at(in, ic, jf, jt) = acc;
        }
  for (std::size_t oc = 0; oc < p.c_out; ++oc)
    for (std::size_t ic = 0; ic < p.c_in; ++ic)
      for (std::size_t kf = 0; kf < p.k_f; ++kf)
        for (std::size_t kt = 0; kt < p.k_t; ++kt) {
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
          g.grad_w[p.windex(oc, ic, kf, kt)] = acc;
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

BandMoments moments_per_channel_band(const Tensor4& x, std::size_t s) {
  if (s == 0 || x.f % s != 0)
    throw IndivisibleFrequency("serial::moments: F not divisible by s");
  const std::size_t fb = x.f / s;
  const std::size_t count = x.n * fb * x.t;
  BandMoments out{Mat(x.c, s), Mat(x.c, s)};
  for (std::size_t ic = 0; ic < x.c; ++ic)
    for (std::size_t ib = 0; ib < s; ++ib) {
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

}  // namespace subspec::serial
