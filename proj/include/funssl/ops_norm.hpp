#pragma once

// Cumulative layer normalization. Statistics at frame t pool over every
// entry of frames 0..t across both remaining axes, so the output at t never
// sees later frames. Prefix sums run in index order, keeping truncation
// bit-exact.

#include <cmath>
#include <utility>
#include <vector>

#include "funssl/graph.hpp"

namespace funssl {

inline constexpr double kClnEps = 1e-8;

// x[T, B, C], gain[C], bias[C].
template <typename T>
Var<T> cln(Var<T> x, Var<T> gain, Var<T> bias) {
  Graph<T>& g = *x.graph;
  const Tensor<T>& xv = x.value();
  check(xv.rank() == 3, "cln: rank-3 input required");
  const std::size_t tn = xv.shape[0], bn = xv.shape[1], cn = xv.shape[2];
  check(gain.value().shape == Shape{cn} && bias.value().shape == Shape{cn},
        "cln: gain/bias extent must match channels");
  const std::size_t row = bn * cn;

  std::vector<T> mu(tn), sigma(tn);
  Tensor<T> out(xv.shape);
  {
    // f64 accumulators; the division below is what the per-frame values see.
    double s1 = 0.0, s2 = 0.0;
    const Tensor<T>& gv = gain.value();
    const Tensor<T>& bv = bias.value();
    for (std::size_t t = 0; t < tn; ++t) {
      const T* xt = xv.ptr() + t * row;
      for (std::size_t j = 0; j < row; ++j) {
        s1 += static_cast<double>(xt[j]);
        s2 += static_cast<double>(xt[j]) * static_cast<double>(xt[j]);
      }
      const double cnt = static_cast<double>((t + 1) * row);
      const double m = s1 / cnt;
      double var = s2 / cnt - m * m;
      if (var < 0.0) var = 0.0;
      const double sd = std::sqrt(var + kClnEps);
      mu[t] = static_cast<T>(m);
      sigma[t] = static_cast<T>(sd);
      T* ot = out.ptr() + t * row;
      for (std::size_t b = 0; b < bn; ++b)
        for (std::size_t c = 0; c < cn; ++c) {
          const std::size_t j = b * cn + c;
          ot[j] = gv[c] * (xt[j] - mu[t]) / sigma[t] + bv[c];
        }
    }
  }

  const bool xr = x.requires_grad(), gr = gain.requires_grad(),
             br = bias.requires_grad();
  const auto xid = x.id, gid = gain.id, bid = bias.id, oid = g.next_id();
  return g.push(
      std::move(out), xr || gr || br, "cln", [=](Graph<T>& gg) {
        const Tensor<T>& go = gg.grad_buf(oid);
        const Tensor<T>& xin = gg.value(Var<T>{&gg, xid});
        const Tensor<T>& gv = gg.value(Var<T>{&gg, gid});

        if (gr || br) {
          Tensor<T>* ggain = gr ? &gg.grad_buf(gid) : nullptr;
          Tensor<T>* gbias = br ? &gg.grad_buf(bid) : nullptr;
          for (std::size_t t = 0; t < tn; ++t)
            for (std::size_t b = 0; b < bn; ++b)
              for (std::size_t c = 0; c < cn; ++c) {
                const std::size_t j = t * row + b * cn + c;
                if (ggain)
                  (*ggain)[c] += go[j] * (xin[j] - mu[t]) / sigma[t];
                if (gbias) (*gbias)[c] += go[j];
              }
        }
        if (!xr) return;

        // Per-frame reductions of ghat = go * gain, then suffix sums over
        // t >= tau: an input at frame tau enters the statistics of every
        // later frame.
        std::vector<double> asum(tn, 0.0), csum(tn, 0.0);
        for (std::size_t t = 0; t < tn; ++t) {
          const T* gt = go.ptr() + t * row;
          const T* xt = xin.ptr() + t * row;
          double a = 0.0, c2 = 0.0;
          for (std::size_t b = 0; b < bn; ++b)
            for (std::size_t c = 0; c < cn; ++c) {
              const std::size_t j = b * cn + c;
              const double gh = static_cast<double>(gt[j]) *
                                static_cast<double>(gv[c]);
              a += gh;
              c2 += gh * (static_cast<double>(xt[j]) -
                          static_cast<double>(mu[t]));
            }
          asum[t] = a;
          csum[t] = c2;
        }
        std::vector<double> pfx(tn), qfx(tn), rfx(tn);
        double p = 0.0, q = 0.0, r = 0.0;
        for (std::size_t ti = tn; ti-- > 0;) {
          const double cnt = static_cast<double>((ti + 1) * row);
          const double sd = static_cast<double>(sigma[ti]);
          p += asum[ti] / (cnt * sd);
          q += csum[ti] / (cnt * sd * sd * sd);
          r += csum[ti] * static_cast<double>(mu[ti]) / (cnt * sd * sd * sd);
          pfx[ti] = p;
          qfx[ti] = q;
          rfx[ti] = r;
        }
        Tensor<T>& gx = gg.grad_buf(xid);
        for (std::size_t t = 0; t < tn; ++t)
          for (std::size_t b = 0; b < bn; ++b)
            for (std::size_t c = 0; c < cn; ++c) {
              const std::size_t j = t * row + b * cn + c;
              const double gh = static_cast<double>(go[j]) *
                                static_cast<double>(gv[c]);
              gx[j] += static_cast<T>(gh / sigma[t] - pfx[t] -
                                      static_cast<double>(xin[j]) * qfx[t] +
                                      rfx[t]);
            }
      });
}

}  // namespace funssl
