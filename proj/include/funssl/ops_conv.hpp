#pragma once

// Depthwise 2D convolution and its transpose, layout [C, A1, A2] with one
// kernel slice per channel. Padding is explicit per axis edge; output
// extents follow floor((A + pad - K)/stride) + 1. The transpose produces
// the natural extent (I-1)*stride + K and trims to the requested target
// from the trailing edge.

#include <array>
#include <utility>

#include "funssl/graph.hpp"

namespace funssl {

struct Stride2 {
  std::size_t s1 = 1, s2 = 1;
};

struct Pad2 {
  std::size_t before1 = 0, after1 = 0, before2 = 0, after2 = 0;
};

template <typename T>
Var<T> depthwise_conv2d(Var<T> x, Var<T> kernel, Var<T> bias, Stride2 stride,
                        Pad2 pad) {
  Graph<T>& g = *x.graph;
  const Tensor<T>& xv = x.value();
  const Tensor<T>& kv = kernel.value();
  const Tensor<T>& bv = bias.value();
  check(xv.rank() == 3 && kv.rank() == 3, "dconv: rank-3 input and kernel");
  const std::size_t cn = xv.shape[0], a1 = xv.shape[1], a2 = xv.shape[2];
  const std::size_t k1 = kv.shape[1], k2 = kv.shape[2];
  check(kv.shape[0] == cn, "dconv: one kernel slice per channel required");
  check(bv.shape == Shape{cn}, "dconv: per-channel bias required");
  check(a1 + pad.before1 + pad.after1 >= k1 &&
            a2 + pad.before2 + pad.after2 >= k2,
        "dconv: kernel larger than padded input");
  const std::size_t o1 = (a1 + pad.before1 + pad.after1 - k1) / stride.s1 + 1;
  const std::size_t o2 = (a2 + pad.before2 + pad.after2 - k2) / stride.s2 + 1;

  Tensor<T> out({cn, o1, o2});
  for (std::size_t c = 0; c < cn; ++c) {
    const T* xc = xv.ptr() + c * a1 * a2;
    const T* kc = kv.ptr() + c * k1 * k2;
    T* oc = out.ptr() + c * o1 * o2;
    for (std::size_t i = 0; i < o1; ++i)
      for (std::size_t j = 0; j < o2; ++j) {
        T acc = bv[c];
        for (std::size_t u = 0; u < k1; ++u) {
          const std::ptrdiff_t р1 = 0;
          const std::ptrdiff_t in1 =
              static_cast<std::ptrdiff_t>(i * stride.s1 + u) -
              static_cast<std::ptrdiff_t>(pad.before1);
          if (in1 < 0 || in1 >= static_cast<std::ptrdiff_t>(a1)) continue;
          for (std::size_t v = 0; v < k2; ++v) {
            const std::ptrdiff_t in2 =
                static_cast<std::ptrdiff_t>(j * stride.s2 + v) -
                static_cast<std::ptrdiff_t>(pad.before2);
            if (in2 < 0 || in2 >= static_cast<std::ptrdiff_t>(a2)) continue;
            acc += xc[in1 * a2 + in2] * kc[u * k2 + v];
          }
        }
        oc[i * o2 + j] = acc;
      }
  }

  const bool xr = x.requires_grad(), kr = kernel.requires_grad(),
             br = bias.requires_grad();
  const auto xid = x.id, kid = kernel.id, bid = bias.id, oid = g.next_id();
  return g.push(std::move(out), xr || kr || br, "dconv", [=](Graph<T>& gg) {
    const Tensor<T>& go = gg.grad_buf(oid);
    const Tensor<T>& xin = gg.value(Var<T>{&gg, xid});
    const Tensor<T>& ker = gg.value(Var<T>{&gg, kid});
    Tensor<T>* gx = xr ? &gg.grad_buf(xid) : nullptr;
    Tensor<T>* gk = kr ? &gg.grad_buf(kid) : nullptr;
    Tensor<T>* gb = br ? &gg.grad_buf(bid) : nullptr;
    for (std::size_t c = 0; c < cn; ++c) {
      const T* xc = xin.ptr() + c * a1 * a2;
      const T* kc = ker.ptr() + c * k1 * k2;
      const T* gc = go.ptr() + c * o1 * o2;
      for (std::size_t i = 0; i < o1; ++i)
        for (std::size_t j = 0; j < o2; ++j) {
          const T gval = gc[i * o2 + j];
          if (gb) (*gb)[c] += gval;
          for (std::size_t u = 0; u < k1; ++u) {
            const std::ptrdiff_t in1 =
                static_cast<std::ptrdiff_t>(i * stride.s1 + u) -
                static_cast<std::ptrdiff_t>(pad.before1);
            if (in1 < 0 || in1 >= static_cast<std::ptrdiff_t>(a1)) continue;
            for (std::size_t v = 0; v < k2; ++v) {
              const std::ptrdiff_t in2 =
                  static_cast<std::ptrdiff_t>(j * stride.s2 + v) -
                  static_cast<std::ptrdiff_t>(pad.before2);
              if (in2 < 0 || in2 >= static_cast<std::ptrdiff_t>(a2))
                continue;
              if (gx)
                (*gx)[c * a1 * a2 + in1 * a2 + in2] +=
                    gval * kc[u * k2 + v];
              if (gk)
                (*gk)[c * k1 * k2 + u * k2 + v] +=
                    gval * xc[in1 * a2 + in2];
            }
          }
        }
    }
  });
}

// target extents are the down-path feature extents the upsampled map must
// line up with; natural extent smaller than the target is a caller error.
template <typename T>
Var<T> depthwise_transposed_conv2d(Var<T> x, Var<T> kernel, Var<T> bias,
                                   Stride2 stride, std::size_t target1,
                                   std::size_t target2) {
  Graph<T>& g = *x.graph;
  const Tensor<T>& xv = x.value();
  const Tensor<T>& kv = kernel.value();
  const Tensor<T>& bv = bias.value();
  check(xv.rank() == 3 && kv.rank() == 3, "dtconv: rank-3 input and kernel");
  const std::size_t cn = xv.shape[0], i1 = xv.shape[1], i2 = xv.shape[2];
  const std::size_t k1 = kv.shape[1], k2 = kv.shape[2];
  check(kv.shape[0] == cn, "dtconv: one kernel slice per channel required");
  check(bv.shape == Shape{cn}, "dtconv: per-channel bias required");
  const std::size_t n1 = (i1 - 1) * stride.s1 + k1;
  const std::size_t n2 = (i2 - 1) * stride.s2 + k2;
  check(n1 >= target1 && n2 >= target2,
        "dtconv: natural extent " + std::to_string(n1) + "x" +
            std::to_string(n2) + " smaller than target " +
            std::to_string(target1) + "x" + std::to_string(target2));

  Tensor<T> out({cn, target1, target2});
  for (std::size_t c = 0; c < cn; ++c) {
    const T* xc = xv.ptr() + c * i1 * i2;
    const T* kc = kv.ptr() + c * k1 * k2;
    T* oc = out.ptr() + c * target1 * target2;
    for (std::size_t j = 0; j < target1 * target2; ++j) oc[j] = bv[c];
    for (std::size_t i = 0; i < i1; ++i)
      for (std::size_t j = 0; j < i2; ++j) {
        const T xval = xc[i * i2 + j];
        for (std::size_t u = 0; u < k1; ++u) {
          const std::size_t t1 = i * stride.s1 + u;
          if (t1 >= target1) continue;
          for (std::size_t v = 0; v < k2; ++v) {
            const std::size_t t2 = j * stride.s2 + v;
            if (t2 >= target2) continue;
            oc[t1 * target2 + t2] += xval * kc[u * k2 + v];
          }
        }
      }
  }

  const bool xr = x.requires_grad(), kr = kernel.requires_grad(),
             br = bias.requires_grad();
  const auto xid = x.id, kid = kernel.id, bid = bias.id, oid = g.next_id();
  return g.push(std::move(out), xr || kr || br, "dtconv", [=](Graph<T>& gg) {
    const Tensor<T>& go = gg.grad_buf(oid);
    const Tensor<T>& xin = gg.value(Var<T>{&gg, xid});
    const Tensor<T>& ker = gg.value(Var<T>{&gg, kid});
    Tensor<T>* gx = xr ? &gg.grad_buf(xid) : nullptr;
    Tensor<T>* gk = kr ? &gg.grad_buf(kid) : nullptr;
    Tensor<T>* gb = br ? &gg.grad_buf(bid) : nullptr;
    for (std::size_t c = 0; c < cn; ++c) {
      const T* xc = xin.ptr() + c * i1 * i2;
      const T* kc = ker.ptr() + c * k1 * k2;
      const T* gc = go.ptr() + c * target1 * target2;
      if (gb)
        for (std::size_t j = 0; j < target1 * target2; ++j)
          (*gb)[c] += gc[j];
      for (std::size_t i = 0; i < i1; ++i)
        for (std::size_t j = 0; j < i2; ++j) {
          T accx{0};
          for (std::size_t u = 0; u < k1; ++u) {
            const std::size_t t1 = i * stride.s1 + u;
            if (t1 >= target1) continue;
            for (std::size_t v = 0; v < k2; ++v) {
              const std::size_t t2 = j * stride.s2 + v;
              if (t2 >= target2) continue;
              const T gval = gc[t1 * target2 + t2];
              accx += gval * kc[u * k2 + v];
              if (gk)
                (*gk)[c * k1 * k2 + u * k2 + v] += gval * xc[i * i2 + j];
            }
          }
          if (gx) (*gx)[c * i1 * i2 + i * i2 + j] += accx;
        }
    }
  });
}

}  // namespace funssl
