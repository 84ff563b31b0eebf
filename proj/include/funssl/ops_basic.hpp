#pragma once

// Pointwise, structural and dense primitives. Every op appends one node;
// backward closures capture input/output ids plus whatever small buffers
// they need (input *values* stay alive inside the graph, so closures read
// them by id instead of copying).

#include <cstring>
#include <utility>

#include "funssl/gemm.hpp"
#include "funssl/graph.hpp"

namespace funssl {

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Graph<T>& g = *a.graph;
  check(same_shape(a.value(), b.value()),
        "add: shape mismatch " + shape_str(a.value().shape) + " vs " +
            shape_str(b.value().shape));
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  const bool arg = a.requires_grad(), brg = b.requires_grad();
  const auto aid = a.id, bid = b.id, oid = g.next_id();
  return g.push(std::move(out), arg || brg, "add", [=](Graph<T>& gg) {
    const Tensor<T>& go = gg.grad_buf(oid);
    if (arg) {
      Tensor<T>& ga = gg.grad_buf(aid);
      for (std::size_t i = 0; i < go.numel(); ++i) ga[i] += go[i];
    }
    if (brg) {
      Tensor<T>& gb = gg.grad_buf(bid);
      for (std::size_t i = 0; i < go.numel(); ++i) gb[i] += go[i];
    }
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  Graph<T>& g = *a.graph;
  check(same_shape(a.value(), b.value()), "sub: shape mismatch");
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  const bool arg = a.requires_grad(), brg = b.requires_grad();
  const auto aid = a.id, bid = b.id, oid = g.next_id();
  return g.push(std::move(out), arg || brg, "sub", [=](Graph<T>& gg) {
    const Tensor<T>& go = gg.grad_buf(oid);
    if (arg) {
      Tensor<T>& ga = gg.grad_buf(aid);
      for (std::size_t i = 0; i < go.numel(); ++i) ga[i] += go[i];
    }
    if (brg) {
      Tensor<T>& gb = gg.grad_buf(bid);
      for (std::size_t i = 0; i < go.numel(); ++i) gb[i] -= go[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T k) {
  Graph<T>& g = *a.graph;
  Tensor<T> out = a.value();
  for (T& v : out.data) v *= k;
  const bool arg = a.requires_grad();
  const auto aid = a.id, oid = g.next_id();
  return g.push(std::move(out), arg, "scale", [=](Graph<T>& gg) {
    const Tensor<T>& go = gg.grad_buf(oid);
    Tensor<T>& ga = gg.grad_buf(aid);
    for (std::size_t i = 0; i < go.numel(); ++i) ga[i] += k * go[i];
  });
}

// y = x W + b over the trailing axis: x[..., Din], W[Din, Dout], b[Dout].
template <typename T>
Var<T> affine(Var<T> x, Var<T> w, Var<T> b) {
  Graph<T>& g = *x.graph;
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  const Tensor<T>& bv = b.value();
  check(xv.rank() >= 1 && wv.rank() == 2 && bv.rank() == 1,
        "affine: bad ranks");
  const std::size_t din = xv.shape.back();
  const std::size_t dout = wv.shape[1];
  check(wv.shape[0] == din, "affine: inner extents mismatch, x has " +
                                std::to_string(din) + ", W has " +
                                std::to_string(wv.shape[0]));
  check(bv.shape[0] == dout, "affine: bias extent mismatch");
  const std::size_t rows = xv.numel() / din;

  Shape oshape = xv.shape;
  oshape.back() = dout;
  Tensor<T> out(oshape);
  gemm<T>(false, false, rows, dout, din, xv.ptr(), wv.ptr(), T{0}, out.ptr());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < dout; ++j) out[r * dout + j] += bv[j];

  const bool xr = x.requires_grad(), wr = w.requires_grad(),
             br = b.requires_grad();
  const auto xid = x.id, wid = w.id, bid = b.id, oid = g.next_id();
  return g.push(std::move(out), xr || wr || br, "affine", [=](Graph<T>& gg) {
    const Tensor<T>& go = gg.grad_buf(oid);
    if (xr)
      gemm<T>(false, true, rows, din, dout, go.ptr(),
              gg.value(Var<T>{&gg, wid}).ptr(), T{1},
              gg.grad_buf(xid).ptr());
    if (wr)
      gemm<T>(true, false, din, dout, rows,
              gg.value(Var<T>{&gg, xid}).ptr(), go.ptr(), T{1},
              gg.grad_buf(wid).ptr());
    if (br) {
      Tensor<T>& gb = gg.grad_buf(bid);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < dout; ++j) gb[j] += go[r * dout + j];
    }
  });
}

// Per-channel PReLU along the trailing axis; slope extent 1 or C.
template <typename T>
Var<T> prelu(Var<T> x, Var<T> slopes) {
  Graph<T>& g = *x.graph;
  const Tensor<T>& xv = x.value();
  const Tensor<T>& av = slopes.value();
  const std::size_t c = xv.shape.back();
  check(av.rank() == 1 && (av.shape[0] == 1 || av.shape[0] == c),
        "prelu: slope count must be 1 or match channel extent");
  const bool shared = av.shape[0] == 1;
  Tensor<T> out = xv;
  for (std::size_t i = 0; i < out.numel(); ++i)
    if (out[i] < T{0}) out[i] *= av[shared ? 0 : i % c];
  const bool xr = x.requires_grad(), ar = slopes.requires_grad();
  const auto xid = x.id, aid = slopes.id, oid = g.next_id();
  return g.push(std::move(out), xr || ar, "prelu", [=](Graph<T>& gg) {
    const Tensor<T>& go = gg.grad_buf(oid);
    const Tensor<T>& xin = gg.value(Var<T>{&gg, xid});
    const Tensor<T>& a = gg.value(Var<T>{&gg, aid});
    if (xr) {
      Tensor<T>& gx = gg.grad_buf(xid);
      for (std::size_t i = 0; i < go.numel(); ++i)
        gx[i] += go[i] * (xin[i] >= T{0} ? T{1} : a[shared ? 0 : i % c]);
    }
    if (ar) {
      Tensor<T>& ga = gg.grad_buf(aid);
      for (std::size_t i = 0; i < go.numel(); ++i)
        if (xin[i] < T{0}) ga[shared ? 0 : i % c] += go[i] * xin[i];
    }
  });
}

template <typename T>
Var<T> sum_all(Var<T> a) {
  Graph<T>& g = *a.graph;
  T acc{0};
  for (const T& v : a.value().data) acc += v;
  const bool arg = a.requires_grad();
  const auto aid = a.id, oid = g.next_id();
  return g.push(Tensor<T>::scalar(acc), arg, "sum", [=](Graph<T>& gg) {
    const T go = gg.grad_buf(oid)[0];
    Tensor<T>& ga = gg.grad_buf(aid);
    for (T& v : ga.data) v += go;
  });
}

template <typename T>
Var<T> mean_all(Var<T> a) {
  return scale(sum_all(a), T{1} / static_cast<T>(a.value().numel()));
}

// mean(a^2); the MSE core.
template <typename T>
Var<T> mean_sq(Var<T> a) {
  Graph<T>& g = *a.graph;
  const Tensor<T>& av = a.value();
  T acc{0};
  for (const T& v : av.data) acc += v * v;
  const T n = static_cast<T>(av.numel());
  const bool arg = a.requires_grad();
  const auto aid = a.id, oid = g.next_id();
  return g.push(Tensor<T>::scalar(acc / n), arg, "mean_sq",
                [=](Graph<T>& gg) {
                  const T go = gg.grad_buf(oid)[0];
                  const Tensor<T>& ain = gg.value(Var<T>{&gg, aid});
                  Tensor<T>& ga = gg.grad_buf(aid);
                  const T k = T{2} * go / n;
                  for (std::size_t i = 0; i < ga.numel(); ++i)
                    ga[i] += k * ain[i];
                });
}

namespace detail {

template <typename T>
void permute3_into(const Tensor<T>& x, int p0, int p1, int p2,
                   Tensor<T>& out, bool accumulate) {
  const std::size_t e0 = x.shape[0], e1 = x.shape[1], e2 = x.shape[2];
  const std::size_t os1 = out.shape[1], os2 = out.shape[2];
  std::size_t idx[3];
  for (std::size_t i = 0; i < e0; ++i)
    for (std::size_t j = 0; j < e1; ++j)
      for (std::size_t k = 0; k < e2; ++k) {
        idx[0] = i, idx[1] = j, idx[2] = k;
        const std::size_t o =
            (idx[p0] * os1 + idx[p1]) * os2 + idx[p2];
        const T v = x[(i * e1 + j) * e2 + k];
        if (accumulate)
          out[o] += v;
        else
          out[o] = v;
      }
}

}  // namespace detail

// Axis permutation of a rank-3 tensor: out axis a holds input axis perm[a].
template <typename T>
Var<T> permute3(Var<T> x, int p0, int p1, int p2) {
  Graph<T>& g = *x.graph;
  const Tensor<T>& xv = x.value();
  check(xv.rank() == 3, "permute3: rank-3 input required");
  Tensor<T> out({xv.shape[p0], xv.shape[p1], xv.shape[p2]});
  // inverse map: input axis perm[a] lands on output axis a
  int inv[3];
  inv[p0] = 0, inv[p1] = 1, inv[p2] = 2;
  detail::permute3_into(xv, inv[0], inv[1], inv[2], out, false);
  const bool xr = x.requires_grad();
  const auto xid = x.id, oid = g.next_id();
  const int q0 = p0, q1 = p1, q2 = p2;
  return g.push(std::move(out), xr, "permute3", [=](Graph<T>& gg) {
    const Tensor<T>& go = gg.grad_buf(oid);
    detail::permute3_into(go, q0, q1, q2, gg.grad_buf(xid), true);
  });
}

template <typename T>
Var<T> reverse_axis0(Var<T> x) {
  Graph<T>& g = *x.graph;
  const Tensor<T>& xv = x.value();
  const std::size_t t = xv.shape[0];
  const std::size_t row = xv.numel() / t;
  Tensor<T> out(xv.shape);
  for (std::size_t i = 0; i < t; ++i)
    std::memcpy(out.ptr() + (t - 1 - i) * row, xv.ptr() + i * row,
                row * sizeof(T));
  const bool xr = x.requires_grad();
  const auto xid = x.id, oid = g.next_id();
  return g.push(std::move(out), xr, "reverse0", [=](Graph<T>& gg) {
    const Tensor<T>& go = gg.grad_buf(oid);
    Tensor<T>& gx = gg.grad_buf(xid);
    for (std::size_t i = 0; i < t; ++i) {
      const T* src = go.ptr() + (t - 1 - i) * row;
      T* dst = gx.ptr() + i * row;
      for (std::size_t j = 0; j < row; ++j) dst[j] += src[j];
    }
  });
}

// Concatenate along the trailing axis; leading extents must agree.
template <typename T>
Var<T> concat_last(Var<T> a, Var<T> b) {
  Graph<T>& g = *a.graph;
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  check(av.rank() == bv.rank(), "concat: rank mismatch");
  for (std::size_t i = 0; i + 1 < av.rank(); ++i)
    check(av.shape[i] == bv.shape[i], "concat: leading extent mismatch");
  const std::size_t ca = av.shape.back(), cb = bv.shape.back();
  const std::size_t rows = av.numel() / ca;
  Shape oshape = av.shape;
  oshape.back() = ca + cb;
  Tensor<T> out(oshape);
  for (std::size_t r = 0; r < rows; ++r) {
    std::memcpy(out.ptr() + r * (ca + cb), av.ptr() + r * ca,
                ca * sizeof(T));
    std::memcpy(out.ptr() + r * (ca + cb) + ca, bv.ptr() + r * cb,
                cb * sizeof(T));
  }
  const bool arg = a.requires_grad(), brg = b.requires_grad();
  const auto aid = a.id, bid = b.id, oid = g.next_id();
  return g.push(std::move(out), arg || brg, "concat", [=](Graph<T>& gg) {
    const Tensor<T>& go = gg.grad_buf(oid);
    if (arg) {
      Tensor<T>& ga = gg.grad_buf(aid);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < ca; ++j)
          ga[r * ca + j] += go[r * (ca + cb) + j];
    }
    if (brg) {
      Tensor<T>& gb = gg.grad_buf(bid);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cb; ++j)
          gb[r * cb + j] += go[r * (ca + cb) + ca + j];
    }
  });
}

// Non-overlapping mean pool along axis 0 of [T, F, C]; a trailing partial
// group is dropped.
template <typename T>
Var<T> mean_pool_axis0(Var<T> x, std::size_t factor) {
  Graph<T>& g = *x.graph;
  const Tensor<T>& xv = x.value();
  check(xv.rank() == 3, "mean_pool: rank-3 input required");
  check(xv.shape[0] >= factor,
        "mean_pool: need at least " + std::to_string(factor) + " frames, got " +
            std::to_string(xv.shape[0]));
  const std::size_t tc = xv.shape[0] / factor;
  const std::size_t row = xv.shape[1] * xv.shape[2];
  Tensor<T> out({tc, xv.shape[1], xv.shape[2]});
  const T inv = T{1} / static_cast<T>(factor);
  for (std::size_t t = 0; t < tc; ++t)
    for (std::size_t m = 0; m < factor; ++m) {
      const T* src = xv.ptr() + (t * factor + m) * row;
      T* dst = out.ptr() + t * row;
      for (std::size_t j = 0; j < row; ++j) dst[j] += src[j] * inv;
    }
  const bool xr = x.requires_grad();
  const auto xid = x.id, oid = g.next_id();
  return g.push(std::move(out), xr, "mean_pool0", [=](Graph<T>& gg) {
    const Tensor<T>& go = gg.grad_buf(oid);
    Tensor<T>& gx = gg.grad_buf(xid);
    for (std::size_t t = 0; t < tc; ++t)
      for (std::size_t m = 0; m < factor; ++m) {
        const T* src = go.ptr() + t * row;
        T* dst = gx.ptr() + (t * factor + m) * row;
        for (std::size_t j = 0; j < row; ++j) dst[j] += src[j] * inv;
      }
  });
}

}  // namespace funssl
