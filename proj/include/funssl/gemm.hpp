#pragma once

// Single entry point for dense matrix products. Backed by Eigen maps over
// the tensors' row-major buffers; single-threaded, so results are
// reproducible run to run.

#include <Eigen/Core>

#include <cstddef>

namespace funssl {

template <typename T>
using MatMap =
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap = Eigen::Map<
    const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// C[m,n] = beta*C + A[m,k]*B[k,n]; transa/transb read A as A^T (stored
// [k,m]) resp. B as B^T (stored [n,k]).
template <typename T>
void gemm(bool transa, bool transb, std::size_t m, std::size_t n,
          std::size_t k, const T* a, const T* b, T beta, T* c) {
  MatMap<T> C(c, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  if (beta == T{0})
    C.setZero();
  else if (beta != T{1})
    C *= beta;
  const auto ai = static_cast<Eigen::Index>(transa ? k : m);
  const auto aj = static_cast<Eigen::Index>(transa ? m : k);
  const auto bi = static_cast<Eigen::Index>(transb ? n : k);
  const auto bj = static_cast<Eigen::Index>(transb ? k : n);
  ConstMatMap<T> A(a, ai, aj);
  ConstMatMap<T> B(b, bi, bj);
  if (!transa && !transb)
    C.noalias() += A * B;
  else if (transa && !transb)
    C.noalias() += A.transpose() * B;
  else if (!transa && transb)
    C.noalias() += A * B.transpose();
  else
    C.noalias() += A.transpose() * B.transpose();
}

}  // namespace funssl
