#pragma once

#include <cstdint>

namespace dctkd::detail {

// C[M,N] (+)= A[M,K] * B[K,N]. i-k-j order: the inner j loop is a contiguous
// axpy, which vectorizes without reassociation and stays deterministic.
inline void gemm_nn(int m, int n, int k, const double* a, const double* b,
                    double* c, bool accumulate) {
  if (!accumulate) {
    for (int64_t i = 0; i < static_cast<int64_t>(m) * n; ++i) c[i] = 0.0;
  }
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<int64_t>(i) * k;
    double* crow = c + static_cast<int64_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] (+)= A^T * B with A stored [K,M].
inline void gemm_tn(int m, int n, int k, const double* a, const double* b,
                    double* c, bool accumulate) {
  if (!accumulate) {
    for (int64_t i = 0; i < static_cast<int64_t>(m) * n; ++i) c[i] = 0.0;
  }
  for (int p = 0; p < k; ++p) {
    const double* arow = a + static_cast<int64_t>(p) * m;
    const double* brow = b + static_cast<int64_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + static_cast<int64_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] (+)= A * B^T with B stored [N,K]. Rows of both operands are
// contiguous, so each entry is a dot product; four fixed accumulators give
// ILP while keeping the summation tree (and hence the result) deterministic.
inline void gemm_nt(int m, int n, int k, const double* a, const double* b,
                    double* c, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<int64_t>(i) * k;
    double* crow = c + static_cast<int64_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<int64_t>(j) * k;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      int p = 0;
      for (; p + 4 <= k; p += 4) {
        s0 += arow[p] * brow[p];
        s1 += arow[p + 1] * brow[p + 1];
        s2 += arow[p + 2] * brow[p + 2];
        s3 += arow[p + 3] * brow[p + 3];
      }
      double s = (s0 + s1) + (s2 + s3);
      for (; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = accumulate ? crow[j] + s : s;
    }
  }
}

}  // namespace dctkd::detail
