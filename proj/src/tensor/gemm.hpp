#pragma once

#include <algorithm>
#include <cstring>
#include <type_traits>
#include <vector>

#include "nsx/tensor/tensor.hpp"

namespace nsx::detail {

// GCC/Clang vector extensions; lowered to whatever SIMD the target has.
using v8d = double __attribute__((vector_size(64)));
using v8f = float __attribute__((vector_size(32)));

template <typename Real>
inline v8d load8(const Real* p) {
  if constexpr (std::is_same_v<Real, float>) {
    v8f f;
    std::memcpy(&f, p, sizeof(f));
    return __builtin_convertvector(f, v8d);
  } else {
    v8d d;
    std::memcpy(&d, p, sizeof(d));
    return d;
  }
}

template <int MR, typename Real>
inline void kernel(const Real* a, const Real* b, double* out, Index K, Index N, Index n) {
  v8d acc[MR][2] = {};
  const Real* bp = b + n;
  for (Index k = 0; k < K; ++k, bp += N) {
    const v8d b0 = load8(bp);
    const v8d b1 = load8(bp + 8);
    for (int i = 0; i < MR; ++i) {
      const double w = static_cast<double>(a[i * K + k]);
      acc[i][0] += w * b0;
      acc[i][1] += w * b1;
    }
  }
  for (int i = 0; i < MR; ++i) {
    std::memcpy(out + i * N + n, &acc[i][0], sizeof(v8d));
    std::memcpy(out + i * N + n + 8, &acc[i][1], sizeof(v8d));
  }
}

/// out[m*N + n] = sum_k a[m*K + k] * b[k*N + n].
///
/// Every output element is accumulated in double with k ascending and no
/// fused multiply-add, whichever code path (blocked or tail) computes it.
/// Results for a column therefore never depend on N or on the column index,
/// which the incremental context-model decoder relies on.
template <typename Real>
void gemm(const Real* a, const Real* b, double* out, Index M, Index K, Index N) {
  constexpr int MR = 8;
  constexpr Index NR = 16;
  constexpr Index NC = 128;
  const Index n_full = N - N % NR;
  Index m = 0;
  for (Index n0 = 0; n0 < n_full; n0 += NC) {
    const Index n1 = std::min(n_full, n0 + NC);
    for (Index mm = 0; mm + MR <= M; mm += MR) {
      for (Index n = n0; n < n1; n += NR) kernel<MR>(a + mm * K, b, out + mm * N, K, N, n);
    }
  }
  for (; m + MR <= M; m += MR) {
    for (Index n = n_full; n < N; ++n) {
      for (int i = 0; i < MR; ++i) {
        double s = 0;
        for (Index k = 0; k < K; ++k) s += static_cast<double>(a[(m + i) * K + k]) * static_cast<double>(b[k * N + n]);
        out[(m + i) * N + n] = s;
      }
    }
  }
  for (; m < M; ++m) {
    const Real* arow = a + m * K;
    double* row = out + m * N;
    for (Index n = 0; n < N; ++n) row[n] = 0.0;
    for (Index k = 0; k < K; ++k) {
      const double w = arow[k];
      const Real* br = b + k * N;
      for (Index n = 0; n < N; ++n) row[n] += w * static_cast<double>(br[n]);
    }
  }
}

template <typename Real>
std::vector<Real> transpose(const Real* src, Index rows, Index cols) {
  std::vector<Real> dst(static_cast<std::size_t>(rows * cols));
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
  return dst;
}

/// Gathers k*k patches: col[(c*k + ky)*k + kx][oy*out_w + ox].
template <typename Real>
void im2col(const Real* img, Index channels, Index height, Index width, Index k, Index stride,
            Index pad, Index out_h, Index out_w, Real* col) {
  for (Index c = 0; c < channels; ++c) {
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        Real* dst = col + ((c * k + ky) * k + kx) * out_h * out_w;
        for (Index oy = 0; oy < out_h; ++oy) {
          const Index iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) {
            for (Index ox = 0; ox < out_w; ++ox) dst[oy * out_w + ox] = Real(0);
            continue;
          }
          const Real* src = img + (c * height + iy) * width;
          for (Index ox = 0; ox < out_w; ++ox) {
            const Index ix = ox * stride - pad + kx;
            dst[oy * out_w + ox] = (ix >= 0 && ix < width) ? src[ix] : Real(0);
          }
        }
      }
    }
  }
}

/// Scatter-adds patches back into img; inverse bookkeeping of im2col.
inline void col2im(const double* col, Index channels, Index height, Index width, Index k,
                   Index stride, Index pad, Index out_h, Index out_w, double* img) {
  for (Index c = 0; c < channels; ++c) {
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const double* src = col + ((c * k + ky) * k + kx) * out_h * out_w;
        for (Index oy = 0; oy < out_h; ++oy) {
          const Index iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          double* dst = img + (c * height + iy) * width;
          for (Index ox = 0; ox < out_w; ++ox) {
            const Index ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) dst[ix] += src[oy * out_w + ox];
          }
        }
      }
    }
  }
}

}  // namespace nsx::detail
