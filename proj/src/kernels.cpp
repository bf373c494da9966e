#include "avi/kernels.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace avi::kernels {

std::vector<float> gaussian_kernel_1d(int ksize, double sigma) {
  std::vector<float> taps(static_cast<std::size_t>(ksize), 0.0f);
  const int r = ksize / 2;
  if (sigma <= 0.0 || ksize == 1) {
    taps[static_cast<std::size_t>(r)] = 1.0f;
    return taps;
  }
  double total = 0.0;
  std::vector<double> w(static_cast<std::size_t>(ksize));
  for (int i = -r; i <= r; ++i) {
    w[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    total += w[static_cast<std::size_t>(i + r)];
  }
  for (int i = 0; i < ksize; ++i) taps[static_cast<std::size_t>(i)] = static_cast<float>(w[static_cast<std::size_t>(i)] / total);
  return taps;
}

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <class T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

KeyRange range_for(const std::vector<KeyRange>& ranges, int i, int m) {
  return ranges.empty() ? KeyRange{0, m} : ranges[static_cast<std::size_t>(i)];
}

void blur_rows(const float* in, float* out, int height, int width, const std::vector<float>& taps,
               int y) {
  const int r = static_cast<int>(taps.size()) / 2;
  for (int x = 0; x < width; ++x) {
    float acc = 0.0f;
    for (int j = -r; j <= r; ++j) {
      const int xx = x + j;
      if (xx < 0 || xx >= width) continue;
      acc += taps[static_cast<std::size_t>(j + r)] * in[static_cast<std::size_t>(y) * width + xx];
    }
    out[static_cast<std::size_t>(y) * width + x] = acc;
  }
  (void)height;
}

void blur_cols(const float* in, float* out, int height, int width, const std::vector<float>& taps,
               int y) {
  const int r = static_cast<int>(taps.size()) / 2;
  for (int x = 0; x < width; ++x) {
    float acc = 0.0f;
    for (int j = -r; j <= r; ++j) {
      const int yy = y + j;
      if (yy < 0 || yy >= height) continue;
      acc += taps[static_cast<std::size_t>(j + r)] * in[static_cast<std::size_t>(yy) * width + x];
    }
    out[static_cast<std::size_t>(y) * width + x] = acc;
  }
}

// One (head, query) row of ranged attention. Shared by the serial reference
// and the parallel ranged path.
void patch_row(const float* x, float* y, int d, const float* basis, bool transpose) {
  for (int i = 0; i < d; ++i) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
      const float b = transpose ? basis[j * d + i] : basis[i * d + j];
      acc += static_cast<double>(b) * x[j];
    }
    y[i] = static_cast<float>(acc);
  }
}

template <class T>
void attend_row(const AttentionShape& s, const T* q, const T* k, const T* v, KeyRange kr, int h,
                int i, T* out, T* prow) {
  const int dh = s.dim / s.heads;
  const T scale = T(1) / std::sqrt(T(dh));
  T* orow = out + static_cast<std::size_t>(i) * s.dim + h * dh;
  for (int c = 0; c < dh; ++c) orow[c] = T(0);
  if (kr.end <= kr.begin) return;
  const T* qi = q + static_cast<std::size_t>(i) * s.dim + h * dh;
  T mx = -std::numeric_limits<T>::infinity();
  for (int j = kr.begin; j < kr.end; ++j) {
    const T* kj = k + static_cast<std::size_t>(j) * s.dim + h * dh;
    T acc = T(0);
    for (int c = 0; c < dh; ++c) acc += qi[c] * kj[c];
    prow[j] = acc * scale;
    mx = std::max(mx, prow[j]);
  }
  T total = T(0);
  for (int j = kr.begin; j < kr.end; ++j) {
    prow[j] = std::exp(prow[j] - mx);
    total += prow[j];
  }
  for (int j = kr.begin; j < kr.end; ++j) {
    prow[j] /= total;
    const T* vj = v + static_cast<std::size_t>(j) * s.dim + h * dh;
    for (int c = 0; c < dh; ++c) orow[c] += prow[j] * vj[c];
  }
}

template <class T>
void attend_row_backward(const AttentionShape& s, const T* q, const T* k, const T* v, KeyRange kr,
                         int h, int i, const T* prow, const T* dout, T* dq, T* dk, T* dv,
                         std::vector<T>& dp) {
  if (kr.end <= kr.begin) return;
  const int dh = s.dim / s.heads;
  const T scale = T(1) / std::sqrt(T(dh));
  const T* go = dout + static_cast<std::size_t>(i) * s.dim + h * dh;
  const T* qi = q + static_cast<std::size_t>(i) * s.dim + h * dh;
  T* dqi = dq + static_cast<std::size_t>(i) * s.dim + h * dh;
  T dot = T(0);
  for (int j = kr.begin; j < kr.end; ++j) {
    const T* vj = v + static_cast<std::size_t>(j) * s.dim + h * dh;
    T* dvj = dv + static_cast<std::size_t>(j) * s.dim + h * dh;
    T acc = T(0);
    for (int c = 0; c < dh; ++c) {
      acc += go[c] * vj[c];
      dvj[c] += prow[j] * go[c];
    }
    dp[static_cast<std::size_t>(j)] = acc;
    dot += acc * prow[j];
  }
  for (int j = kr.begin; j < kr.end; ++j) {
    const T ds = prow[j] * (dp[static_cast<std::size_t>(j)] - dot) * scale;
    const T* kj = k + static_cast<std::size_t>(j) * s.dim + h * dh;
    T* dkj = dk + static_cast<std::size_t>(j) * s.dim + h * dh;
    for (int c = 0; c < dh; ++c) {
      dqi[c] += ds * kj[c];
      dkj[c] += ds * qi[c];
    }
  }
}

}  // namespace

namespace serial {

void gaussian_blur(const float* in, float* out, int frames, int height, int width,
                   const std::vector<float>& taps) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  std::vector<float> tmp(plane);
  for (int f = 0; f < frames; ++f) {
    const float* src = in + f * plane;
    float* dst = out + f * plane;
    for (int y = 0; y < height; ++y) blur_rows(src, tmp.data(), height, width, taps, y);
    for (int y = 0; y < height; ++y) blur_cols(tmp.data(), dst, height, width, taps, y);
  }
}

void patch_apply(const float* in, float* out, std::size_t rows, int d, const float* basis,
                 bool transpose) {
  for (std::size_t r = 0; r < rows; ++r) patch_row(in + r * d, out + r * d, d, basis, transpose);
}

template <class T>
void attention_forward(const AttentionShape& s, const T* q, const T* k, const T* v,
                       const std::vector<KeyRange>& ranges, T* out, T* probs) {
  const std::size_t nm = static_cast<std::size_t>(s.n) * s.m;
  std::fill(probs, probs + nm * s.heads, T(0));
  for (int h = 0; h < s.heads; ++h)
    for (int i = 0; i < s.n; ++i)
      attend_row(s, q, k, v, range_for(ranges, i, s.m), h, i, out,
                 probs + h * nm + static_cast<std::size_t>(i) * s.m);
}

template <class T>
void attention_backward(const AttentionShape& s, const T* q, const T* k, const T* v,
                        const std::vector<KeyRange>& ranges, const T* probs, const T* dout,
                        T* dq, T* dk, T* dv) {
  const std::size_t nm = static_cast<std::size_t>(s.n) * s.m;
  std::vector<T> dp(static_cast<std::size_t>(s.m));
  for (int h = 0; h < s.heads; ++h)
    for (int i = 0; i < s.n; ++i)
      attend_row_backward(s, q, k, v, range_for(ranges, i, s.m), h, i,
                          probs + h * nm + static_cast<std::size_t>(i) * s.m, dout, dq, dk, dv, dp);
}

template void attention_forward<float>(const AttentionShape&, const float*, const float*,
                                       const float*, const std::vector<KeyRange>&, float*, float*);
template void attention_forward<double>(const AttentionShape&, const double*, const double*,
                                        const double*, const std::vector<KeyRange>&, double*,
                                        double*);
template void attention_backward<float>(const AttentionShape&, const float*, const float*,
                                        const float*, const std::vector<KeyRange>&, const float*,
                                        const float*, float*, float*, float*);
template void attention_backward<double>(const AttentionShape&, const double*, const double*,
                                         const double*, const std::vector<KeyRange>&,
                                         const double*, const double*, double*, double*, double*);

}  // namespace serial

namespace parallel {

void gaussian_blur(const float* in, float* out, int frames, int height, int width,
                   const std::vector<float>& taps) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  std::vector<float> tmp(plane * frames);
#pragma omp parallel for collapse(2) schedule(static)
  for (int f = 0; f < frames; ++f)
    for (int y = 0; y < height; ++y)
      blur_rows(in + f * plane, tmp.data() + f * plane, height, width, taps, y);
#pragma omp parallel for collapse(2) schedule(static)
  for (int f = 0; f < frames; ++f)
    for (int y = 0; y < height; ++y)
      blur_cols(tmp.data() + f * plane, out + f * plane, height, width, taps, y);
}

void patch_apply(const float* in, float* out, std::size_t rows, int d, const float* basis,
                 bool transpose) {
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) patch_row(in + r * d, out + r * d, d, basis, transpose);
}

template <class T>
void attention_forward(const AttentionShape& s, const T* q, const T* k, const T* v,
                       const std::vector<KeyRange>& ranges, T* out, T* probs) {
  const int dh = s.dim / s.heads;
  const std::size_t nm = static_cast<std::size_t>(s.n) * s.m;
  if (!ranges.empty()) {
    std::fill(probs, probs + nm * s.heads, T(0));
#pragma omp parallel for collapse(2) schedule(static)
    for (int h = 0; h < s.heads; ++h)
      for (int i = 0; i < s.n; ++i)
        attend_row(s, q, k, v, ranges[static_cast<std::size_t>(i)], h, i, out,
                   probs + h * nm + static_cast<std::size_t>(i) * s.m);
    return;
  }
  const T scale = T(1) / std::sqrt(T(dh));
#pragma omp parallel for schedule(static)
  for (int h = 0; h < s.heads; ++h) {
    ConstStridedMap<T> qh(q + h * dh, s.n, dh, Eigen::OuterStride<>(s.dim));
    ConstStridedMap<T> kh(k + h * dh, s.m, dh, Eigen::OuterStride<>(s.dim));
    ConstStridedMap<T> vh(v + h * dh, s.m, dh, Eigen::OuterStride<>(s.dim));
    Eigen::Map<RowMat<T>> p(probs + h * nm, s.n, s.m);
    p.noalias() = (qh * kh.transpose()) * scale;
    // Scalar loops: Eigen's vectorized reductions peel by address, which
    // would make results depend on where the buffer landed.
    for (int i = 0; i < s.n; ++i) {
      T* row = probs + h * nm + static_cast<std::size_t>(i) * s.m;
      T mx = -std::numeric_limits<T>::infinity();
      for (int j = 0; j < s.m; ++j) mx = std::max(mx, row[j]);
      T total = T(0);
      for (int j = 0; j < s.m; ++j) total += (row[j] = std::exp(row[j] - mx));
      for (int j = 0; j < s.m; ++j) row[j] /= total;
    }
    StridedMap<T> oh(out + h * dh, s.n, dh, Eigen::OuterStride<>(s.dim));
    oh.noalias() = p * vh;
  }
}

template <class T>
void attention_backward(const AttentionShape& s, const T* q, const T* k, const T* v,
                        const std::vector<KeyRange>& ranges, const T* probs, const T* dout,
                        T* dq, T* dk, T* dv) {
  const int dh = s.dim / s.heads;
  const std::size_t nm = static_cast<std::size_t>(s.n) * s.m;
  if (!ranges.empty()) {
    // Rows of one head write overlapping key gradients, so split by head only.
#pragma omp parallel for schedule(static)
    for (int h = 0; h < s.heads; ++h) {
      std::vector<T> dp(static_cast<std::size_t>(s.m));
      for (int i = 0; i < s.n; ++i)
        attend_row_backward(s, q, k, v, ranges[static_cast<std::size_t>(i)], h, i,
                            probs + h * nm + static_cast<std::size_t>(i) * s.m, dout, dq, dk, dv,
                            dp);
    }
    return;
  }
  const T scale = T(1) / std::sqrt(T(dh));
#pragma omp parallel for schedule(static)
  for (int h = 0; h < s.heads; ++h) {
    ConstStridedMap<T> qh(q + h * dh, s.n, dh, Eigen::OuterStride<>(s.dim));
    ConstStridedMap<T> kh(k + h * dh, s.m, dh, Eigen::OuterStride<>(s.dim));
    ConstStridedMap<T> vh(v + h * dh, s.m, dh, Eigen::OuterStride<>(s.dim));
    ConstStridedMap<T> go(dout + h * dh, s.n, dh, Eigen::OuterStride<>(s.dim));
    Eigen::Map<const RowMat<T>> p(probs + h * nm, s.n, s.m);
    StridedMap<T> gq(dq + h * dh, s.n, dh, Eigen::OuterStride<>(s.dim));
    StridedMap<T> gk(dk + h * dh, s.m, dh, Eigen::OuterStride<>(s.dim));
    StridedMap<T> gv(dv + h * dh, s.m, dh, Eigen::OuterStride<>(s.dim));
    gv.noalias() += p.transpose() * go;
    RowMat<T> ds = go * vh.transpose();
    for (int i = 0; i < s.n; ++i) {
      const T dot = ds.row(i).dot(p.row(i));
      ds.row(i) = (p.row(i).array() * (ds.row(i).array() - dot)).matrix();
    }
    ds *= scale;
    gq.noalias() += ds * kh;
    gk.noalias() += ds.transpose() * qh;
  }
}

template void attention_forward<float>(const AttentionShape&, const float*, const float*,
                                       const float*, const std::vector<KeyRange>&, float*, float*);
template void attention_forward<double>(const AttentionShape&, const double*, const double*,
                                        const double*, const std::vector<KeyRange>&, double*,
                                        double*);
template void attention_backward<float>(const AttentionShape&, const float*, const float*,
                                        const float*, const std::vector<KeyRange>&, const float*,
                                        const float*, float*, float*, float*);
template void attention_backward<double>(const AttentionShape&, const double*, const double*,
                                         const double*, const std::vector<KeyRange>&,
                                         const double*, const double*, double*, double*, double*);

}  // namespace parallel

}  // namespace avi::kernels
