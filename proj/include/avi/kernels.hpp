#pragma once

// Data-parallel numerical kernels. Every kernel has a plain serial reference in
// `serial` and an OpenMP version in `parallel` that must agree with it; the
// rest of the library calls the parallel versions.

#include <cstddef>
#include <vector>

namespace avi::kernels {

// Keys [begin, end) visible to one query row.
struct KeyRange {
  int begin = 0;
  int end = 0;
};

// Shapes for one attention call. q is n x dim, k and v are m x dim, all
// row-major; dim splits evenly into `heads`. `ranges` is either empty (every
// query sees every key) or holds one range per query. A query with an empty
// range produces a zero row.
struct AttentionShape {
  int n = 0;
  int m = 0;
  int dim = 0;
  int heads = 1;
};

std::vector<float> gaussian_kernel_1d(int ksize, double sigma);

namespace serial {

// Separable blur of `frames` planes of H x W with zero padding.
void gaussian_blur(const float* in, float* out, int frames, int height, int width,
                   const std::vector<float>& taps);

// out = x * B^T per row of d coefficients (B is d x d row-major).
void patch_apply(const float* in, float* out, std::size_t rows, int d, const float* basis,
                 bool transpose);

// probs has heads * n * m entries (zero outside each query's range).
template <class T>
void attention_forward(const AttentionShape& s, const T* q, const T* k, const T* v,
                       const std::vector<KeyRange>& ranges, T* out, T* probs);

// Gradients are accumulated (+=) into dq, dk, dv.
template <class T>
void attention_backward(const AttentionShape& s, const T* q, const T* k, const T* v,
                        const std::vector<KeyRange>& ranges, const T* probs, const T* dout,
                        T* dq, T* dk, T* dv);

}  // namespace serial

namespace parallel {

void gaussian_blur(const float* in, float* out, int frames, int height, int width,
                   const std::vector<float>& taps);

void patch_apply(const float* in, float* out, std::size_t rows, int d, const float* basis,
                 bool transpose);

template <class T>
void attention_forward(const AttentionShape& s, const T* q, const T* k, const T* v,
                       const std::vector<KeyRange>& ranges, T* out, T* probs);

template <class T>
void attention_backward(const AttentionShape& s, const T* q, const T* k, const T* v,
                        const std::vector<KeyRange>& ranges, const T* probs, const T* dout,
                        T* dq, T* dk, T* dv);

}  // namespace parallel

}  // namespace avi::kernels
