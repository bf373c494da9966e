#pragma once

#include <vector>

#include "avi/types.hpp"

namespace avi::codec {

inline constexpr int kPatch = 2;

// d x d orthonormal basis, d = channels * s * s, row k holds coefficient k.
// Patch vectors are ordered (dy, dx, c). Row 0 is the DC term.
std::vector<float> patch_basis(int s, int channels);
// Orthonormal DCT-II matrix of size n (row k is frequency k).
std::vector<double> dct_matrix(int n);

LatentGrid encode(const VideoClip& video, int s = kPatch);
VideoClip decode(const LatentGrid& latent, bool clamp = false);

LatentMask downsample_mask(const InstanceMask& mask, int s = kPatch);
InstanceMask upsample_mask(const LatentMask& lmask, int s = kPatch);

}  // namespace avi::codec
