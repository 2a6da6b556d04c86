#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mqc/grid.hpp"

namespace mqc {

constexpr int kSliceSize = 256;
constexpr float kHuLow = -200.0f;
constexpr float kHuHigh = 200.0f;
constexpr double kCropMargin = 1.5;

// Two-channel model input: channel 0 the normalized image crop in [0,1],
// channel 1 the binary mask crop.
struct SlicePair {
    std::vector<float> pixels; // 2 * kSliceSize * kSliceSize, channel-major
    int class_id = 0;
    int z_index = 0;
    std::string volume_id;

    float image(int y, int x) const { return pixels[y * kSliceSize + x]; }
    float mask(int y, int x) const {
        return pixels[kSliceSize * kSliceSize + y * kSliceSize + x];
    }
};

// Clip HU to [-200, 200] and map linearly onto [0,1].
inline float normalize_hu(float hu) {
    const float c = hu < kHuLow ? kHuLow : (hu > kHuHigh ? kHuHigh : hu);
    return (c - kHuLow) / (kHuHigh - kHuLow);
}

// Crop a square window (kCropMargin times the larger mask bounding-box side,
// centred on the box) out of slice z, resize to 256x256 (image bilinear, mask
// nearest), zero-padding where the window leaves the image. Returns nullopt
// when the mask is empty on that slice; callers skip such slices.
std::optional<SlicePair> preprocess_pair(const Volume& image, const Mask& mask, int z,
                                         int class_id);

// k z-indices uniformly spaced over the mask's non-empty z-extent (inclusive
// endpoints, rounded, deduplicated). Fewer than k non-empty slices: all of
// them. Empty mask: EmptyMaskError.
std::vector<int> sample_slices(const Mask& mask, int k);

// All z indices with at least one mask voxel, ascending.
std::vector<int> nonempty_slices(const Mask& mask);

} // namespace mqc
