#include "mqc/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace mqc {

namespace {

struct Bbox2d {
    int y0 = 0, y1 = -1, x0 = 0, x1 = -1;
    bool empty() const { return y1 < y0; }
};

Bbox2d slice_bbox(const Mask& mask, int z) {
    Bbox2d b;
    b.y0 = mask.shape.y;
    b.x0 = mask.shape.x;
    for (int y = 0; y < mask.shape.y; ++y)
        for (int x = 0; x < mask.shape.x; ++x)
            if (mask.at(z, y, x)) {
                b.y0 = std::min(b.y0, y);
                b.y1 = std::max(b.y1, y);
                b.x0 = std::min(b.x0, x);
                b.x1 = std::max(b.x1, x);
            }
    if (b.y1 < b.y0) return Bbox2d{}; // empty
    return b;
}

// Bilinear sample of the normalized image; coordinates outside the slice
// contribute zero (the window padding).
float sample_image(const Volume& img, int z, double sy, double sx) {
    const int ny = img.shape.y;
    const int nx = img.shape.x;
    const int y0 = static_cast<int>(std::floor(sy));
    const int x0 = static_cast<int>(std::floor(sx));
    const double fy = sy - y0;
    const double fx = sx - x0;
    double acc = 0.0;
    for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
            const int y = y0 + dy;
            const int x = x0 + dx;
            if (y < 0 || y >= ny || x < 0 || x >= nx) continue;
            const double wgt = (dy ? fy : 1.0 - fy) * (dx ? fx : 1.0 - fx);
            acc += wgt * normalize_hu(img.at(z, y, x));
        }
    return static_cast<float>(acc);
}

std::uint8_t sample_mask(const Mask& m, int z, double sy, double sx) {
    const int y = static_cast<int>(std::lround(sy));
    const int x = static_cast<int>(std::lround(sx));
    if (y < 0 || y >= m.shape.y || x < 0 || x >= m.shape.x) return 0;
    return m.at(z, y, x) ? 1 : 0;
}

} // namespace

std::optional<SlicePair> preprocess_pair(const Volume& image, const Mask& mask, int z,
                                         int class_id) {
    image.validate();
    mask.validate();
    if (image.shape != mask.shape) throw ShapeError("image and mask shapes differ");
    if (z < 0 || z >= image.shape.z) throw ValueError("slice index out of range");
    if (!mask.is_binary()) throw ValueError("preprocess_pair needs a binary mask");

    const Bbox2d box = slice_bbox(mask, z);
    if (box.empty()) return std::nullopt;

    const int box_side = std::max(box.y1 - box.y0 + 1, box.x1 - box.x0 + 1);
    const int side = std::max(1, static_cast<int>(std::lround(box_side * kCropMargin)));
    const double cy = 0.5 * (box.y0 + box.y1);
    const double cx = 0.5 * (box.x0 + box.x1);

    SlicePair out;
    out.pixels.assign(2u * kSliceSize * kSliceSize, 0.0f);
    out.class_id = class_id;
    out.z_index = z;
    out.volume_id = image.id;

    // Window corners map onto output corners; side 1 degenerates to a point.
    const double span = side - 1;
    const double oy = cy - span / 2.0;
    const double ox = cx - span / 2.0;
    const double step = span / (kSliceSize - 1);
    float* img_ch = out.pixels.data();
    float* msk_ch = out.pixels.data() + static_cast<std::size_t>(kSliceSize) * kSliceSize;
    for (int j = 0; j < kSliceSize; ++j) {
        const double sy = oy + j * step;
        for (int i = 0; i < kSliceSize; ++i) {
            const double sx = ox + i * step;
            img_ch[j * kSliceSize + i] = sample_image(image, z, sy, sx);
            msk_ch[j * kSliceSize + i] = static_cast<float>(sample_mask(mask, z, sy, sx));
        }
    }
    return out;
}

std::vector<int> nonempty_slices(const Mask& mask) {
    std::vector<int> zs;
    for (int z = 0; z < mask.shape.z; ++z) {
        bool any = false;
        for (int y = 0; y < mask.shape.y && !any; ++y)
            for (int x = 0; x < mask.shape.x; ++x)
                if (mask.at(z, y, x)) {
                    any = true;
                    break;
                }
        if (any) zs.push_back(z);
    }
    return zs;
}

std::vector<int> sample_slices(const Mask& mask, int k) {
    if (k < 1) throw ValueError("k must be at least 1");
    const std::vector<int> zs = nonempty_slices(mask);
    if (zs.empty()) throw EmptyMaskError("mask has no foreground voxels");
    if (static_cast<int>(zs.size()) < k) return zs;

    const int z0 = zs.front();
    const int z1 = zs.back();
    std::vector<int> out;
    out.reserve(k);
    for (int i = 0; i < k; ++i) {
        const double t = k == 1 ? 0.5 * (z0 + z1)
                                : z0 + static_cast<double>(i) * (z1 - z0) / (k - 1);
        out.push_back(static_cast<int>(std::lround(t)));
    }
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace mqc
