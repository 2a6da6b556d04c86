#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

#include "mqc/errors.hpp"

namespace mqc {

// Extents in (z, y, x) order; z is the slice axis.
struct GridSize {
    int z = 0;
    int y = 0;
    int x = 0;

    std::size_t voxels() const {
        return static_cast<std::size_t>(z) * static_cast<std::size_t>(y) *
               static_cast<std::size_t>(x);
    }
    bool operator==(const GridSize&) const = default;
};

// Voxel spacing in millimetres, (z, y, x).
struct Spacing {
    double z = 1.0;
    double y = 1.0;
    double x = 1.0;
    bool operator==(const Spacing&) const = default;
};

inline std::size_t grid_index(const GridSize& s, int z, int y, int x) {
    return (static_cast<std::size_t>(z) * s.y + static_cast<std::size_t>(y)) * s.x +
           static_cast<std::size_t>(x);
}

// 3D scalar image (HU for CT, arbitrary float otherwise).
struct Volume {
    GridSize shape;
    Spacing spacing;
    std::string id;
    std::vector<float> data; // z-major

    float at(int z, int y, int x) const { return data[grid_index(shape, z, y, x)]; }
    float& at(int z, int y, int x) { return data[grid_index(shape, z, y, x)]; }

    void validate() const {
        if (data.size() != shape.voxels())
            throw ShapeError("Volume data size does not match shape");
        if (shape.z <= 0 || shape.y <= 0 || shape.x <= 0)
            throw ShapeError("Volume shape must be positive");
        if (spacing.z <= 0 || spacing.y <= 0 || spacing.x <= 0)
            throw ValueError("Volume spacing must be positive");
    }
};

// 3D label grid. class_id == 0 means a multi-class grid of raw ids;
// class_id > 0 means a binary grid for that single class.
struct Mask {
    GridSize shape;
    Spacing spacing;
    std::string id;
    int class_id = 0;
    std::vector<std::uint8_t> data; // z-major

    std::uint8_t at(int z, int y, int x) const { return data[grid_index(shape, z, y, x)]; }
    std::uint8_t& at(int z, int y, int x) { return data[grid_index(shape, z, y, x)]; }

    bool is_binary() const {
        for (const auto v : data)
            if (v > 1) return false;
        return true;
    }

    void validate() const {
        if (data.size() != shape.voxels())
            throw ShapeError("Mask data size does not match shape");
    }
};

// Extract the binary mask of one class from a multi-class grid.
inline Mask binarize(const Mask& multi, int class_id) {
    if (class_id <= 0) throw ValueError("class_id must be positive");
    Mask out;
    out.shape = multi.shape;
    out.spacing = multi.spacing;
    out.id = multi.id;
    out.class_id = class_id;
    out.data.resize(multi.data.size());
    const auto target = static_cast<std::uint8_t>(class_id);
    for (std::size_t i = 0; i < multi.data.size(); ++i)
        out.data[i] = multi.data[i] == target ? 1 : 0;
    return out;
}

} // namespace mqc
