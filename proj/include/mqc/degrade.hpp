#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mqc/grid.hpp"

namespace mqc {

enum class DegradationKind { erode, dilate, drop_component, translate, merge_neighbor };

const char* to_string(DegradationKind k);
DegradationKind degradation_kind_from_string(const std::string& s);

// One step on a severity ladder. Deterministic given (mask, spec); magnitude 0
// is the identity for every kind.
struct DegradationSpec {
    DegradationKind kind = DegradationKind::erode;
    int magnitude = 0; // iterations / voxels / component count / blob radius
    std::uint64_t seed = 0;
};

Mask degrade(const Mask& mask, const DegradationSpec& spec);

// 6-connected component sizes and labels; label 0 is background.
struct ComponentLabels {
    std::vector<std::int32_t> labels;     // per voxel
    std::vector<std::int64_t> sizes;      // sizes[l-1] = voxels of component l
    std::vector<std::size_t> first_voxel; // lowest z-major index per component
};

ComponentLabels connected_components(const Mask& mask);

} // namespace mqc
