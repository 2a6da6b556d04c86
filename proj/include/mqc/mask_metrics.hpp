#pragma once

#include "mqc/grid.hpp"

namespace mqc {

// Dice similarity 2|A∩B| / (|A|+|B|) from exact voxel counts.
// Both masks empty -> 1.0 (vacuous agreement); exactly one empty -> 0.0.
double dsc(const Mask& a, const Mask& b);

// Normalized surface distance: the fraction of boundary voxels of each mask
// lying within `tolerance_mm` of the other mask's boundary, the two fractions
// pooled over both boundaries. Boundaries use 6-connectivity; distances are
// physical (spacing-weighted). Both empty -> 1.0; one empty -> 0.0.
double nsd(const Mask& a, const Mask& b, double tolerance_mm);

} // namespace mqc
