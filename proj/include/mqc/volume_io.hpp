#pragma once

#include <string>

#include "mqc/grid.hpp"

namespace mqc {

enum class VolumeFormat { portable, nifti };

// Portable format: one line of JSON (shape, spacing, dtype, id, payload byte
// count) followed by the raw little-endian payload. Round trips are bit-exact.
// NIfTI (.nii / .nii.gz) is ingestion-only.

Volume load_volume(const std::string& path, VolumeFormat format);
void save_volume(const Volume& v, const std::string& path); // portable only

// Masks use a uint8 payload. class_id is carried in the header.
Mask load_mask(const std::string& path, VolumeFormat format);
void save_mask(const Mask& m, const std::string& path); // portable only

VolumeFormat guess_format(const std::string& path);

} // namespace mqc
