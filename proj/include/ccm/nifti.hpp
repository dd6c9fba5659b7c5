#pragma once

#include <ccm/geometry.hpp>

#include <filesystem>

namespace ccm {

/// Reads a single-file NIfTI-1 image (.nii or .nii.gz). The affine comes from
/// the sform if set, else the qform, else the voxel sizes. Throws InputError
/// naming the offending header field.
Volume load_volume(const std::filesystem::path& path);

/// Writes `vol` as NIfTI-1 with both sform and qform set from its affine.
/// Gzip-compressed when the name ends in ".gz".
void save_volume(const Volume& vol, const std::filesystem::path& path);

} // namespace ccm
