#pragma once

#include <ccm/geometry.hpp>

#include <array>

namespace ccm {

/// Synthetic callosum-like label volume: an elliptic arch in the y-z plane
/// (thicker at both ends) extruded along x, split into labels 251..255 from
/// posterior to anterior, optionally with spherical landmark labels.
struct PhantomOptions {
    std::array<int, 3> dims{64, 128, 128};
    double voxel_mm = 1.0;
    double arch_a_mm = 30.0;      ///< half length along y
    double arch_b_mm = 16.0;      ///< height along z
    double body_thickness_mm = 6.0;
    double end_thickness_mm = 10.0;
    double half_width_mm = 8.0;   ///< extent along x on each side of x = 0
    bool extra_labels = true;     ///< add spheres with labels 4, 10, 16, 43, 49
    /// Pose of the phantom in world space (applied to the canonical phantom).
    RigidTransform pose;
};

struct Phantom {
    Volume labels;
    Landmarks landmarks;
    Plane plane;       ///< x = 0 of the canonical phantom, posed
    Vec3 cc_centroid;  ///< centre of the arch, posed
};

/// The volume is centred on the world origin with an axis-aligned affine.
Phantom make_phantom(const PhantomOptions& options);

} // namespace ccm
