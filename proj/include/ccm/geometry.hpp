#pragma once

#include <ccm/mesh.hpp>

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace ccm {

using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// NIfTI datatype codes understood by the reader and writer.
enum class DataType : std::int16_t {
    uint8 = 2,
    int16 = 4,
    int32 = 8,
    float32 = 16,
    float64 = 64,
    int8 = 256,
    uint16 = 512,
    uint32 = 768,
};

bool is_integer(DataType t);

/// 3D grid with a voxel-to-world affine. Values are stored as doubles in
/// x-fastest order; `datatype` is the on-disk type.
struct Volume {
    std::array<int, 3> dims{0, 0, 0};
    Vec3 voxel_size = Vec3::Ones();
    Mat4 affine = Mat4::Identity();
    DataType datatype = DataType::float32;
    std::vector<double> data;

    Volume() = default;
    Volume(std::array<int, 3> d, DataType type, double fill = 0.0);

    std::size_t size() const { return data.size(); }
    std::size_t index(int i, int j, int k) const
    {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
    }
    double at(int i, int j, int k) const { return data[index(i, j, k)]; }
    double& at(int i, int j, int k) { return data[index(i, j, k)]; }
    bool is_label() const { return is_integer(datatype); }

    Vec3 voxel_to_world(const Vec3& ijk) const;
    Vec3 world_to_voxel(const Vec3& xyz) const;

    /// Throws InputError for non-positive dims or voxel sizes, a data size
    /// mismatch, or a singular affine.
    void validate() const;
};

/// Proper rigid map x -> R x + t.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    Vec3 apply_direction(const Vec3& v) const { return rotation * v; }
    RigidTransform inverse() const;
    /// (a * b)(x) = a(b(x))
    friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b);
    Mat4 matrix() const;
    /// Throws InputError unless the upper-left block is a rotation within 1e-6.
    static RigidTransform from_matrix(const Mat4& m);
};

/// Oriented plane {x : normal . x = offset}.
struct Plane {
    Vec3 normal = Vec3::UnitX();
    double offset = 0.0;

    Plane() = default;
    /// Normalises `n`; throws InputError for a zero normal.
    Plane(const Vec3& n, double d);

    double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
    Vec3 origin() const { return offset * normal; }
    Plane transformed(const RigidTransform& t) const;

    /// Frame whose first axis is the normal and whose origin is the plane
    /// point closest to the world origin.
    RigidTransform to_transform() const;
    static Plane from_transform(const RigidTransform& t);
};

struct Landmarks {
    Vec3 ac = Vec3::Zero();
    Vec3 pc = Vec3::Zero();

    /// Throws InputError when AC and PC coincide or are not finite.
    void validate() const;
};

/// Centroid pair of one label present in both volumes.
struct LabelCorrespondence {
    int label = 0;
    Vec3 first;
    Vec3 second;
};

/// World-space centroids of the non-zero labels present in both volumes,
/// sorted by label. If `labels` is non-empty only those are considered.
/// Throws InputError "insufficient correspondences" below three.
std::vector<LabelCorrespondence> label_centroids(const Volume& a, const Volume& b, std::span<const int> labels = {});

/// Least-squares proper rigid map taking src onto dst.
RigidTransform kabsch_rigid(std::span<const Vec3> src, std::span<const Vec3> dst);

struct PlaneEstimate {
    Plane plane;                 ///< mid-sagittal plane in subject world space
    RigidTransform to_template;  ///< subject world -> template world
    std::size_t correspondences = 0;
};

PlaneEstimate midsagittal_plane(const Volume& subject, const Volume& templ, const Plane& template_plane,
                                std::span<const int> labels = {});

enum class Interpolation { automatic, linear, nearest };

/// Smallest odd count n with n * spacing >= width.
int slab_slice_count(double width_mm, double spacing_mm);

/// Slices parallel to `plane`, centred on it. Axis 0 runs along the normal,
/// axis 1 along e_u = e_v x normal and axis 2 along e_v, the projection of
/// world +z into the plane. The in-plane grid covers the projected volume
/// and is aligned with the projection of voxel 0. `automatic` picks nearest
/// neighbour for integer volumes and trilinear otherwise.
Volume resample_slab(const Volume& vol, const Plane& plane, double width_mm, double spacing_mm,
                     Interpolation interp = Interpolation::automatic);

/// Maps AC to the origin, PC onto the negative y axis and the CC centroid
/// into the x = 0 plane with positive z.
RigidTransform acpc_standardize(const Landmarks& lm, const Vec3& cc_centroid);

/// Volume between two planes inside a cylinder centred at the origin whose
/// axis is the mean normal.
double plane_disagreement(const Plane& p1, const Plane& p2, double radius_mm = 60.0, double height_mm = 180.0);

} // namespace ccm
