#include <ccm/error.hpp>
#include <ccm/phantom.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace ccm {

namespace {

struct Arch {
    double a, b, zc;
    double t_body, t_end;
    std::vector<Vec2> centre;     // (y, z) samples, theta from 0 (anterior) to pi
    std::vector<double> thickness;

    Arch(const PhantomOptions& o)
        : a(o.arch_a_mm), b(o.arch_b_mm), zc(-0.4 * o.arch_b_mm), t_body(o.body_thickness_mm), t_end(o.end_thickness_mm)
    {
        constexpr int n = 720;
        for (int i = 0; i <= n; ++i) {
            const double th = std::numbers::pi * i / n;
            centre.emplace_back(a * std::cos(th), zc + b * std::sin(th));
            const double s = std::sin(th);
            thickness.push_back(t_body + (t_end - t_body) * (1.0 - s) * (1.0 - s));
        }
    }

    // Label 251 (posterior) .. 255 (anterior), or 0 outside.
    int label(double y, double z) const
    {
        double approx = std::atan2((z - zc) / b, y / a);
        if (approx < 0.0) approx = y > 0.0 ? 0.0 : std::numbers::pi;
        const int n = static_cast<int>(centre.size()) - 1;
        int guess = static_cast<int>(std::lround(std::clamp(approx, 0.0, std::numbers::pi) / std::numbers::pi * n));
        int best = -1;
        double best_d = INFINITY;
        for (int i = std::max(0, guess - 60); i <= std::min(n, guess + 60); ++i) {
            const double d = (centre[i] - Vec2(y, z)).norm();
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        if (best < 0 || best_d > 0.5 * thickness[best]) return 0;
        const int seg = std::min(4, static_cast<int>(5.0 * best / (n + 1)));
        return 255 - seg;
    }
};

struct Sphere {
    Vec3 c;
    double r;
    int label;
};

} // namespace

Phantom make_phantom(const PhantomOptions& o)
{
    if (!(o.voxel_mm > 0.0)) throw InputError("phantom voxel size must be positive");
    Phantom ph;
    ph.labels = Volume(o.dims, DataType::uint8);
    ph.labels.voxel_size = Vec3::Constant(o.voxel_mm);
    ph.labels.affine.setIdentity();
    for (int k = 0; k < 3; ++k) {
        ph.labels.affine(k, k) = o.voxel_mm;
        ph.labels.affine(k, 3) = -0.5 * (o.dims[k] - 1) * o.voxel_mm;
    }

    const Arch arch(o);
    std::vector<Sphere> spheres;
    if (o.extra_labels) {
        spheres = {{{-9.0, 4.0, -10.0}, 4.0, 4},
                   {{10.0, 2.0, -9.0}, 4.5, 43},
                   {{-12.0, -8.0, -22.0}, 5.0, 10},
                   {{13.0, -10.0, -23.0}, 5.5, 49},
                   {{0.0, -22.0, -36.0}, 6.0, 16}};
    }
    const RigidTransform inv = o.pose.inverse();
    for (int k = 0; k < o.dims[2]; ++k) {
        for (int j = 0; j < o.dims[1]; ++j) {
            for (int i = 0; i < o.dims[0]; ++i) {
                const Vec3 p = inv.apply(ph.labels.voxel_to_world(Vec3(i, j, k)));
                int label = 0;
                if (std::abs(p.x()) <= o.half_width_mm) label = arch.label(p.y(), p.z());
                for (const auto& s : spheres)
                    if (label == 0 && (p - s.c).norm() <= s.r) label = s.label;
                ph.labels.at(i, j, k) = label;
            }
        }
    }

    const double tip_drop = 0.5 * o.end_thickness_mm + 6.0;
    ph.landmarks.ac = o.pose.apply(Vec3(0.0, 0.8 * o.arch_a_mm, arch.zc - tip_drop));
    ph.landmarks.pc = o.pose.apply(Vec3(0.0, -0.8 * o.arch_a_mm, arch.zc - tip_drop));
    ph.plane = Plane(Vec3::UnitX(), 0.0).transformed(o.pose);
    ph.cc_centroid = o.pose.apply(Vec3(0.0, 0.0, arch.zc + 0.6 * o.arch_b_mm));
    return ph;
}

} // namespace ccm
