#include <ccm/error.hpp>
#include <ccm/geometry.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

namespace ccm {

bool is_integer(DataType t)
{
    return t != DataType::float32 && t != DataType::float64;
}

Volume::Volume(std::array<int, 3> d, DataType type, double fill)
    : dims(d), datatype(type)
{
    for (int v : d)
        if (v <= 0) throw InputError("volume dims must be positive");
    data.assign(static_cast<std::size_t>(d[0]) * d[1] * d[2], fill);
}

Vec3 Volume::voxel_to_world(const Vec3& ijk) const
{
    return affine.topLeftCorner<3, 3>() * ijk + affine.topRightCorner<3, 1>();
}

Vec3 Volume::world_to_voxel(const Vec3& xyz) const
{
    const Mat3 a = affine.topLeftCorner<3, 3>();
    return a.partialPivLu().solve(xyz - affine.topRightCorner<3, 1>());
}

void Volume::validate() const
{
    for (int v : dims)
        if (v <= 0) throw InputError("volume dims must be positive");
    for (int k = 0; k < 3; ++k)
        if (!(voxel_size[k] > 0.0) || !std::isfinite(voxel_size[k])) throw InputError("voxel sizes must be positive");
    if (data.size() != static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]) {
        throw InputError("volume data size does not match dims");
    }
    if (!affine.allFinite()) throw InputError("affine is not finite");
    const double det = affine.topLeftCorner<3, 3>().determinant();
    if (!(std::abs(det) > 1e-12)) throw InputError("singular affine");
}

RigidTransform RigidTransform::inverse() const
{
    RigidTransform out;
    out.rotation = rotation.transpose();
    out.translation = -(out.rotation * translation);
    return out;
}

RigidTransform operator*(const RigidTransform& a, const RigidTransform& b)
{
    RigidTransform out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

Mat4 RigidTransform::matrix() const
{
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
}

RigidTransform RigidTransform::from_matrix(const Mat4& m)
{
    if (!m.allFinite()) throw InputError("transform is not finite");
    if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).norm() > 1e-9) throw InputError("transform is not affine");
    RigidTransform t;
    t.rotation = m.topLeftCorner<3, 3>();
    t.translation = m.topRightCorner<3, 1>();
    if ((t.rotation.transpose() * t.rotation - Mat3::Identity()).norm() > 1e-6 || t.rotation.determinant() < 0.0) {
        throw InputError("transform is not a proper rotation");
    }
    return t;
}

Plane::Plane(const Vec3& n, double d)
{
    const double len = n.norm();
    if (!(len > 0.0) || !std::isfinite(len) || !std::isfinite(d)) throw InputError("plane normal must be non-zero");
    normal = n / len;
    offset = d / len;
}

Plane Plane::transformed(const RigidTransform& t) const
{
    Plane p;
    p.normal = (t.rotation * normal).normalized();
    p.offset = offset + p.normal.dot(t.translation);
    return p;
}

namespace {

// Unit vector along world +z projected into the plane (+y if the plane is axial).
Vec3 in_plane_up(const Vec3& n)
{
    Vec3 up = Vec3::UnitZ() - n.z() * n;
    if (up.norm() < 1e-6) up = Vec3::UnitY() - n.y() * n;
    return up.normalized();
}

} // namespace

RigidTransform Plane::to_transform() const
{
    const Vec3 ev = in_plane_up(normal);
    const Vec3 eu = ev.cross(normal);
    RigidTransform t;
    t.rotation.col(0) = normal;
    t.rotation.col(1) = eu;
    t.rotation.col(2) = ev;
    t.translation = origin();
    return t;
}

Plane Plane::from_transform(const RigidTransform& t)
{
    const Vec3 n = t.rotation.col(0).normalized();
    return Plane(n, n.dot(t.translation));
}

void Landmarks::validate() const
{
    if (!ac.allFinite() || !pc.allFinite()) throw InputError("landmarks are not finite");
    if (!((ac - pc).norm() > 0.0)) throw InputError("AC and PC coincide");
}

namespace {

std::map<int, std::pair<Vec3, std::size_t>> label_sums(const Volume& vol, const char* name)
{
    std::map<int, std::pair<Vec3, std::size_t>> sums;
    for (int k = 0; k < vol.dims[2]; ++k) {
        for (int j = 0; j < vol.dims[1]; ++j) {
            for (int i = 0; i < vol.dims[0]; ++i) {
                const double v = vol.at(i, j, k);
                if (v == 0.0) continue;
                if (v < 0.0 || v != std::floor(v)) {
                    throw InputError(std::string(name) + " is not a label volume");
                }
                auto& s = sums.try_emplace(static_cast<int>(v), Vec3::Zero(), 0).first->second;
                s.first += Vec3(i, j, k);
                s.second += 1;
            }
        }
    }
    return sums;
}

} // namespace

std::vector<LabelCorrespondence> label_centroids(const Volume& a, const Volume& b, std::span<const int> labels)
{
    const auto sa = label_sums(a, "first volume");
    const auto sb = label_sums(b, "second volume");
    std::vector<LabelCorrespondence> out;
    for (const auto& [label, sum] : sa) {
        if (!labels.empty() && std::find(labels.begin(), labels.end(), label) == labels.end()) continue;
        const auto it = sb.find(label);
        if (it == sb.end()) continue;
        LabelCorrespondence c;
        c.label = label;
        c.first = a.voxel_to_world(sum.first / static_cast<double>(sum.second));
        c.second = b.voxel_to_world(it->second.first / static_cast<double>(it->second.second));
        out.push_back(c);
    }
    if (out.size() < 3) {
        throw InputError("insufficient correspondences: " + std::to_string(out.size()) + " shared labels");
    }
    return out;
}

RigidTransform kabsch_rigid(std::span<const Vec3> src, std::span<const Vec3> dst)
{
    if (src.size() != dst.size()) throw InputError("point lists differ in length");
    if (src.size() < 3) throw NumericError("degenerate configuration: fewer than 3 points");
    Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        cs += src[i];
        cd += dst[i];
    }
    cs /= static_cast<double>(src.size());
    cd /= static_cast<double>(dst.size());
    Mat3 h = Mat3::Zero();
    Mat3 spread = Mat3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const Vec3 a = src[i] - cs;
        h += a * (dst[i] - cd).transpose();
        spread += a * a.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> es(spread);
    const auto ev = es.eigenvalues();
    if (!(ev[1] > 1e-12 * std::max(ev[2], 1e-300))) {
        throw NumericError("degenerate configuration: points are collinear or coincident");
    }
    const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Mat3 u = svd.matrixU();
    const Mat3 v = svd.matrixV();
    Mat3 d = Mat3::Identity();
    d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    RigidTransform t;
    t.rotation = v * d * u.transpose();
    t.translation = cd - t.rotation * cs;
    return t;
}

PlaneEstimate midsagittal_plane(const Volume& subject, const Volume& templ, const Plane& template_plane,
                                std::span<const int> labels)
{
    const auto corr = label_centroids(subject, templ, labels);
    std::vector<Vec3> src, dst;
    for (const auto& c : corr) {
        src.push_back(c.first);
        dst.push_back(c.second);
    }
    PlaneEstimate est;
    est.to_template = kabsch_rigid(src, dst);
    est.plane = template_plane.transformed(est.to_template.inverse());
    est.correspondences = corr.size();
    return est;
}

int slab_slice_count(double width_mm, double spacing_mm)
{
    if (!(width_mm > 0.0) || !(spacing_mm > 0.0)) throw InputError("slab width and spacing must be positive");
    int n = static_cast<int>(std::ceil(width_mm / spacing_mm - 1e-9));
    if (n % 2 == 0) ++n;
    return n;
}

namespace {

double snap(double q)
{
    const double r = std::round(q);
    return std::abs(q - r) <= 1e-9 ? r : q;
}

double sample_linear(const Volume& vol, Vec3 q)
{
    std::array<int, 3> lo{};
    std::array<double, 3> w{};
    for (int a = 0; a < 3; ++a) {
        const double c = snap(q[a]);
        if (c < 0.0 || c > vol.dims[a] - 1) return 0.0;
        lo[a] = std::min(static_cast<int>(std::floor(c)), std::max(vol.dims[a] - 2, 0));
        w[a] = c - lo[a];
    }
    double acc = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
        double weight = 1.0;
        std::array<int, 3> idx{};
        for (int a = 0; a < 3; ++a) {
            const int bit = (corner >> a) & 1;
            weight *= bit ? w[a] : 1.0 - w[a];
            idx[a] = lo[a] + bit;
        }
        if (weight == 0.0) continue;
        acc += weight * vol.at(idx[0], idx[1], idx[2]);
    }
    return acc;
}

double sample_nearest(const Volume& vol, const Vec3& q)
{
    std::array<int, 3> idx{};
    for (int a = 0; a < 3; ++a) {
        const double c = std::round(q[a]);
        if (c < 0.0 || c > vol.dims[a] - 1) return 0.0;
        idx[a] = static_cast<int>(c);
    }
    return vol.at(idx[0], idx[1], idx[2]);
}

} // namespace

Volume resample_slab(const Volume& vol, const Plane& plane, double width_mm, double spacing_mm, Interpolation interp)
{
    vol.validate();
    const int n = slab_slice_count(width_mm, spacing_mm);
    const Vec3 normal = plane.normal;
    const Vec3 ev = in_plane_up(normal);
    const Vec3 eu = ev.cross(normal);
    const Vec3 p0 = plane.origin();

    bool below = false, above = false;
    double umin = INFINITY, umax = -INFINITY, vmin = INFINITY, vmax = -INFINITY;
    for (int c = 0; c < 8; ++c) {
        const Vec3 ijk((c & 1) ? vol.dims[0] - 1 : 0, (c & 2) ? vol.dims[1] - 1 : 0, (c & 4) ? vol.dims[2] - 1 : 0);
        const Vec3 w = vol.voxel_to_world(ijk);
        const double s = plane.signed_distance(w);
        below |= s <= 0.0;
        above |= s >= 0.0;
        umin = std::min(umin, (w - p0).dot(eu));
        umax = std::max(umax, (w - p0).dot(eu));
        vmin = std::min(vmin, (w - p0).dot(ev));
        vmax = std::max(vmax, (w - p0).dot(ev));
    }
    if (!(below && above)) throw InputError("plane misses volume");

    const Vec3 w0 = vol.voxel_to_world(Vec3::Zero());
    const double uref = (w0 - p0).dot(eu);
    const double vref = (w0 - p0).dot(ev);
    const double u0 = uref + std::floor((umin - uref) / spacing_mm + 1e-9) * spacing_mm;
    const double v0 = vref + std::floor((vmin - vref) / spacing_mm + 1e-9) * spacing_mm;
    const int nu = static_cast<int>(std::floor((umax - u0) / spacing_mm + 1e-9)) + 1;
    const int nv = static_cast<int>(std::floor((vmax - v0) / spacing_mm + 1e-9)) + 1;

    const bool nearest = interp == Interpolation::nearest || (interp == Interpolation::automatic && vol.is_label());
    Volume out({n, nu, nv}, nearest ? vol.datatype : DataType::float32);
    out.voxel_size = Vec3::Constant(spacing_mm);
    out.affine.setIdentity();
    out.affine.block<3, 1>(0, 0) = spacing_mm * normal;
    out.affine.block<3, 1>(0, 1) = spacing_mm * eu;
    out.affine.block<3, 1>(0, 2) = spacing_mm * ev;
    out.affine.block<3, 1>(0, 3) = p0 - 0.5 * (n - 1) * spacing_mm * normal + u0 * eu + v0 * ev;

    const Mat3 inv = vol.affine.topLeftCorner<3, 3>().inverse();
    const Vec3 shift = vol.affine.topRightCorner<3, 1>();
    for (int k = 0; k < nv; ++k) {
        for (int j = 0; j < nu; ++j) {
            for (int i = 0; i < n; ++i) {
                const Vec3 world = out.voxel_to_world(Vec3(i, j, k));
                const Vec3 q = inv * (world - shift);
                out.at(i, j, k) = nearest ? sample_nearest(vol, q) : sample_linear(vol, q);
            }
        }
    }
    return out;
}

RigidTransform acpc_standardize(const Landmarks& lm, const Vec3& cc_centroid)
{
    lm.validate();
    const Vec3 ey = (lm.ac - lm.pc).normalized();
    Vec3 ez = cc_centroid - lm.ac;
    ez -= ez.dot(ey) * ey;
    if (!(ez.norm() > 1e-9 * std::max(1.0, (lm.ac - lm.pc).norm()))) {
        throw InputError("cannot fix roll: CC centroid lies on the AC-PC line");
    }
    ez.normalize();
    const Vec3 ex = ey.cross(ez);
    RigidTransform t;
    t.rotation.row(0) = ex;
    t.rotation.row(1) = ey;
    t.rotation.row(2) = ez;
    t.translation = -(t.rotation * lm.ac);
    return t;
}

namespace {

// Integral of |p + q r| r dr over [r0, r1].
double abs_linear_moment(double p, double q, double r0, double r1)
{
    auto moment = [&](double a, double b) {
        return p * (b * b - a * a) / 2.0 + q * (b * b * b - a * a * a) / 3.0;
    };
    if (q != 0.0) {
        const double root = -p / q;
        if (root > r0 && root < r1) return std::abs(moment(r0, root)) + std::abs(moment(root, r1));
    }
    return std::abs(moment(r0, r1));
}

} // namespace

double plane_disagreement(const Plane& p1, const Plane& p2, double radius_mm, double height_mm)
{
    if (!(radius_mm > 0.0) || !(height_mm > 0.0)) throw InputError("cylinder radius and height must be positive");
    Vec3 n1 = p1.normal;
    double d1 = p1.offset;
    Vec3 n2 = p2.normal;
    double d2 = p2.offset;
    if (n1.dot(n2) < 0.0) {
        n2 = -n2;
        d2 = -d2;
    }
    const Vec3 sum = n1 + n2;
    if (!(sum.norm() > 1e-12)) throw InputError("ambiguous orientation: opposite plane normals");
    const Vec3 axis = sum.normalized();
    const Vec3 b1 = (std::abs(axis.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).cross(axis).normalized();
    const Vec3 b2 = axis.cross(b1);
    const double half = 0.5 * height_mm;
    const double a1 = n1.dot(axis);
    const double a2 = n2.dot(axis);

    constexpr int kAngles = 4096;
    double total = 0.0;
    for (int s = 0; s < kAngles; ++s) {
        const double theta = 2.0 * std::numbers::pi * (s + 0.5) / kAngles;
        const Vec3 dir = std::cos(theta) * b1 + std::sin(theta) * b2;
        // Height of each plane above the disc along this ray: h(r) = c + m r.
        const double c1 = d1 / a1, m1 = -n1.dot(dir) / a1;
        const double c2 = d2 / a2, m2 = -n2.dot(dir) / a2;
        std::vector<double> breaks = {0.0, radius_mm};
        for (double lim : {-half, half}) {
            if (m1 != 0.0) breaks.push_back((lim - c1) / m1);
            if (m2 != 0.0) breaks.push_back((lim - c2) / m2);
        }
        std::sort(breaks.begin(), breaks.end());
        double acc = 0.0;
        for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
            const double r0 = std::max(breaks[k], 0.0);
            const double r1 = std::min(breaks[k + 1], radius_mm);
            if (!(r1 > r0)) continue;
            const double rm = 0.5 * (r0 + r1);
            // Within a piece each clipped height is either linear or constant.
            auto piece = [&](double c, double m, double& p, double& q) {
                const double h = c + m * rm;
                if (h > half) { p = half; q = 0.0; }
                else if (h < -half) { p = -half; q = 0.0; }
                else { p = c; q = m; }
            };
            double pa, qa, pb, qb;
            piece(c1, m1, pa, qa);
            piece(c2, m2, pb, qb);
            acc += abs_linear_moment(pa - pb, qa - qb, r0, r1);
        }
        total += acc;
    }
    return total * 2.0 * std::numbers::pi / kAngles;
}

} // namespace ccm
