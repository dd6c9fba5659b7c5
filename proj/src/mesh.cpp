#include <ccm/error.hpp>
#include <ccm/mesh.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>

namespace ccm {

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

} // namespace

double Polyline::length() const
{
    if (points.size() < 2) return 0.0;
    double len = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) len += (points[i] - points[i - 1]).norm();
    if (closed) len += (points.front() - points.back()).norm();
    return len;
}

double Polyline::signed_area() const
{
    double a = 0.0;
    const std::size_t n = points.size();
    for (std::size_t i = 0; i < n; ++i) a += cross(points[i], points[(i + 1) % n]);
    return 0.5 * a;
}

std::vector<double> Polyline::arc_lengths() const
{
    std::vector<double> s(points.size(), 0.0);
    for (std::size_t i = 1; i < points.size(); ++i) s[i] = s[i - 1] + (points[i] - points[i - 1]).norm();
    return s;
}

double TriMesh2D::triangle_area(std::size_t t) const
{
    const auto& tri = triangles[t];
    const Vec2& a = vertices[tri[0]];
    return 0.5 * cross(vertices[tri[1]] - a, vertices[tri[2]] - a);
}

Vec2 TriMesh2D::triangle_centroid(std::size_t t) const
{
    const auto& tri = triangles[t];
    return (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
}

double TriMesh2D::area() const
{
    double a = 0.0;
    for (std::size_t t = 0; t < triangles.size(); ++t) a += triangle_area(t);
    return a;
}

Polyline TriMesh2D::boundary_polyline() const
{
    Polyline p;
    p.closed = true;
    p.points.reserve(boundary_loop.size());
    for (int v : boundary_loop) p.points.push_back(vertices[v]);
    return p;
}

void TriMesh2D::validate() const
{
    const int nv = static_cast<int>(vertices.size());
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        for (int v : triangles[t]) {
            if (v < 0 || v >= nv) throw Error("triangle " + std::to_string(t) + " has out-of-range vertex");
        }
        if (!(triangle_area(t) > 0.0)) {
            throw Error("triangle " + std::to_string(t) + " is degenerate or clockwise");
        }
    }
    if (boundary.size() != vertices.size()) throw Error("boundary flag count mismatch");
    if (boundary_loop.size() < 3) throw Error("boundary loop has fewer than 3 vertices");
    const auto flagged = std::count(boundary.begin(), boundary.end(), std::uint8_t{1});
    if (static_cast<std::size_t>(flagged) != boundary_loop.size()) {
        throw Error("boundary vertices do not form a single closed loop");
    }
}

double min_angle_deg(const TriMesh2D& mesh, std::size_t t)
{
    const auto& tri = mesh.triangles[t];
    double best = 180.0;
    for (int k = 0; k < 3; ++k) {
        const Vec2& p = mesh.vertices[tri[k]];
        const Vec2 u = mesh.vertices[tri[(k + 1) % 3]] - p;
        const Vec2 w = mesh.vertices[tri[(k + 2) % 3]] - p;
        const double ang = std::atan2(std::abs(cross(u, w)), u.dot(w));
        best = std::min(best, ang * 180.0 / std::numbers::pi);
    }
    return best;
}

void rebuild_boundary(TriMesh2D& mesh)
{
    // Directed half-edges with no twin are boundary edges.
    std::map<std::pair<int, int>, int> half;
    for (const auto& tri : mesh.triangles) {
        for (int k = 0; k < 3; ++k) half[{tri[k], tri[(k + 1) % 3]}] += 1;
    }
    std::map<int, int> next;
    for (const auto& [e, count] : half) {
        if (!half.contains({e.second, e.first})) {
            if (next.contains(e.first)) throw Error("boundary is not a simple loop (non-manifold vertex)");
            next[e.first] = e.second;
        }
    }
    mesh.boundary.assign(mesh.vertices.size(), 0);
    mesh.boundary_loop.clear();
    if (next.empty()) return;
    const int start = next.begin()->first;
    int v = start;
    do {
        mesh.boundary_loop.push_back(v);
        mesh.boundary[v] = 1;
        auto it = next.find(v);
        if (it == next.end()) throw Error("boundary loop is open");
        v = it->second;
        if (mesh.boundary_loop.size() > next.size()) throw Error("boundary loop does not close");
    } while (v != start);
    if (mesh.boundary_loop.size() != next.size()) throw Error("mesh boundary has more than one loop");
}

TriangleLocator::TriangleLocator(const TriMesh2D& mesh) : mesh_(&mesh)
{
    if (mesh.vertices.empty() || mesh.triangles.empty()) return;
    Vec2 lo = mesh.vertices.front();
    Vec2 hi = lo;
    for (const auto& v : mesh.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    const Vec2 ext = (hi - lo).cwiseMax(Vec2(1e-9, 1e-9));
    const double target = std::sqrt(static_cast<double>(mesh.triangles.size()));
    cell_ = std::max(ext.x(), ext.y()) / std::max(1.0, target);
    nx_ = std::max(1, static_cast<int>(std::ceil(ext.x() / cell_)));
    ny_ = std::max(1, static_cast<int>(std::ceil(ext.y() / cell_)));
    lo_ = lo;
    cells_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        Vec2 tlo = mesh.vertices[mesh.triangles[t][0]];
        Vec2 thi = tlo;
        for (int k = 1; k < 3; ++k) {
            tlo = tlo.cwiseMin(mesh.vertices[mesh.triangles[t][k]]);
            thi = thi.cwiseMax(mesh.vertices[mesh.triangles[t][k]]);
        }
        const int i0 = std::clamp(static_cast<int>((tlo.x() - lo_.x()) / cell_), 0, nx_ - 1);
        const int i1 = std::clamp(static_cast<int>((thi.x() - lo_.x()) / cell_), 0, nx_ - 1);
        const int j0 = std::clamp(static_cast<int>((tlo.y() - lo_.y()) / cell_), 0, ny_ - 1);
        const int j1 = std::clamp(static_cast<int>((thi.y() - lo_.y()) / cell_), 0, ny_ - 1);
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) cells_[static_cast<std::size_t>(j) * nx_ + i].push_back(static_cast<int>(t));
    }
}

Eigen::Vector3d TriangleLocator::barycentric(int t, const Vec2& p) const
{
    const auto& tri = mesh_->triangles[t];
    const Vec2& a = mesh_->vertices[tri[0]];
    const Vec2& b = mesh_->vertices[tri[1]];
    const Vec2& c = mesh_->vertices[tri[2]];
    const double det = cross(b - a, c - a);
    const double l1 = cross(p - a, c - a) / det;
    const double l2 = cross(b - a, p - a) / det;
    return {1.0 - l1 - l2, l1, l2};
}

int TriangleLocator::locate(const Vec2& p) const
{
    if (cells_.empty()) return -1;
    const int i = static_cast<int>(std::floor((p.x() - lo_.x()) / cell_));
    const int j = static_cast<int>(std::floor((p.y() - lo_.y()) / cell_));
    if (i < -1 || j < -1 || i > nx_ || j > ny_) return -1;
    const int ci = std::clamp(i, 0, nx_ - 1);
    const int cj = std::clamp(j, 0, ny_ - 1);
    int best = -1;
    double best_min = -std::numeric_limits<double>::infinity();
    for (int t : cells_[static_cast<std::size_t>(cj) * nx_ + ci]) {
        const Eigen::Vector3d l = barycentric(t, p);
        const double m = l.minCoeff();
        if (m > best_min) {
            best_min = m;
            best = t;
        }
    }
    return best_min >= -1e-9 ? best : -1;
}

int TriangleLocator::nearest_triangle(const Vec2& p) const
{
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < mesh_->triangles.size(); ++t) {
        const double d = (mesh_->triangle_centroid(t) - p).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(t);
        }
    }
    return best;
}

double TriangleLocator::interpolate(const std::vector<double>& values, const Vec2& p) const
{
    int t = locate(p);
    if (t < 0) t = nearest_triangle(p);
    if (t < 0) throw Error("cannot interpolate on an empty mesh");
    Eigen::Vector3d l = barycentric(t, p).cwiseMax(0.0);
    l /= l.sum();
    const auto& tri = mesh_->triangles[t];
    return l[0] * values[tri[0]] + l[1] * values[tri[1]] + l[2] * values[tri[2]];
}

} // namespace ccm
