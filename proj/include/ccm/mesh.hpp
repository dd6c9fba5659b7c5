#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <vector>

namespace ccm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Ordered point sequence in millimetres.
struct Polyline {
    std::vector<Vec2> points;
    bool closed = false;

    std::size_t size() const { return points.size(); }

    /// Arc length, including the closing segment for closed polylines.
    double length() const;

    /// Shoelace area (positive for counter-clockwise). Only meaningful for
    /// closed polylines.
    double signed_area() const;

    /// Cumulative arc length at each vertex, starting at 0.
    std::vector<double> arc_lengths() const;
};

/// Planar triangle mesh. Triangles are counter-clockwise. `boundary_loop`
/// lists the boundary vertices in counter-clockwise order.
struct TriMesh2D {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::uint8_t> boundary;
    std::vector<int> boundary_loop;

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_triangles() const { return triangles.size(); }

    double triangle_area(std::size_t t) const;
    Vec2 triangle_centroid(std::size_t t) const;
    double area() const;

    /// Boundary loop as a closed polyline.
    Polyline boundary_polyline() const;

    /// Throws ccm::Error describing the first violated structural invariant
    /// (orientation, degeneracy, index range, boundary loop).
    void validate() const;
};

/// Smallest interior angle of triangle t in degrees.
double min_angle_deg(const TriMesh2D& mesh, std::size_t t);

/// Rebuilds boundary flags and the boundary loop from the triangle list.
/// The loop starts at the smallest boundary vertex index.
void rebuild_boundary(TriMesh2D& mesh);

/// Uniform-grid point location over the triangles of a mesh.
class TriangleLocator {
public:
    explicit TriangleLocator(const TriMesh2D& mesh);

    /// Index of a triangle containing p (with a small tolerance), or -1.
    int locate(const Vec2& p) const;

    /// Barycentric coordinates of p in triangle t.
    Eigen::Vector3d barycentric(int t, const Vec2& p) const;

    /// Linear interpolation of per-vertex values at p. Points slightly outside
    /// the mesh snap to the nearest triangle.
    double interpolate(const std::vector<double>& values, const Vec2& p) const;

private:
    const TriMesh2D* mesh_;
    Vec2 lo_;
    double cell_ = 1.0;
    int nx_ = 1;
    int ny_ = 1;
    std::vector<std::vector<int>> cells_;

    int nearest_triangle(const Vec2& p) const;
};

} // namespace ccm
