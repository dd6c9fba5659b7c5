#pragma once

#include <ccm/mesh.hpp>

#include <cstdint>
#include <vector>

namespace ccm {

/// Regular 2D grid of samples, x-fastest. Sample (i, j) sits at
/// origin + (i * pixel_size.x, j * pixel_size.y) in millimetres.
template <typename T>
struct Grid2D {
    int nx = 0;
    int ny = 0;
    Vec2 pixel_size{1.0, 1.0};
    Vec2 origin{0.0, 0.0};
    std::vector<T> data;

    Grid2D() = default;
    Grid2D(int nx_, int ny_, Vec2 pixel = {1.0, 1.0}, Vec2 org = {0.0, 0.0}, T fill = T{})
        : nx(nx_), ny(ny_), pixel_size(pixel), origin(org),
          data(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_), fill)
    {
    }

    T& at(int i, int j) { return data[static_cast<std::size_t>(j) * nx + i]; }
    const T& at(int i, int j) const { return data[static_cast<std::size_t>(j) * nx + i]; }
    Vec2 position(double i, double j) const
    {
        return origin + Vec2(i * pixel_size.x(), j * pixel_size.y());
    }
};

using Mask2D = Grid2D<std::uint8_t>;
using Field2D = Grid2D<double>;

struct MeshingOptions {
    double sigma_mm = -1.0; ///< Gaussian sigma; <= 0 means one pixel.
    double iso = 0.5;
    double max_area_mm2 = 0.25;
    double min_angle_deg = 20.0;
};

/// Separable Gaussian smoothing of a binary mask with the kernel truncated at
/// 4 sigma and reflect-padded borders. Output lies in [0, 1].
Field2D smooth_mask(const Mask2D& mask, double sigma_mm);

/// Adds `rings` rings of `value` around the field, shifting the origin so
/// sample positions are unchanged.
Field2D pad_field(const Field2D& field, int rings = 1, double value = 0.0);

/// Marching-squares iso-contour. Returns the closed contour enclosing the
/// largest area, counter-clockwise, in millimetres. Throws InputError
/// "empty contour" when the field never crosses `iso` and "contour not
/// closed" when a contour runs into the grid border.
Polyline extract_contour(const Field2D& field, double iso = 0.5);

/// Quality constrained Delaunay triangulation of a simple closed contour.
/// Every contour vertex becomes a mesh vertex (indices 0..n-1 in order) and
/// the contour edges are preserved, possibly subdivided, as the mesh
/// boundary. Interior triangles satisfy the area bound and, away from small
/// input angles, the minimum-angle bound.
TriMesh2D triangulate(const Polyline& contour, double max_area_mm2, double min_angle_deg = 20.0);

/// Throws InputError naming the first pair of intersecting segments.
void check_simple_polygon(const Polyline& contour);

/// smooth -> pad -> contour -> triangulate.
TriMesh2D mask_to_mesh(const Mask2D& mask, const MeshingOptions& options, Polyline* contour_out = nullptr);

} // namespace ccm
