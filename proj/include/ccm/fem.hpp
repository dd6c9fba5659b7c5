#pragma once

#include <ccm/mesh.hpp>

#include <Eigen/SparseCore>

#include <array>
#include <span>
#include <utility>
#include <vector>

namespace ccm {

/// One value per mesh vertex.
using ScalarField = std::vector<double>;
/// One vector per mesh triangle.
using TriVectorField = std::vector<Vec2>;
using SparseMatrix = Eigen::SparseMatrix<double>;

struct FixedValue {
    int vertex;
    double value;
};

/// Linear FEM stiffness (cotangent) matrix: W_ij = -(cot a_ij + cot b_ij) / 2
/// off the diagonal and W_ii = -sum_j W_ij. Symmetric positive semi-definite.
SparseMatrix stiffness_matrix(const TriMesh2D& mesh);

/// Minimizes the Dirichlet energy subject to the fixed values. Throws
/// NumericError when some vertex is not connected to any fixed vertex.
ScalarField solve_dirichlet(const TriMesh2D& mesh, std::span<const FixedValue> fixed);

/// Per-triangle gradient of the piecewise-linear interpolant.
TriVectorField gradient(const TriMesh2D& mesh, const ScalarField& field);

/// (u, v) -> (-v, u): counter-clockwise quarter turn about the +z normal.
TriVectorField rotate90(const TriVectorField& field);

/// Weak divergence: div_i = sum_t area_t * grad(phi_i) . v_t, so that
/// divergence(gradient(f)) == stiffness_matrix * f.
std::vector<double> divergence(const TriMesh2D& mesh, const TriVectorField& field);

/// Solves W g = h with one vertex pinned to remove the constant null space.
ScalarField solve_poisson(const TriMesh2D& mesh, std::span<const double> rhs, FixedValue anchor);

/// A maximal piece of a level set. Open paths end on boundary edges, which
/// are recorded as vertex pairs; closed loops have `end_edges` of -1.
struct LevelPath {
    Polyline line;
    std::array<std::pair<int, int>, 2> end_edges{{{-1, -1}, {-1, -1}}};
};

/// Marching-triangles level set with linear interpolation along edges. Paths
/// are oriented with larger field values on their left. Vertex values within
/// 1e-12 of `value` are treated as value + 1e-12.
std::vector<LevelPath> trace_level_set(const TriMesh2D& mesh, const ScalarField& field, double value);

std::vector<Polyline> extract_level_set(const TriMesh2D& mesh, const ScalarField& field, double value);

} // namespace ccm
