#include <ccm/error.hpp>
#include <ccm/fem.hpp>
#include <ccm/mask2mesh.hpp>

#include "phantoms.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ccm;

namespace {

TriMesh2D unit_square_mesh(double max_area)
{
    return triangulate(test::rectangle_contour(1.0, 1.0, 0.05), max_area);
}

std::vector<FixedValue> fix_where(const TriMesh2D& mesh, auto&& pred, auto&& value)
{
    std::vector<FixedValue> out;
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
        if (mesh.boundary[v] && pred(mesh.vertices[v])) out.push_back({static_cast<int>(v), value(mesh.vertices[v])});
    }
    return out;
}

ScalarField random_field(std::size_t n, std::mt19937& rng)
{
    std::normal_distribution<double> g;
    ScalarField f(n);
    for (auto& x : f) x = g(rng);
    return f;
}

} // namespace

TEST(Stiffness, SymmetricZeroRowSumPositiveSemidefinite)
{
    const TriMesh2D mesh = triangulate(test::half_annulus_contour(2.0, 4.0, 0.3), 0.1);
    const SparseMatrix w = stiffness_matrix(mesh);
    const Eigen::MatrixXd dense = w;
    EXPECT_LT((dense - dense.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((dense * Eigen::VectorXd::Ones(dense.cols())).cwiseAbs().maxCoeff(), 1e-12);
    std::mt19937 rng(3);
    for (int i = 0; i < 20; ++i) {
        const auto f = random_field(mesh.num_vertices(), rng);
        const Eigen::Map<const Eigen::VectorXd> x(f.data(), static_cast<Eigen::Index>(f.size()));
        EXPECT_GE(x.dot(dense * x), -1e-10);
    }
}

TEST(Stiffness, MatchesCotangentFormulaOnRightTriangle)
{
    TriMesh2D mesh;
    mesh.vertices = {{0, 0}, {1, 0}, {0, 1}};
    mesh.triangles = {{0, 1, 2}};
    rebuild_boundary(mesh);
    const Eigen::MatrixXd w = stiffness_matrix(mesh);
    // Angle at vertex 0 is 90 degrees (cot 0), the other two are 45 (cot 1).
    EXPECT_NEAR(w(1, 2), 0.0, 1e-15);
    EXPECT_NEAR(w(0, 1), -0.5, 1e-15);
    EXPECT_NEAR(w(0, 2), -0.5, 1e-15);
    EXPECT_NEAR(w(0, 0), 1.0, 1e-15);
}

TEST(Dirichlet, UnitSquareReproducesLinearField)
{
    const TriMesh2D mesh = unit_square_mesh(0.002);
    std::vector<FixedValue> fixed = fix_where(mesh, [](const Vec2& p) { return p.x() == 0.0; }, [](const Vec2&) { return -1.0; });
    const auto right = fix_where(mesh, [](const Vec2& p) { return p.x() == 1.0; }, [](const Vec2&) { return 1.0; });
    fixed.insert(fixed.end(), right.begin(), right.end());
    const ScalarField f = solve_dirichlet(mesh, fixed);
    double err = 0.0;
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) err = std::max(err, std::abs(f[v] - (2.0 * mesh.vertices[v].x() - 1.0)));
    EXPECT_LT(err, 1e-9);
}

TEST(Dirichlet, HalfAnnulusRadialSolution)
{
    const double r_in = 2.0, r_out = 4.0;
    const TriMesh2D mesh = triangulate(test::half_annulus_contour(r_in, r_out, 0.05), 0.01);
    auto on = [](double r) { return [r](const Vec2& p) { return std::abs(p.norm() - r) < 1e-9 && p.y() >= 0.0; }; };
    auto exact = [&](const Vec2& p) { return std::log(p.norm() / r_in) / std::log(r_out / r_in); };
    auto fixed = fix_where(mesh, on(r_in), exact);
    const auto outer = fix_where(mesh, on(r_out), exact);
    fixed.insert(fixed.end(), outer.begin(), outer.end());
    const ScalarField f = solve_dirichlet(mesh, fixed);
    double err = 0.0;
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) err = std::max(err, std::abs(f[v] - exact(mesh.vertices[v])));
    EXPECT_LT(err, 2e-3);
}

TEST(Dirichlet, UnreachableVertexThrows)
{
    TriMesh2D mesh;
    mesh.vertices = {{0, 0}, {1, 0}, {0, 1}, {5, 5}, {6, 5}, {5, 6}};
    mesh.triangles = {{0, 1, 2}, {3, 4, 5}};
    const std::vector<FixedValue> fixed = {{0, 0.0}, {1, 1.0}};
    EXPECT_THROW(solve_dirichlet(mesh, fixed), NumericError);
}

TEST(Gradient, ExactForLinearFields)
{
    const TriMesh2D mesh = unit_square_mesh(0.01);
    ScalarField f(mesh.num_vertices());
    for (std::size_t v = 0; v < f.size(); ++v) f[v] = 3.0 * mesh.vertices[v].x() - 0.5 * mesh.vertices[v].y() + 7.0;
    for (const auto& g : gradient(mesh, f)) {
        EXPECT_NEAR(g.x(), 3.0, 1e-10);
        EXPECT_NEAR(g.y(), -0.5, 1e-10);
    }
    const auto r = rotate90(gradient(mesh, f));
    for (const auto& g : r) {
        EXPECT_NEAR(g.x(), 0.5, 1e-10);
        EXPECT_NEAR(g.y(), 3.0, 1e-10);
    }
}

TEST(Divergence, OfGradientEqualsStiffnessTimesField)
{
    const TriMesh2D mesh = triangulate(test::disc_contour(3.0, 48), 0.2);
    const SparseMatrix w = stiffness_matrix(mesh);
    std::mt19937 rng(11);
    for (int i = 0; i < 20; ++i) {
        const auto f = random_field(mesh.num_vertices(), rng);
        const auto div = divergence(mesh, gradient(mesh, f));
        const Eigen::Map<const Eigen::VectorXd> x(f.data(), static_cast<Eigen::Index>(f.size()));
        const Eigen::VectorXd wf = w * x;
        for (std::size_t v = 0; v < f.size(); ++v) EXPECT_NEAR(div[v], wf(static_cast<Eigen::Index>(v)), 1e-10);
    }
}

TEST(Divergence, RotatedGradientIsDivergenceFreeInside)
{
    const TriMesh2D mesh = triangulate(test::disc_contour(3.0, 48), 0.2);
    std::mt19937 rng(5);
    const auto f = random_field(mesh.num_vertices(), rng);
    const auto div = divergence(mesh, rotate90(gradient(mesh, f)));
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
        if (!mesh.boundary[v]) EXPECT_NEAR(div[v], 0.0, 1e-10);
    }
}

TEST(Poisson, SatisfiesSystemAndAnchor)
{
    const TriMesh2D mesh = triangulate(test::disc_contour(2.0, 40), 0.1);
    std::mt19937 rng(9);
    auto h = random_field(mesh.num_vertices(), rng);
    double mean = 0.0;
    for (double x : h) mean += x / static_cast<double>(h.size());
    for (double& x : h) x -= mean;
    const ScalarField g = solve_poisson(mesh, h, {0, 2.5});
    EXPECT_DOUBLE_EQ(g[0], 2.5);
    const Eigen::Map<const Eigen::VectorXd> x(g.data(), static_cast<Eigen::Index>(g.size()));
    const Eigen::VectorXd r = stiffness_matrix(mesh) * x;
    for (std::size_t v = 1; v < g.size(); ++v) EXPECT_NEAR(r(static_cast<Eigen::Index>(v)), h[v], 1e-9);
}

TEST(LevelSet, StraightLineOnLinearField)
{
    const TriMesh2D mesh = unit_square_mesh(0.01);
    ScalarField f(mesh.num_vertices());
    for (std::size_t v = 0; v < f.size(); ++v) f[v] = mesh.vertices[v].x();
    const auto paths = trace_level_set(mesh, f, 0.3);
    ASSERT_EQ(paths.size(), 1u);
    const auto& line = paths[0].line;
    EXPECT_FALSE(line.closed);
    for (const auto& p : line.points) EXPECT_NEAR(p.x(), 0.3, 1e-12);
    EXPECT_NEAR(line.length(), 1.0, 1e-12);
    // Larger values (x > 0.3) on the left means the path runs downwards.
    EXPECT_GT(line.points.front().y(), line.points.back().y());
    EXPECT_GE(paths[0].end_edges[0].first, 0);
    EXPECT_GE(paths[0].end_edges[1].first, 0);
}

TEST(LevelSet, ClosedCircleOnRadialField)
{
    const TriMesh2D mesh = triangulate(test::disc_contour(3.0, 96), 0.01);
    ScalarField f(mesh.num_vertices());
    for (std::size_t v = 0; v < f.size(); ++v) f[v] = mesh.vertices[v].squaredNorm();
    const auto lines = extract_level_set(mesh, f, 4.0);
    ASSERT_EQ(lines.size(), 1u);
    EXPECT_TRUE(lines[0].closed);
    EXPECT_NEAR(lines[0].length(), 4.0 * std::numbers::pi, 0.01);
    EXPECT_TRUE(extract_level_set(mesh, f, 100.0).empty());
}
