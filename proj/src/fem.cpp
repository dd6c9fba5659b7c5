#include <ccm/error.hpp>
#include <ccm/fem.hpp>

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

namespace ccm {

namespace {

Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

// Gradients of the three hat functions on triangle t (constant per triangle).
std::array<Vec2, 3> hat_gradients(const TriMesh2D& mesh, std::size_t t, double& area)
{
    const auto& tri = mesh.triangles[t];
    area = mesh.triangle_area(t);
    if (!(area > 0.0)) throw NumericError("degenerate triangle " + std::to_string(t));
    std::array<Vec2, 3> g;
    for (int i = 0; i < 3; ++i) {
        const Vec2& a = mesh.vertices[tri[(i + 1) % 3]];
        const Vec2& b = mesh.vertices[tri[(i + 2) % 3]];
        g[i] = perp(b - a) / (2.0 * area);
    }
    return g;
}

std::uint64_t edge_key(int a, int b)
{
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

std::vector<std::vector<int>> vertex_adjacency(const TriMesh2D& mesh)
{
    std::vector<std::vector<int>> adj(mesh.num_vertices());
    for (const auto& tri : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            adj[tri[k]].push_back(tri[(k + 1) % 3]);
            adj[tri[k]].push_back(tri[(k + 2) % 3]);
        }
    }
    return adj;
}

// Solves W x = rhs with x fixed on the given vertices.
ScalarField solve_constrained(const TriMesh2D& mesh, const SparseMatrix& W, std::span<const double> rhs,
                              std::span<const FixedValue> fixed)
{
    const int n = static_cast<int>(mesh.num_vertices());
    if (fixed.empty()) throw InputError("at least one fixed vertex is required");
    std::vector<int> slot(n, -1);
    ScalarField x(n, 0.0);
    std::vector<char> is_fixed(n, 0);
    for (const auto& fv : fixed) {
        if (fv.vertex < 0 || fv.vertex >= n) throw InputError("fixed vertex index out of range");
        if (!std::isfinite(fv.value)) throw InputError("fixed value is not finite");
        is_fixed[fv.vertex] = 1;
        x[fv.vertex] = fv.value;
    }

    // Every free vertex must reach a fixed one, otherwise the reduced system is singular.
    const auto adj = vertex_adjacency(mesh);
    std::vector<char> seen(is_fixed);
    std::vector<int> stack;
    for (int v = 0; v < n; ++v)
        if (is_fixed[v]) stack.push_back(v);
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int w : adj[v]) {
            if (!seen[w]) {
                seen[w] = 1;
                stack.push_back(w);
            }
        }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        throw NumericError("singular reduced system: part of the mesh has no fixed vertex");
    }

    int m = 0;
    for (int v = 0; v < n; ++v)
        if (!is_fixed[v]) slot[v] = m++;
    if (m == 0) return x;

    Eigen::VectorXd b(m);
    for (int v = 0; v < n; ++v)
        if (slot[v] >= 0) b[slot[v]] = rhs.empty() ? 0.0 : rhs[v];
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(W.nonZeros());
    for (int col = 0; col < W.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(W, col); it; ++it) {
            const int r = static_cast<int>(it.row());
            const int c = static_cast<int>(it.col());
            if (slot[r] < 0) continue;
            if (slot[c] >= 0) {
                trip.emplace_back(slot[r], slot[c], it.value());
            } else {
                b[slot[r]] -= it.value() * x[c];
            }
        }
    }
    SparseMatrix A(m, m);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<SparseMatrix> solver;
    solver.compute(A);
    if (solver.info() != Eigen::Success) throw NumericError("singular reduced system");
    const Eigen::VectorXd y = solver.solve(b);
    if (solver.info() != Eigen::Success || !y.allFinite()) throw NumericError("sparse solve failed");
    for (int v = 0; v < n; ++v)
        if (slot[v] >= 0) x[v] = y[slot[v]];
    return x;
}

} // namespace

SparseMatrix stiffness_matrix(const TriMesh2D& mesh)
{
    const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh.num_triangles() * 9);
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        double area = 0.0;
        const auto g = hat_gradients(mesh, t, area);
        const auto& tri = mesh.triangles[t];
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                if (i == j) continue;
                trip.emplace_back(tri[i], tri[j], area * g[i].dot(g[j]));
            }
        }
    }
    SparseMatrix W(n, n);
    W.setFromTriplets(trip.begin(), trip.end());
    // Diagonal from the off-diagonal row sums keeps W * 1 == 0 to rounding.
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    for (int col = 0; col < W.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(W, col); it; ++it) diag[it.row()] -= it.value();
    std::vector<Eigen::Triplet<double>> full;
    full.reserve(W.nonZeros() + n);
    for (int col = 0; col < W.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(W, col); it; ++it) full.emplace_back(it.row(), it.col(), it.value());
    for (Eigen::Index i = 0; i < n; ++i) full.emplace_back(i, i, diag[i]);
    W.setFromTriplets(full.begin(), full.end());
    W.makeCompressed();
    return W;
}

ScalarField solve_dirichlet(const TriMesh2D& mesh, std::span<const FixedValue> fixed)
{
    const SparseMatrix W = stiffness_matrix(mesh);
    return solve_constrained(mesh, W, {}, fixed);
}

TriVectorField gradient(const TriMesh2D& mesh, const ScalarField& field)
{
    if (field.size() != mesh.num_vertices()) throw InputError("field size does not match vertex count");
    TriVectorField out(mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        double area = 0.0;
        const auto g = hat_gradients(mesh, t, area);
        const auto& tri = mesh.triangles[t];
        out[t] = field[tri[0]] * g[0] + field[tri[1]] * g[1] + field[tri[2]] * g[2];
    }
    return out;
}

TriVectorField rotate90(const TriVectorField& field)
{
    TriVectorField out(field.size());
    std::transform(field.begin(), field.end(), out.begin(), [](const Vec2& v) { return perp(v); });
    return out;
}

std::vector<double> divergence(const TriMesh2D& mesh, const TriVectorField& field)
{
    if (field.size() != mesh.num_triangles()) throw InputError("vector field size does not match triangle count");
    std::vector<double> div(mesh.num_vertices(), 0.0);
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        double area = 0.0;
        const auto g = hat_gradients(mesh, t, area);
        const auto& tri = mesh.triangles[t];
        for (int i = 0; i < 3; ++i) div[tri[i]] += area * g[i].dot(field[t]);
    }
    return div;
}

ScalarField solve_poisson(const TriMesh2D& mesh, std::span<const double> rhs, FixedValue anchor)
{
    if (rhs.size() != mesh.num_vertices()) throw InputError("right-hand side size does not match vertex count");
    const SparseMatrix W = stiffness_matrix(mesh);
    const FixedValue fixed[] = {anchor};
    return solve_constrained(mesh, W, rhs, fixed);
}

std::vector<LevelPath> trace_level_set(const TriMesh2D& mesh, const ScalarField& field, double value)
{
    if (field.size() != mesh.num_vertices()) throw InputError("field size does not match vertex count");
    constexpr double kSnap = 1e-12;
    auto val = [&](int v) {
        const double f = field[v];
        return std::abs(f - value) <= kSnap ? value + kSnap : f;
    };

    struct EdgePoint {
        Vec2 pos;
        int a, b;
    };
    std::unordered_map<std::uint64_t, EdgePoint> points;
    std::unordered_map<std::uint64_t, std::uint64_t> next;
    std::unordered_map<std::uint64_t, int> incoming;
    for (const auto& tri : mesh.triangles) {
        std::array<bool, 3> high{};
        for (int k = 0; k < 3; ++k) high[k] = val(tri[k]) > value;
        if (high[0] == high[1] && high[1] == high[2]) continue;
        std::uint64_t exit_key = 0, enter_key = 0;
        for (int k = 0; k < 3; ++k) {
            const int a = tri[k];
            const int b = tri[(k + 1) % 3];
            if (high[k] == high[(k + 1) % 3]) continue;
            const std::uint64_t key = edge_key(a, b);
            if (!points.contains(key)) {
                const double fa = val(a);
                const double fb = val(b);
                const double s = (value - fa) / (fb - fa);
                points.emplace(key, EdgePoint{mesh.vertices[a] + s * (mesh.vertices[b] - mesh.vertices[a]), a, b});
            }
            (high[k] ? exit_key : enter_key) = key;
        }
        next[exit_key] = enter_key;
        incoming[enter_key] += 1;
    }

    std::vector<std::uint64_t> keys;
    keys.reserve(points.size());
    for (const auto& kv : points) keys.push_back(kv.first);
    std::sort(keys.begin(), keys.end());

    std::vector<LevelPath> paths;
    std::unordered_map<std::uint64_t, bool> used;
    auto walk = [&](std::uint64_t start, bool closed) {
        LevelPath path;
        path.line.closed = closed;
        std::uint64_t k = start;
        const auto& first = points.at(k);
        path.end_edges[0] = {first.a, first.b};
        while (true) {
            used[k] = true;
            path.line.points.push_back(points.at(k).pos);
            auto it = next.find(k);
            if (it == next.end()) {
                const auto& last = points.at(k);
                path.end_edges[1] = {last.a, last.b};
                break;
            }
            k = it->second;
            if (closed && k == start) break;
        }
        if (closed) path.end_edges = {{{-1, -1}, {-1, -1}}};
        paths.push_back(std::move(path));
    };
    for (std::uint64_t k : keys) {
        if (!used[k] && !incoming.contains(k) && next.contains(k)) walk(k, false);
    }
    for (std::uint64_t k : keys) {
        if (!used[k] && next.contains(k)) walk(k, true);
    }
    return paths;
}

std::vector<Polyline> extract_level_set(const TriMesh2D& mesh, const ScalarField& field, double value)
{
    std::vector<Polyline> out;
    for (auto& p : trace_level_set(mesh, field, value)) out.push_back(std::move(p.line));
    return out;
}

} // namespace ccm
