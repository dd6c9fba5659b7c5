#include <ccm/error.hpp>
#include <ccm/mask2mesh.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace ccm {

namespace {

// scipy.ndimage "reflect" boundary: (d c b a | a b c d | d c b a)
int reflect_index(int i, int n)
{
    if (n == 1) return 0;
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

std::vector<double> gaussian_kernel(double sigma_px)
{
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma_px)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * (i * i) / (sigma_px * sigma_px));
        k[i + radius] = w;
        sum += w;
    }
    for (double& w : k) w /= sum;
    return k;
}

} // namespace

Field2D smooth_mask(const Mask2D& mask, double sigma_mm)
{
    if (!(sigma_mm > 0.0)) throw InputError("sigma must be positive");
    if (mask.nx <= 0 || mask.ny <= 0) throw InputError("mask is empty");
    const auto kx = gaussian_kernel(sigma_mm / mask.pixel_size.x());
    const auto ky = gaussian_kernel(sigma_mm / mask.pixel_size.y());
    const int rx = static_cast<int>(kx.size() / 2);
    const int ry = static_cast<int>(ky.size() / 2);

    Field2D tmp(mask.nx, mask.ny, mask.pixel_size, mask.origin);
    for (int j = 0; j < mask.ny; ++j) {
        for (int i = 0; i < mask.nx; ++i) {
            double acc = 0.0;
            for (int k = -rx; k <= rx; ++k) acc += kx[k + rx] * (mask.at(reflect_index(i + k, mask.nx), j) != 0);
            tmp.at(i, j) = acc;
        }
    }
    Field2D out(mask.nx, mask.ny, mask.pixel_size, mask.origin);
    for (int j = 0; j < mask.ny; ++j) {
        for (int i = 0; i < mask.nx; ++i) {
            double acc = 0.0;
            for (int k = -ry; k <= ry; ++k) acc += ky[k + ry] * tmp.at(i, reflect_index(j + k, mask.ny));
            out.at(i, j) = std::clamp(acc, 0.0, 1.0);
        }
    }
    return out;
}

Field2D pad_field(const Field2D& field, int rings, double value)
{
    const Vec2 shift(rings * field.pixel_size.x(), rings * field.pixel_size.y());
    Field2D out(field.nx + 2 * rings, field.ny + 2 * rings, field.pixel_size, field.origin - shift, value);
    for (int j = 0; j < field.ny; ++j)
        for (int i = 0; i < field.nx; ++i) out.at(i + rings, j + rings) = field.at(i, j);
    return out;
}

Polyline extract_contour(const Field2D& field, double iso)
{
    const int nx = field.nx;
    const int ny = field.ny;
    if (nx < 2 || ny < 2) throw InputError("empty contour: field smaller than one cell");

    auto high = [&](int i, int j) { return field.at(i, j) >= iso; };
    // Crossing points keyed by grid edge: 2 * (j * nx + i) + {0: +x edge, 1: +y edge}.
    auto hkey = [&](int i, int j) { return 2 * (static_cast<long long>(j) * nx + i); };
    auto vkey = [&](int i, int j) { return 2 * (static_cast<long long>(j) * nx + i) + 1; };
    std::unordered_map<long long, Vec2> point;
    auto crossing = [&](long long key, int i0, int j0, int i1, int j1) {
        if (!point.contains(key)) {
            const double a = field.at(i0, j0);
            const double b = field.at(i1, j1);
            const double t = (iso - a) / (b - a);
            point.emplace(key, field.position(i0 + t * (i1 - i0), j0 + t * (j1 - j0)));
        }
        return key;
    };

    std::unordered_map<long long, long long> next;
    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            // Corners counter-clockwise, edge k runs from corner k to corner k+1.
            const std::array<std::pair<int, int>, 4> c = {{{i, j}, {i + 1, j}, {i + 1, j + 1}, {i, j + 1}}};
            std::array<bool, 4> h{};
            int nhigh = 0;
            for (int k = 0; k < 4; ++k) nhigh += (h[k] = high(c[k].first, c[k].second));
            if (nhigh == 0 || nhigh == 4) continue;
            struct Cross {
                long long key;
                bool exiting;
            };
            std::vector<Cross> xs;
            const std::array<long long, 4> ekey = {hkey(i, j), vkey(i + 1, j), hkey(i, j + 1), vkey(i, j)};
            for (int k = 0; k < 4; ++k) {
                const int k1 = (k + 1) % 4;
                if (h[k] == h[k1]) continue;
                crossing(ekey[k], c[k].first, c[k].second, c[k1].first, c[k1].second);
                xs.push_back({ekey[k], h[k] && !h[k1]});
            }
            double mean = 0.0;
            for (const auto& [ci, cj] : c) mean += field.at(ci, cj);
            const bool center_high = 0.25 * mean >= iso;
            const int m = static_cast<int>(xs.size());
            for (int k = 0; k < m; ++k) {
                if (!xs[k].exiting) continue;
                // Segments run exit -> enter so the high side lies on the left.
                const int partner = center_high ? (k + 1) % m : (k + m - 1) % m;
                next[xs[k].key] = xs[partner].key;
            }
        }
    }
    if (next.empty()) throw InputError("empty contour");

    std::unordered_map<long long, int> incoming;
    for (const auto& [a, b] : next) incoming[b] += 1;
    for (const auto& [a, b] : next) {
        if (!incoming.contains(a) || !next.contains(b)) throw InputError("contour not closed");
    }

    const double min_step = 1e-3 * std::min(field.pixel_size.x(), field.pixel_size.y());
    std::unordered_map<long long, bool> visited;
    Polyline best;
    double best_area = -std::numeric_limits<double>::infinity();
    // Deterministic traversal order: smallest unvisited key first.
    std::vector<long long> keys;
    keys.reserve(next.size());
    for (const auto& kv : next) keys.push_back(kv.first);
    std::sort(keys.begin(), keys.end());
    for (long long start : keys) {
        if (visited[start]) continue;
        Polyline loop;
        loop.closed = true;
        long long k = start;
        do {
            visited[k] = true;
            const Vec2& p = point.at(k);
            if (loop.points.empty() || (p - loop.points.back()).norm() > min_step) loop.points.push_back(p);
            k = next.at(k);
        } while (k != start);
        while (loop.points.size() > 1 && (loop.points.front() - loop.points.back()).norm() <= min_step) {
            loop.points.pop_back();
        }
        if (loop.points.size() < 3) continue;
        const double a = loop.signed_area();
        if (a > best_area) {
            best_area = a;
            best = std::move(loop);
        }
    }
    if (best.points.size() < 3 || !(best_area > 0.0)) throw InputError("empty contour");
    return best;
}

TriMesh2D mask_to_mesh(const Mask2D& mask, const MeshingOptions& options, Polyline* contour_out)
{
    const double sigma = options.sigma_mm > 0.0 ? options.sigma_mm : mask.pixel_size.x();
    const Field2D smooth = pad_field(smooth_mask(mask, sigma), 1, 0.0);
    Polyline contour = extract_contour(smooth, options.iso);
    TriMesh2D mesh = triangulate(contour, options.max_area_mm2, options.min_angle_deg);
    if (contour_out) *contour_out = std::move(contour);
    return mesh;
}

} // namespace ccm
