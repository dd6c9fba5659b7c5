#include <ccm/error.hpp>
#include <ccm/morphometry.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace ccm {

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }
Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b)
{
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (a + t * ab - p).norm();
}

double point_polyline_distance(const Vec2& p, const Polyline& line)
{
    if (line.points.empty()) return std::numeric_limits<double>::infinity();
    if (line.points.size() == 1) return (line.points.front() - p).norm();
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = line.points.size();
    const std::size_t segs = line.closed ? n : n - 1;
    for (std::size_t i = 0; i < segs; ++i) {
        best = std::min(best, point_segment_distance(p, line.points[i], line.points[(i + 1) % n]));
    }
    return best;
}

int nearest_point(const Polyline& contour, const Vec2& q)
{
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < contour.points.size(); ++i) {
        const double d = (contour.points[i] - q).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

} // namespace

Vec2 Landmarks2D::anterior_direction() const
{
    const Vec2 d = ac - pc;
    const double n = d.norm();
    if (!(n > 0.0)) throw InputError("AC and PC coincide");
    return d / n;
}

EndpointPair find_endpoints(const Polyline& contour, const Landmarks2D& lm, const EndpointOptions& options)
{
    if (contour.points.size() < 3) throw InputError("contour needs at least 3 points");
    const Vec2 d = lm.anterior_direction();
    const Vec2 up = perp(d);
    const Vec2 anterior_anchor = lm.ac + options.along_offset_mm * d + options.normal_offset_mm * up;
    const Vec2 posterior_anchor = lm.pc - options.along_offset_mm * d + options.normal_offset_mm * up;

    EndpointPair ep;
    ep.anterior = nearest_point(contour, anterior_anchor);
    ep.posterior = nearest_point(contour, posterior_anchor);
    if (ep.anterior == ep.posterior) throw InputError("anterior and posterior endpoints coincide");

    Vec2 lo = contour.points.front(), hi = lo;
    for (const auto& p : contour.points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    auto outside = [&](const Vec2& p) {
        const Vec2 below = (lo - p).cwiseMax(0.0);
        const Vec2 above = (p - hi).cwiseMax(0.0);
        return below.cwiseMax(above).norm();
    };
    ep.landmarks_far = outside(lm.ac) > 50.0 || outside(lm.pc) > 50.0;
    return ep;
}

Polyline resample_polyline(const Polyline& line, int count)
{
    if (count < 2) throw InputError("resampling needs at least 2 points");
    if (line.points.size() < 2) throw InputError("cannot resample a polyline with fewer than 2 points");
    const auto s = line.arc_lengths();
    const double total = s.back();
    Polyline out;
    out.points.reserve(count);
    std::size_t seg = 0;
    for (int k = 0; k < count; ++k) {
        if (k == 0) {
            out.points.push_back(line.points.front());
            continue;
        }
        if (k == count - 1) {
            out.points.push_back(line.points.back());
            continue;
        }
        const double target = total * k / (count - 1);
        while (seg + 2 < s.size() && s[seg + 1] < target) ++seg;
        const double len = s[seg + 1] - s[seg];
        const double t = len > 0.0 ? (target - s[seg]) / len : 0.0;
        out.points.push_back(line.points[seg] + t * (line.points[seg + 1] - line.points[seg]));
    }
    return out;
}

Midline intercallosal_line(const TriMesh2D& mesh, const Landmarks2D& lm, int n, const EndpointOptions& options)
{
    if (n < 1) throw InputError("thickness sample count must be positive");
    const Polyline boundary = mesh.boundary_polyline();
    const EndpointPair ep = find_endpoints(boundary, lm, options);
    const auto& loop = mesh.boundary_loop;
    const int m = static_cast<int>(loop.size());

    Midline out;
    out.landmarks_far = ep.landmarks_far;
    out.anterior_vertex = loop[ep.anterior];
    out.posterior_vertex = loop[ep.posterior];

    // Two boundary chains between the endpoints; the one further along the
    // in-plane "up" direction is superior.
    std::vector<int> chain_a, chain_b;
    for (int i = (ep.anterior + 1) % m; i != ep.posterior; i = (i + 1) % m) chain_a.push_back(loop[i]);
    for (int i = (ep.posterior + 1) % m; i != ep.anterior; i = (i + 1) % m) chain_b.push_back(loop[i]);
    if (chain_a.empty() || chain_b.empty()) throw NumericError("degenerate midline: endpoints are adjacent");

    const Vec2 d = lm.anterior_direction();
    Vec2 up = perp(d);
    Vec2 centroid = Vec2::Zero();
    for (const auto& v : mesh.vertices) centroid += v;
    centroid /= static_cast<double>(mesh.num_vertices());
    if ((centroid - lm.pc).dot(up) < 0.0) up = -up;
    auto mean_height = [&](const std::vector<int>& chain) {
        double h = 0.0;
        for (int v : chain) h += mesh.vertices[v].dot(up);
        return h / static_cast<double>(chain.size());
    };
    const bool a_superior = mean_height(chain_a) >= mean_height(chain_b);
    const auto& superior = a_superior ? chain_a : chain_b;
    const auto& inferior = a_superior ? chain_b : chain_a;

    out.side.assign(mesh.num_vertices(), 2);
    std::vector<FixedValue> fixed;
    fixed.reserve(boundary.size());
    for (int v : inferior) {
        fixed.push_back({v, -1.0});
        out.side[v] = -1;
    }
    for (int v : superior) {
        fixed.push_back({v, 1.0});
        out.side[v] = 1;
    }
    fixed.push_back({out.anterior_vertex, 0.0});
    fixed.push_back({out.posterior_vertex, 0.0});
    out.side[out.anterior_vertex] = 0;
    out.side[out.posterior_vertex] = 0;

    out.laplace = solve_dirichlet(mesh, fixed);

    auto paths = trace_level_set(mesh, out.laplace, 0.0);
    if (paths.size() != 1 || paths.front().line.closed || paths.front().line.points.size() < 2) {
        throw NumericError("degenerate midline: zero level set has " + std::to_string(paths.size()) + " components");
    }
    Polyline raw = std::move(paths.front().line);
    const Vec2& pa = mesh.vertices[out.anterior_vertex];
    const Vec2& pp = mesh.vertices[out.posterior_vertex];
    if ((raw.points.front() - pa).norm() + (raw.points.back() - pp).norm()
        > (raw.points.front() - pp).norm() + (raw.points.back() - pa).norm()) {
        std::reverse(raw.points.begin(), raw.points.end());
    }
    raw.points.front() = pa;
    raw.points.back() = pp;
    out.raw_line = raw;
    out.line = resample_polyline(raw, n + 2);
    return out;
}

double ThicknessProfile::mean_thickness() const
{
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < thickness_mm.size(); ++i) {
        if (valid[i]) {
            sum += thickness_mm[i];
            ++count;
        }
    }
    return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

ThicknessProfile thickness_profile(const TriMesh2D& mesh, const Midline& midline)
{
    const int n = static_cast<int>(midline.line.points.size()) - 2;
    if (n < 1) throw InputError("midline must have at least 3 points");

    ThicknessProfile prof;
    const TriVectorField rotated = rotate90(gradient(mesh, midline.laplace));
    const std::vector<double> h = divergence(mesh, rotated);
    prof.rotated = solve_poisson(mesh, h, {midline.anterior_vertex, 0.0});

    const LengthCurvature lc = length_and_curvature(midline.line);
    prof.intercallosal_length_mm = lc.length_mm;
    prof.curvature = lc.curvature_per_mm;

    auto edge_side = [&](const std::pair<int, int>& e) -> int {
        if (e.first < 0) return 2;
        const int sa = midline.side[e.first];
        const int sb = midline.side[e.second];
        if (sa == 2 || sb == 2) return 2;
        if (sa == 0) return sb;
        if (sb == 0) return sa;
        return sa == sb ? sa : 2;
    };

    const TriangleLocator locator(mesh);
    prof.positions.resize(n);
    prof.thickness_mm.assign(n, std::numeric_limits<double>::quiet_NaN());
    prof.valid.assign(n, 0);
    prof.level_paths.assign(n, Polyline{});
    for (int k = 1; k <= n; ++k) {
        const Vec2& sample = midline.line.points[k];
        prof.positions[k - 1] = static_cast<double>(k) / (n + 1);
        const double value = locator.interpolate(prof.rotated, sample);
        auto paths = trace_level_set(mesh, prof.rotated, value);
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < paths.size(); ++i) {
            const double dist = point_polyline_distance(sample, paths[i].line);
            if (dist < best_d) {
                best_d = dist;
                best = static_cast<int>(i);
            }
        }
        if (best < 0) continue;
        const LevelPath& path = paths[best];
        const int s0 = edge_side(path.end_edges[0]);
        const int s1 = edge_side(path.end_edges[1]);
        const bool spans = !path.line.closed && ((s0 == -1 && s1 == 1) || (s0 == 1 && s1 == -1));
        prof.level_paths[k - 1] = path.line;
        if (spans) {
            prof.thickness_mm[k - 1] = path.line.length();
            prof.valid[k - 1] = 1;
        }
    }
    return prof;
}

LengthCurvature length_and_curvature(const Polyline& line)
{
    LengthCurvature out{line.length(), 0.0};
    const auto& p = line.points;
    if (p.size() < 3) return out;
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = 1; i + 1 < p.size(); ++i) {
        const Vec2 a = p[i] - p[i - 1];
        const Vec2 b = p[i + 1] - p[i];
        const double la = a.norm();
        const double lb = b.norm();
        if (!(la > 0.0) || !(lb > 0.0)) continue;
        const double turn = std::abs(std::atan2(cross(a, b), a.dot(b)));
        sum += turn / (0.5 * (la + lb));
        ++count;
    }
    out.curvature_per_mm = count > 0 ? sum / count : 0.0;
    return out;
}

std::vector<std::pair<double, double>> line_polygon_intervals(const Polyline& polygon, const Vec2& o, const Vec2& d)
{
    const auto& p = polygon.points;
    const std::size_t n = p.size();
    std::vector<double> ts;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = p[i];
        const Vec2& b = p[(i + 1) % n];
        const double sa = cross(d, a - o);
        const double sb = cross(d, b - o);
        // Half-open rule: points on the line count as the non-positive side.
        if ((sa > 0.0) == (sb > 0.0)) continue;
        const double s = sa / (sa - sb);
        const Vec2 x = a + s * (b - a);
        ts.push_back((x - o).dot(d) / d.squaredNorm());
    }
    std::sort(ts.begin(), ts.end());
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i + 1 < ts.size(); i += 2) out.emplace_back(ts[i], ts[i + 1]);
    return out;
}

CCIndex cc_index(const Polyline& contour)
{
    const auto& p = contour.points;
    if (p.size() < 3) throw InputError("contour needs at least 3 points");
    CCIndex out;
    // Longest chord between contour points.
    std::size_t ia = 0, ib = 1;
    double best = -1.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (std::size_t j = i + 1; j < p.size(); ++j) {
            const double d2 = (p[i] - p[j]).squaredNorm();
            if (d2 > best) {
                best = d2;
                ia = i;
                ib = j;
            }
        }
    }
    const Vec2 a = p[ia];
    const Vec2 b = p[ib];
    const double len = std::sqrt(best);
    const Vec2 dir = (b - a) / len;
    const Vec2 nrm = perp(dir);
    out.chord = {a, b};
    out.chord_length = len;

    auto cut_sum = [&](const Vec2& at) {
        double total = 0.0;
        for (const auto& [t0, t1] : line_polygon_intervals(contour, at, nrm)) total += t1 - t0;
        return total;
    };

    out.cuts[1] = cut_sum(a + 0.5 * len * dir);
    if (!(out.cuts[1] > 0.0)) throw NumericError("index undefined: perpendicular bisector misses the structure");

    const auto along = line_polygon_intervals(contour, a, dir);
    const double tol = 1e-9 * len;
    // Inside pieces of the chord touching its two ends.
    std::pair<double, double> first{0.0, 0.0}, last{0.0, 0.0};
    bool have_first = false, have_last = false;
    for (const auto& iv : along) {
        if (!have_first && iv.first <= tol && iv.second > tol) {
            first = iv;
            have_first = true;
        }
        if (iv.second >= len - tol && iv.first < len - tol) {
            last = iv;
            have_last = true;
        }
    }
    const bool single_piece = have_first && first.second >= len - tol;
    if (have_first && have_last && !single_piece) {
        out.cuts[0] = std::min(first.second, len) - std::max(first.first, 0.0);
        out.cuts[2] = std::min(last.second, len) - std::max(last.first, 0.0);
    } else {
        // No arch: the chord stays inside, so measure across the structure at
        // the chord quarter points instead.
        out.fallback_cuts = true;
        out.cuts[0] = cut_sum(a + 0.25 * len * dir);
        out.cuts[2] = cut_sum(a + 0.75 * len * dir);
    }
    out.raw = out.cuts[0] + out.cuts[1] + out.cuts[2];
    out.normalized = out.raw / len;
    return out;
}

double corrected_volume(std::span<const double> areas, double spacing_mm, double width_mm)
{
    if (!(spacing_mm > 0.0)) throw InputError("slice spacing must be positive");
    const std::size_t n = areas.size();
    if (n == 0) throw InputError("no slab slices");
    if (n == 1) return areas[0] * width_mm;
    const double w = (width_mm - static_cast<double>(n - 2) * spacing_mm) / (2.0 * spacing_mm);
    double interior = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) interior += areas[i];
    return spacing_mm * (interior + w * (areas.front() + areas.back()));
}

double circularity(double area, double perimeter)
{
    if (!(perimeter > 0.0)) throw InputError("perimeter must be positive");
    return 4.0 * std::numbers::pi * area / (perimeter * perimeter);
}

ShapeSummary shape_summary(const TriMesh2D& mesh, const Polyline& contour, const Polyline& line,
                           std::span<const double> slab_areas_mm2, double spacing_mm, double width_mm)
{
    ShapeSummary s;
    s.area_mm2 = mesh.area();
    Polyline closed = contour;
    closed.closed = true;
    s.perimeter_mm = closed.length();
    s.circularity = circularity(s.area_mm2, s.perimeter_mm);
    const CCIndex idx = cc_index(closed);
    s.cc_index_raw = idx.raw;
    s.cc_index_norm = idx.normalized;
    s.volume_mm3 = slab_areas_mm2.empty() ? std::numeric_limits<double>::quiet_NaN()
                                          : corrected_volume(slab_areas_mm2, spacing_mm, width_mm);
    const LengthCurvature lc = length_and_curvature(line);
    s.length_mm = lc.length_mm;
    s.curvature_per_mm = lc.curvature_per_mm;
    return s;
}

} // namespace ccm
