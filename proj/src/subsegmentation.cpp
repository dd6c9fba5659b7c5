#include <ccm/error.hpp>
#include <ccm/subsegmentation.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace ccm {

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }
Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

double polygon_area(const std::vector<Vec2>& p)
{
    double a = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) a += cross(p[i], p[(i + 1) % p.size()]);
    return 0.5 * a;
}

// Area of triangle (a, b, c) inside the half-plane {x : n . x >= offset}.
double clipped_area(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& n, double offset)
{
    const std::array<Vec2, 3> in = {a, b, c};
    std::array<double, 3> s{};
    for (int k = 0; k < 3; ++k) s[k] = n.dot(in[k]) - offset;
    if (s[0] >= 0 && s[1] >= 0 && s[2] >= 0) return 0.5 * cross(b - a, c - a);
    if (s[0] < 0 && s[1] < 0 && s[2] < 0) return 0.0;
    std::vector<Vec2> out;
    for (int k = 0; k < 3; ++k) {
        const int k1 = (k + 1) % 3;
        if (s[k] >= 0) out.push_back(in[k]);
        if ((s[k] >= 0) != (s[k1] >= 0)) {
            const double t = s[k] / (s[k] - s[k1]);
            out.push_back(in[k] + t * (in[k1] - in[k]));
        }
    }
    return polygon_area(out);
}

// Segment areas for a family of nested half-planes H_1 ⊃ H_2 ⊃ ... (on the
// mesh), each {x : normals[k] . x >= offsets[k]}. Segment k lies in H_k but
// not in H_{k+1}.
std::vector<double> nested_areas(const TriMesh2D& mesh, const std::vector<Vec2>& normals,
                                 const std::vector<double>& offsets)
{
    const std::size_t cuts = normals.size();
    std::vector<double> cumulative(cuts, 0.0);
    double total = 0.0;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Vec2& a = mesh.vertices[tri[0]];
        const Vec2& b = mesh.vertices[tri[1]];
        const Vec2& c = mesh.vertices[tri[2]];
        total += mesh.triangle_area(t);
        for (std::size_t k = 0; k < cuts; ++k) cumulative[k] += clipped_area(a, b, c, normals[k], offsets[k]);
    }
    std::vector<double> areas(cuts + 1);
    areas[0] = total - (cuts ? cumulative[0] : 0.0);
    for (std::size_t k = 1; k < cuts; ++k) areas[k] = cumulative[k - 1] - cumulative[k];
    if (cuts) areas[cuts] = cumulative[cuts - 1];
    return areas;
}

Vec2 up_direction(const TriMesh2D& mesh, const Landmarks2D& lm)
{
    Vec2 up = perp(lm.anterior_direction());
    Vec2 centroid = Vec2::Zero();
    double area = 0.0;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const double a = mesh.triangle_area(t);
        centroid += a * mesh.triangle_centroid(t);
        area += a;
    }
    centroid /= area;
    if ((centroid - lm.pc).dot(up) < 0.0) up = -up;
    return up;
}

Vec2 principal_axis(const TriMesh2D& mesh)
{
    Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
    Vec2 first = Vec2::Zero();
    double area = 0.0;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        const double a = mesh.triangle_area(t);
        const Vec2 m = mesh.triangle_centroid(t);
        Eigen::Matrix2d s = 9.0 * m * m.transpose();
        for (int k = 0; k < 3; ++k) s += mesh.vertices[tri[k]] * mesh.vertices[tri[k]].transpose();
        second += a / 12.0 * s;
        first += a * m;
        area += a;
    }
    const Vec2 mu = first / area;
    const Eigen::Matrix2d cov = second / area - mu * mu.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
    const auto ev = eig.eigenvalues();
    if (!(ev[1] - ev[0] > 1e-6 * (ev[1] + ev[0]))) {
        throw NumericError("degenerate principal axis: shape is isotropic");
    }
    return eig.eigenvectors().col(1).normalized();
}

struct RayHit {
    double t = std::numeric_limits<double>::infinity();
    std::size_t edge = 0;
};

RayHit cast_ray(const std::vector<Vec2>& poly, const Vec2& o, const Vec2& d)
{
    RayHit hit;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2 e = poly[(i + 1) % n] - a;
        const double denom = cross(d, e);
        if (denom == 0.0) continue;
        const Vec2 w = a - o;
        const double t = cross(w, e) / denom;
        const double u = cross(w, d) / denom;
        if (t > 1e-12 && u >= 0.0 && u <= 1.0 && t < hit.t) {
            hit.t = t;
            hit.edge = i;
        }
    }
    return hit;
}

bool point_in_polygon(const std::vector<Vec2>& poly, const Vec2& p)
{
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
            if (p.x() < x) inside = !inside;
        }
    }
    return inside;
}

double distance_to_polygon(const std::vector<Vec2>& poly, const Vec2& p)
{
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& a = poly[i];
        const Vec2 ab = poly[(i + 1) % poly.size()] - a;
        const double len2 = ab.squaredNorm();
        const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        best = std::min(best, (a + t * ab - p).norm());
    }
    return best;
}

struct LinePoint {
    Vec2 pos;
    Vec2 tangent;
};

LinePoint point_at_arclength(const Polyline& line, double s)
{
    const auto cum = line.arc_lengths();
    const auto& p = line.points;
    const double total = cum.back();
    s = std::clamp(s, 0.0, total);
    std::size_t i = 0;
    while (i + 2 < p.size() && cum[i + 1] < s) ++i;
    const double len = cum[i + 1] - cum[i];
    const double u = len > 0.0 ? (s - cum[i]) / len : 0.0;
    LinePoint lp;
    lp.pos = p[i] + u * (p[i + 1] - p[i]);
    Vec2 tangent = (p[i + 1] - p[i]).normalized();
    const double eps = 1e-12 * std::max(total, 1.0);
    if (std::abs(s - cum[i + 1]) <= eps && i + 2 < p.size()) {
        tangent = (tangent + (p[i + 2] - p[i + 1]).normalized()).normalized();
    } else if (std::abs(s - cum[i]) <= eps && i > 0) {
        tangent = (tangent + (p[i] - p[i - 1]).normalized()).normalized();
    }
    lp.tangent = tangent;
    return lp;
}

SubsegResult straight_cuts(const TriMesh2D& mesh, const SubsegScheme& scheme, const Vec2& posterior)
{
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    Vec2 blo = mesh.vertices.front(), bhi = blo;
    for (const auto& v : mesh.vertices) {
        lo = std::min(lo, v.dot(posterior));
        hi = std::max(hi, v.dot(posterior));
        blo = blo.cwiseMin(v);
        bhi = bhi.cwiseMax(v);
    }
    const double extent = hi - lo;
    std::vector<Vec2> normals;
    std::vector<double> offsets;
    SubsegResult res;
    const Vec2 across = perp(posterior);
    const double reach = (bhi - blo).norm();
    for (double f : scheme.fractions) {
        normals.push_back(posterior);
        offsets.push_back(lo + f * extent);
        // Display segment of the cut line through the bounding box.
        Vec2 mid = 0.5 * (blo + bhi);
        mid += (lo + f * extent - mid.dot(posterior)) * posterior;
        Polyline cut;
        cut.points = {mid - reach * across, mid + reach * across};
        res.cuts.push_back(cut);
    }
    res.segment_areas_mm2 = nested_areas(mesh, normals, offsets);
    res.triangle_labels.resize(mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const double s = (mesh.triangle_centroid(t).dot(posterior) - lo) / extent;
        int label = 0;
        for (double f : scheme.fractions) label += s >= f;
        res.triangle_labels[t] = label;
    }
    return res;
}

SubsegResult hampel(const TriMesh2D& mesh, const SubsegScheme& scheme, const Landmarks2D& lm)
{
    const Vec2 ant = lm.anterior_direction();
    const Vec2 up = up_direction(mesh, lm);
    double amin = std::numeric_limits<double>::infinity(), amax = -amin, bmin = amin;
    for (const auto& v : mesh.vertices) {
        amin = std::min(amin, v.dot(ant));
        amax = std::max(amax, v.dot(ant));
        bmin = std::min(bmin, v.dot(up));
    }
    const Vec2 origin = 0.5 * (amin + amax) * ant + bmin * up;
    std::vector<Vec2> normals;
    std::vector<double> offsets;
    SubsegResult res;
    const double reach = amax - amin;
    for (double f : scheme.fractions) {
        const double theta = f * std::numbers::pi;
        const Vec2 n = std::cos(theta) * up + std::sin(theta) * ant;
        normals.push_back(n);
        offsets.push_back(n.dot(origin));
        const Vec2 ray = -std::cos(theta) * ant + std::sin(theta) * up;
        Polyline cut;
        cut.points = {origin, origin + reach * ray};
        res.cuts.push_back(cut);
    }
    res.segment_areas_mm2 = nested_areas(mesh, normals, offsets);
    res.triangle_labels.resize(mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const Vec2 p = mesh.triangle_centroid(t) - origin;
        const double phi = std::clamp(std::atan2(p.dot(up), -p.dot(ant)), 0.0, std::numbers::pi);
        int label = 0;
        for (double f : scheme.fractions) label += phi >= f * std::numbers::pi;
        res.triangle_labels[t] = label;
    }
    return res;
}

SubsegResult shape_aware(const TriMesh2D& mesh, const SubsegScheme& scheme, const Polyline& line)
{
    if (line.points.size() < 2) throw InputError("shape-aware sub-segmentation needs the intercallosal line");
    const double total = line.length();
    std::vector<Vec2> remainder = mesh.boundary_polyline().points;
    std::vector<std::vector<Vec2>> pieces;
    SubsegResult res;
    double prev = 0.0;
    for (double f : scheme.fractions) {
        const double s = f * total;
        const LinePoint lp = point_at_arclength(line, s);
        const Vec2 nrm = perp(lp.tangent);
        const RayHit fwd = cast_ray(remainder, lp.pos, nrm);
        const RayHit bwd = cast_ray(remainder, lp.pos, -nrm);
        if (!std::isfinite(fwd.t) || !std::isfinite(bwd.t) || fwd.edge == bwd.edge) {
            // Cut misses what is left of the mesh: empty segment.
            pieces.emplace_back();
            res.cuts.emplace_back();
            prev = s;
            continue;
        }
        const Vec2 bp = lp.pos + fwd.t * nrm;
        const Vec2 bm = lp.pos - bwd.t * nrm;
        const std::size_t m = remainder.size();
        std::vector<Vec2> x{bp}, y{bm};
        for (std::size_t i = (fwd.edge + 1) % m;; i = (i + 1) % m) {
            x.push_back(remainder[i]);
            if (i == bwd.edge) break;
        }
        x.push_back(bm);
        for (std::size_t i = (bwd.edge + 1) % m;; i = (i + 1) % m) {
            y.push_back(remainder[i]);
            if (i == fwd.edge) break;
        }
        y.push_back(bp);
        const Vec2 probe = point_at_arclength(line, 0.5 * (prev + s)).pos;
        const bool x_anterior = point_in_polygon(x, probe);
        pieces.push_back(x_anterior ? x : y);
        remainder = x_anterior ? y : x;
        Polyline cut;
        cut.points = {bm, bp};
        res.cuts.push_back(cut);
        prev = s;
    }
    pieces.push_back(remainder);

    res.segment_areas_mm2.reserve(pieces.size());
    for (const auto& p : pieces) res.segment_areas_mm2.push_back(p.empty() ? 0.0 : std::abs(polygon_area(p)));
    res.triangle_labels.resize(mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const Vec2 c = mesh.triangle_centroid(t);
        int label = -1;
        for (std::size_t k = 0; k < pieces.size() && label < 0; ++k) {
            if (!pieces[k].empty() && point_in_polygon(pieces[k], c)) label = static_cast<int>(k);
        }
        if (label < 0) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < pieces.size(); ++k) {
                if (pieces[k].empty()) continue;
                const double d = distance_to_polygon(pieces[k], c);
                if (d < best) {
                    best = d;
                    label = static_cast<int>(k);
                }
            }
        }
        res.triangle_labels[t] = label;
    }
    return res;
}

} // namespace

std::string_view to_string(SchemeKind kind)
{
    switch (kind) {
    case SchemeKind::witelson: return "witelson";
    case SchemeKind::jancke: return "jancke";
    case SchemeKind::hofer_frahm: return "hofer_frahm";
    case SchemeKind::hampel: return "hampel";
    case SchemeKind::eigendirection: return "eigendirection";
    case SchemeKind::shape_aware: return "shape_aware";
    }
    return "unknown";
}

SchemeKind scheme_from_string(std::string_view name)
{
    for (SchemeKind k : all_schemes()) {
        if (to_string(k) == name) return k;
    }
    throw InputError("unknown sub-segmentation scheme '" + std::string(name) + "'");
}

const std::vector<SchemeKind>& all_schemes()
{
    static const std::vector<SchemeKind> kinds = {SchemeKind::witelson,    SchemeKind::jancke,
                                                  SchemeKind::hofer_frahm, SchemeKind::hampel,
                                                  SchemeKind::eigendirection, SchemeKind::shape_aware};
    return kinds;
}

void SubsegScheme::validate() const
{
    if (fractions.empty()) throw InputError("a scheme needs at least one cut (two segments)");
    double prev = 0.0;
    for (double f : fractions) {
        if (!(f > prev && f < 1.0)) throw InputError("cut fractions must be strictly increasing in (0, 1)");
        prev = f;
    }
}

std::vector<double> default_fractions(SchemeKind kind)
{
    switch (kind) {
    case SchemeKind::witelson:
    case SchemeKind::jancke: return {1.0 / 3.0, 1.0 / 2.0, 2.0 / 3.0, 4.0 / 5.0};
    case SchemeKind::hofer_frahm:
    case SchemeKind::shape_aware: return {1.0 / 6.0, 1.0 / 2.0, 2.0 / 3.0, 3.0 / 4.0};
    case SchemeKind::hampel:
    case SchemeKind::eigendirection: return {0.2, 0.4, 0.6, 0.8};
    }
    return {};
}

SubsegScheme default_scheme(SchemeKind kind) { return {kind, default_fractions(kind)}; }

SubsegResult subsegment(const TriMesh2D& mesh, const SubsegScheme& scheme, const Landmarks2D& lm,
                        const Polyline& midline)
{
    scheme.validate();
    if (mesh.triangles.empty()) throw InputError("mesh has no triangles");
    SubsegResult res;
    switch (scheme.kind) {
    case SchemeKind::witelson:
    case SchemeKind::hofer_frahm: {
        if (midline.points.size() < 2) throw InputError("scheme needs the midline endpoints");
        const Vec2 d = midline.points.back() - midline.points.front();
        if (!(d.norm() > 0.0)) throw InputError("midline endpoints coincide");
        res = straight_cuts(mesh, scheme, d.normalized());
        break;
    }
    case SchemeKind::jancke: res = straight_cuts(mesh, scheme, -lm.anterior_direction()); break;
    case SchemeKind::eigendirection: {
        Vec2 axis = principal_axis(mesh);
        if (axis.dot(lm.anterior_direction()) > 0.0) axis = -axis;
        res = straight_cuts(mesh, scheme, axis);
        break;
    }
    case SchemeKind::hampel: res = hampel(mesh, scheme, lm); break;
    case SchemeKind::shape_aware: res = shape_aware(mesh, scheme, midline); break;
    }
    res.kind = scheme.kind;
    return res;
}

} // namespace ccm
