// Quality triangulation of a simple polygon: Delaunay refinement in the style
// of Ruppert. Boundary segments are kept conforming by midpoint splitting of
// encroached subsegments; bad triangles get their circumcenter inserted with
// a Bowyer-Watson cavity that never crosses a subsegment.

#include <ccm/error.hpp>
#include <ccm/mask2mesh.hpp>

#include "predicates.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace ccm {

namespace {

using detail::incircle;
using detail::orient2d;

constexpr int kSuper = 3; // vertices 0..2 form the enclosing super-triangle

std::uint64_t edge_key(int a, int b)
{
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

struct Tri {
    std::array<int, 3> v{};
    std::array<int, 3> nb{-1, -1, -1}; // nb[k] is across the edge opposite v[k]
    bool alive = true;
    bool inside = false;
};

struct BadEntry {
    int tri;
    std::array<int, 3> v;
};

class Refiner {
public:
    Refiner(const Polyline& contour, double max_area, double min_angle_deg)
        : max_area_(max_area), sin_min_angle_(std::sin(min_angle_deg * std::numbers::pi / 180.0))
    {
        const auto& in = contour.points;
        Vec2 lo = in.front(), hi = in.front();
        for (const auto& p : in) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        const Vec2 c = 0.5 * (lo + hi);
        const double d = std::max({hi.x() - lo.x(), hi.y() - lo.y(), 1e-6});
        pts_ = {c + Vec2(-30 * d, -30 * d), c + Vec2(30 * d, -30 * d), c + Vec2(0.0, 30 * d)};
        Tri root;
        root.v = {0, 1, 2};
        tris_.push_back(root);
        vert_tri_ = {0, 0, 0};
        on_segment_ = {0, 0, 0};
        input_angle_ = {180.0, 180.0, 180.0};

        n_input_ = static_cast<int>(in.size());
        int last = 0;
        for (const auto& p : in) {
            int t = locate(p, last, false, nullptr);
            const auto& tv = tris_[t].v;
            for (int k = 0; k < 3; ++k) {
                if (pts_[tv[k]] == p) throw InputError("duplicate contour vertex");
            }
            std::vector<int> created;
            insert(p, t, false, -1, -1, created);
            last = created.front();
        }
        for (int i = 0; i < n_input_; ++i) {
            const int a = kSuper + i;
            const int b = kSuper + (i + 1) % n_input_;
            add_segment(a, b);
            on_segment_[a] = 1;
            const Vec2 prev = in[(i + n_input_ - 1) % n_input_] - in[i];
            const Vec2 next = in[(i + 1) % n_input_] - in[i];
            input_angle_[a] = std::atan2(std::abs(cross(prev, next)), prev.dot(next)) * 180.0 / std::numbers::pi;
        }
        const double area = std::abs(contour.signed_area());
        steiner_cap_ = static_cast<std::size_t>(std::min(4.0e6, 50.0 * area / max_area + 200.0 * n_input_ + 1000.0));
    }

    TriMesh2D run()
    {
        recover_segments(false);
        classify();
        refine();
        return extract();
    }

private:
    std::vector<Vec2> pts_;
    std::vector<Tri> tris_;
    std::vector<int> free_;
    std::vector<int> vert_tri_;
    std::vector<std::uint8_t> on_segment_;
    std::vector<double> input_angle_;
    std::unordered_set<std::uint64_t> segs_;
    std::vector<std::pair<int, int>> seg_list_;
    std::vector<unsigned> stamp_;
    unsigned stamp_now_ = 0;
    int n_input_ = 0;
    double max_area_;
    double sin_min_angle_;
    std::size_t steiner_cap_ = 0;
    std::deque<std::pair<int, int>> seg_queue_;
    std::deque<BadEntry> bad_queue_;

    bool is_segment(int a, int b) const { return segs_.contains(edge_key(a, b)); }

    void add_segment(int a, int b)
    {
        segs_.insert(edge_key(a, b));
        seg_list_.emplace_back(a, b);
        seg_queue_.emplace_back(a, b);
    }

    // Visibility walk. In constrained mode the walk refuses to cross a
    // subsegment (other than `allow`) and reports it through `crossed`.
    int locate(const Vec2& p, int start, bool constrained, std::pair<int, int>* crossed,
               std::uint64_t allow = ~std::uint64_t{0}) const
    {
        int t = start;
        if (t < 0 || !tris_[t].alive) {
            t = 0;
            while (!tris_[t].alive) ++t;
        }
        unsigned rot = 0;
        for (std::size_t guard = 0; guard < 4 * tris_.size() + 16; ++guard) {
            const Tri& tri = tris_[t];
            bool moved = false;
            for (int j = 0; j < 3; ++j) {
                const int k = static_cast<int>((j + rot) % 3);
                const int a = tri.v[(k + 1) % 3];
                const int b = tri.v[(k + 2) % 3];
                if (orient2d(pts_[a], pts_[b], p) < 0) {
                    if (constrained && is_segment(a, b) && edge_key(a, b) != allow) {
                        if (crossed) *crossed = {a, b};
                        return -1;
                    }
                    if (tri.nb[k] < 0) throw Error("triangulation: point outside the enclosing triangle");
                    t = tri.nb[k];
                    moved = true;
                    break;
                }
            }
            ++rot;
            if (!moved) return t;
        }
        throw Error("triangulation: point location did not terminate");
    }

    int new_tri()
    {
        if (!free_.empty()) {
            const int t = free_.back();
            free_.pop_back();
            return t;
        }
        tris_.emplace_back();
        return static_cast<int>(tris_.size()) - 1;
    }

    // Bowyer-Watson insertion of p starting from a triangle that contains it.
    int insert(const Vec2& p, int t0, bool constrained, int allow_a, int allow_b, std::vector<int>& created)
    {
        const std::uint64_t allow = allow_a >= 0 ? edge_key(allow_a, allow_b) : ~std::uint64_t{0};
        if (stamp_.size() < tris_.size()) stamp_.resize(tris_.size() + 1024, 0);
        ++stamp_now_;
        std::vector<int> cavity;
        std::vector<int> stack{t0};
        stamp_[t0] = stamp_now_;
        while (!stack.empty()) {
            const int t = stack.back();
            stack.pop_back();
            cavity.push_back(t);
            const Tri& tri = tris_[t];
            for (int k = 0; k < 3; ++k) {
                const int n = tri.nb[k];
                if (n < 0 || stamp_[n] == stamp_now_) continue;
                const int a = tri.v[(k + 1) % 3];
                const int b = tri.v[(k + 2) % 3];
                if (constrained && is_segment(a, b) && edge_key(a, b) != allow) continue;
                const Tri& other = tris_[n];
                if (incircle(pts_[other.v[0]], pts_[other.v[1]], pts_[other.v[2]], p) > 0) {
                    stamp_[n] = stamp_now_;
                    stack.push_back(n);
                }
            }
        }

        struct BoundaryEdge {
            int a, b, outer;
            bool inside;
        };
        std::vector<BoundaryEdge> rim;
        for (int t : cavity) {
            const Tri& tri = tris_[t];
            for (int k = 0; k < 3; ++k) {
                const int n = tri.nb[k];
                if (n >= 0 && stamp_[n] == stamp_now_) continue;
                const int a = tri.v[(k + 1) % 3];
                const int b = tri.v[(k + 2) % 3];
                if (orient2d(pts_[a], pts_[b], p) <= 0) throw Error("triangulation: cavity is not star-shaped");
                rim.push_back({a, b, n, tri.inside});
            }
        }

        const int pid = static_cast<int>(pts_.size());
        pts_.push_back(p);
        vert_tri_.push_back(-1);
        on_segment_.push_back(0);
        input_angle_.push_back(180.0);

        for (int t : cavity) {
            tris_[t].alive = false;
            free_.push_back(t);
        }
        created.clear();
        std::unordered_map<int, int> starts;
        std::unordered_map<int, int> ends;
        for (const auto& e : rim) {
            const int t = new_tri();
            Tri& tri = tris_[t];
            tri.v = {e.a, e.b, pid};
            tri.nb = {-1, -1, e.outer};
            tri.alive = true;
            tri.inside = e.inside;
            if (e.outer >= 0) {
                Tri& o = tris_[e.outer];
                for (int k = 0; k < 3; ++k) {
                    if (o.v[(k + 1) % 3] == e.b && o.v[(k + 2) % 3] == e.a) o.nb[k] = t;
                }
            }
            starts[e.a] = t;
            ends[e.b] = t;
            created.push_back(t);
        }
        for (int t : created) {
            Tri& tri = tris_[t];
            tri.nb[0] = starts.at(tri.v[1]);
            tri.nb[1] = ends.at(tri.v[0]);
            for (int v : tri.v) vert_tri_[v] = t;
        }
        if (stamp_.size() < tris_.size()) stamp_.resize(tris_.size() + 1024, 0);
        return pid;
    }

    // Triangles (up to two) containing the edge a-b.
    std::vector<int> edge_triangles(int a, int b) const
    {
        std::vector<int> out;
        const int start = vert_tri_[a];
        if (start < 0) return out;
        auto visit = [&](int t) {
            const auto& v = tris_[t].v;
            if ((v[0] == b || v[1] == b || v[2] == b) && std::find(out.begin(), out.end(), t) == out.end()) {
                out.push_back(t);
            }
        };
        // Walk counter-clockwise around a, then clockwise if a hull edge stops us.
        for (int dir = 0; dir < 2; ++dir) {
            int t = start;
            for (std::size_t guard = 0; guard < tris_.size() + 4; ++guard) {
                visit(t);
                const auto& tri = tris_[t];
                int k = 0;
                while (tri.v[k] != a) ++k;
                const int next = dir == 0 ? tri.nb[(k + 2) % 3] : tri.nb[(k + 1) % 3];
                if (next < 0) break;
                t = next;
                if (t == start) {
                    dir = 2;
                    break;
                }
            }
        }
        return out;
    }

    bool encroached(int a, int b) const
    {
        const auto ts = edge_triangles(a, b);
        if (ts.empty()) return true;
        for (int t : ts) {
            for (int c : tris_[t].v) {
                if (c == a || c == b || c < kSuper) continue;
                if ((pts_[c] - pts_[a]).dot(pts_[c] - pts_[b]) < 0.0) return true;
            }
        }
        return false;
    }

    bool acute_input(int v) const { return v >= kSuper && v < kSuper + n_input_ && input_angle_[v] < 90.0; }

    // Subsegments hanging off an acute input vertex are cut on power-of-two
    // shells around it, so neighbouring segments never encroach each other.
    Vec2 split_point(int a, int b) const
    {
        const bool ca = acute_input(a);
        const bool cb = acute_input(b);
        if (ca == cb) return 0.5 * (pts_[a] + pts_[b]);
        const int apex = ca ? a : b;
        const int other = ca ? b : a;
        const double len = (pts_[other] - pts_[apex]).norm();
        double r = 1.0;
        while (r > 0.75 * len) r *= 0.5;
        while (r < 0.375 * len) r *= 2.0;
        return pts_[apex] + (r / len) * (pts_[other] - pts_[apex]);
    }

    void split_segment(int a, int b, bool constrained, std::vector<int>& created)
    {
        const Vec2 m = split_point(a, b);
        int start = vert_tri_[a];
        const auto ts = edge_triangles(a, b);
        if (!ts.empty()) start = ts.front();
        const int t = locate(m, start, false, nullptr);
        segs_.erase(edge_key(a, b));
        const int mid = insert(m, t, constrained, constrained ? a : -1, b, created);
        on_segment_[mid] = 1;
        add_segment(a, mid);
        add_segment(mid, b);
    }

    void recover_segments(bool constrained)
    {
        std::vector<int> created;
        for (;;) {
            if (seg_queue_.empty()) {
                for (const auto& [a, b] : seg_list_) {
                    if (is_segment(a, b) && edge_triangles(a, b).empty()) seg_queue_.emplace_back(a, b);
                }
                if (seg_queue_.empty()) break;
            }
            const auto [a, b] = seg_queue_.front();
            seg_queue_.pop_front();
            if (!is_segment(a, b)) continue;
            if (!encroached(a, b)) continue;
            if (pts_.size() > steiner_cap_ + kSuper + static_cast<std::size_t>(n_input_)) {
                throw NumericError("triangulation: segment recovery exceeded the vertex budget");
            }
            split_segment(a, b, constrained, created);
            if (constrained) enqueue_new(created);
        }
    }

    void classify()
    {
        for (auto& t : tris_) t.inside = true;
        std::vector<int> stack;
        for (std::size_t t = 0; t < tris_.size(); ++t) {
            if (!tris_[t].alive) continue;
            const auto& v = tris_[t].v;
            if (v[0] < kSuper || v[1] < kSuper || v[2] < kSuper) {
                tris_[t].inside = false;
                stack.push_back(static_cast<int>(t));
            }
        }
        while (!stack.empty()) {
            const int t = stack.back();
            stack.pop_back();
            for (int k = 0; k < 3; ++k) {
                const int n = tris_[t].nb[k];
                if (n < 0 || !tris_[n].inside) continue;
                if (is_segment(tris_[t].v[(k + 1) % 3], tris_[t].v[(k + 2) % 3])) continue;
                tris_[n].inside = false;
                stack.push_back(n);
            }
        }
    }

    bool is_bad(int t) const
    {
        const auto& v = tris_[t].v;
        const Vec2& a = pts_[v[0]];
        const Vec2& b = pts_[v[1]];
        const Vec2& c = pts_[v[2]];
        const double area = 0.5 * cross(b - a, c - a);
        if (area > max_area_) return true;
        const std::array<double, 3> len2 = {(b - c).squaredNorm(), (c - a).squaredNorm(), (a - b).squaredNorm()};
        const int shortest = static_cast<int>(std::min_element(len2.begin(), len2.end()) - len2.begin());
        // sin(min angle) = shortest / (2 R), R = |ab||bc||ca| / (4 area)
        const double prod = std::sqrt(len2[0] * len2[1] * len2[2]);
        const double sin_min = 2.0 * area * std::sqrt(len2[shortest]) / prod;
        if (sin_min >= sin_min_angle_) return false;
        // Skinny triangles wedged into a small input angle cannot be fixed.
        const int apex = v[shortest];
        const int e0 = v[(shortest + 1) % 3];
        const int e1 = v[(shortest + 2) % 3];
        if (input_angle_[apex] < 60.0 && on_segment_[e0] && on_segment_[e1]) return false;
        return true;
    }

    void enqueue_new(const std::vector<int>& created)
    {
        for (int t : created) {
            if (tris_[t].alive && tris_[t].inside && is_bad(t)) bad_queue_.push_back({t, tris_[t].v});
        }
    }

    Vec2 circumcenter(int t) const
    {
        const auto& v = tris_[t].v;
        const Vec2& a = pts_[v[0]];
        const Vec2 b = pts_[v[1]] - a;
        const Vec2 c = pts_[v[2]] - a;
        const double d = 2.0 * cross(b, c);
        const double b2 = b.squaredNorm();
        const double c2 = c.squaredNorm();
        return a + Vec2((c.y() * b2 - b.y() * c2) / d, (b.x() * c2 - c.x() * b2) / d);
    }

    void refine()
    {
        std::vector<int> all;
        for (std::size_t t = 0; t < tris_.size(); ++t) {
            if (tris_[t].alive) all.push_back(static_cast<int>(t));
        }
        enqueue_new(all);
        std::vector<int> created;
        const std::size_t vertex_cap = steiner_cap_ + kSuper + static_cast<std::size_t>(n_input_);
        while (!bad_queue_.empty()) {
            if (pts_.size() >= vertex_cap) {
                warn("triangulation: refinement stopped at the vertex budget; quality bounds may not hold");
                break;
            }
            const BadEntry entry = bad_queue_.front();
            bad_queue_.pop_front();
            const Tri& tri = tris_[entry.tri];
            if (!tri.alive || tri.v != entry.v || !tri.inside || !is_bad(entry.tri)) continue;

            const Vec2 c = circumcenter(entry.tri);
            std::vector<std::pair<int, int>> enc;
            for (const auto& [a, b] : seg_list_) {
                if (!is_segment(a, b)) continue;
                if ((c - pts_[a]).dot(c - pts_[b]) < 0.0) enc.emplace_back(a, b);
            }
            int loc = -1;
            if (enc.empty()) {
                std::pair<int, int> crossed{-1, -1};
                loc = locate(c, entry.tri, true, &crossed);
                if (loc < 0) enc.push_back(crossed);
            }
            if (!enc.empty()) {
                for (const auto& [a, b] : enc) {
                    if (!is_segment(a, b)) continue;
                    split_segment(a, b, true, created);
                    enqueue_new(created);
                    recover_segments(true);
                }
                if (tris_[entry.tri].alive && tris_[entry.tri].v == entry.v) bad_queue_.push_back(entry);
                continue;
            }
            const auto& lv = tris_[loc].v;
            if (pts_[lv[0]] == c || pts_[lv[1]] == c || pts_[lv[2]] == c) continue;
            insert(c, loc, true, -1, -1, created);
            enqueue_new(created);
        }
    }

    TriMesh2D extract() const
    {
        TriMesh2D mesh;
        std::vector<int> remap(pts_.size(), -1);
        std::vector<int> used(pts_.size(), 0);
        for (const auto& t : tris_) {
            if (!t.alive || !t.inside) continue;
            for (int v : t.v) used[v] = 1;
        }
        for (std::size_t v = kSuper; v < pts_.size(); ++v) {
            if (!used[v]) continue;
            remap[v] = static_cast<int>(mesh.vertices.size());
            mesh.vertices.push_back(pts_[v]);
        }
        for (const auto& t : tris_) {
            if (!t.alive || !t.inside) continue;
            mesh.triangles.push_back({remap[t.v[0]], remap[t.v[1]], remap[t.v[2]]});
        }
        rebuild_boundary(mesh);
        auto& loop = mesh.boundary_loop;
        const auto it = std::find(loop.begin(), loop.end(), 0);
        if (it != loop.end()) std::rotate(loop.begin(), it, loop.end());
        return mesh;
    }
};

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2)
{
    const int o1 = orient2d(p1, p2, q1);
    const int o2 = orient2d(p1, p2, q2);
    const int o3 = orient2d(q1, q2, p1);
    const int o4 = orient2d(q1, q2, p2);
    if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
    auto on_seg = [](const Vec2& a, const Vec2& b, const Vec2& c) {
        return std::min(a.x(), b.x()) <= c.x() && c.x() <= std::max(a.x(), b.x()) && std::min(a.y(), b.y()) <= c.y()
               && c.y() <= std::max(a.y(), b.y());
    };
    if (o1 == 0 && on_seg(p1, p2, q1)) return true;
    if (o2 == 0 && on_seg(p1, p2, q2)) return true;
    if (o3 == 0 && on_seg(q1, q2, p1)) return true;
    if (o4 == 0 && on_seg(q1, q2, p2)) return true;
    return false;
}

} // namespace

void check_simple_polygon(const Polyline& contour)
{
    const auto& p = contour.points;
    const std::size_t n = p.size();
    if (n < 3) throw InputError("contour needs at least 3 points");
    for (std::size_t i = 0; i < n; ++i) {
        if (p[i] == p[(i + 1) % n]) throw InputError("contour has repeated consecutive point " + std::to_string(i));
    }
    // Bounding-box sweep over segments sorted by min x.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    auto xmin = [&](std::size_t i) { return std::min(p[i].x(), p[(i + 1) % n].x()); };
    auto xmax = [&](std::size_t i) { return std::max(p[i].x(), p[(i + 1) % n].x()); };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xmin(a) < xmin(b); });
    std::pair<std::size_t, std::size_t> first{n, n};
    for (std::size_t oi = 0; oi < n; ++oi) {
        const std::size_t i = order[oi];
        for (std::size_t oj = oi + 1; oj < n && xmin(order[oj]) <= xmax(i); ++oj) {
            const std::size_t j = order[oj];
            const std::size_t lo = std::min(i, j), hi = std::max(i, j);
            const bool adjacent = hi == lo + 1 || (lo == 0 && hi == n - 1);
            const Vec2& a0 = p[i];
            const Vec2& a1 = p[(i + 1) % n];
            const Vec2& b0 = p[j];
            const Vec2& b1 = p[(j + 1) % n];
            bool hit = false;
            if (adjacent) {
                // Shared vertex is fine; overlap along a common line is not.
                const Vec2& shared = (hi == lo + 1) ? p[hi] : p[0];
                const Vec2& u = (a0 == shared) ? a1 : a0;
                const Vec2& w = (b0 == shared) ? b1 : b0;
                hit = orient2d(shared, u, w) == 0 && (u - shared).dot(w - shared) > 0.0;
            } else {
                hit = segments_intersect(a0, a1, b0, b1);
            }
            if (hit && std::make_pair(lo, hi) < first) first = {lo, hi};
        }
    }
    if (first.first < n) {
        throw InputError("self-intersecting contour: segments " + std::to_string(first.first) + " and "
                         + std::to_string(first.second) + " intersect");
    }
}

TriMesh2D triangulate(const Polyline& contour, double max_area_mm2, double min_angle_deg)
{
    if (!(max_area_mm2 > 0.0)) throw InputError("max_area must be positive");
    if (!(min_angle_deg >= 0.0 && min_angle_deg < 34.0)) throw InputError("min_angle must lie in [0, 34) degrees");
    check_simple_polygon(contour);
    Refiner refiner(contour, max_area_mm2, min_angle_deg);
    TriMesh2D mesh = refiner.run();
    mesh.validate();
    return mesh;
}

} // namespace ccm
