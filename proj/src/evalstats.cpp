#include <ccm/error.hpp>
#include <ccm/evalstats.hpp>

#include <Eigen/QR>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

namespace ccm {

BinaryMask3D::BinaryMask3D(std::array<int, 3> d, Vec3 spacing) : dims(d), voxel_size(spacing)
{
    for (int v : d)
        if (v <= 0) throw InputError("mask dims must be positive");
    data.assign(static_cast<std::size_t>(d[0]) * d[1] * d[2], 0);
}

std::size_t BinaryMask3D::count() const
{
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

BinaryMask3D BinaryMask3D::from_volume(const Volume& vol, int label)
{
    BinaryMask3D m(vol.dims, vol.voxel_size);
    for (std::size_t i = 0; i < vol.data.size(); ++i) {
        m.data[i] = label < 0 ? vol.data[i] != 0.0 : vol.data[i] == label;
    }
    return m;
}

namespace {

void require_same_grid(const BinaryMask3D& x, const BinaryMask3D& y)
{
    if (x.dims != y.dims) throw InputError("masks have different dimensions");
    if ((x.voxel_size - y.voxel_size).cwiseAbs().maxCoeff() > 1e-6) throw InputError("masks have different voxel sizes");
}

// Lower envelope of parabolas (Felzenszwalb-Huttenlocher) along one line.
void edt_1d(const double* f, double* out, int n, std::ptrdiff_t stride, double w, std::vector<int>& v,
            std::vector<double>& z, std::vector<double>& buf)
{
    constexpr double kInf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) buf[i] = f[i * stride];
    const double w2 = w * w;
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (buf[q] == kInf) continue;
        if (k < 0) {
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            k = 0;
            continue;
        }
        double s = 0.0;
        while (true) {
            const int p = v[k];
            s = ((buf[q] + w2 * q * q) - (buf[p] + w2 * p * p)) / (2.0 * w2 * (q - p));
            if (s > z[k]) break;
            --k; // z[0] is -inf, so k stays >= 0
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    if (k < 0) {
        for (int i = 0; i < n; ++i) out[i * stride] = kInf;
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double d = w * (q - v[j]);
        out[q * stride] = d * d + buf[v[j]];
    }
}

} // namespace

double dice(const BinaryMask3D& x, const BinaryMask3D& y)
{
    require_same_grid(x, y);
    std::size_t nx = 0, ny = 0, both = 0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        nx += x.data[i];
        ny += y.data[i];
        both += x.data[i] & y.data[i];
    }
    if (nx + ny == 0) {
        warn("dice: both masks are empty, returning 1");
        return 1.0;
    }
    return 2.0 * static_cast<double>(both) / static_cast<double>(nx + ny);
}

std::vector<std::array<int, 3>> boundary_voxels(const BinaryMask3D& m)
{
    std::vector<std::array<int, 3>> out;
    const auto& d = m.dims;
    for (int k = 0; k < d[2]; ++k) {
        for (int j = 0; j < d[1]; ++j) {
            for (int i = 0; i < d[0]; ++i) {
                if (!m.at(i, j, k)) continue;
                const bool edge = i == 0 || j == 0 || k == 0 || i == d[0] - 1 || j == d[1] - 1 || k == d[2] - 1 ||
                                  !m.at(i - 1, j, k) || !m.at(i + 1, j, k) || !m.at(i, j - 1, k) ||
                                  !m.at(i, j + 1, k) || !m.at(i, j, k - 1) || !m.at(i, j, k + 1);
                if (edge) out.push_back({i, j, k});
            }
        }
    }
    return out;
}

std::vector<double> squared_distance_transform(const BinaryMask3D& sites)
{
    const auto& d = sites.dims;
    std::vector<double> f(sites.data.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = sites.data[i] ? 0.0 : std::numeric_limits<double>::infinity();
    const int longest = std::max({d[0], d[1], d[2]});
    std::vector<int> v(longest);
    std::vector<double> z(longest + 1), buf(longest);
    const std::ptrdiff_t sx = 1, sy = d[0], sz = static_cast<std::ptrdiff_t>(d[0]) * d[1];
    for (int k = 0; k < d[2]; ++k)
        for (int j = 0; j < d[1]; ++j) {
            double* line = f.data() + j * sy + k * sz;
            edt_1d(line, line, d[0], sx, sites.voxel_size[0], v, z, buf);
        }
    for (int k = 0; k < d[2]; ++k)
        for (int i = 0; i < d[0]; ++i) {
            double* line = f.data() + i + k * sz;
            edt_1d(line, line, d[1], sy, sites.voxel_size[1], v, z, buf);
        }
    for (int j = 0; j < d[1]; ++j)
        for (int i = 0; i < d[0]; ++i) {
            double* line = f.data() + i + j * sy;
            edt_1d(line, line, d[2], sz, sites.voxel_size[2], v, z, buf);
        }
    return f;
}

double quantile_linear(std::vector<double> values, double q)
{
    if (values.empty()) throw InputError("quantile of an empty set");
    if (!(q >= 0.0 && q <= 1.0)) throw InputError("quantile must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double hausdorff95(const BinaryMask3D& x, const BinaryMask3D& y, HausdorffMode mode)
{
    require_same_grid(x, y);
    const auto bx = boundary_voxels(x);
    const auto by = boundary_voxels(y);
    if (bx.empty() || by.empty()) throw InputError("hausdorff95: empty mask");

    auto directed = [&](const std::vector<std::array<int, 3>>& from, const std::vector<std::array<int, 3>>& to) {
        BinaryMask3D sites(x.dims, x.voxel_size);
        for (const auto& p : to) sites.at(p[0], p[1], p[2]) = 1;
        const auto dt = squared_distance_transform(sites);
        std::vector<double> out;
        out.reserve(from.size());
        for (const auto& p : from) out.push_back(std::sqrt(dt[sites.index(p[0], p[1], p[2])]));
        return out;
    };
    auto dxy = directed(bx, by);
    auto dyx = directed(by, bx);
    if (mode == HausdorffMode::max_directed) {
        return std::max(quantile_linear(std::move(dxy), 0.95), quantile_linear(std::move(dyx), 0.95));
    }
    dxy.insert(dxy.end(), dyx.begin(), dyx.end());
    return quantile_linear(std::move(dxy), 0.95);
}

namespace {

std::vector<double> midranks(const std::vector<double>& v)
{
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = rank;
        i = j + 1;
    }
    return r;
}

} // namespace

RankSumResult wilcoxon_ranksum(std::span<const double> a, std::span<const double> b)
{
    if (a.empty() || b.empty()) throw InputError("rank-sum test needs two non-empty samples");
    std::vector<double> all(a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    for (double v : all)
        if (!std::isfinite(v)) throw InputError("rank-sum test: non-finite value");
    const auto ranks = midranks(all);
    const std::size_t n = a.size(), m = b.size(), total = n + m;

    RankSumResult res;
    res.rank_sum = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(n), 0.0);
    res.u = res.rank_sum - 0.5 * static_cast<double>(n * (n + 1));
    const double expected = 0.5 * static_cast<double>(n) * static_cast<double>(total + 1);
    const double observed = std::abs(res.rank_sum - expected);

    if (total <= 10) {
        res.exact = true;
        std::size_t hits = 0, count = 0;
        for (unsigned mask = 0; mask < (1u << total); ++mask) {
            if (static_cast<std::size_t>(std::popcount(mask)) != n) continue;
            double s = 0.0;
            for (std::size_t i = 0; i < total; ++i)
                if (mask & (1u << i)) s += ranks[i];
            ++count;
            if (std::abs(s - expected) >= observed - 1e-9) ++hits;
        }
        res.p = static_cast<double>(hits) / static_cast<double>(count);
        return res;
    }

    std::vector<double> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    double ties = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        ties += t * t * t - t;
        i = j;
    }
    const double nn = static_cast<double>(n), mm = static_cast<double>(m), N = static_cast<double>(total);
    const double var = nn * mm / 12.0 * ((N + 1.0) - ties / (N * (N - 1.0)));
    if (!(var > 0.0)) {
        res.p = 1.0;
        return res;
    }
    const double mu = 0.5 * nn * mm;
    const double dev = std::max(0.0, std::abs(res.u - mu) - 0.5);
    res.z = std::copysign(dev / std::sqrt(var), res.u - mu);
    res.p = std::min(1.0, std::erfc(dev / std::sqrt(var) / std::sqrt(2.0)));
    return res;
}

double student_t_two_sided(double t, int dof)
{
    if (dof <= 0) throw InputError("degrees of freedom must be positive");
    if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
    if (std::isinf(t)) return 0.0;
    const boost::math::students_t_distribution<double> dist(dof);
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

OlsResult ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& design)
{
    const auto n = design.rows();
    const auto p = design.cols();
    if (y.size() != n) throw InputError("response length does not match design rows");
    if (p == 0) throw InputError("design has no columns");
    if (!y.allFinite() || !design.allFinite()) throw InputError("non-finite value in regression input");
    if (n <= p) throw InputError("not enough observations for the design (" + std::to_string(n) + " rows, " + std::to_string(p) + " columns)");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw NumericError("rank-deficient design");

    OlsResult res;
    res.beta = qr.solve(y);
    res.residuals = y - design * res.beta;
    res.rss = res.residuals.squaredNorm();
    res.dof = static_cast<int>(n - p);
    const double sigma2 = res.rss / res.dof;

    const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd rinv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd cov_perm = rinv * rinv.transpose();
    const auto perm = qr.colsPermutation();
    const Eigen::MatrixXd cov = perm * cov_perm * perm.transpose();

    res.se.resize(p);
    res.t.resize(p);
    res.p.resize(p);
    const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
    for (Eigen::Index k = 0; k < p; ++k) {
        res.se[k] = std::sqrt(std::max(0.0, sigma2 * cov(k, k)));
        if (res.se[k] > 0.0) {
            res.t[k] = res.beta[k] / res.se[k];
            res.p[k] = student_t_two_sided(res.t[k], res.dof);
        } else {
            const bool zero = std::abs(res.beta[k]) <= 1e-12 * scale;
            res.t[k] = zero ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), res.beta[k]);
            res.p[k] = zero ? 1.0 : 0.0;
        }
    }
    return res;
}

std::vector<double> bh_correct(std::span<const double> p)
{
    const std::size_t m = p.size();
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0)) throw InputError("p-values must lie in [0, 1]");
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::vector<double> adj(m);
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        const std::size_t i = order[r];
        running = std::min(running, p[i] * static_cast<double>(m) / static_cast<double>(r + 1));
        adj[i] = std::min(1.0, running);
    }
    return adj;
}

namespace {

void check_groups(const std::vector<GroupRow>& rows)
{
    std::size_t patients = 0, controls = 0;
    for (const auto& r : rows) (r.patient ? patients : controls) += 1;
    if (patients < 2 || controls < 2) {
        throw InputError("insufficient data: need at least 2 cases per group (patients " + std::to_string(patients) +
                         ", controls " + std::to_string(controls) + ")");
    }
}

PositionStat fit_position(const std::vector<GroupRow>& rows, std::size_t column)
{
    std::vector<const GroupRow*> used;
    for (const auto& r : rows) {
        if (column >= r.values.size()) throw InputError("row '" + r.id + "' has too few values");
        if (std::isfinite(r.values[column]) && std::isfinite(r.age) && std::isfinite(r.brain_volume)) used.push_back(&r);
    }
    PositionStat st;
    st.position = static_cast<int>(column);
    st.rows = static_cast<int>(used.size());

    const auto n = static_cast<Eigen::Index>(used.size());
    std::vector<Eigen::VectorXd> cols;
    auto column_of = [&](auto get) {
        Eigen::VectorXd c(n);
        for (Eigen::Index i = 0; i < n; ++i) c[i] = get(*used[i]);
        return c;
    };
    const Eigen::VectorXd group = column_of([](const GroupRow& r) { return r.patient ? 1.0 : 0.0; });
    if (n < 3 || group.minCoeff() == group.maxCoeff()) {
        st.beta = std::numeric_limits<double>::quiet_NaN();
        st.p = 1.0;
        return st;
    }
    cols.push_back(Eigen::VectorXd::Ones(n));
    cols.push_back(group);
    for (const auto& c : {column_of([](const GroupRow& r) { return r.age; }),
                          column_of([](const GroupRow& r) { return r.male ? 1.0 : 0.0; }),
                          column_of([](const GroupRow& r) { return r.brain_volume; })}) {
        if (c.maxCoeff() > c.minCoeff()) cols.push_back(c);
    }
    while (static_cast<Eigen::Index>(cols.size()) >= n) cols.pop_back();
    Eigen::MatrixXd design(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) design.col(static_cast<Eigen::Index>(c)) = cols[c];
    const Eigen::VectorXd y = column_of([&](const GroupRow& r) { return r.values[column]; });

    const OlsResult fit = ols_fit(y, design);
    st.beta = fit.beta[1];
    st.p = fit.p[1];
    return st;
}

} // namespace

std::vector<PositionStat> thickness_group_map(const std::vector<GroupRow>& rows)
{
    check_groups(rows);
    const std::size_t positions = rows.front().values.size();
    for (const auto& r : rows)
        if (r.values.size() != positions) throw InputError("thickness vectors differ in length");
    std::vector<PositionStat> out;
    out.reserve(positions);
    std::vector<double> p;
    for (std::size_t k = 0; k < positions; ++k) {
        out.push_back(fit_position(rows, k));
        p.push_back(out.back().p);
    }
    const auto adj = bh_correct(p);
    for (std::size_t k = 0; k < positions; ++k) out[k].p_adj = adj[k];
    return out;
}

PositionStat scalar_group_test(const std::vector<GroupRow>& rows, std::size_t column)
{
    check_groups(rows);
    PositionStat st = fit_position(rows, column);
    st.p_adj = st.p;
    return st;
}

} // namespace ccm
