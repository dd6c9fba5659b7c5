#include <ccm/error.hpp>
#include <ccm/evalstats.hpp>

#include "oracles.hpp"
#include "synthetic.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

using namespace ccm;
using namespace ccm::test;

namespace {

/// Two-sided Student-t p for 3 degrees of freedom in closed form.
double t3_two_sided(double t)
{
    const double x = std::abs(t) / std::sqrt(3.0);
    return 1.0 - 2.0 / std::numbers::pi * (std::atan(x) + x / (1.0 + x * x));
}

} // namespace

TEST(Dice, MatchesCountingOracleOnRandomMasks)
{
    std::mt19937 rng(100);
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = random_blobs(rng), y = random_blobs(rng);
        EXPECT_EQ(dice(x, y), brute_dice(x, y));
        EXPECT_EQ(dice(x, y), dice(y, x));
        EXPECT_EQ(dice(x, x), 1.0);
    }
}

TEST(Dice, HandCountsAndEmptyMasks)
{
    BinaryMask3D w({8, 1, 1}), v({8, 1, 1});
    w.data = {1, 1, 1, 1, 0, 0, 0, 0};
    v.data = {0, 0, 1, 1, 1, 1, 0, 0};
    EXPECT_DOUBLE_EQ(dice(w, v), 0.5);
    BinaryMask3D e1({3, 3, 3}), e2({3, 3, 3}), one({3, 3, 3});
    one.data[0] = 1;
    EXPECT_EQ(dice(e1, e2), 1.0);
    EXPECT_EQ(dice(e1, one), 0.0);
    EXPECT_THROW(dice(e1, w), InputError);
}

TEST(Boundary, SixConnectivity)
{
    std::mt19937 rng(101);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = random_blobs(rng);
        EXPECT_EQ(boundary_voxels(m), brute_boundary(m));
    }
    BinaryMask3D cube({5, 5, 5});
    for (int k = 1; k < 4; ++k)
        for (int j = 1; j < 4; ++j)
            for (int i = 1; i < 4; ++i) cube.at(i, j, k) = 1;
    EXPECT_EQ(boundary_voxels(cube).size(), 26u);
}

TEST(DistanceTransform, MatchesBruteForceAnisotropic)
{
    std::mt19937 rng(102);
    const Vec3 s(0.8, 1.3, 2.1);
    for (int trial = 0; trial < 5; ++trial) {
        BinaryMask3D sites({11, 9, 7}, s);
        for (int n = 0; n < 6; ++n) sites.at(rng() % 11, rng() % 9, rng() % 7) = 1;
        const auto dt = squared_distance_transform(sites);
        for (int k = 0; k < 7; ++k)
            for (int j = 0; j < 9; ++j)
                for (int i = 0; i < 11; ++i) {
                    double best = std::numeric_limits<double>::infinity();
                    for (int c = 0; c < 7; ++c)
                        for (int b = 0; b < 9; ++b)
                            for (int a = 0; a < 11; ++a)
                                if (sites.at(a, b, c)) {
                                    const double dx = (i - a) * s.x(), dy = (j - b) * s.y(), dz = (k - c) * s.z();
                                    best = std::min(best, dx * dx + dy * dy + dz * dz);
                                }
                    EXPECT_NEAR(dt[sites.index(i, j, k)], best, 1e-12 * std::max(1.0, best));
                }
    }
    const auto none = squared_distance_transform(BinaryMask3D({3, 3, 3}));
    EXPECT_TRUE(std::isinf(none[0]));
}

TEST(Hausdorff95, MatchesAllPairsOracleOnRandomMasks)
{
    std::mt19937 rng(103);
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = random_blobs(rng), y = random_blobs(rng);
        EXPECT_EQ(hausdorff95(x, y), brute_hd95(x, y, true)) << trial;
        EXPECT_EQ(hausdorff95(x, y, HausdorffMode::max_directed), brute_hd95(x, y, false)) << trial;
        EXPECT_EQ(hausdorff95(x, y), hausdorff95(y, x));
        EXPECT_EQ(hausdorff95(x, x), 0.0);
    }
}

TEST(Hausdorff95, AnisotropicSpacingAgainstOracle)
{
    std::mt19937 rng(104);
    const Vec3 s(0.8, 0.8, 1.5);
    for (int trial = 0; trial < 10; ++trial) {
        const auto x = random_blobs(rng, s), y = random_blobs(rng, s);
        EXPECT_NEAR(hausdorff95(x, y), brute_hd95(x, y, true), 1e-12);
    }
}

TEST(Hausdorff95, TwoSingleVoxelsAndEmpty)
{
    BinaryMask3D x({8, 3, 3}), y({8, 3, 3});
    x.at(1, 1, 1) = 1;
    y.at(4, 1, 1) = 1;
    EXPECT_EQ(hausdorff95(x, y), 3.0);
    EXPECT_THROW(hausdorff95(x, BinaryMask3D({8, 3, 3})), InputError);
}

TEST(Quantile, NumpyLinearConvention)
{
    EXPECT_EQ(quantile_linear({1, 2, 3, 4}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile_linear({10, 0, 5, 20, 15}, 0.95), 19.0);
    EXPECT_EQ(quantile_linear({7}, 0.95), 7.0);
    EXPECT_EQ(quantile_linear({3, 1, 2}, 1.0), 3.0);
    EXPECT_THROW(quantile_linear({}, 0.5), InputError);
    EXPECT_THROW(quantile_linear({1.0}, 1.5), InputError);
}

TEST(Wilcoxon, ExactSmallSamples)
{
    const std::vector<double> a = {1, 2, 3}, b = {4, 5, 6};
    const auto r = wilcoxon_ranksum(a, b);
    EXPECT_TRUE(r.exact);
    EXPECT_NEAR(r.p, 0.1, 1e-15);
    EXPECT_EQ(r.rank_sum, 6.0);
    EXPECT_EQ(r.u, 0.0);
    EXPECT_EQ(wilcoxon_ranksum(b, a).p, r.p);
    const auto same = wilcoxon_ranksum(a, a);
    EXPECT_EQ(same.p, 1.0);
    // scipy.stats.mannwhitneyu(method="exact") gives 0.41269841...
    const std::vector<double> c = {1, 5, 2, 8}, d = {3, 4, 9, 7, 6};
    EXPECT_NEAR(wilcoxon_ranksum(c, d).p, 26.0 / 63.0, 1e-12);
}

TEST(Wilcoxon, ExactMatchesBruteForceOverRandomTiedSamples)
{
    std::mt19937 rng(105);
    std::uniform_int_distribution<int> val(0, 4);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + trial % 4, m = 2 + (trial / 4) % 5;
        if (n + m > 10) continue;
        std::vector<double> a(n), b(m);
        for (auto& x : a) x = val(rng);
        for (auto& x : b) x = val(rng);
        // Oracle: relabel every split of the pooled sample and compare |W - E W|.
        std::vector<double> pooled = a;
        pooled.insert(pooled.end(), b.begin(), b.end());
        auto rank_sum = [&](const std::vector<int>& pick) {
            double w = 0.0;
            for (int i : pick) {
                double less = 0.0, equal = 0.0;
                for (double y : pooled) {
                    less += y < pooled[i];
                    equal += y == pooled[i];
                }
                w += less + (equal + 1.0) / 2.0;
            }
            return w;
        };
        std::vector<int> first(n);
        std::iota(first.begin(), first.end(), 0);
        const double e = n * (n + m + 1) / 2.0;
        const double obs = std::abs(rank_sum(first) - e);
        std::vector<bool> sel(n + m, false);
        std::fill(sel.begin(), sel.begin() + n, true);
        int hits = 0, total = 0;
        do {
            std::vector<int> pick;
            for (int i = 0; i < n + m; ++i)
                if (sel[i]) pick.push_back(i);
            ++total;
            hits += std::abs(rank_sum(pick) - e) >= obs - 1e-9;
        } while (std::prev_permutation(sel.begin(), sel.end()));
        EXPECT_NEAR(wilcoxon_ranksum(a, b).p, static_cast<double>(hits) / total, 1e-12) << trial;
    }
}

TEST(Wilcoxon, NormalApproximationMatchesReference)
{
    // References: scipy.stats.mannwhitneyu(method="asymptotic", use_continuity=True).
    const std::vector<double> a = {1.1, 2.2, 2.2, 3.5, 4.0, 5.5, 6.1, 7.0}, b = {2.2, 3.5, 8.0, 9.1, 9.5, 10.2, 11.0};
    const auto r = wilcoxon_ranksum(a, b);
    EXPECT_FALSE(r.exact);
    EXPECT_EQ(r.u, 10.5);
    EXPECT_NEAR(r.p, 0.04813101378106178, 1e-12);
    const std::vector<double> c = {3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5}, d = {8, 9, 7, 9, 3, 2, 3, 8, 4, 6};
    const auto s = wilcoxon_ranksum(c, d);
    EXPECT_EQ(s.u, 33.5);
    EXPECT_NEAR(s.p, 0.13623908806553292, 1e-12);
    EXPECT_NEAR(wilcoxon_ranksum(d, c).p, s.p, 1e-15);
}

TEST(Ols, ExactLinearFitAndInterceptOnly)
{
    Eigen::MatrixXd x(5, 2);
    x << 1, 0, 1, 1, 1, 2, 1, 3, 1, 4;
    const Eigen::VectorXd y = 3.0 * Eigen::VectorXd::Ones(5) + 2.0 * x.col(1);
    const auto f = ols_fit(y, x);
    EXPECT_NEAR(f.beta(0), 3.0, 1e-12);
    EXPECT_NEAR(f.beta(1), 2.0, 1e-12);
    EXPECT_LT(f.rss, 1e-18);
    Eigen::VectorXd z(4);
    z << 1, 2, 6, 7;
    const auto g = ols_fit(z, Eigen::MatrixXd::Ones(4, 1));
    EXPECT_NEAR(g.beta(0), 4.0, 1e-15);
    EXPECT_EQ(g.dof, 3);
}

TEST(Ols, SixRowToyMatchesNormalEquationsAndClosedFormT)
{
    Eigen::MatrixXd x(6, 3);
    x << 1, 0, 23, 1, 1, 31, 1, 0, 45, 1, 1, 52, 1, 0, 38, 1, 1, 27;
    Eigen::VectorXd y(6);
    y << 4.1, 3.2, 4.6, 3.5, 4.4, 2.9;
    const auto f = ols_fit(y, x);
    const Eigen::MatrixXd xtx = x.transpose() * x;
    const Eigen::VectorXd beta = xtx.ldlt().solve(x.transpose() * y);
    const Eigen::VectorXd resid = y - x * beta;
    const double sigma2 = resid.squaredNorm() / 3.0;
    const Eigen::MatrixXd cov = sigma2 * xtx.inverse();
    ASSERT_EQ(f.dof, 3);
    for (int j = 0; j < 3; ++j) {
        EXPECT_NEAR(f.beta(j), beta(j), 1e-9);
        const double se = std::sqrt(cov(j, j));
        EXPECT_NEAR(f.se(j), se, 1e-9);
        EXPECT_NEAR(f.p(j), t3_two_sided(beta(j) / se), 1e-6);
    }
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(x.col(j).dot(f.residuals), 0.0, 1e-9);
}

TEST(Ols, ResidualsOrthogonalOnRandomDesigns)
{
    std::mt19937 rng(106);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 12 + trial, p = 1 + trial % 5;
        Eigen::MatrixXd x(n, p);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            x(i, 0) = 1.0;
            for (int j = 1; j < p; ++j) x(i, j) = g(rng) * (j * 10.0);
            y(i) = g(rng);
        }
        const auto f = ols_fit(y, x);
        for (int j = 0; j < p; ++j) EXPECT_NEAR(x.col(j).dot(f.residuals), 0.0, 1e-9 * (1.0 + x.col(j).norm()));
        EXPECT_NEAR(f.rss, f.residuals.squaredNorm(), 1e-12);
    }
}

TEST(Ols, RankDeficientAndTooFewRows)
{
    Eigen::MatrixXd x(4, 3);
    x << 1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8;
    EXPECT_THROW(ols_fit(Eigen::VectorXd::Ones(4), x), NumericError);
    EXPECT_THROW(ols_fit(Eigen::VectorXd::Ones(2), Eigen::MatrixXd::Ones(2, 2)), Error);
}

TEST(StudentT, ClosedFormOddDof)
{
    for (double t : {0.0, 0.3, 1.0, 2.5, 7.0, -4.0}) {
        EXPECT_NEAR(student_t_two_sided(t, 3), t3_two_sided(t), 1e-12);
        // One degree of freedom is the Cauchy distribution.
        EXPECT_NEAR(student_t_two_sided(t, 1), 1.0 - 2.0 / std::numbers::pi * std::atan(std::abs(t)), 1e-12);
    }
}

TEST(BenjaminiHochberg, HandExamplesAndProperties)
{
    const std::vector<double> p = {0.01, 0.02, 0.03, 0.04};
    for (double q : bh_correct(p)) EXPECT_NEAR(q, 0.04, 1e-15);
    const std::vector<double> ones(5, 1.0);
    for (double q : bh_correct(ones)) EXPECT_EQ(q, 1.0);
    const std::vector<double> single = {0.3};
    EXPECT_EQ(bh_correct(single)[0], 0.3);

    std::mt19937 rng(107);
    std::uniform_real_distribution<double> u(0.0, 0.2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> raw(30 + trial);
        for (auto& x : raw) x = u(rng) * u(rng) * 5.0;
        const auto adj = bh_correct(raw);
        const std::size_t m = raw.size();
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return raw[a] < raw[b]; });
        for (std::size_t i = 0; i < m; ++i) {
            double best = 1.0;
            for (std::size_t j = i; j < m; ++j) best = std::min(best, raw[order[j]] * m / (j + 1.0));
            EXPECT_NEAR(adj[order[i]], best, 1e-15);
            EXPECT_GE(adj[order[i]], raw[order[i]]);
            if (i > 0) EXPECT_GE(adj[order[i]], adj[order[i - 1]]);
        }
    }
}

TEST(GroupMap, NullCohortHasNoAdjustedDiscoveries)
{
    test::CohortOptions o;
    o.deficit = 0.0;
    o.seed = 7;
    const auto stats = thickness_group_map(test::synthetic_cohort(o));
    ASSERT_EQ(stats.size(), 100u);
    int raw = 0, adj = 0;
    for (const auto& s : stats) {
        raw += s.p < 0.05;
        adj += s.p_adj < 0.05;
        EXPECT_EQ(s.rows, 200);
    }
    EXPECT_LE(raw, 25);
    EXPECT_EQ(adj, 0);
}

TEST(GroupMap, InjectedDeficitRecovered)
{
    const auto stats = thickness_group_map(test::synthetic_cohort());
    for (const auto& s : stats) {
        if (s.position >= 40 && s.position <= 60) {
            EXPECT_LT(s.p_adj, 0.05) << s.position;
            EXPECT_LT(s.beta, 0.0);
        }
        if (s.position < 38 || s.position > 62) EXPECT_GE(s.p_adj, 0.05) << s.position;
    }
}

TEST(GroupMap, ConstantThicknessGivesZeroEffects)
{
    auto rows = test::synthetic_cohort();
    for (auto& r : rows) std::fill(r.values.begin(), r.values.end(), 5.0);
    for (const auto& s : thickness_group_map(rows)) EXPECT_NEAR(s.beta, 0.0, 1e-12);
}

TEST(GroupMap, MissingSamplesAndInsufficientGroups)
{
    auto rows = test::synthetic_cohort();
    rows[0].values[3] = std::numeric_limits<double>::quiet_NaN();
    rows[5].values[3] = std::numeric_limits<double>::quiet_NaN();
    const auto stats = thickness_group_map(rows);
    EXPECT_EQ(stats[3].rows, 198);
    EXPECT_EQ(stats[4].rows, 200);
    std::vector<GroupRow> one_group(rows.begin(), rows.begin() + 3);
    for (auto& r : one_group) r.patient = false;
    one_group[0].patient = true;
    try {
        thickness_group_map(one_group);
        FAIL() << "expected an error";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("insufficient data"), std::string::npos);
    }
}

TEST(GroupMap, ScalarTestMatchesPositionFit)
{
    const auto rows = test::synthetic_cohort();
    const auto stats = thickness_group_map(rows);
    const auto s = scalar_group_test(rows, 50);
    EXPECT_EQ(s.beta, stats[50].beta);
    EXPECT_EQ(s.p, stats[50].p);
    EXPECT_EQ(s.p_adj, s.p);
}
