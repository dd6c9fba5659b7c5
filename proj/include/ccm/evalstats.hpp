#pragma once

#include <ccm/geometry.hpp>

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ccm {

struct BinaryMask3D {
    std::array<int, 3> dims{0, 0, 0};
    Vec3 voxel_size = Vec3::Ones();
    std::vector<std::uint8_t> data; ///< x-fastest, values 0 or 1

    BinaryMask3D() = default;
    BinaryMask3D(std::array<int, 3> d, Vec3 spacing = Vec3::Ones());

    std::size_t index(int i, int j, int k) const
    {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
    }
    std::uint8_t at(int i, int j, int k) const { return data[index(i, j, k)]; }
    std::uint8_t& at(int i, int j, int k) { return data[index(i, j, k)]; }
    std::size_t count() const;

    /// Foreground = voxels equal to `label`, or any non-zero voxel if label < 0.
    static BinaryMask3D from_volume(const Volume& vol, int label = -1);
};

/// 2|X n Y| / (|X| + |Y|). Two empty masks give 1 with a warning.
double dice(const BinaryMask3D& x, const BinaryMask3D& y);

/// Foreground voxels with a background (or out-of-grid) 6-neighbour.
std::vector<std::array<int, 3>> boundary_voxels(const BinaryMask3D& m);

/// Exact squared Euclidean distance (mm^2) from every voxel to the nearest
/// site voxel, with anisotropic spacing. No sites gives +inf everywhere.
std::vector<double> squared_distance_transform(const BinaryMask3D& sites);

/// Linear-interpolated quantile (q in [0, 1]) of unsorted values.
double quantile_linear(std::vector<double> values, double q);

enum class HausdorffMode {
    pooled,       ///< one 95th percentile over both directed distance sets
    max_directed, ///< larger of the two directed 95th percentiles
};

/// 95th percentile boundary distance in mm. Throws InputError if either mask
/// is empty.
double hausdorff95(const BinaryMask3D& x, const BinaryMask3D& y, HausdorffMode mode = HausdorffMode::pooled);

struct RankSumResult {
    double rank_sum = 0.0; ///< sum of the midranks of the first sample
    double u = 0.0;        ///< Mann-Whitney U of the first sample
    double z = 0.0;        ///< normal score (0 when exact)
    double p = 1.0;        ///< two-sided
    bool exact = false;
};

/// Exact enumeration when the combined size is at most 10, otherwise the
/// normal approximation with tie and continuity corrections.
RankSumResult wilcoxon_ranksum(std::span<const double> a, std::span<const double> b);

struct OlsResult {
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    Eigen::VectorXd t;
    Eigen::VectorXd p;
    Eigen::VectorXd residuals;
    double rss = 0.0;
    int dof = 0;
};

/// Least squares by column-pivoted QR with Student-t inference. Throws
/// NumericError for a rank-deficient design and InputError when there are
/// no residual degrees of freedom.
OlsResult ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& design);

/// Two-sided Student-t p-value.
double student_t_two_sided(double t, int dof);

/// Benjamini-Hochberg adjusted p-values in input order.
std::vector<double> bh_correct(std::span<const double> p);

struct GroupRow {
    std::string id;
    bool patient = false;
    double age = 0.0;
    bool male = false;
    double brain_volume = 0.0;
    std::vector<double> values; ///< one per position; NaN marks a missing sample
};

struct PositionStat {
    int position = 0;
    double beta = 0.0; ///< group (patient = 1) coefficient
    double p = 1.0;
    double p_adj = 1.0;
    int rows = 0;      ///< observations used
};

/// Per-position OLS of value ~ 1 + group + age + sex + brain volume, group
/// p-values BH-corrected across positions. Covariates that are constant
/// over the fitted rows are dropped. Throws InputError "insufficient data"
/// with fewer than two cases in either group.
std::vector<PositionStat> thickness_group_map(const std::vector<GroupRow>& rows);

/// OLS of a single scalar per row against the same design.
PositionStat scalar_group_test(const std::vector<GroupRow>& rows, std::size_t column = 0);

} // namespace ccm
