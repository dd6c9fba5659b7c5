#pragma once

#include <ccm/evalstats.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace ccm::test {

struct CohortOptions {
    int subjects = 200;        ///< half patients, half controls
    int positions = 100;
    int deficit_first = 40;    ///< inclusive position range thinned in patients
    int deficit_last = 60;
    double deficit = 0.20;     ///< relative thickness loss inside the band
    double smooth_sd = 0.08;   ///< relative amplitude of subject-level smooth variation
    double point_sd = 0.03;    ///< relative per-position measurement noise
    unsigned seed = 42;
};

/// Group table with a known effect: a typical callosal profile (thick
/// genu and splenium, thin body), scaled per subject by brain volume, age
/// and sex, perturbed by a few random low-frequency modes per subject and
/// thinned by `deficit` in the band for patients only.
inline std::vector<GroupRow> synthetic_cohort(const CohortOptions& o = {})
{
    std::mt19937 rng(o.seed);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<GroupRow> rows;
    rows.reserve(static_cast<std::size_t>(o.subjects));
    for (int s = 0; s < o.subjects; ++s) {
        GroupRow r;
        r.id = "s" + std::to_string(s);
        r.patient = s % 2 == 1;
        r.age = 45.0 + 15.0 * g(rng);
        r.male = u(rng) < 0.5;
        r.brain_volume = 1.15e6 + (r.male ? 0.1e6 : 0.0) + 0.08e6 * g(rng);
        const double scale = 1.0 + 0.3 * (r.brain_volume / 1.2e6 - 1.0) - 0.002 * (r.age - 45.0);
        std::array<double, 4> amp{}, phase{};
        for (int m = 0; m < 4; ++m) {
            amp[m] = o.smooth_sd * g(rng) / (m + 1);
            phase[m] = 2.0 * std::numbers::pi * u(rng);
        }
        for (int k = 0; k < o.positions; ++k) {
            const double x = (k + 1.0) / (o.positions + 1.0);
            const double base = 4.0 + 4.0 * std::pow(std::cos(std::numbers::pi * x), 2);
            double smooth = 0.0;
            for (int m = 0; m < 4; ++m) smooth += amp[m] * std::sin(std::numbers::pi * (m + 1) * x + phase[m]);
            double v = base * scale * (1.0 + smooth) * (1.0 + o.point_sd * g(rng));
            if (r.patient && k >= o.deficit_first && k <= o.deficit_last) v *= 1.0 - o.deficit;
            r.values.push_back(v);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace ccm::test
