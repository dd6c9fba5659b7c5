#include <ccm/error.hpp>
#include <ccm/mask2mesh.hpp>
#include <ccm/morphometry.hpp>
#include <ccm/subsegmentation.hpp>

#include "phantoms.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace ccm;

namespace {

struct Case {
    TriMesh2D mesh;
    Landmarks2D lm;
    Polyline midline;
};

Case make_case(const Polyline& contour, const Landmarks2D& lm, double max_area)
{
    Case c{triangulate(contour, max_area), lm, {}};
    c.midline = intercallosal_line(c.mesh, lm, 100).line;
    return c;
}

const Case& rectangle()
{
    static const Case c = make_case(test::rectangle_contour(20.0, 3.0, 0.1), test::rectangle_landmarks(20.0, 3.0), 0.01);
    return c;
}

double total(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

} // namespace

TEST(Schemes, NamesRoundTrip)
{
    for (SchemeKind k : all_schemes()) EXPECT_EQ(scheme_from_string(to_string(k)), k);
    EXPECT_THROW(scheme_from_string("bogus"), InputError);
    EXPECT_EQ(all_schemes().size(), 6u);
}

TEST(Schemes, ValidateFractions)
{
    EXPECT_NO_THROW(default_scheme(SchemeKind::witelson).validate());
    EXPECT_THROW((SubsegScheme{SchemeKind::witelson, {0.5, 0.3}}).validate(), InputError);
    EXPECT_THROW((SubsegScheme{SchemeKind::witelson, {0.0, 0.3}}).validate(), InputError);
    EXPECT_THROW((SubsegScheme{SchemeKind::witelson, {0.3, 1.0}}).validate(), InputError);
    EXPECT_THROW((SubsegScheme{SchemeKind::witelson, {0.3, 0.3}}).validate(), InputError);
    EXPECT_THROW((SubsegScheme{SchemeKind::witelson, {}}).validate(), InputError);
}

TEST(Subsegment, AreasSumToMeshAreaOnRandomArches)
{
    std::mt19937 rng(20);
    for (int trial = 0; trial < 10; ++trial) {
        const auto ph = test::random_arch(rng);
        const Case c = make_case(ph.contour, ph.landmarks, 0.5);
        const double area = c.mesh.area();
        for (SchemeKind k : all_schemes()) {
            const SubsegResult r = subsegment(c.mesh, default_scheme(k), c.lm, c.midline);
            ASSERT_EQ(r.segment_areas_mm2.size(), 5u);
            EXPECT_NEAR(total(r.segment_areas_mm2), area, 1e-9 * area) << to_string(k) << " trial " << trial;
            ASSERT_EQ(r.triangle_labels.size(), c.mesh.num_triangles());
            for (int l : r.triangle_labels) {
                EXPECT_GE(l, 0);
                EXPECT_LT(l, 5);
            }
            for (double a : r.segment_areas_mm2) EXPECT_GE(a, 0.0);
        }
    }
}

TEST(Subsegment, CentroidLabelsApproximateClippedAreas)
{
    std::mt19937 rng(21);
    const auto ph = test::random_arch(rng);
    const Case c = make_case(ph.contour, ph.landmarks, 0.05);
    for (SchemeKind k : all_schemes()) {
        const SubsegResult r = subsegment(c.mesh, default_scheme(k), c.lm, c.midline);
        std::vector<double> by_label(5, 0.0);
        for (std::size_t t = 0; t < c.mesh.num_triangles(); ++t) by_label[r.triangle_labels[t]] += c.mesh.triangle_area(t);
        for (int s = 0; s < 5; ++s) {
            EXPECT_NEAR(by_label[s], r.segment_areas_mm2[s], 0.02 * c.mesh.area()) << to_string(k) << " segment " << s;
        }
    }
}

TEST(Subsegment, RectangleShapeAwareProportions)
{
    const Case& c = rectangle();
    const SubsegResult r = subsegment(c.mesh, default_scheme(SchemeKind::shape_aware), c.lm, c.midline);
    const std::array<double, 5> expected = {1.0 / 6, 1.0 / 3, 1.0 / 6, 1.0 / 12, 1.0 / 4};
    for (int s = 0; s < 5; ++s) EXPECT_NEAR(r.segment_areas_mm2[s] / 60.0, expected[s], 0.005 * expected[s]) << s;
    EXPECT_EQ(r.cuts.size(), 4u);
}

TEST(Subsegment, RectangleEigendirectionEqualAreas)
{
    const Case& c = rectangle();
    const SubsegResult r = subsegment(c.mesh, default_scheme(SchemeKind::eigendirection), c.lm, c.midline);
    for (double a : r.segment_areas_mm2) EXPECT_NEAR(a, 12.0, 1e-9 * 12.0);
}

TEST(Subsegment, RectangleStraightCutSchemes)
{
    const Case& c = rectangle();
    for (SchemeKind k : {SchemeKind::witelson, SchemeKind::jancke, SchemeKind::hofer_frahm}) {
        const auto f = default_fractions(k);
        const SubsegResult r = subsegment(c.mesh, default_scheme(k), c.lm, c.midline);
        std::vector<double> bounds = {0.0};
        bounds.insert(bounds.end(), f.begin(), f.end());
        bounds.push_back(1.0);
        for (int s = 0; s < 5; ++s) EXPECT_NEAR(r.segment_areas_mm2[s], 60.0 * (bounds[s + 1] - bounds[s]), 1e-9 * 60.0);
    }
}

TEST(Subsegment, HampelSymmetricOnSymmetricShape)
{
    const Case c = make_case(test::half_annulus_contour(10.0, 14.0, 0.2), {{12.0, -1.0}, {-12.0, -1.0}}, 0.1);
    const SubsegResult r = subsegment(c.mesh, default_scheme(SchemeKind::hampel), c.lm, c.midline);
    EXPECT_NEAR(r.segment_areas_mm2[0], r.segment_areas_mm2[4], 1e-9 * c.mesh.area());
    EXPECT_NEAR(r.segment_areas_mm2[1], r.segment_areas_mm2[3], 1e-9 * c.mesh.area());
    // Rays from the bottom-edge midpoint (the common centre) cut equal sectors.
    for (double a : r.segment_areas_mm2) EXPECT_NEAR(a, c.mesh.area() / 5.0, 1e-3 * c.mesh.area());
}

TEST(Subsegment, SchemeCountFollowsFractions)
{
    const Case& c = rectangle();
    const SubsegResult r = subsegment(c.mesh, {SchemeKind::witelson, {0.5}}, c.lm, c.midline);
    ASSERT_EQ(r.segment_areas_mm2.size(), 2u);
    EXPECT_NEAR(r.segment_areas_mm2[0], 30.0, 1e-9 * 30.0);
    EXPECT_THROW(subsegment(c.mesh, {SchemeKind::jancke, {}}, c.lm, c.midline), InputError);
}
