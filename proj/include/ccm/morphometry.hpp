#pragma once

#include <ccm/fem.hpp>
#include <ccm/mesh.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace ccm {

/// AC and PC projected into the 2D mid-sagittal frame (millimetres).
struct Landmarks2D {
    Vec2 ac;
    Vec2 pc;

    /// Unit vector from PC towards AC.
    Vec2 anterior_direction() const;
};

/// Anchor placement relative to the AC-PC line. Offsets move the anterior
/// anchor forward from AC (and the posterior anchor backward from PC) along
/// the line, and both anchors along the in-plane normal.
struct EndpointOptions {
    double along_offset_mm = 0.0;
    double normal_offset_mm = 0.0;
};

struct EndpointPair {
    int anterior = -1;  ///< index into the contour passed to find_endpoints
    int posterior = -1;
    bool landmarks_far = false; ///< a landmark lies > 50 mm outside the contour bounding box
};

/// Contour points nearest to the anterior and posterior anchors; ties go to
/// the lower index.
EndpointPair find_endpoints(const Polyline& contour, const Landmarks2D& lm, const EndpointOptions& options = {});

/// Equidistant resampling by arc length. The first and last output points
/// coincide with the first and last input points.
Polyline resample_polyline(const Polyline& line, int count);

/// Outcome of the Laplace midline stage.
struct Midline {
    Polyline line;        ///< n + 2 equidistant points, anterior to posterior
    Polyline raw_line;    ///< the zero level set as extracted
    ScalarField laplace;  ///< f: -1 inferior, +1 superior, 0 at the endpoints
    int anterior_vertex = -1;
    int posterior_vertex = -1;
    /// Per-vertex boundary side: -1 inferior, +1 superior, 0 endpoint,
    /// 2 interior vertex.
    std::vector<std::int8_t> side;
    bool landmarks_far = false;
};

/// Splits the mesh boundary at the endpoints, solves the Laplace problem and
/// extracts its zero level set. Throws NumericError "degenerate midline"
/// when the zero level set is empty or has more than one component.
Midline intercallosal_line(const TriMesh2D& mesh, const Landmarks2D& lm, int n, const EndpointOptions& options = {});

struct ThicknessProfile {
    std::vector<double> positions;     ///< arc-length fractions k / (n + 1)
    std::vector<double> thickness_mm;  ///< NaN where invalid
    std::vector<std::uint8_t> valid;
    std::vector<Polyline> level_paths; ///< empty polyline where invalid
    ScalarField rotated;               ///< g, the harmonic conjugate of f
    double intercallosal_length_mm = 0.0;
    double curvature = 0.0;

    std::size_t size() const { return thickness_mm.size(); }
    double mean_thickness() const;
};

/// Thickness from the level sets of the rotated solution g evaluated at the
/// n interior midline samples. A sample whose level path does not run from
/// the inferior to the superior boundary is marked invalid.
ThicknessProfile thickness_profile(const TriMesh2D& mesh, const Midline& midline);

struct LengthCurvature {
    double length_mm;
    double curvature_per_mm;
};

/// Arc length and mean unsigned discrete curvature (turning angle over the
/// mean adjacent segment length, averaged over interior points).
LengthCurvature length_and_curvature(const Polyline& line);

struct CCIndex {
    double raw = 0.0;
    double normalized = 0.0;
    double chord_length = 0.0;
    std::array<double, 3> cuts{}; ///< anterior, middle (perpendicular), posterior
    std::array<Vec2, 2> chord{};
    bool fallback_cuts = false;   ///< chord never left the structure
};

/// Corpus callosum index of a closed contour. Throws NumericError
/// "index undefined" when the perpendicular bisector misses the structure.
CCIndex cc_index(const Polyline& contour);

/// Slab volume normalised to a fixed left-right width: interior slices count
/// fully, first and last slices are weighted by
/// (width - (n - 2) * spacing) / (2 * spacing).
double corrected_volume(std::span<const double> slice_areas_mm2, double spacing_mm, double width_mm = 5.0);

struct ShapeSummary {
    double area_mm2 = 0.0;
    double perimeter_mm = 0.0;
    double circularity = 0.0;
    double cc_index_raw = 0.0;
    double cc_index_norm = 0.0;
    double volume_mm3 = 0.0;
    double length_mm = 0.0;
    double curvature_per_mm = 0.0;
};

ShapeSummary shape_summary(const TriMesh2D& mesh, const Polyline& contour, const Polyline& line,
                           std::span<const double> slab_areas_mm2, double spacing_mm, double width_mm = 5.0);

double circularity(double area, double perimeter);

/// Intersections of the infinite line o + t d with a closed polygon, returned
/// as sorted (t_in, t_out) intervals where the line runs inside.
std::vector<std::pair<double, double>> line_polygon_intervals(const Polyline& polygon, const Vec2& o, const Vec2& d);

} // namespace ccm
