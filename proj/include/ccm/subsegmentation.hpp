#pragma once

#include <ccm/mesh.hpp>
#include <ccm/morphometry.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ccm {

enum class SchemeKind { witelson, jancke, hofer_frahm, hampel, eigendirection, shape_aware };

std::string_view to_string(SchemeKind kind);
/// Throws InputError for unknown names.
SchemeKind scheme_from_string(std::string_view name);
const std::vector<SchemeKind>& all_schemes();

/// Cut positions as fractions of the anchor extent (for hampel: of the 180
/// degree ray fan). A scheme with k fractions yields k + 1 segments.
struct SubsegScheme {
    SchemeKind kind = SchemeKind::hofer_frahm;
    std::vector<double> fractions;

    std::size_t segment_count() const { return fractions.size() + 1; }
    /// Throws InputError unless fractions are strictly increasing in (0, 1).
    void validate() const;
};

std::vector<double> default_fractions(SchemeKind kind);
SubsegScheme default_scheme(SchemeKind kind);

struct SubsegResult {
    SchemeKind kind = SchemeKind::hofer_frahm;
    std::vector<int> triangle_labels;        ///< by triangle centroid
    std::vector<double> segment_areas_mm2;   ///< exact clipped areas
    std::vector<Polyline> cuts;              ///< cut segments for display
};

/// Partitions the mesh into anterior-to-posterior segments (hampel:
/// posterior-to-anterior ray order).
///
/// Straight-cut schemes cut perpendicular to an anchor direction: witelson
/// and hofer_frahm use the chord between the midline endpoints, jancke the
/// AC-PC line, eigendirection the principal axis of the area. Hampel uses
/// equal-angle rays from the midpoint of the bottom edge of the bounding
/// rectangle in the AC-PC frame. Shape-aware cuts run perpendicular to the
/// midline at the given arc-length fractions, out to the boundary.
SubsegResult subsegment(const TriMesh2D& mesh, const SubsegScheme& scheme, const Landmarks2D& lm,
                        const Polyline& midline);

} // namespace ccm
