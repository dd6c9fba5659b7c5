#pragma once

#include <ccm/evalstats.hpp>
#include <ccm/mesh.hpp>
#include <ccm/morphometry.hpp>
#include <ccm/subsegmentation.hpp>

#include <string>
#include <utility>
#include <vector>

namespace ccm::svg {

/// Mesh, intercallosal line, thickness level paths and the cuts of one
/// sub-segmentation (if given). Superior is drawn upwards.
std::string case_figure(const TriMesh2D& mesh, const Polyline& midline, const ThicknessProfile& profile,
                        const SubsegResult* subseg = nullptr);

/// Colour for an adjusted p-value: grey at or above alpha, yellow to red
/// with decreasing p below.
std::string pvalue_color(double p_adj, double alpha = 0.05);

/// Template paths coloured by adjusted p (one path per position, each
/// carrying a data-position attribute) above a table of per-measure effects.
std::string pmap_figure(const std::vector<Polyline>& template_paths, const std::vector<PositionStat>& stats,
                        const std::vector<std::pair<std::string, PositionStat>>& measures);

} // namespace ccm::svg
