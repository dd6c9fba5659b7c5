#pragma once

#include <ccm/evalstats.hpp>
#include <ccm/geometry.hpp>
#include <ccm/mesh.hpp>
#include <ccm/morphometry.hpp>
#include <ccm/subsegmentation.hpp>

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ccm::io {

using Json = nlohmann::ordered_json;

/// Shortest decimal that round-trips; "nan", "inf", "-inf" otherwise.
std::string format_number(double v);

/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// {"ac": [x, y, z], "pc": [x, y, z]} in world millimetres.
Landmarks read_landmarks(const std::filesystem::path& path);
Json landmarks_to_json(const Landmarks& lm);

Json plane_to_json(const Plane& plane);
/// Accepts {"normal": [...], "offset": o} or {"matrix": 4x4 row-major}.
Plane plane_from_json(const Json& j);
Plane read_plane(const std::filesystem::path& path);
Json transform_to_json(const RigidTransform& t);
RigidTransform transform_from_json(const Json& j);

std::string polyline_csv(const Polyline& line);
/// path_id,point,x,y for several paths; invalid (empty) paths are skipped.
std::string polylines_csv(const std::vector<Polyline>& lines);
std::string profile_csv(const ThicknessProfile& profile);
std::vector<double> read_profile_csv(const std::filesystem::path& path);
std::string subseg_csv(const std::vector<SubsegResult>& results);
std::string triangle_labels_csv(const std::vector<SubsegResult>& results, std::size_t triangles);
/// vertex,x,y,<name>... one column per field.
std::string vertex_fields_csv(const TriMesh2D& mesh, const std::vector<std::pair<std::string, const ScalarField*>>& fields);
std::string mesh_off(const TriMesh2D& mesh);
Json summary_to_json(const ShapeSummary& s);
std::string group_map_csv(const std::vector<PositionStat>& stats);

/// Comma-split without quoting; trims surrounding whitespace of each cell.
std::vector<std::string> split_csv_line(const std::string& line);
/// Strict number parse; throws InputError naming `what` on failure.
double parse_number(std::string_view text, std::string_view what);

} // namespace ccm::io
