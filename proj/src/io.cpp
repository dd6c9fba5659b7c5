#include <ccm/error.hpp>
#include <ccm/io.hpp>

#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>
#include <thread>

namespace ccm::io {

namespace fs = std::filesystem;

std::string format_number(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_file_atomic(const fs::path& path, std::string_view content)
{
    static std::atomic<unsigned> counter{0};
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp" + std::to_string(counter.fetch_add(1)) + "." +
                         std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("cannot move output into place: '" + path.string() + "'");
    }
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

Vec3 vec3_from_json(const Json& j, const char* what)
{
    if (!j.is_array() || j.size() != 3) throw InputError(std::string(what) + " must be an array of 3 numbers");
    Vec3 v;
    for (int k = 0; k < 3; ++k) {
        if (!j[k].is_number()) throw InputError(std::string(what) + " must be an array of 3 numbers");
        v[k] = j[k].get<double>();
    }
    return v;
}

Json parse_json_file(const fs::path& path)
{
    const std::string text = read_file(path);
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InputError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

} // namespace

Landmarks read_landmarks(const fs::path& path)
{
    const Json j = parse_json_file(path);
    if (!j.is_object() || !j.contains("ac") || !j.contains("pc")) {
        throw InputError("'" + path.string() + "' must contain \"ac\" and \"pc\"");
    }
    Landmarks lm{vec3_from_json(j["ac"], "ac"), vec3_from_json(j["pc"], "pc")};
    lm.validate();
    return lm;
}

Json landmarks_to_json(const Landmarks& lm)
{
    return Json{{"ac", {lm.ac.x(), lm.ac.y(), lm.ac.z()}}, {"pc", {lm.pc.x(), lm.pc.y(), lm.pc.z()}}};
}

Json plane_to_json(const Plane& plane)
{
    return Json{{"normal", {plane.normal.x(), plane.normal.y(), plane.normal.z()}}, {"offset", plane.offset}};
}

Plane plane_from_json(const Json& j)
{
    if (j.is_object() && j.contains("normal")) {
        if (!j.contains("offset") || !j["offset"].is_number()) throw InputError("plane needs a numeric \"offset\"");
        return Plane(vec3_from_json(j["normal"], "normal"), j["offset"].get<double>());
    }
    if (j.is_object() && j.contains("matrix")) return Plane::from_transform(transform_from_json(j));
    throw InputError("plane must be {\"normal\": [...], \"offset\": o} or a 4x4 \"matrix\"");
}

Plane read_plane(const fs::path& path)
{
    return plane_from_json(parse_json_file(path));
}

Json transform_to_json(const RigidTransform& t)
{
    const Mat4 m = t.matrix();
    Json rows = Json::array();
    for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
    return Json{{"matrix", rows}};
}

RigidTransform transform_from_json(const Json& j)
{
    const Json& rows = j.is_object() && j.contains("matrix") ? j["matrix"] : j;
    if (!rows.is_array() || rows.size() != 4) throw InputError("transform matrix must have 4 rows");
    Mat4 m;
    for (int r = 0; r < 4; ++r) {
        if (!rows[r].is_array() || rows[r].size() != 4) throw InputError("transform matrix rows must have 4 entries");
        for (int c = 0; c < 4; ++c) {
            if (!rows[r][c].is_number()) throw InputError("transform matrix entries must be numbers");
            m(r, c) = rows[r][c].get<double>();
        }
    }
    return RigidTransform::from_matrix(m);
}

std::string polyline_csv(const Polyline& line)
{
    std::string out = "point,x,y\n";
    for (std::size_t i = 0; i < line.points.size(); ++i) {
        out += std::to_string(i) + "," + format_number(line.points[i].x()) + "," + format_number(line.points[i].y()) + "\n";
    }
    return out;
}

std::string polylines_csv(const std::vector<Polyline>& lines)
{
    std::string out = "path_id,point,x,y\n";
    for (std::size_t k = 0; k < lines.size(); ++k) {
        for (std::size_t i = 0; i < lines[k].points.size(); ++i) {
            const Vec2& p = lines[k].points[i];
            out += std::to_string(k) + "," + std::to_string(i) + "," + format_number(p.x()) + "," + format_number(p.y()) + "\n";
        }
    }
    return out;
}

std::string profile_csv(const ThicknessProfile& profile)
{
    std::string out = "position_fraction,thickness_mm\n";
    for (std::size_t k = 0; k < profile.size(); ++k) {
        out += format_number(profile.positions[k]) + "," + format_number(profile.thickness_mm[k]) + "\n";
    }
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_number(std::string_view text, std::string_view what)
{
    if (text == "nan" || text == "NaN" || text.empty()) return std::nan("");
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw InputError("cannot parse " + std::string(what) + " '" + std::string(text) + "' as a number");
    }
    return v;
}

std::vector<double> read_profile_csv(const fs::path& path)
{
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw InputError("'" + path.string() + "' is empty");
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split_csv_line(line);
        if (cells.size() < 2) throw InputError("'" + path.string() + "': expected position_fraction,thickness_mm");
        values.push_back(parse_number(cells[1], "thickness"));
    }
    return values;
}

std::string subseg_csv(const std::vector<SubsegResult>& results)
{
    std::string out = "scheme,segment_id,area_mm2\n";
    for (const auto& r : results) {
        for (std::size_t k = 0; k < r.segment_areas_mm2.size(); ++k) {
            out += std::string(to_string(r.kind)) + "," + std::to_string(k) + "," + format_number(r.segment_areas_mm2[k]) + "\n";
        }
    }
    return out;
}

std::string triangle_labels_csv(const std::vector<SubsegResult>& results, std::size_t triangles)
{
    std::string out = "triangle";
    for (const auto& r : results) out += "," + std::string(to_string(r.kind));
    out += "\n";
    for (std::size_t t = 0; t < triangles; ++t) {
        out += std::to_string(t);
        for (const auto& r : results) out += "," + std::to_string(r.triangle_labels[t]);
        out += "\n";
    }
    return out;
}

std::string vertex_fields_csv(const TriMesh2D& mesh, const std::vector<std::pair<std::string, const ScalarField*>>& fields)
{
    std::string out = "vertex,x,y";
    for (const auto& f : fields) out += "," + f.first;
    out += "\n";
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
        out += std::to_string(v) + "," + format_number(mesh.vertices[v].x()) + "," + format_number(mesh.vertices[v].y());
        for (const auto& f : fields) out += "," + format_number((*f.second)[v]);
        out += "\n";
    }
    return out;
}

std::string mesh_off(const TriMesh2D& mesh)
{
    std::string out = "OFF\n" + std::to_string(mesh.num_vertices()) + " " + std::to_string(mesh.num_triangles()) + " 0\n";
    for (const auto& v : mesh.vertices) out += format_number(v.x()) + " " + format_number(v.y()) + " 0\n";
    for (const auto& t : mesh.triangles) {
        out += "3 " + std::to_string(t[0]) + " " + std::to_string(t[1]) + " " + std::to_string(t[2]) + "\n";
    }
    return out;
}

Json summary_to_json(const ShapeSummary& s)
{
    return Json{{"area_mm2", s.area_mm2},
                {"perimeter_mm", s.perimeter_mm},
                {"circularity", s.circularity},
                {"cc_index_raw", s.cc_index_raw},
                {"cc_index_norm", s.cc_index_norm},
                {"volume_mm3", s.volume_mm3},
                {"length_mm", s.length_mm},
                {"curvature_per_mm", s.curvature_per_mm}};
}

std::string group_map_csv(const std::vector<PositionStat>& stats)
{
    std::string out = "# encoding: group patient=1 control=0; sex male=1 female=0; beta is the group coefficient\n";
    out += "position,beta,p,p_adj,rows\n";
    for (const auto& s : stats) {
        out += std::to_string(s.position) + "," + format_number(s.beta) + "," + format_number(s.p) + "," +
               format_number(s.p_adj) + "," + std::to_string(s.rows) + "\n";
    }
    return out;
}

} // namespace ccm::io
