#include <ccm/io.hpp>
#include <ccm/svg.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace ccm::svg {

namespace {

struct Frame {
    double xmin, ymax, scale, margin;

    std::string pt(const Vec2& p) const
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3f,%.3f", margin + (p.x() - xmin) * scale, margin + (ymax - p.y()) * scale);
        return buf;
    }
};

Frame fit(const std::vector<Vec2>& pts, double width_px, double& height_px)
{
    Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
    Vec2 hi = -lo;
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    if (pts.empty()) lo = hi = Vec2::Zero();
    const double margin = 20.0;
    const double span_x = std::max(hi.x() - lo.x(), 1e-9);
    const double scale = (width_px - 2 * margin) / span_x;
    height_px = std::max(hi.y() - lo.y(), 1e-9) * scale + 2 * margin;
    return {lo.x(), hi.y(), scale, margin};
}

std::string path_points(const Frame& f, const Polyline& line)
{
    std::string out;
    for (const auto& p : line.points) out += f.pt(p) + " ";
    if (!out.empty()) out.pop_back();
    return out;
}

std::string header(double w, double h)
{
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n"
                  "<rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n",
                  w, h, w, h);
    return buf;
}

} // namespace

std::string case_figure(const TriMesh2D& mesh, const Polyline& midline, const ThicknessProfile& profile,
                        const SubsegResult* subseg)
{
    double h = 0.0;
    const double w = 800.0;
    const Frame f = fit(mesh.vertices, w, h);
    std::string out = header(w, h);
    out += "<g id=\"mesh\" fill=\"#f2f2f2\" stroke=\"#c8c8c8\" stroke-width=\"0.3\">\n";
    for (const auto& t : mesh.triangles) {
        out += "<polygon points=\"" + f.pt(mesh.vertices[t[0]]) + " " + f.pt(mesh.vertices[t[1]]) + " " +
               f.pt(mesh.vertices[t[2]]) + "\"/>\n";
    }
    out += "</g>\n";
    out += "<polygon id=\"boundary\" fill=\"none\" stroke=\"black\" stroke-width=\"1.2\" points=\"" +
           path_points(f, mesh.boundary_polyline()) + "\"/>\n";
    out += "<g id=\"levelpaths\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"0.8\">\n";
    for (std::size_t k = 0; k < profile.level_paths.size(); ++k) {
        if (profile.level_paths[k].points.empty()) continue;
        out += "<polyline data-position=\"" + std::to_string(k) + "\" points=\"" + path_points(f, profile.level_paths[k]) + "\"/>\n";
    }
    out += "</g>\n";
    if (subseg) {
        out += "<g id=\"cuts\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"1.5\" data-scheme=\"" +
               std::string(to_string(subseg->kind)) + "\">\n";
        for (const auto& c : subseg->cuts) {
            if (c.points.size() >= 2) out += "<polyline points=\"" + path_points(f, c) + "\"/>\n";
        }
        out += "</g>\n";
    }
    out += "<polyline id=\"midline\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" points=\"" +
           path_points(f, midline) + "\"/>\n";
    out += "</svg>\n";
    return out;
}

std::string pvalue_color(double p_adj, double alpha)
{
    if (!(p_adj < alpha)) return "#bdbdbd";
    // -log10 p from alpha (yellow) to 1e-6 (red)
    const double lo = -std::log10(alpha);
    const double t = std::clamp((-std::log10(std::max(p_adj, 1e-300)) - lo) / (6.0 - lo), 0.0, 1.0);
    const int g = static_cast<int>(std::lround(220.0 * (1.0 - t)));
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", 255, g, 0);
    return buf;
}

std::string pmap_figure(const std::vector<Polyline>& template_paths, const std::vector<PositionStat>& stats,
                        const std::vector<std::pair<std::string, PositionStat>>& measures)
{
    std::vector<Vec2> pts;
    for (const auto& p : template_paths) pts.insert(pts.end(), p.points.begin(), p.points.end());
    double h = 0.0;
    const double w = 800.0;
    const Frame f = fit(pts, w, h);
    const double table_h = 40.0 + 18.0 * static_cast<double>(measures.size());
    std::string out = header(w, h + table_h);
    out += "<g id=\"pmap\" fill=\"none\" stroke-width=\"3\">\n";
    for (std::size_t k = 0; k < template_paths.size() && k < stats.size(); ++k) {
        if (template_paths[k].points.empty()) continue;
        out += "<polyline data-position=\"" + std::to_string(stats[k].position) + "\" data-p-adj=\"" +
               io::format_number(stats[k].p_adj) + "\" stroke=\"" + pvalue_color(stats[k].p_adj) + "\" points=\"" +
               path_points(f, template_paths[k]) + "\"/>\n";
    }
    out += "</g>\n";
    char buf[256];
    double y = h + 20.0;
    out += "<g id=\"effects\" font-family=\"monospace\" font-size=\"12\">\n";
    std::snprintf(buf, sizeof buf, "<text x=\"20\" y=\"%.0f\">%-22s %12s %12s</text>\n", y, "measure", "beta", "p");
    out += buf;
    for (const auto& [name, st] : measures) {
        y += 18.0;
        std::snprintf(buf, sizeof buf, "<text x=\"20\" y=\"%.0f\" fill=\"%s\">%-22s %12.4g %12.4g</text>\n", y,
                      st.p < 0.05 ? "#d62728" : "black", name.c_str(), st.beta, st.p);
        out += buf;
    }
    out += "</g>\n</svg>\n";
    return out;
}

} // namespace ccm::svg
