#include <ccm/error.hpp>
#include <ccm/evalstats.hpp>
#include <ccm/geometry.hpp>
#include <ccm/io.hpp>
#include <ccm/mask2mesh.hpp>
#include <ccm/morphometry.hpp>
#include <ccm/nifti.hpp>
#include <ccm/phantom.hpp>
#include <ccm/pipeline.hpp>
#include <ccm/subsegmentation.hpp>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

namespace py = pybind11;
using namespace ccm;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8F = py::array_t<std::uint8_t, py::array::f_style | py::array::forcecast>;
using F64F = py::array_t<double, py::array::f_style | py::array::forcecast>;

Vec2 vec2(const std::array<double, 2>& a) { return {a[0], a[1]}; }

Polyline polyline_from(const F64& pts, bool closed)
{
    if (pts.ndim() != 2 || pts.shape(1) != 2) throw InputError("expected an (N, 2) array of points");
    Polyline line;
    line.closed = closed;
    const auto r = pts.unchecked<2>();
    for (py::ssize_t i = 0; i < r.shape(0); ++i) line.points.emplace_back(r(i, 0), r(i, 1));
    return line;
}

py::array_t<double> points_array(const std::vector<Vec2>& pts)
{
    py::array_t<double> out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        w(static_cast<py::ssize_t>(i), 0) = pts[i].x();
        w(static_cast<py::ssize_t>(i), 1) = pts[i].y();
    }
    return out;
}

py::array_t<int> triangles_array(const TriMesh2D& mesh)
{
    py::array_t<int> out({static_cast<py::ssize_t>(mesh.num_triangles()), py::ssize_t{3}});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
        for (int k = 0; k < 3; ++k) w(static_cast<py::ssize_t>(t), k) = mesh.triangles[t][k];
    return out;
}

BinaryMask3D mask3d(const U8F& a, const std::array<double, 3>& spacing)
{
    if (a.ndim() != 3) throw InputError("expected a 3D mask");
    BinaryMask3D m({static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))},
                   Vec3(spacing[0], spacing[1], spacing[2]));
    const std::uint8_t* p = a.data();
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = p[i] != 0;
    return m;
}

py::array_t<double> volume_array(const Volume& v)
{
    py::array_t<double, py::array::f_style> out({v.dims[0], v.dims[1], v.dims[2]});
    std::copy(v.data.begin(), v.data.end(), out.mutable_data());
    return out;
}

Volume volume_from(const F64F& a, const Mat4& affine, DataType type)
{
    if (a.ndim() != 3) throw InputError("expected a 3D array");
    Volume v({static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))}, type);
    std::copy(a.data(), a.data() + v.data.size(), v.data.begin());
    v.affine = affine;
    for (int c = 0; c < 3; ++c) v.voxel_size[c] = affine.block<3, 1>(0, c).norm();
    v.validate();
    return v;
}

py::dict analyze_contour(const F64& contour, std::array<double, 2> ac, std::array<double, 2> pc, int samples,
                         double max_area, double min_angle)
{
    const Polyline c = polyline_from(contour, true);
    const Landmarks2D lm{vec2(ac), vec2(pc)};
    TriMesh2D mesh;
    Midline mid;
    ThicknessProfile prof;
    std::vector<SubsegResult> subseg;
    {
        py::gil_scoped_release release;
        mesh = triangulate(c, max_area, min_angle);
        mid = intercallosal_line(mesh, lm, samples);
        prof = thickness_profile(mesh, mid);
        for (SchemeKind k : all_schemes()) subseg.push_back(subsegment(mesh, default_scheme(k), lm, mid.line));
    }
    py::dict d;
    d["vertices"] = points_array(mesh.vertices);
    d["triangles"] = triangles_array(mesh);
    d["midline"] = points_array(mid.line.points);
    d["laplace"] = py::array_t<double>(static_cast<py::ssize_t>(mid.laplace.size()), mid.laplace.data());
    d["positions"] = py::array_t<double>(static_cast<py::ssize_t>(prof.size()), prof.positions.data());
    d["thickness_mm"] = py::array_t<double>(static_cast<py::ssize_t>(prof.size()), prof.thickness_mm.data());
    d["length_mm"] = prof.intercallosal_length_mm;
    d["curvature_per_mm"] = prof.curvature;
    d["area_mm2"] = mesh.area();
    d["circularity"] = circularity(c.signed_area(), c.length());
    py::dict areas;
    for (const auto& s : subseg) areas[py::str(std::string(to_string(s.kind)))] = s.segment_areas_mm2;
    d["subseg_areas_mm2"] = areas;
    return d;
}

py::tuple mask_to_mesh_py(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& mask,
                          std::array<double, 2> pixel, double sigma, double iso, double max_area)
{
    if (mask.ndim() != 2) throw InputError("expected a 2D mask indexed [row, column]");
    Mask2D m(static_cast<int>(mask.shape(1)), static_cast<int>(mask.shape(0)), vec2(pixel));
    std::copy(mask.data(), mask.data() + m.data.size(), m.data.begin());
    for (auto& v : m.data) v = v != 0;
    MeshingOptions opt;
    opt.sigma_mm = sigma;
    opt.iso = iso;
    opt.max_area_mm2 = max_area;
    Polyline contour;
    TriMesh2D mesh;
    {
        py::gil_scoped_release release;
        mesh = mask_to_mesh(m, opt, &contour);
    }
    return py::make_tuple(points_array(mesh.vertices), triangles_array(mesh), points_array(contour.points));
}

Mat4 kabsch_py(const F64& src, const F64& dst)
{
    auto cloud = [](const F64& a) {
        if (a.ndim() != 2 || a.shape(1) != 3) throw InputError("expected an (N, 3) array of points");
        std::vector<Vec3> out;
        const auto r = a.unchecked<2>();
        for (py::ssize_t i = 0; i < r.shape(0); ++i) out.emplace_back(r(i, 0), r(i, 1), r(i, 2));
        return out;
    };
    return kabsch_rigid(cloud(src), cloud(dst)).matrix();
}

py::dict group_map_py(const std::vector<bool>& patient, const std::vector<double>& age, const std::vector<bool>& male,
                      const std::vector<double>& brain_volume, const F64& values)
{
    const std::size_t n = patient.size();
    if (age.size() != n || male.size() != n || brain_volume.size() != n || values.ndim() != 2 ||
        static_cast<std::size_t>(values.shape(0)) != n) {
        throw InputError("group map inputs must all have one entry per subject");
    }
    std::vector<GroupRow> rows(n);
    const auto v = values.unchecked<2>();
    for (std::size_t s = 0; s < n; ++s) {
        rows[s].id = std::to_string(s);
        rows[s].patient = patient[s];
        rows[s].age = age[s];
        rows[s].male = male[s];
        rows[s].brain_volume = brain_volume[s];
        for (py::ssize_t k = 0; k < v.shape(1); ++k) rows[s].values.push_back(v(static_cast<py::ssize_t>(s), k));
    }
    const auto stats = thickness_group_map(rows);
    std::vector<double> beta, p, p_adj;
    std::vector<int> used;
    for (const auto& st : stats) {
        beta.push_back(st.beta);
        p.push_back(st.p);
        p_adj.push_back(st.p_adj);
        used.push_back(st.rows);
    }
    py::dict d;
    d["beta"] = py::array_t<double>(static_cast<py::ssize_t>(beta.size()), beta.data());
    d["p"] = py::array_t<double>(static_cast<py::ssize_t>(p.size()), p.data());
    d["p_adj"] = py::array_t<double>(static_cast<py::ssize_t>(p_adj.size()), p_adj.data());
    d["rows"] = py::array_t<int>(static_cast<py::ssize_t>(used.size()), used.data());
    return d;
}

Stage stage_from_string(const std::string& name)
{
    for (int s = 0; s <= static_cast<int>(Stage::outputs); ++s)
        if (to_string(static_cast<Stage>(s)) == name) return static_cast<Stage>(s);
    throw InputError("unknown stage '" + name + "'");
}

py::dict run_case_py(const std::string& id, const std::filesystem::path& labels, const std::filesystem::path& landmarks,
                     const std::filesystem::path& out, std::optional<std::filesystem::path> plane,
                     std::optional<std::filesystem::path> template_labels,
                     std::optional<std::filesystem::path> template_plane, std::optional<std::string> config,
                     const std::map<std::string, std::string>& overrides, const std::string& last)
{
    RunConfig cfg = config ? RunConfig::parse(*config) : RunConfig{};
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    CaseSpec spec;
    spec.id = id;
    spec.labels = labels;
    spec.landmarks = landmarks;
    spec.output_dir = out;
    if (plane) spec.plane = *plane;
    if (template_labels) spec.template_labels = *template_labels;
    if (template_plane) spec.template_plane = *template_plane;
    const Stage stop = stage_from_string(last);
    CaseOutcome o;
    {
        py::gil_scoped_release release;
        o = run_case(spec, cfg, stop);
    }
    py::dict d;
    d["id"] = o.id;
    d["exit_code"] = o.exit_code;
    d["failed_stage"] = o.failed_stage ? py::object(py::str(std::string(to_string(*o.failed_stage)))) : py::object(py::none());
    d["message"] = o.message;
    d["warnings"] = o.warnings;
    return d;
}

py::dict phantom_py(std::array<int, 3> dims, double voxel)
{
    PhantomOptions opt;
    opt.dims = dims;
    opt.voxel_mm = voxel;
    const Phantom ph = make_phantom(opt);
    py::dict d;
    d["labels"] = volume_array(ph.labels);
    d["affine"] = ph.labels.affine;
    d["ac"] = ph.landmarks.ac;
    d["pc"] = ph.landmarks.pc;
    d["normal"] = ph.plane.normal;
    d["offset"] = ph.plane.offset;
    return d;
}

} // namespace

PYBIND11_MODULE(ccmorph, m)
{
    m.doc() = "Corpus callosum mid-sagittal morphometry";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def("analyze_contour", &analyze_contour, py::arg("contour"), py::arg("ac"), py::arg("pc"), py::arg("samples") = 100,
          py::arg("max_area") = 0.25, py::arg("min_angle") = 20.0,
          "Mesh a closed counter-clockwise contour and compute midline, thickness profile and sub-segment areas.");
    m.def("mask_to_mesh", &mask_to_mesh_py, py::arg("mask"), py::arg("pixel_size") = std::array<double, 2>{1.0, 1.0},
          py::arg("sigma") = -1.0, py::arg("iso") = 0.5, py::arg("max_area") = 0.25,
          "Smooth, contour and triangulate a 2D mask indexed [row, column]. Returns (vertices, triangles, contour).");
    m.def("kabsch", &kabsch_py, py::arg("src"), py::arg("dst"), "Rigid 4x4 transform mapping src points onto dst.");
    m.def(
        "dice",
        [](const U8F& x, const U8F& y) {
            return dice(mask3d(x, {1, 1, 1}), mask3d(y, {1, 1, 1}));
        },
        py::arg("x"), py::arg("y"));
    m.def(
        "hausdorff95",
        [](const U8F& x, const U8F& y, std::array<double, 3> spacing, const std::string& mode) {
            if (mode != "pooled" && mode != "max_directed") throw InputError("mode must be pooled or max_directed");
            return hausdorff95(mask3d(x, spacing), mask3d(y, spacing),
                               mode == "pooled" ? HausdorffMode::pooled : HausdorffMode::max_directed);
        },
        py::arg("x"), py::arg("y"), py::arg("spacing") = std::array<double, 3>{1, 1, 1}, py::arg("mode") = "pooled");
    m.def(
        "wilcoxon_ranksum",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            const auto r = wilcoxon_ranksum(a, b);
            py::dict d;
            d["rank_sum"] = r.rank_sum;
            d["u"] = r.u;
            d["z"] = r.z;
            d["p"] = r.p;
            d["exact"] = r.exact;
            return d;
        },
        py::arg("a"), py::arg("b"));
    m.def("bh_correct", [](const std::vector<double>& p) { return bh_correct(p); }, py::arg("p"));
    m.def("group_map", &group_map_py, py::arg("patient"), py::arg("age"), py::arg("male"), py::arg("brain_volume"),
          py::arg("values"), "Per-position group effect with BH-adjusted p-values.");
    m.def("cc_index", [](const F64& contour) { return cc_index(polyline_from(contour, true)).raw; }, py::arg("contour"));
    m.def("corrected_volume", [](const std::vector<double>& areas, double spacing) { return corrected_volume(areas, spacing); },
          py::arg("slice_areas"), py::arg("spacing"));
    m.def("make_phantom", &phantom_py, py::arg("dims") = std::array<int, 3>{64, 128, 128}, py::arg("voxel") = 1.0);
    m.def(
        "load_volume",
        [](const std::filesystem::path& p) {
            const Volume v = load_volume(p);
            return py::make_tuple(volume_array(v), v.affine);
        },
        py::arg("path"), "Returns (array indexed [i, j, k], 4x4 affine).");
    m.def(
        "save_labels",
        [](const F64F& a, const Mat4& affine, const std::filesystem::path& p) {
            save_volume(volume_from(a, affine, DataType::int16), p);
        },
        py::arg("labels"), py::arg("affine"), py::arg("path"));
    m.def("run_case", &run_case_py, py::arg("id"), py::arg("labels"), py::arg("landmarks"), py::arg("out"),
          py::arg("plane") = py::none(), py::arg("template_labels") = py::none(), py::arg("template_plane") = py::none(),
          py::arg("config") = py::none(), py::arg("overrides") = std::map<std::string, std::string>{},
          py::arg("last") = "subseg", "Run the per-case pipeline, writing outputs into `out`.");
}
