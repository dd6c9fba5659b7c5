#include <ccm/error.hpp>
#include <ccm/io.hpp>
#include <ccm/mask2mesh.hpp>
#include <ccm/nifti.hpp>
#include <ccm/pipeline.hpp>
#include <ccm/svg.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace ccm {

namespace fs = std::filesystem;

std::string_view to_string(Stage stage)
{
    switch (stage) {
    case Stage::config: return "config";
    case Stage::inputs: return "inputs";
    case Stage::landmarks: return "landmarks";
    case Stage::midplane: return "midplane";
    case Stage::slab: return "slab";
    case Stage::mesh: return "mesh";
    case Stage::midline: return "midline";
    case Stage::thickness: return "thickness";
    case Stage::morphometry: return "morphometry";
    case Stage::subseg: return "subseg";
    case Stage::outputs: return "outputs";
    }
    return "unknown";
}

namespace {

// Background thread that writes (path, content) pairs in submission order.
class AsyncWriter {
public:
    AsyncWriter() : worker_([this] { loop(); }) {}
    ~AsyncWriter()
    {
        try {
            finish();
        } catch (...) {
        }
    }

    void submit(fs::path path, std::string content)
    {
        {
            std::lock_guard lock(mutex_);
            queue_.emplace_back(std::move(path), std::move(content));
        }
        cv_.notify_one();
    }

    /// Waits for pending writes; rethrows the first write error.
    void finish()
    {
        {
            std::lock_guard lock(mutex_);
            if (done_) return;
            done_ = true;
        }
        cv_.notify_one();
        worker_.join();
        if (error_) std::rethrow_exception(error_);
    }

private:
    void loop()
    {
        while (true) {
            std::pair<fs::path, std::string> job;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [&] { return done_ || !queue_.empty(); });
                if (queue_.empty()) return;
                job = std::move(queue_.front());
                queue_.pop_front();
            }
            if (error_) continue;
            try {
                io::write_file_atomic(job.first, job.second);
            } catch (...) {
                error_ = std::current_exception();
            }
        }
    }

    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::pair<fs::path, std::string>> queue_;
    bool done_ = false;
    std::exception_ptr error_;
    std::thread worker_;
};

bool reached(Stage stage, Stage last) { return static_cast<int>(stage) <= static_cast<int>(last); }

double slab_spacing(const Volume& vol, const RunConfig& cfg)
{
    return cfg.slab_spacing_mm > 0.0 ? cfg.slab_spacing_mm : vol.voxel_size.minCoeff();
}

Mask2D slab_mask(const Volume& slab, int slice, const std::vector<int>& labels)
{
    const double s = slab.voxel_size[1];
    Mask2D mask(slab.dims[1], slab.dims[2], {s, slab.voxel_size[2]});
    for (int k = 0; k < slab.dims[2]; ++k) {
        for (int j = 0; j < slab.dims[1]; ++j) {
            const double v = slab.at(slice, j, k);
            mask.at(j, k) = std::find(labels.begin(), labels.end(), static_cast<int>(v)) != labels.end() && v != 0.0;
        }
    }
    return mask;
}

Vec2 to_slab_plane(const Volume& slab, const Vec3& world)
{
    const Vec3 q = slab.world_to_voxel(world);
    return {q[1] * slab.voxel_size[1], q[2] * slab.voxel_size[2]};
}

struct Clock {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double lap()
    {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - start).count();
        start = now;
        return s;
    }
};

// Stage runner shared by the in-memory and the file-based entry points.
class CaseRunner {
public:
    CaseRunner(const RunConfig& cfg, Stage last) : cfg_(cfg), last_(last) {}

    std::function<void(Stage, const CaseResult&)> on_stage;
    std::vector<StageTiming> timings;
    Stage current = Stage::config;

    bool step(Stage stage, CaseResult& r, const std::function<void()>& body)
    {
        if (stage != Stage::outputs && !reached(stage, last_)) return false;
        current = stage;
        Clock clock;
        body();
        timings.push_back({stage, clock.lap()});
        if (on_stage) on_stage(stage, r);
        return true;
    }

    void from_slab(CaseResult& r, const Landmarks& lm)
    {
        const int centre = (r.slab.dims[0] - 1) / 2;
        const double area_px = r.slab.voxel_size[1] * r.slab.voxel_size[2];
        const bool ok = step(Stage::mesh, r, [&] {
            r.landmarks = {to_slab_plane(r.slab, lm.ac), to_slab_plane(r.slab, lm.pc)};
            r.slab_areas_mm2.clear();
            for (int i = 0; i < r.slab.dims[0]; ++i) {
                const Mask2D m = slab_mask(r.slab, i, cfg_.cc_labels);
                r.slab_areas_mm2.push_back(static_cast<double>(std::count(m.data.begin(), m.data.end(), 1)) * area_px);
            }
            const Mask2D mask = slab_mask(r.slab, centre, cfg_.cc_labels);
            if (std::find(mask.data.begin(), mask.data.end(), 1) == mask.data.end()) {
                throw InputError("no callosum labels on the mid-sagittal slice");
            }
            r.mesh = mask_to_mesh(mask, cfg_.meshing, &r.contour);
        });
        if (!ok) return;
        if (!step(Stage::midline, r, [&] {
                r.midline = intercallosal_line(r.mesh, r.landmarks, cfg_.samples, cfg_.endpoints);
                if (r.midline.landmarks_far) warn("landmarks lie more than 50 mm outside the callosum bounding box");
            }))
            return;
        if (!step(Stage::thickness, r, [&] { r.profile = thickness_profile(r.mesh, r.midline); })) return;
        if (!step(Stage::morphometry, r, [&] {
                r.summary = shape_summary(r.mesh, r.contour, r.midline.line, r.slab_areas_mm2, r.slab.voxel_size[0],
                                          cfg_.slab_width_mm);
                r.cc_index = cc_index(r.contour);
            }))
            return;
        step(Stage::subseg, r, [&] {
            r.subseg.clear();
            for (const auto& scheme : cfg_.schemes) {
                r.subseg.push_back(subsegment(r.mesh, scheme, r.landmarks, r.midline.line));
            }
        });
    }

private:
    const RunConfig& cfg_;
    Stage last_;
};

CaseResult analyze(const Volume& labels, const Plane& plane, const Landmarks& lm, const RunConfig& cfg, Stage last)
{
    CaseResult r;
    r.plane = plane;
    CaseRunner runner(cfg, last);
    runner.step(Stage::slab, r, [&] {
        r.slab = resample_slab(labels, plane, cfg.slab_width_mm, slab_spacing(labels, cfg), Interpolation::nearest);
    });
    runner.from_slab(r, lm);
    return r;
}

} // namespace

CaseResult analyze_volume(const Volume& labels, const Plane& plane, const Landmarks& landmarks, const RunConfig& cfg,
                          Stage last)
{
    cfg.validate();
    landmarks.validate();
    return analyze(labels, plane, landmarks, cfg, last);
}

CaseResult analyze_slab(const Volume& slab, const Landmarks& landmarks, const RunConfig& cfg, Stage last)
{
    cfg.validate();
    landmarks.validate();
    slab.validate();
    CaseResult r;
    r.slab = slab;
    const Vec3 n = slab.affine.block<3, 1>(0, 0).normalized();
    const Vec3 centre = slab.voxel_to_world(Vec3(0.5 * (slab.dims[0] - 1), 0, 0));
    r.plane = Plane(n, n.dot(centre));
    CaseRunner runner(cfg, last);
    runner.from_slab(r, landmarks);
    return r;
}

namespace {

io::Json status_json(const CaseOutcome& o)
{
    io::Json stages = io::Json::array();
    for (const auto& t : o.timings) stages.push_back({{"stage", to_string(t.stage)}, {"status", "ok"}, {"seconds", t.seconds}});
    if (o.failed_stage) stages.push_back({{"stage", to_string(*o.failed_stage)}, {"status", "failed"}, {"message", o.message}});
    return io::Json{{"id", o.id},
                    {"status", o.exit_code == 0 ? "ok" : "failed"},
                    {"exit_code", o.exit_code},
                    {"failed_stage", o.failed_stage ? io::Json(to_string(*o.failed_stage)) : io::Json(nullptr)},
                    {"message", o.message},
                    {"warnings", o.warnings},
                    {"stages", stages}};
}

void queue_stage_outputs(AsyncWriter& writer, const fs::path& dir, const CaseSpec& spec, const RunConfig& cfg, Stage stage,
                         const CaseResult& r)
{
    switch (stage) {
    case Stage::midplane: {
        io::Json j = io::plane_to_json(r.plane);
        if (r.to_template) j["to_template"] = io::transform_to_json(*r.to_template)["matrix"];
        writer.submit(dir / "plane.json", j.dump(2) + "\n");
        break;
    }
    case Stage::slab:
        if (cfg.write_slab) {
            // NIfTI writing goes through a temporary path of its own.
            const fs::path tmp = dir / "slab_labels.nii.gz.tmp";
            save_volume(r.slab, tmp);
            fs::rename(tmp, dir / "slab_labels.nii.gz");
        }
        break;
    case Stage::mesh:
        writer.submit(dir / "contour.csv", io::polyline_csv(r.contour));
        writer.submit(dir / "mesh.off", io::mesh_off(r.mesh));
        break;
    case Stage::midline:
        writer.submit(dir / "midline.csv", io::polyline_csv(r.midline.line));
        break;
    case Stage::thickness:
        writer.submit(dir / "thickness.csv", io::profile_csv(r.profile));
        writer.submit(dir / "levelpaths.csv", io::polylines_csv(r.profile.level_paths));
        if (cfg.write_fields) {
            writer.submit(dir / "fields.csv",
                          io::vertex_fields_csv(r.mesh, {{"laplace", &r.midline.laplace}, {"rotated", &r.profile.rotated}}));
        }
        break;
    case Stage::morphometry: {
        io::Json j{{"id", spec.id}};
        const io::Json shape = io::summary_to_json(r.summary);
        for (const auto& [k, v] : shape.items()) j[k] = v;
        j["mean_thickness_mm"] = r.profile.mean_thickness();
        j["valid_samples"] = std::count(r.profile.valid.begin(), r.profile.valid.end(), 1);
        j["samples"] = r.profile.size();
        j["landmarks_far"] = r.midline.landmarks_far;
        j["cc_index_detail"] = {{"chord_length_mm", r.cc_index.chord_length},
                                {"cuts_mm", {r.cc_index.cuts[0], r.cc_index.cuts[1], r.cc_index.cuts[2]}},
                                {"fallback_cuts", r.cc_index.fallback_cuts}};
        j["slab"] = {{"slices", r.slab.dims[0]}, {"spacing_mm", r.slab.voxel_size[0]}, {"areas_mm2", r.slab_areas_mm2}};
        writer.submit(dir / "summary.json", j.dump(2) + "\n");
        break;
    }
    case Stage::subseg: {
        writer.submit(dir / "subseg.csv", io::subseg_csv(r.subseg));
        writer.submit(dir / "subseg_labels.csv", io::triangle_labels_csv(r.subseg, r.mesh.num_triangles()));
        break;
    }
    default: break;
    }
}

} // namespace

CaseOutcome run_case(const CaseSpec& spec, const RunConfig& cfg, Stage last)
{
    CaseOutcome outcome;
    outcome.id = spec.id;
    const fs::path dir = spec.output_dir;
    const WarningCapture capture;

    CaseResult r;
    CaseRunner runner(cfg, last);
    std::optional<AsyncWriter> writer;
    try {
        runner.step(Stage::config, r, [&] {
            if (spec.id.empty()) throw InputError("case id is empty");
            cfg.validate();
            fs::create_directories(dir);
            writer.emplace();
            writer->submit(dir / "config.toml", cfg.to_text());
        });
        runner.on_stage = [&](Stage s, const CaseResult& res) { queue_stage_outputs(*writer, dir, spec, cfg, s, res); };

        Volume labels;
        Landmarks lm;
        runner.step(Stage::inputs, r, [&] {
            if (spec.labels.empty()) throw InputError("no label volume given");
            labels = load_volume(spec.labels);
            labels.validate();
        });
        runner.step(Stage::landmarks, r, [&] {
            if (spec.landmarks.empty()) throw InputError("no landmark file given");
            if (!fs::exists(spec.landmarks)) throw InputError("landmark file '" + spec.landmarks.string() + "' does not exist");
            lm = io::read_landmarks(spec.landmarks);
        });
        runner.step(Stage::midplane, r, [&] {
            if (!spec.plane.empty()) {
                r.plane = io::read_plane(spec.plane);
            } else if (!spec.template_labels.empty() && !spec.template_plane.empty()) {
                const Volume templ = load_volume(spec.template_labels);
                const auto est = midsagittal_plane(labels, templ, io::read_plane(spec.template_plane), cfg.registration_labels);
                r.plane = est.plane;
                r.to_template = est.to_template;
            } else {
                throw InputError("neither a plane nor a template segmentation with plane was given");
            }
        });
        runner.step(Stage::slab, r, [&] {
            r.slab = resample_slab(labels, r.plane, cfg.slab_width_mm, slab_spacing(labels, cfg), Interpolation::nearest);
        });
        runner.from_slab(r, lm);
        runner.step(Stage::outputs, r, [&] {
            if (cfg.write_svg && reached(Stage::thickness, last)) {
                const SubsegResult* cuts = nullptr;
                for (const auto& s : r.subseg)
                    if (s.kind == SchemeKind::shape_aware) cuts = &s;
                writer->submit(dir / "case.svg", svg::case_figure(r.mesh, r.midline.line, r.profile, cuts));
            }
            writer->finish();
        });
    } catch (const InputError& e) {
        outcome.exit_code = 2;
        outcome.failed_stage = runner.current;
        outcome.message = e.what();
    } catch (const std::exception& e) {
        outcome.exit_code = 1;
        outcome.failed_stage = runner.current;
        outcome.message = e.what();
    }
    if (writer) {
        try {
            writer->finish();
        } catch (const std::exception& e) {
            if (outcome.exit_code == 0) {
                outcome.exit_code = 1;
                outcome.failed_stage = Stage::outputs;
                outcome.message = e.what();
            }
        }
    }
    outcome.timings = runner.timings;
    outcome.warnings = capture.messages();
    try {
        fs::create_directories(dir);
        io::write_file_atomic(dir / "status.json", status_json(outcome).dump(2) + "\n");
    } catch (const std::exception& e) {
        if (outcome.exit_code == 0) {
            outcome.exit_code = 1;
            outcome.failed_stage = Stage::outputs;
            outcome.message = e.what();
        }
    }
    return outcome;
}

std::vector<CaseSpec> read_case_list(const fs::path& path, const fs::path& out_root)
{
    io::Json j;
    try {
        j = io::Json::parse(io::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw InputError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
    const io::Json& list = j.is_object() && j.contains("cases") ? j["cases"] : j;
    if (!list.is_array()) throw InputError("case list must be an array or {\"cases\": [...]}");
    const fs::path base = path.parent_path();
    auto resolve = [&](const io::Json& c, const char* key) -> fs::path {
        if (!c.contains(key)) return {};
        if (!c[key].is_string()) throw InputError(std::string("case field '") + key + "' must be a string");
        const fs::path p = c[key].get<std::string>();
        return p.is_absolute() ? p : base / p;
    };
    std::vector<CaseSpec> out;
    std::vector<std::string> ids;
    for (const auto& c : list) {
        if (!c.is_object() || !c.contains("id") || !c["id"].is_string()) throw InputError("every case needs a string \"id\"");
        CaseSpec s;
        s.id = c["id"].get<std::string>();
        if (std::find(ids.begin(), ids.end(), s.id) != ids.end()) throw InputError("duplicate case id '" + s.id + "'");
        ids.push_back(s.id);
        s.labels = resolve(c, "labels");
        s.landmarks = resolve(c, "landmarks");
        s.plane = resolve(c, "plane");
        s.template_labels = resolve(c, "template_labels");
        s.template_plane = resolve(c, "template_plane");
        s.output_dir = out_root / s.id;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<CaseOutcome> run_batch(const std::vector<CaseSpec>& cases, const RunConfig& cfg, int threads)
{
    cfg.validate();
    std::vector<CaseOutcome> out(cases.size());
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(cases.size())));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < cases.size(); i = next++) out[i] = run_case(cases[i], cfg);
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return out;
}

EvalResult run_eval(const fs::path& pred, const fs::path& ref, int label, HausdorffMode mode)
{
    const Volume a = load_volume(pred);
    const Volume b = load_volume(ref);
    if (a.dims != b.dims) throw InputError("prediction and reference have different dimensions");
    const BinaryMask3D x = BinaryMask3D::from_volume(a, label);
    const BinaryMask3D y = BinaryMask3D::from_volume(b, label);
    EvalResult r;
    r.dice = dice(x, y);
    r.hd95 = hausdorff95(x, y, mode);
    return r;
}

namespace {

bool parse_group(const std::string& v, const std::string& where)
{
    if (v == "patient" || v == "1" || v == "Patient") return true;
    if (v == "control" || v == "0" || v == "Control") return false;
    throw InputError(where + ": group must be patient or control, got '" + v + "'");
}

bool parse_sex(const std::string& v, const std::string& where)
{
    if (v == "M" || v == "m" || v == "male" || v == "1") return true;
    if (v == "F" || v == "f" || v == "female" || v == "0") return false;
    throw InputError(where + ": sex must be M or F, got '" + v + "'");
}

const char* const kSummaryMeasures[] = {"area_mm2",      "perimeter_mm", "circularity", "cc_index_raw",    "cc_index_norm",
                                        "volume_mm3",    "length_mm",    "curvature_per_mm", "mean_thickness_mm"};

double finite_mean(const std::vector<double>& v)
{
    double s = 0.0;
    int n = 0;
    for (double x : v)
        if (std::isfinite(x)) {
            s += x;
            ++n;
        }
    return n ? s / n : std::nan("");
}

std::vector<Polyline> synthetic_template(std::size_t positions)
{
    std::vector<Polyline> paths;
    for (std::size_t k = 0; k < positions; ++k) {
        const double th = std::numbers::pi * (static_cast<double>(k) + 1.0) / (static_cast<double>(positions) + 1.0);
        Polyline p;
        p.points = {Vec2(27.0 * std::cos(th), 12.0 * std::sin(th)), Vec2(33.0 * std::cos(th), 18.0 * std::sin(th))};
        paths.push_back(p);
    }
    return paths;
}

std::vector<Polyline> read_levelpaths(const fs::path& path, std::size_t positions)
{
    std::vector<Polyline> paths(positions);
    std::istringstream in(io::read_file(path));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto c = io::split_csv_line(line);
        if (c.size() < 4) continue;
        const auto id = static_cast<std::size_t>(io::parse_number(c[0], "path_id"));
        if (id < positions) paths[id].points.emplace_back(io::parse_number(c[2], "x"), io::parse_number(c[3], "y"));
    }
    return paths;
}

} // namespace

std::vector<StatsCase> read_group_table(const fs::path& path)
{
    std::istringstream in(io::read_file(path));
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        header = io::split_csv_line(line);
        break;
    }
    const std::vector<std::string> required = {"id", "group", "age", "sex", "brain_volume"};
    if (header.size() < 6 || !std::equal(required.begin(), required.end(), header.begin())) {
        throw InputError("'" + path.string() + "': header must start with id,group,age,sex,brain_volume");
    }
    const bool dirs = header[5] == "case_dir";
    std::vector<StatsCase> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto c = io::split_csv_line(line);
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (c.size() != header.size()) throw InputError(where + ": expected " + std::to_string(header.size()) + " columns");
        StatsCase sc;
        sc.row.id = c[0];
        sc.row.patient = parse_group(c[1], where);
        sc.row.age = io::parse_number(c[2], "age");
        sc.row.male = parse_sex(c[3], where);
        sc.row.brain_volume = io::parse_number(c[4], "brain_volume");
        if (dirs) {
            sc.case_dir = fs::path(c[5]).is_absolute() ? fs::path(c[5]) : path.parent_path() / c[5];
            sc.row.values = io::read_profile_csv(sc.case_dir / "thickness.csv");
            const fs::path summary = sc.case_dir / "summary.json";
            if (fs::exists(summary)) {
                const auto j = io::Json::parse(io::read_file(summary));
                for (const char* key : kSummaryMeasures) {
                    if (j.contains(key) && j[key].is_number()) sc.measures.emplace_back(key, j[key].get<double>());
                }
            }
        } else {
            for (std::size_t k = 5; k < c.size(); ++k) sc.row.values.push_back(io::parse_number(c[k], header[k]));
            sc.measures.emplace_back("mean_thickness_mm", finite_mean(sc.row.values));
        }
        rows.push_back(std::move(sc));
    }
    return rows;
}

StatsOutcome run_stats(const std::vector<fs::path>& tables, const RunConfig& cfg, const fs::path& out_dir)
{
    (void)cfg;
    std::vector<StatsCase> cases;
    for (const auto& t : tables) {
        auto rows = read_group_table(t);
        cases.insert(cases.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
    }
    if (cases.empty()) throw InputError("insufficient data: no rows");
    std::vector<GroupRow> rows;
    for (const auto& c : cases) rows.push_back(c.row);

    StatsOutcome out;
    out.positions = thickness_group_map(rows);

    // Scalar measures present for every case, in first-seen order.
    for (const auto& [name, value] : cases.front().measures) {
        (void)value;
        std::vector<GroupRow> scalar = rows;
        bool complete = true;
        for (std::size_t i = 0; i < cases.size() && complete; ++i) {
            const auto& m = cases[i].measures;
            const auto it = std::find_if(m.begin(), m.end(), [&](const auto& kv) { return kv.first == name; });
            if (it == m.end()) complete = false;
            else scalar[i].values = {it->second};
        }
        if (complete) out.measures.emplace_back(name, scalar_group_test(scalar, 0));
    }

    std::vector<Polyline> templ;
    for (const auto& c : cases) {
        if (!c.row.patient && !c.case_dir.empty() && fs::exists(c.case_dir / "levelpaths.csv")) {
            templ = read_levelpaths(c.case_dir / "levelpaths.csv", out.positions.size());
            break;
        }
    }
    if (templ.empty()) templ = synthetic_template(out.positions.size());

    io::Json measures = io::Json::object();
    for (const auto& [name, st] : out.measures) measures[name] = {{"beta", st.beta}, {"p", st.p}, {"rows", st.rows}};
    io::Json summary{{"encoding", {{"group", "patient=1, control=0"}, {"sex", "male=1, female=0"}}},
                     {"cases", cases.size()},
                     {"positions", out.positions.size()},
                     {"discoveries", std::count_if(out.positions.begin(), out.positions.end(),
                                                   [](const PositionStat& s) { return s.p_adj < 0.05; })},
                     {"measures", measures}};
    fs::create_directories(out_dir);
    io::write_file_atomic(out_dir / "group_map.csv", io::group_map_csv(out.positions));
    io::write_file_atomic(out_dir / "measures.json", summary.dump(2) + "\n");
    io::write_file_atomic(out_dir / "pmap.svg", svg::pmap_figure(templ, out.positions, out.measures));
    return out;
}

} // namespace ccm
