#include <ccm/config.hpp>
#include <ccm/error.hpp>
#include <ccm/io.hpp>
#include <ccm/nifti.hpp>
#include <ccm/phantom.hpp>
#include <ccm/pipeline.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace fs = std::filesystem;
using namespace ccm;

namespace {

struct CommonOptions {
    std::string config;
    std::vector<std::string> overrides;
};

struct CaseOptions {
    std::string id = "case";
    std::string labels, landmarks, plane, template_labels, template_plane, out;
};

RunConfig build_config(const CommonOptions& o)
{
    RunConfig cfg = o.config.empty() ? RunConfig() : RunConfig::load(o.config);
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* app, CommonOptions& o)
{
    app->add_option("-c,--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
    app->add_option("--set", o.overrides, "override one configuration key (key=value), repeatable");
}

void add_case(CLI::App* app, CaseOptions& o, bool require_out = true)
{
    app->add_option("--id", o.id, "case identifier");
    app->add_option("--labels", o.labels, "label volume (.nii/.nii.gz)");
    app->add_option("--landmarks", o.landmarks, "AC/PC landmark JSON (world mm)");
    app->add_option("--plane", o.plane, "mid-sagittal plane JSON");
    app->add_option("--template-labels", o.template_labels, "template label volume for plane registration");
    app->add_option("--template-plane", o.template_plane, "template mid-sagittal plane JSON");
    auto* out = app->add_option("-o,--out", o.out, "output directory");
    if (require_out) out->required();
}

CaseSpec to_spec(const CaseOptions& o)
{
    return {o.id, o.labels, o.landmarks, o.plane, o.template_labels, o.template_plane, o.out};
}

int report(const CaseOutcome& r)
{
    if (r.exit_code == 0) {
        double total = 0.0;
        for (const auto& t : r.timings) total += t.seconds;
        std::printf("%s: ok (%.3f s)\n", r.id.c_str(), total);
    } else {
        std::fprintf(stderr, "%s: stage %s failed: %s\n", r.id.c_str(),
                     r.failed_stage ? std::string(to_string(*r.failed_stage)).c_str() : "?", r.message.c_str());
    }
    return r.exit_code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Corpus callosum morphometry: mid-sagittal plane, Laplace thickness, sub-segmentation, statistics"};
    app.require_subcommand(1);
    int exit_code = 0;

    CommonOptions common;
    CaseOptions single;

    auto* midplane = app.add_subcommand("midplane", "estimate the mid-sagittal plane by centroid registration to a template");
    std::string mp_labels, mp_tlabels, mp_tplane, mp_out;
    std::vector<int> mp_list;
    midplane->add_option("--labels", mp_labels, "subject label volume")->required()->check(CLI::ExistingFile);
    midplane->add_option("--template-labels", mp_tlabels, "template label volume")->required()->check(CLI::ExistingFile);
    midplane->add_option("--template-plane", mp_tplane, "template plane JSON")->required()->check(CLI::ExistingFile);
    midplane->add_option("--label-list", mp_list, "labels used for the centroid clouds (default: all shared)")->delimiter(',');
    midplane->add_option("-o,--out", mp_out, "output plane JSON")->required();

    auto* thickness = app.add_subcommand("thickness", "mesh, intercallosal line and thickness profile of one case");
    add_case(thickness, single);
    add_common(thickness, common);
    auto* subseg = app.add_subcommand("subseg", "all stages up to sub-segmentation for one case");
    add_case(subseg, single);
    add_common(subseg, common);
    auto* metrics = app.add_subcommand("metrics", "shape summary (area, perimeter, circularity, CC index, volume) of one case");
    add_case(metrics, single);
    add_common(metrics, common);

    auto* pipeline = app.add_subcommand("pipeline", "full per-case pipeline, single case or a batch list");
    add_case(pipeline, single);
    add_common(pipeline, common);
    std::string cases_file;
    int threads = 0;
    pipeline->add_option("--cases", cases_file, "batch case list JSON")->check(CLI::ExistingFile);
    pipeline->add_option("-j,--threads", threads, "worker threads (CCM_THREADS overrides)");

    auto* eval = app.add_subcommand("eval", "Dice and HD95 between two masks");
    std::string ev_pred, ev_ref, ev_out, ev_mode = "pooled";
    int ev_label = -1;
    eval->add_option("--pred", ev_pred, "predicted label volume")->required()->check(CLI::ExistingFile);
    eval->add_option("--ref", ev_ref, "reference label volume")->required()->check(CLI::ExistingFile);
    eval->add_option("--label", ev_label, "foreground label (default: any non-zero)");
    eval->add_option("--hd95-mode", ev_mode, "pooled or max_directed")->check(CLI::IsMember({"pooled", "max_directed"}));
    eval->add_option("-o,--out", ev_out, "output JSON");

    auto* stats = app.add_subcommand("stats", "per-position group comparison of thickness profiles");
    std::vector<std::string> st_tables;
    std::string st_out;
    stats->add_option("--table", st_tables, "group table CSV, repeatable")->required()->check(CLI::ExistingFile);
    stats->add_option("-o,--out", st_out, "output directory")->required();
    add_common(stats, common);

    auto* phantom = app.add_subcommand("phantom", "write a synthetic label volume with landmarks and plane");
    std::vector<int> ph_dims = {64, 128, 128};
    double ph_voxel = 1.0;
    std::string ph_out;
    phantom->add_option("--dims", ph_dims, "volume dimensions x,y,z")->delimiter(',')->expected(3);
    phantom->add_option("--voxel", ph_voxel, "isotropic voxel size in mm");
    phantom->add_option("-o,--out", ph_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (midplane->parsed()) {
            const auto est = midsagittal_plane(load_volume(mp_labels), load_volume(mp_tlabels), io::read_plane(mp_tplane), mp_list);
            io::Json j = io::plane_to_json(est.plane);
            j["to_template"] = io::transform_to_json(est.to_template)["matrix"];
            j["correspondences"] = est.correspondences;
            io::write_file_atomic(mp_out, j.dump(2) + "\n");
            std::printf("normal %.6f %.6f %.6f offset %.6f (%zu labels)\n", est.plane.normal.x(), est.plane.normal.y(),
                        est.plane.normal.z(), est.plane.offset, est.correspondences);
        } else if (thickness->parsed() || subseg->parsed() || metrics->parsed()) {
            const RunConfig cfg = build_config(common);
            const Stage last = thickness->parsed() ? Stage::thickness : metrics->parsed() ? Stage::morphometry : Stage::subseg;
            exit_code = report(run_case(to_spec(single), cfg, last));
        } else if (pipeline->parsed()) {
            RunConfig cfg = build_config(common);
            if (threads > 0) cfg.threads = threads;
            if (!cases_file.empty()) {
                const auto cases = read_case_list(cases_file, single.out);
                const auto outcomes = run_batch(cases, cfg, resolve_thread_count(cfg.threads));
                for (const auto& o : outcomes) exit_code = std::max(exit_code, report(o));
            } else {
                exit_code = report(run_case(to_spec(single), cfg));
            }
        } else if (eval->parsed()) {
            const auto mode = ev_mode == "pooled" ? HausdorffMode::pooled : HausdorffMode::max_directed;
            const auto r = run_eval(ev_pred, ev_ref, ev_label, mode);
            const io::Json j{{"dice", r.dice}, {"hd95_mm", r.hd95}, {"hd95_mode", ev_mode}};
            if (!ev_out.empty()) io::write_file_atomic(ev_out, j.dump(2) + "\n");
            std::printf("dice %.6f hd95 %.6f mm\n", r.dice, r.hd95);
        } else if (stats->parsed()) {
            const RunConfig cfg = build_config(common);
            std::vector<fs::path> tables(st_tables.begin(), st_tables.end());
            const auto r = run_stats(tables, cfg, st_out);
            int discoveries = 0;
            for (const auto& s : r.positions) discoveries += s.p_adj < 0.05;
            std::printf("%zu positions, %d with adjusted p < 0.05\n", r.positions.size(), discoveries);
        } else if (phantom->parsed()) {
            PhantomOptions opt;
            opt.dims = {ph_dims[0], ph_dims[1], ph_dims[2]};
            opt.voxel_mm = ph_voxel;
            const Phantom ph = make_phantom(opt);
            fs::create_directories(ph_out);
            save_volume(ph.labels, fs::path(ph_out) / "labels.nii.gz");
            io::write_file_atomic(fs::path(ph_out) / "landmarks.json", io::landmarks_to_json(ph.landmarks).dump(2) + "\n");
            io::write_file_atomic(fs::path(ph_out) / "plane.json", io::plane_to_json(ph.plane).dump(2) + "\n");
            std::printf("wrote %s\n", ph_out.c_str());
        }
    } catch (const InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return exit_code;
}
