#pragma once

#include <ccm/config.hpp>
#include <ccm/evalstats.hpp>
#include <ccm/geometry.hpp>
#include <ccm/morphometry.hpp>
#include <ccm/subsegmentation.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ccm {

/// One subject. Either `plane` or both template paths must be given.
struct CaseSpec {
    std::string id;
    std::filesystem::path labels;
    std::filesystem::path landmarks;
    std::filesystem::path plane;
    std::filesystem::path template_labels;
    std::filesystem::path template_plane;
    std::filesystem::path output_dir;
};

enum class Stage { config, inputs, landmarks, midplane, slab, mesh, midline, thickness, morphometry, subseg, outputs };
std::string_view to_string(Stage stage);

/// Everything computed for one case, in the 2D slab frame: x runs along
/// slab axis 1 (anterior for a sagittal plane), y along axis 2 (superior).
struct CaseResult {
    Plane plane;
    std::optional<RigidTransform> to_template;
    Volume slab;
    Landmarks2D landmarks;
    Polyline contour;
    TriMesh2D mesh;
    Midline midline;
    ThicknessProfile profile;
    std::vector<double> slab_areas_mm2;
    ShapeSummary summary;
    CCIndex cc_index;
    std::vector<SubsegResult> subseg;
};

/// In-memory geometry pipeline on a label volume with a known plane,
/// running every stage up to and including `last`.
CaseResult analyze_volume(const Volume& labels, const Plane& plane, const Landmarks& landmarks, const RunConfig& cfg,
                          Stage last = Stage::subseg);

/// Same, starting from an already resampled slab (axis 0 across the plane).
CaseResult analyze_slab(const Volume& slab, const Landmarks& landmarks, const RunConfig& cfg, Stage last = Stage::subseg);

struct StageTiming {
    Stage stage;
    double seconds = 0.0;
};

struct CaseOutcome {
    std::string id;
    int exit_code = 0;          ///< 0 ok, 1 stage failure, 2 bad input
    std::optional<Stage> failed_stage;
    std::string message;
    std::vector<StageTiming> timings;
    std::vector<std::string> warnings;
};

/// Runs one case, writing outputs asynchronously into spec.output_dir as
/// stages complete, followed by status.json. Never throws for case errors.
CaseOutcome run_case(const CaseSpec& spec, const RunConfig& cfg, Stage last = Stage::subseg);

/// Case list: {"cases": [{"id", "labels", "landmarks", "plane" | "template_labels" + "template_plane"}]}.
/// Relative paths are resolved against the list file; outputs go to out_root/id.
std::vector<CaseSpec> read_case_list(const std::filesystem::path& path, const std::filesystem::path& out_root);

/// Cases in parallel on `threads` workers; outcomes in input order.
std::vector<CaseOutcome> run_batch(const std::vector<CaseSpec>& cases, const RunConfig& cfg, int threads);

struct EvalResult {
    double dice = 0.0;
    double hd95 = 0.0;
};

/// Foreground is `label` or any non-zero voxel when label < 0.
EvalResult run_eval(const std::filesystem::path& pred, const std::filesystem::path& ref, int label,
                    HausdorffMode mode = HausdorffMode::pooled);

struct StatsCase {
    GroupRow row;
    std::vector<std::pair<std::string, double>> measures;
    std::filesystem::path case_dir; ///< empty for inline tables
};

/// Header: id,group,age,sex,brain_volume followed by either case_dir or one
/// column per position. group is patient/control (or 1/0), sex M/F (or 1/0).
std::vector<StatsCase> read_group_table(const std::filesystem::path& path);

struct StatsOutcome {
    std::vector<PositionStat> positions;
    std::vector<std::pair<std::string, PositionStat>> measures;
};

/// Group comparison over the rows of all tables; writes group_map.csv,
/// measures.json and pmap.svg into out_dir.
StatsOutcome run_stats(const std::vector<std::filesystem::path>& tables, const RunConfig& cfg,
                       const std::filesystem::path& out_dir);

} // namespace ccm
