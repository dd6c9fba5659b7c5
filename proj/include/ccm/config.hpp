#pragma once

#include <ccm/evalstats.hpp>
#include <ccm/mask2mesh.hpp>
#include <ccm/morphometry.hpp>
#include <ccm/subsegmentation.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ccm {

/// Every tunable of a pipeline run. Loaded from a key = value file with
/// optional [section] headers (keys become "section.key").
struct RunConfig {
    // mesh
    MeshingOptions meshing;
    // midline and thickness
    int samples = 100;
    EndpointOptions endpoints;
    // slab
    double slab_width_mm = 5.0;
    double slab_spacing_mm = -1.0; ///< <= 0: smallest voxel size of the input
    // labels
    std::vector<int> cc_labels = {192, 251, 252, 253, 254, 255};
    std::vector<int> registration_labels; ///< empty: all shared labels
    // sub-segmentation
    std::vector<SubsegScheme> schemes;
    // evaluation
    HausdorffMode hd95_mode = HausdorffMode::pooled;
    // run
    int threads = 0; ///< <= 0: hardware concurrency
    bool write_svg = true;
    bool write_fields = true;
    bool write_slab = false;

    RunConfig();

    /// Applies one "key = value" assignment. Throws InputError for unknown
    /// keys or malformed values.
    void set(std::string_view key, std::string_view value);
    /// Throws InputError describing the first invalid parameter.
    void validate() const;
    /// Canonical text form; parsing it reproduces this configuration.
    std::string to_text() const;

    static RunConfig parse(std::string_view text);
    static RunConfig load(const std::filesystem::path& path);
};

/// Worker count: CCM_THREADS if set, else `configured`, else hardware.
int resolve_thread_count(int configured);

} // namespace ccm
