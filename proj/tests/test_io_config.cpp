#include <ccm/config.hpp>
#include <ccm/error.hpp>
#include <ccm/io.hpp>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>

using namespace ccm;
namespace fs = std::filesystem;

TEST(Config, DefaultsAreValid)
{
    const RunConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(cfg.schemes.size(), 6u);
    EXPECT_EQ(cfg.samples, 100);
    EXPECT_EQ(cfg.slab_width_mm, 5.0);
    EXPECT_TRUE(cfg.registration_labels.empty());
}

TEST(Config, ParseSectionsCommentsAndLists)
{
    const RunConfig cfg = RunConfig::parse(R"(
# comment
[mesh]
sigma_mm = 0.5   # trailing
max_area_mm2 = 0.25

[labels]
cc = [251, 252]
registration = 4, 10, 16

[subseg]
schemes = ["witelson", "hampel"]
fractions.witelson = [0.25, 0.5, 0.75]

[eval]
hd95_mode = "max_directed"

[output]
svg = false
)");
    EXPECT_EQ(cfg.meshing.sigma_mm, 0.5);
    EXPECT_EQ(cfg.meshing.max_area_mm2, 0.25);
    EXPECT_EQ(cfg.cc_labels, (std::vector<int>{251, 252}));
    EXPECT_EQ(cfg.registration_labels, (std::vector<int>{4, 10, 16}));
    ASSERT_EQ(cfg.schemes.size(), 2u);
    EXPECT_EQ(cfg.schemes[0].kind, SchemeKind::witelson);
    EXPECT_EQ(cfg.schemes[0].fractions, (std::vector<double>{0.25, 0.5, 0.75}));
    EXPECT_EQ(cfg.schemes[1].kind, SchemeKind::hampel);
    EXPECT_EQ(cfg.hd95_mode, HausdorffMode::max_directed);
    EXPECT_FALSE(cfg.write_svg);
}

TEST(Config, TextRoundTrip)
{
    RunConfig cfg;
    cfg.set("mesh.sigma_mm", "0.3");
    cfg.set("thickness.samples", "57");
    cfg.set("endpoints.along_offset_mm", "1.5");
    cfg.set("slab.spacing_mm", "0.8");
    cfg.set("subseg.fractions.jancke", "[0.2, 0.4, 0.6, 0.8]");
    cfg.set("run.threads", "3");
    cfg.set("output.slab", "yes");
    const RunConfig back = RunConfig::parse(cfg.to_text());
    EXPECT_EQ(back.to_text(), cfg.to_text());
    EXPECT_EQ(back.meshing.sigma_mm, 0.3);
    EXPECT_EQ(back.samples, 57);
    EXPECT_EQ(back.threads, 3);
    EXPECT_TRUE(back.write_slab);
}

TEST(Config, RejectsUnknownKeysAndBadValues)
{
    RunConfig cfg;
    EXPECT_THROW(cfg.set("mesh.colour", "1"), InputError);
    EXPECT_THROW(cfg.set("thickness.samples", "2.5"), InputError);
    EXPECT_THROW(cfg.set("mesh.iso", "abc"), InputError);
    EXPECT_THROW(cfg.set("output.svg", "maybe"), InputError);
    EXPECT_THROW(cfg.set("subseg.schemes", "[nope]"), InputError);
    EXPECT_THROW(cfg.set("eval.hd95_mode", "mean"), InputError);
    try {
        RunConfig::parse("[mesh]\nsigma_mm = 1\nbogus = 2\n");
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("mesh.bogus"), std::string::npos);
    }
    EXPECT_THROW(RunConfig::parse("no equals sign\n"), InputError);
}

TEST(Config, ValidateRanges)
{
    auto invalid = [](const char* key, const char* value) {
        RunConfig cfg;
        cfg.set(key, value);
        EXPECT_THROW(cfg.validate(), InputError) << key << " = " << value;
    };
    invalid("mesh.iso", "1.0");
    invalid("mesh.max_area_mm2", "0");
    invalid("mesh.min_angle_deg", "35");
    invalid("thickness.samples", "0");
    invalid("slab.width_mm", "-1");
    invalid("labels.cc", "[]");
    invalid("subseg.fractions.witelson", "[0.6, 0.3]");
}

TEST(Config, ThreadCountFromEnvironment)
{
    ::unsetenv("CCM_THREADS");
    EXPECT_EQ(resolve_thread_count(5), 5);
    EXPECT_GE(resolve_thread_count(0), 1);
    ::setenv("CCM_THREADS", "2", 1);
    EXPECT_EQ(resolve_thread_count(5), 2);
    ::setenv("CCM_THREADS", "0", 1);
    EXPECT_THROW(resolve_thread_count(5), InputError);
    ::unsetenv("CCM_THREADS");
}

TEST(Io, FormatNumberRoundTrips)
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
        EXPECT_EQ(io::parse_number(io::format_number(v), "v"), v);
    }
    EXPECT_EQ(io::format_number(0.1), "0.1");
    EXPECT_EQ(io::format_number(-0.0), "0");
    EXPECT_EQ(io::format_number(3.0), "3");
    EXPECT_EQ(io::format_number(std::nan("")), "nan");
    EXPECT_EQ(io::format_number(-INFINITY), "-inf");
    EXPECT_TRUE(std::isnan(io::parse_number("nan", "v")));
    EXPECT_THROW(io::parse_number("1.5x", "width"), InputError);
}

TEST(Io, PlaneAndTransformJson)
{
    const Plane p(Vec3(1.0, 2.0, -2.0), 4.5);
    const Plane q = io::plane_from_json(io::plane_to_json(p));
    EXPECT_LT((q.normal - p.normal).norm(), 1e-15);
    EXPECT_EQ(q.offset, p.offset);

    RigidTransform t;
    t.rotation = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    t.translation = Vec3(4, -5, 6);
    const RigidTransform u = io::transform_from_json(io::transform_to_json(t));
    EXPECT_LT((u.matrix() - t.matrix()).cwiseAbs().maxCoeff(), 1e-15);

    const Plane from_matrix = io::plane_from_json(io::transform_to_json(p.to_transform()));
    EXPECT_LT((from_matrix.normal - p.normal).norm(), 1e-12);
    EXPECT_NEAR(from_matrix.offset, p.offset, 1e-12);

    EXPECT_THROW(io::plane_from_json(io::Json{{"normal", {0, 0, 0}}, {"offset", 1}}), InputError);
    EXPECT_THROW(io::plane_from_json(io::Json{{"normal", {1, 0, 0}}}), InputError);
    EXPECT_THROW(io::transform_from_json(io::Json{{"matrix", {{1, 0, 0, 0}, {0, 2, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}}}),
                 InputError);
}

TEST(Io, LandmarksFile)
{
    const fs::path d = fs::temp_directory_path() / "ccm_io_test";
    fs::create_directories(d);
    io::write_file_atomic(d / "lm.json", R"({"ac": [1, 2, 3], "pc": [-4, 5.5, 6]})");
    const Landmarks lm = io::read_landmarks(d / "lm.json");
    EXPECT_EQ(lm.ac, Vec3(1, 2, 3));
    EXPECT_EQ(lm.pc, Vec3(-4, 5.5, 6));
    EXPECT_EQ(io::landmarks_to_json(lm)["pc"][1], 5.5);
    io::write_file_atomic(d / "bad.json", R"({"ac": [1, 2]})");
    EXPECT_THROW(io::read_landmarks(d / "bad.json"), InputError);
    io::write_file_atomic(d / "broken.json", "{");
    EXPECT_THROW(io::read_landmarks(d / "broken.json"), InputError);
    EXPECT_THROW(io::read_file(d / "missing"), InputError);
}

TEST(Io, CsvLayouts)
{
    Polyline line;
    line.points = {{0.0, 0.5}, {1.25, -2.0}};
    EXPECT_EQ(io::polyline_csv(line), "point,x,y\n0,0,0.5\n1,1.25,-2\n");
    EXPECT_EQ(io::polylines_csv({line, Polyline{}}), "path_id,point,x,y\n0,0,0,0.5\n0,1,1.25,-2\n");
    EXPECT_EQ(io::split_csv_line(" a, b ,c,"), (std::vector<std::string>{"a", "b", "c", ""}));

    const fs::path d = fs::temp_directory_path() / "ccm_io_test";
    fs::create_directories(d);
    ThicknessProfile prof;
    prof.positions = {0.25, 0.5};
    prof.thickness_mm = {3.0, std::nan("")};
    io::write_file_atomic(d / "thickness.csv", io::profile_csv(prof));
    const auto back = io::read_profile_csv(d / "thickness.csv");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0], 3.0);
    EXPECT_TRUE(std::isnan(back[1]));

    std::vector<PositionStat> stats(2);
    stats[1].position = 1;
    stats[1].beta = -0.5;
    stats[1].p = 0.01;
    stats[1].p_adj = 0.02;
    stats[1].rows = 7;
    const std::string csv = io::group_map_csv(stats);
    EXPECT_NE(csv.find("\n1,-0.5,0.01,0.02,7\n"), std::string::npos);
}

TEST(Io, AtomicWriteReplacesContent)
{
    const fs::path d = fs::temp_directory_path() / "ccm_io_test";
    fs::create_directories(d);
    io::write_file_atomic(d / "x.txt", "first");
    io::write_file_atomic(d / "x.txt", "second");
    EXPECT_EQ(io::read_file(d / "x.txt"), "second");
    for (const auto& e : fs::directory_iterator(d)) EXPECT_EQ(e.path().string().find(".tmp"), std::string::npos);
}
