#include <ccm/error.hpp>
#include <ccm/nifti.hpp>

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

using namespace ccm;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir()
{
    const fs::path d = fs::temp_directory_path() / ("ccm_nifti_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

/// Minimal single-file NIfTI-1 image assembled field by field.
class RawImage {
public:
    RawImage(std::array<std::int16_t, 3> dims, std::int16_t datatype, std::int16_t bitpix) : bytes_(352, '\0')
    {
        put<std::int32_t>(0, 348);
        put<std::int16_t>(40, 3);
        for (int k = 0; k < 3; ++k) put<std::int16_t>(42 + 2 * k, dims[k]);
        for (int k = 3; k < 7; ++k) put<std::int16_t>(42 + 2 * k, 1);
        put<std::int16_t>(70, datatype);
        put<std::int16_t>(72, bitpix);
        for (int k = 0; k < 8; ++k) put<float>(76 + 4 * k, 1.0f);
        put<float>(108, 352.0f);
        std::memcpy(&bytes_[344], "n+1\0", 4);
    }

    template <typename T>
    void put(std::size_t offset, T v)
    {
        std::memcpy(&bytes_[offset], &v, sizeof(T));
    }

    template <typename T>
    void append(T v)
    {
        const auto at = bytes_.size();
        bytes_.resize(at + sizeof(T));
        std::memcpy(&bytes_[at], &v, sizeof(T));
    }

    void sform(const std::array<float, 12>& rows)
    {
        put<std::int16_t>(254, 1);
        for (int k = 0; k < 12; ++k) put<float>(280 + 4 * k, rows[k]);
    }

    /// Reverses every multi-byte header field listed, turning the image big-endian.
    void swap_fields(const std::vector<std::pair<std::size_t, int>>& fields)
    {
        for (const auto& [off, size] : fields) std::reverse(bytes_.begin() + off, bytes_.begin() + off + size);
    }

    void write(const fs::path& p) const
    {
        std::ofstream out(p, std::ios::binary);
        out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    }

    std::string& bytes() { return bytes_; }

private:
    std::string bytes_;
};

Volume random_volume(std::mt19937& rng, DataType type)
{
    Volume v({5, 4, 3}, type);
    std::uniform_int_distribution<int> lab(0, 127);
    std::normal_distribution<double> g(0.0, 100.0);
    for (auto& x : v.data) x = is_integer(type) ? lab(rng) : static_cast<double>(static_cast<float>(g(rng)));
    v.voxel_size = Vec3(0.8, 0.9, 1.2);
    v.affine = Mat4::Identity();
    v.affine.diagonal().head<3>() = -v.voxel_size;
    v.affine(0, 0) = 0.8;
    v.affine.block<3, 1>(0, 3) = Vec3(-10.5, 20.25, 3.0);
    return v;
}

} // namespace

TEST(Nifti, ZeroVolumeRoundTripIsBitIdentical)
{
    const fs::path d = temp_dir();
    Volume v({4, 4, 4}, DataType::uint8);
    save_volume(v, d / "a.nii");
    const Volume r = load_volume(d / "a.nii");
    save_volume(r, d / "b.nii");
    EXPECT_EQ(slurp(d / "a.nii"), slurp(d / "b.nii"));
    EXPECT_EQ(r.dims, v.dims);
    EXPECT_EQ(r.data, v.data);
    EXPECT_EQ(r.datatype, DataType::uint8);
}

TEST(Nifti, TypedRoundTripPlainAndCompressed)
{
    const fs::path d = temp_dir();
    std::mt19937 rng(4);
    for (DataType t : {DataType::uint8, DataType::int16, DataType::int32, DataType::float32, DataType::float64,
                       DataType::int8, DataType::uint16, DataType::uint32}) {
        const Volume v = random_volume(rng, t);
        for (const char* name : {"v.nii", "v.nii.gz"}) {
            save_volume(v, d / name);
            const Volume r = load_volume(d / name);
            EXPECT_EQ(r.datatype, t);
            EXPECT_EQ(r.dims, v.dims);
            EXPECT_EQ(r.data, v.data);
            EXPECT_LT((r.affine - v.affine).cwiseAbs().maxCoeff(), 1e-5);
            EXPECT_EQ(r.voxel_size, v.voxel_size);
        }
    }
    Volume big({2, 1, 1}, DataType::int8);
    big.data = {1.0, 200.0};
    EXPECT_THROW(save_volume(big, d / "big.nii"), Error);
    // The .gz file really is gzip.
    const std::string gz = slurp(d / "v.nii.gz");
    ASSERT_GE(gz.size(), 2u);
    EXPECT_EQ(static_cast<unsigned char>(gz[0]), 0x1f);
    EXPECT_EQ(static_cast<unsigned char>(gz[1]), 0x8b);
}

TEST(Nifti, HandWrittenHeaderVoxelSizeIsExact)
{
    const fs::path d = temp_dir();
    RawImage img({2, 2, 2}, 2, 8);
    for (int k = 0; k < 3; ++k) img.put<float>(80 + 4 * k, 0.8f);
    for (int i = 0; i < 8; ++i) img.append<std::uint8_t>(static_cast<std::uint8_t>(i * 3));
    img.write(d / "h.nii");
    const Volume v = load_volume(d / "h.nii");
    EXPECT_EQ(v.voxel_size, Vec3(0.8, 0.8, 0.8));
    EXPECT_EQ(v.dims, (std::array<int, 3>{2, 2, 2}));
    EXPECT_EQ(v.at(1, 1, 1), 21.0);
    EXPECT_EQ(v.at(1, 0, 0), 3.0);
    EXPECT_EQ(v.affine(0, 0), 0.8);
}

TEST(Nifti, SformPreferredAndScalingApplied)
{
    const fs::path d = temp_dir();
    RawImage img({2, 1, 1}, 4, 16);
    img.sform({0, 0, 2, 1, 0, 3, 0, 2, -1, 0, 0, 3});
    img.put<float>(112, 0.5f);
    img.put<float>(116, 10.0f);
    img.append<std::int16_t>(4);
    img.append<std::int16_t>(-6);
    img.write(d / "s.nii");
    const Volume v = load_volume(d / "s.nii");
    EXPECT_EQ(v.at(0, 0, 0), 12.0);
    EXPECT_EQ(v.at(1, 0, 0), 7.0);
    EXPECT_FALSE(v.is_label());
    EXPECT_LT((v.voxel_to_world(Vec3(1, 0, 0)) - Vec3(1, 2, 2)).norm(), 1e-12);
    EXPECT_LT((v.voxel_to_world(Vec3(0, 0, 1)) - Vec3(3, 2, 3)).norm(), 1e-12);
}

TEST(Nifti, QformWithNegativeQfac)
{
    const fs::path d = temp_dir();
    RawImage img({2, 2, 2}, 2, 8);
    img.put<float>(76, -1.0f);
    img.put<std::int16_t>(252, 1);
    img.put<float>(268, 5.0f);
    for (int i = 0; i < 8; ++i) img.append<std::uint8_t>(1);
    img.write(d / "q.nii");
    const Volume v = load_volume(d / "q.nii");
    EXPECT_LT((v.voxel_to_world(Vec3(1, 1, 1)) - Vec3(6, 1, -1)).norm(), 1e-12);
}

TEST(Nifti, BigEndianHeaderIsSwapped)
{
    const fs::path d = temp_dir();
    RawImage img({3, 1, 1}, 4, 16);
    img.put<float>(80, 0.5f);
    img.append<std::int16_t>(static_cast<std::int16_t>(__builtin_bswap16(static_cast<std::uint16_t>(300))));
    img.append<std::int16_t>(static_cast<std::int16_t>(__builtin_bswap16(static_cast<std::uint16_t>(-2))));
    img.append<std::int16_t>(static_cast<std::int16_t>(__builtin_bswap16(static_cast<std::uint16_t>(7))));
    std::vector<std::pair<std::size_t, int>> fields = {{0, 4}, {70, 2}, {72, 2}, {108, 4}, {112, 4}, {116, 4}};
    for (int k = 0; k < 8; ++k) fields.emplace_back(40 + 2 * k, 2);
    for (int k = 0; k < 8; ++k) fields.emplace_back(76 + 4 * k, 4);
    img.swap_fields(fields);
    img.write(d / "be.nii");
    const Volume v = load_volume(d / "be.nii");
    EXPECT_EQ(v.dims, (std::array<int, 3>{3, 1, 1}));
    EXPECT_EQ(v.voxel_size.x(), 0.5);
    EXPECT_EQ(v.data, (std::vector<double>{300.0, -2.0, 7.0}));
}

TEST(Nifti, MalformedHeadersNameTheField)
{
    const fs::path d = temp_dir();
    auto message = [&](RawImage img) {
        img.write(d / "bad.nii");
        try {
            load_volume(d / "bad.nii");
        } catch (const InputError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    RawImage ok({2, 1, 1}, 2, 8);
    ok.append<std::uint8_t>(1);
    ok.append<std::uint8_t>(2);

    RawImage magic = ok;
    std::memcpy(&magic.bytes()[344], "xyz\0", 4);
    EXPECT_NE(message(magic).find("magic"), std::string::npos);

    RawImage sing = ok;
    sing.sform({1, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0});
    EXPECT_NE(message(sing).find("singular affine"), std::string::npos);

    RawImage type = ok;
    type.put<std::int16_t>(70, 128);
    type.put<std::int16_t>(72, 24);
    EXPECT_NE(message(type).find("datatype"), std::string::npos);

    RawImage bitpix = ok;
    bitpix.put<std::int16_t>(72, 16);
    EXPECT_NE(message(bitpix).find("bitpix"), std::string::npos);

    RawImage dim = ok;
    dim.put<std::int16_t>(42, 0);
    EXPECT_NE(message(dim).find("dim"), std::string::npos);

    RawImage pix = ok;
    pix.put<float>(80, -1.0f);
    EXPECT_NE(message(pix).find("pixdim"), std::string::npos);

    RawImage data = ok;
    data.bytes().pop_back();
    EXPECT_NE(message(data).find("data"), std::string::npos);

    RawImage size = ok;
    size.put<std::int32_t>(0, 540);
    EXPECT_NE(message(size).find("sizeof_hdr"), std::string::npos);

    EXPECT_THROW(load_volume(d / "missing.nii"), InputError);
}
