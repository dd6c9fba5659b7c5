#include <ccm/error.hpp>
#include <ccm/nifti.hpp>

#include <Eigen/Geometry>
#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

namespace ccm {

namespace {

constexpr int kHeaderSize = 348;
constexpr int kDataOffset = 352;

template <typename T>
T byteswap(T v)
{
    std::array<unsigned char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    std::reverse(b.begin(), b.end());
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
}

// float header fields are widened through their shortest decimal form, so a
// stored 0.8f reads back as 0.8.
double widen(float f)
{
    if (!std::isfinite(f)) return static_cast<double>(f);
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, f);
    double d = 0.0;
    std::from_chars(buf, res.ptr, d);
    return d;
}

class HeaderView {
public:
    HeaderView(const unsigned char* bytes, bool swap) : bytes_(bytes), swap_(swap) {}

    template <typename T>
    T get(int offset) const
    {
        T v;
        std::memcpy(&v, bytes_ + offset, sizeof(T));
        return swap_ ? byteswap(v) : v;
    }
    double getf(int offset) const { return widen(get<float>(offset)); }

private:
    const unsigned char* bytes_;
    bool swap_;
};

class HeaderWriter {
public:
    HeaderWriter() { bytes_.fill(0); }

    template <typename T>
    void put(int offset, T v)
    {
        std::memcpy(bytes_.data() + offset, &v, sizeof(T));
    }
    void putf(int offset, double v) { put<float>(offset, static_cast<float>(v)); }
    void put_bytes(int offset, const char* s, std::size_t n) { std::memcpy(bytes_.data() + offset, s, n); }
    const unsigned char* data() const { return bytes_.data(); }

private:
    std::array<unsigned char, kDataOffset> bytes_{};
};

int bytes_per_voxel(DataType t)
{
    switch (t) {
    case DataType::uint8:
    case DataType::int8: return 1;
    case DataType::int16:
    case DataType::uint16: return 2;
    case DataType::int32:
    case DataType::uint32:
    case DataType::float32: return 4;
    case DataType::float64: return 8;
    }
    return 0;
}

bool supported(int code)
{
    switch (code) {
    case 2: case 4: case 8: case 16: case 64: case 256: case 512: case 768: return true;
    default: return false;
    }
}

template <typename T>
void decode(const unsigned char* raw, std::size_t n, bool swap, std::vector<double>& out)
{
    for (std::size_t i = 0; i < n; ++i) {
        T v;
        std::memcpy(&v, raw + i * sizeof(T), sizeof(T));
        if (swap) v = byteswap(v);
        out[i] = static_cast<double>(v);
    }
}

template <typename T>
void encode(const std::vector<double>& in, std::vector<unsigned char>& raw)
{
    raw.resize(in.size() * sizeof(T));
    for (std::size_t i = 0; i < in.size(); ++i) {
        T v;
        if constexpr (std::is_integral_v<T>) {
            const double x = in[i];
            if (x != std::floor(x) || x < static_cast<double>(std::numeric_limits<T>::min()) ||
                x > static_cast<double>(std::numeric_limits<T>::max())) {
                throw InputError("value " + std::to_string(x) + " does not fit the integer datatype");
            }
            v = static_cast<T>(x);
        } else {
            v = static_cast<T>(in[i]);
        }
        std::memcpy(raw.data() + i * sizeof(T), &v, sizeof(T));
    }
}

Mat4 qform_affine(const HeaderView& h, const Vec3& pixdim, double qfac)
{
    const double b = h.getf(256), c = h.getf(260), d = h.getf(264);
    const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
    const Eigen::Quaterniond q(a, b, c, d);
    Mat3 r = q.normalized().toRotationMatrix();
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = r * Eigen::DiagonalMatrix<double, 3>(pixdim[0], pixdim[1], qfac * pixdim[2]);
    m(0, 3) = h.getf(268);
    m(1, 3) = h.getf(272);
    m(2, 3) = h.getf(276);
    return m;
}

std::vector<unsigned char> read_all(const std::filesystem::path& path)
{
    gzFile f = gzopen(path.string().c_str(), "rb");
    if (!f) throw InputError("cannot open '" + path.string() + "'");
    std::vector<unsigned char> buf;
    std::array<unsigned char, 1 << 16> chunk;
    while (true) {
        const int got = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()));
        if (got < 0) {
            int errnum = 0;
            const std::string msg = gzerror(f, &errnum);
            gzclose(f);
            throw InputError("cannot read '" + path.string() + "': " + msg);
        }
        if (got == 0) break;
        buf.insert(buf.end(), chunk.begin(), chunk.begin() + got);
    }
    gzclose(f);
    return buf;
}

bool ends_with_gz(const std::filesystem::path& path)
{
    const std::string s = path.string();
    return s.size() >= 3 && s.compare(s.size() - 3, 3, ".gz") == 0;
}

} // namespace

Volume load_volume(const std::filesystem::path& path)
{
    const auto buf = read_all(path);
    if (buf.size() < kHeaderSize) throw InputError("sizeof_hdr: file shorter than a NIfTI-1 header");
    std::int32_t sizeof_hdr;
    std::memcpy(&sizeof_hdr, buf.data(), 4);
    bool swap = false;
    if (sizeof_hdr != kHeaderSize) {
        if (byteswap(sizeof_hdr) != kHeaderSize) {
            throw InputError("sizeof_hdr: expected 348, found " + std::to_string(sizeof_hdr));
        }
        swap = true;
    }
    const HeaderView h(buf.data(), swap);
    if (std::memcmp(buf.data() + 344, "n+1\0", 4) != 0) throw InputError("magic: not a single-file NIfTI-1 image");

    const int ndim = h.get<std::int16_t>(40);
    if (ndim < 1 || ndim > 7) throw InputError("dim: dim[0] = " + std::to_string(ndim) + " out of range");
    std::array<int, 3> dims{1, 1, 1};
    for (int k = 1; k <= ndim; ++k) {
        const int d = h.get<std::int16_t>(40 + 2 * k);
        if (d < 1) throw InputError("dim: dim[" + std::to_string(k) + "] = " + std::to_string(d));
        if (k <= 3) dims[k - 1] = d;
        else if (d != 1) throw InputError("dim: only 3D volumes are supported (dim[" + std::to_string(k) + "] = " + std::to_string(d) + ")");
    }

    const int code = h.get<std::int16_t>(70);
    if (!supported(code)) throw InputError("datatype: unsupported NIfTI datatype " + std::to_string(code));
    const auto type = static_cast<DataType>(code);
    const int bitpix = h.get<std::int16_t>(72);
    if (bitpix != 8 * bytes_per_voxel(type)) throw InputError("bitpix: " + std::to_string(bitpix) + " does not match datatype");

    Vec3 pixdim;
    for (int k = 0; k < 3; ++k) {
        pixdim[k] = h.getf(80 + 4 * k);
        if (k >= ndim) pixdim[k] = pixdim[k] > 0.0 ? pixdim[k] : 1.0;
        if (!(pixdim[k] > 0.0) || !std::isfinite(pixdim[k])) {
            throw InputError("pixdim: pixdim[" + std::to_string(k + 1) + "] must be positive");
        }
    }
    const double qfac = h.getf(76) < 0.0 ? -1.0 : 1.0;

    Volume vol;
    vol.dims = dims;
    vol.datatype = type;
    vol.voxel_size = pixdim;
    const int sform = h.get<std::int16_t>(254);
    const int qform = h.get<std::int16_t>(252);
    if (sform > 0) {
        vol.affine.setIdentity();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c) vol.affine(r, c) = h.getf(280 + 16 * r + 4 * c);
    } else if (qform > 0) {
        vol.affine = qform_affine(h, pixdim, qfac);
    } else {
        vol.affine = Mat4::Identity();
        vol.affine(0, 0) = pixdim[0];
        vol.affine(1, 1) = pixdim[1];
        vol.affine(2, 2) = pixdim[2];
    }
    if (!vol.affine.allFinite() || !(std::abs(vol.affine.topLeftCorner<3, 3>().determinant()) > 1e-12)) {
        throw InputError("singular affine");
    }

    const double vox_offset = h.getf(108);
    if (!(vox_offset >= kHeaderSize) || vox_offset != std::floor(vox_offset)) {
        throw InputError("vox_offset: invalid data offset");
    }
    const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    const std::size_t need = static_cast<std::size_t>(vox_offset) + n * bytes_per_voxel(type);
    if (buf.size() < need) throw InputError("data: file truncated (" + std::to_string(buf.size()) + " of " + std::to_string(need) + " bytes)");

    vol.data.resize(n);
    const unsigned char* raw = buf.data() + static_cast<std::size_t>(vox_offset);
    switch (type) {
    case DataType::uint8: decode<std::uint8_t>(raw, n, swap, vol.data); break;
    case DataType::int8: decode<std::int8_t>(raw, n, swap, vol.data); break;
    case DataType::int16: decode<std::int16_t>(raw, n, swap, vol.data); break;
    case DataType::uint16: decode<std::uint16_t>(raw, n, swap, vol.data); break;
    case DataType::int32: decode<std::int32_t>(raw, n, swap, vol.data); break;
    case DataType::uint32: decode<std::uint32_t>(raw, n, swap, vol.data); break;
    case DataType::float32: decode<float>(raw, n, swap, vol.data); break;
    case DataType::float64: decode<double>(raw, n, swap, vol.data); break;
    }

    const double slope = h.getf(112);
    const double inter = h.getf(116);
    if (std::isfinite(slope) && slope != 0.0 && (slope != 1.0 || inter != 0.0)) {
        for (double& v : vol.data) v = slope * v + inter;
        vol.datatype = DataType::float64;
    }
    return vol;
}

void save_volume(const Volume& vol, const std::filesystem::path& path)
{
    vol.validate();
    HeaderWriter h;
    h.put<std::int32_t>(0, kHeaderSize);
    h.put<char>(38, 'r');
    h.put<std::int16_t>(40, 3);
    for (int k = 0; k < 3; ++k) h.put<std::int16_t>(42 + 2 * k, static_cast<std::int16_t>(vol.dims[k]));
    for (int k = 3; k < 7; ++k) h.put<std::int16_t>(42 + 2 * k, 1);
    for (int k : vol.dims)
        if (k > std::numeric_limits<std::int16_t>::max()) throw InputError("dim: volume too large for NIfTI-1");
    h.put<std::int16_t>(70, static_cast<std::int16_t>(vol.datatype));
    h.put<std::int16_t>(72, static_cast<std::int16_t>(8 * bytes_per_voxel(vol.datatype)));

    // qform from the orthonormalised rotation part of the affine.
    Mat3 a = vol.affine.topLeftCorner<3, 3>();
    Mat3 r;
    for (int c = 0; c < 3; ++c) r.col(c) = a.col(c).normalized();
    double qfac = 1.0;
    if (r.determinant() < 0.0) {
        qfac = -1.0;
        r.col(2) = -r.col(2);
    }
    const Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    r = svd.matrixU() * svd.matrixV().transpose();
    Eigen::Quaterniond q(r);
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();

    h.putf(76, qfac);
    for (int k = 0; k < 3; ++k) h.putf(80 + 4 * k, vol.voxel_size[k]);
    for (int k = 3; k < 7; ++k) h.putf(80 + 4 * k, 1.0);
    h.putf(108, kDataOffset);
    h.putf(112, 1.0);
    h.putf(116, 0.0);
    h.put<char>(123, 2); // mm
    h.put<std::int16_t>(252, 1);
    h.put<std::int16_t>(254, 1);
    h.putf(256, q.x());
    h.putf(260, q.y());
    h.putf(264, q.z());
    h.putf(268, vol.affine(0, 3));
    h.putf(272, vol.affine(1, 3));
    h.putf(276, vol.affine(2, 3));
    for (int row = 0; row < 3; ++row)
        for (int c = 0; c < 4; ++c) h.putf(280 + 16 * row + 4 * c, vol.affine(row, c));
    h.put_bytes(344, "n+1\0", 4);

    std::vector<unsigned char> raw;
    switch (vol.datatype) {
    case DataType::uint8: encode<std::uint8_t>(vol.data, raw); break;
    case DataType::int8: encode<std::int8_t>(vol.data, raw); break;
    case DataType::int16: encode<std::int16_t>(vol.data, raw); break;
    case DataType::uint16: encode<std::uint16_t>(vol.data, raw); break;
    case DataType::int32: encode<std::int32_t>(vol.data, raw); break;
    case DataType::uint32: encode<std::uint32_t>(vol.data, raw); break;
    case DataType::float32: encode<float>(vol.data, raw); break;
    case DataType::float64: encode<double>(vol.data, raw); break;
    }

    if (ends_with_gz(path)) {
        gzFile f = gzopen(path.string().c_str(), "wb6");
        if (!f) throw Error("cannot write '" + path.string() + "'");
        const bool ok = gzwrite(f, h.data(), kDataOffset) == kDataOffset &&
                        (raw.empty() || gzwrite(f, raw.data(), static_cast<unsigned>(raw.size())) == static_cast<int>(raw.size()));
        if (gzclose(f) != Z_OK || !ok) throw Error("cannot write '" + path.string() + "'");
    } else {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write '" + path.string() + "'");
        out.write(reinterpret_cast<const char*>(h.data()), kDataOffset);
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!out) throw Error("cannot write '" + path.string() + "'");
    }
}

} // namespace ccm
