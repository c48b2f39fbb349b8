#include "jdf/io.hpp"

#include "jdf/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>

namespace jdf {

namespace {

constexpr char kMagic[4] = {'J', 'D', 'F', '1'};
constexpr std::uint32_t kVersion = 1;

void put_le(std::string& buf, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

} // namespace

void write_field(const std::string& path, const Tensor& t) {
    std::string buf(kMagic, 4);
    put_le(buf, kVersion, 4);
    put_le(buf, static_cast<std::uint64_t>(t.dtype()), 1);
    put_le(buf, t.rank(), 1);
    for (std::size_t e : t.shape()) put_le(buf, e, 8);
    for (double v : t.raw()) put_le(buf, std::bit_cast<std::uint64_t>(v), 8);
    std::ofstream out(path, std::ios::binary);
    if (!out || !out.write(buf.data(), static_cast<std::streamsize>(buf.size())))
        fail(ErrorCode::IoFailure, "cannot write " + path);
}

Tensor read_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot open " + path);
    std::error_code ec;
    const std::uintmax_t size = std::filesystem::file_size(path, ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot stat " + path);

    unsigned char head[10];
    if (size < 4 || !in.read(reinterpret_cast<char*>(head), 4) || !std::equal(head, head + 4, kMagic))
        fail(ErrorCode::BadMagic, path + " is not a field file");
    if (size < 10 || !in.read(reinterpret_cast<char*>(head + 4), 6)) fail(ErrorCode::Truncated, path + ": short header");
    const auto version = get_le(head + 4, 4);
    if (version != kVersion) fail(ErrorCode::UnsupportedVersion, path + ": version " + std::to_string(version));
    const auto dtype = head[8];
    const std::size_t rank = head[9];
    if (dtype > 1) fail(ErrorCode::UnsupportedVersion, path + ": unknown dtype " + std::to_string(dtype));

    const std::uintmax_t header = 10 + 8 * rank;
    if (size < header) fail(ErrorCode::Truncated, path + ": short extents");
    Shape shape(rank);
    std::uintmax_t count = 1;
    for (std::size_t i = 0; i < rank; ++i) {
        unsigned char e[8];
        in.read(reinterpret_cast<char*>(e), 8);
        shape[i] = get_le(e, 8);
        if (shape[i] == 0) fail(ErrorCode::Truncated, path + ": zero extent");
        if (count > std::numeric_limits<std::uintmax_t>::max() / 16 / shape[i])
            fail(ErrorCode::Truncated, path + ": extents overflow");
        count *= shape[i];
    }
    const std::uintmax_t payload = count * 8 * (1 + dtype);
    if (size - header < payload) fail(ErrorCode::Truncated, path + ": payload shorter than advertised");

    Tensor t = Tensor::zeros(shape, dtype == 0 ? DType::Real64 : DType::Complex128);
    std::string bytes(static_cast<std::size_t>(payload), '\0');
    if (!in.read(bytes.data(), static_cast<std::streamsize>(payload))) fail(ErrorCode::Truncated, path);
    auto raw = t.raw();
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = std::bit_cast<double>(get_le(p + 8 * i, 8));
    return t;
}

void write_pgm(const std::string& path, const Tensor& image) {
    const Shape& s = image.shape();
    if (image.is_complex() || !(s.size() == 2 || (s.size() == 3 && s[2] == 1)))
        fail(ErrorCode::ShapeMismatch, "raster needs a real [H, W] or [H, W, 1] tensor, got " + to_string(s));
    auto data = image.real_data();
    const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
    const double range = *hi - *lo;
    std::string buf = "P5\n" + std::to_string(s[1]) + " " + std::to_string(s[0]) + "\n255\n";
    for (double v : data) {
        const double unit = range > 0.0 && std::isfinite(range) ? (v - *lo) / range : 0.0;
        buf.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(unit, 0.0, 1.0) * 255.0))));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out || !out.write(buf.data(), static_cast<std::streamsize>(buf.size())))
        fail(ErrorCode::IoFailure, "cannot write " + path);
}

} // namespace jdf
