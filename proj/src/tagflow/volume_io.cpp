#include "tagflow/volume_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "tagflow/error.hpp"

namespace tagflow {

namespace {

constexpr char kMagic[8] = {'T', 'M', 'V', 'O', 'L', '0', '0', '1'};
constexpr std::size_t kHeaderBytes = 8 + 4 + 12 + 24 + 24;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void put_le(std::vector<unsigned char>& out, T value)
{
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    const U bits = std::bit_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(T); ++b)
        out.push_back(static_cast<unsigned char>((bits >> (8 * b)) & 0xFFu));
}

template <class T>
T get_le(const unsigned char* p)
{
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b)
        bits |= static_cast<U>(p[b]) << (8 * b);
    return std::bit_cast<T>(bits);
}

std::vector<unsigned char> header(VolumeFileKind kind, const Grid3& g)
{
    std::vector<unsigned char> out(kMagic, kMagic + 8);
    put_le(out, static_cast<std::uint32_t>(kind));
    for (int a = 0; a < 3; ++a)
        put_le(out, static_cast<std::uint32_t>(g.dim(a)));
    for (int a = 0; a < 3; ++a)
        put_le(out, g.spacing()[a]);
    for (int a = 0; a < 3; ++a)
        put_le(out, g.origin()[a]);
    return out;
}

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        fail(ErrorKind::io, "cannot open for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f)
        fail(ErrorKind::io, "write failed: " + path.string());
}

struct Parsed {
    VolumeFileKind kind;
    Grid3 grid;
    std::vector<float> payload;
};

Parsed parse(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        fail(ErrorKind::io, "cannot open volume: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 8) != 0)
        fail(ErrorKind::io, "not a TMV1 volume: " + path.string());
    const unsigned char* p = bytes.data() + 8;
    const auto kind_raw = get_le<std::uint32_t>(p);
    if (kind_raw > 1)
        fail(ErrorKind::io, "unknown TMV1 kind in " + path.string());
    std::array<int, 3> dims{};
    Vec3 spacing, origin;
    for (int a = 0; a < 3; ++a) {
        const auto d = get_le<std::uint32_t>(p + 4 + 4 * a);
        if (d < 2 || d > (1u << 20))
            fail(ErrorKind::io, "bad TMV1 dimensions in " + path.string());
        dims[static_cast<std::size_t>(a)] = static_cast<int>(d);
        spacing[a] = get_le<double>(p + 16 + 8 * a);
        origin[a] = get_le<double>(p + 40 + 8 * a);
    }
    Parsed out{static_cast<VolumeFileKind>(kind_raw), Grid3{}, {}};
    try {
        out.grid = Grid3(dims, spacing, origin);
    } catch (const Error& e) {
        fail(ErrorKind::io, std::string("bad TMV1 geometry in ") + path.string() + ": " + e.what());
    }
    const std::size_t count = out.grid.size() * (out.kind == VolumeFileKind::vector3 ? 3 : 1);
    if (bytes.size() != kHeaderBytes + 4 * count)
        fail(ErrorKind::io, "truncated or oversized TMV1 payload: " + path.string());
    out.payload.resize(count);
    for (std::size_t n = 0; n < count; ++n) {
        out.payload[n] = get_le<float>(bytes.data() + kHeaderBytes + 4 * n);
        if (!std::isfinite(out.payload[n]))
            fail(ErrorKind::io, "non-finite value in " + path.string());
    }
    return out;
}

} // namespace

void write_volume(const std::filesystem::path& path, const ScalarVolume& v)
{
    auto bytes = header(VolumeFileKind::scalar, v.grid());
    bytes.reserve(bytes.size() + 4 * v.size());
    for (double x : v.values())
        put_le(bytes, static_cast<float>(x));
    write_bytes(path, bytes);
}

void write_volume(const std::filesystem::path& path, const VectorVolume& v)
{
    auto bytes = header(VolumeFileKind::vector3, v.grid());
    bytes.reserve(bytes.size() + 12 * v.size());
    for (const Vec3& x : v.values())
        for (int a = 0; a < 3; ++a)
            put_le(bytes, static_cast<float>(x[a]));
    write_bytes(path, bytes);
}

ScalarVolume read_scalar_volume(const std::filesystem::path& path)
{
    Parsed p = parse(path);
    if (p.kind != VolumeFileKind::scalar)
        fail(ErrorKind::io, "expected a scalar volume: " + path.string());
    return ScalarVolume(p.grid, std::vector<double>(p.payload.begin(), p.payload.end()));
}

VectorVolume read_vector_volume(const std::filesystem::path& path, FieldKind kind)
{
    Parsed p = parse(path);
    if (p.kind != VolumeFileKind::vector3)
        fail(ErrorKind::io, "expected a vector volume: " + path.string());
    std::vector<Vec3> values(p.grid.size());
    for (std::size_t n = 0; n < values.size(); ++n)
        values[n] = {p.payload[3 * n], p.payload[3 * n + 1], p.payload[3 * n + 2]};
    return VectorVolume(p.grid, kind, std::move(values));
}

AnyVolume read_volume(const std::filesystem::path& path, FieldKind vector_kind)
{
    Parsed p = parse(path);
    if (p.kind == VolumeFileKind::scalar)
        return ScalarVolume(p.grid, std::vector<double>(p.payload.begin(), p.payload.end()));
    std::vector<Vec3> values(p.grid.size());
    for (std::size_t n = 0; n < values.size(); ++n)
        values[n] = {p.payload[3 * n], p.payload[3 * n + 1], p.payload[3 * n + 2]};
    return VectorVolume(p.grid, vector_kind, std::move(values));
}

} // namespace tagflow
