#include "avtca/io.hpp"

#include <cstring>
#include <fstream>

#include "avtca/errors.hpp"

namespace avtca {
namespace io {

namespace {

constexpr char kMagic[4] = {'A', 'V', 'T', '1'};

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void write_avt1(std::ostream& os, const Shape& shape, const float* data) {
    if (shape.size() > 255) throw ShapeError("AVT1 rank limit exceeded");
    os.write(kMagic, 4);
    unsigned char rank = static_cast<unsigned char>(shape.size());
    os.write(reinterpret_cast<const char*>(&rank), 1);
    for (int d : shape) {
        if (d <= 0) throw ShapeError("AVT1 extents must be positive, got " + shape_str(shape));
        put_u32(os, static_cast<uint32_t>(d));
    }
    const int64_t n = numel(shape);
    // f32 little-endian payload; this build targets little-endian hosts.
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(data), n * 4);
}

void write_avt1_file(const std::string& path, const Shape& shape, const float* data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    write_avt1(os, shape, data);
    if (!os) throw DataError("write failed: " + path);
}

RawTensor read_avt1(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("not an AVT1 tensor stream");
    unsigned char rank = 0;
    is.read(reinterpret_cast<char*>(&rank), 1);
    RawTensor out;
    out.shape.resize(rank);
    for (int i = 0; i < rank; ++i) {
        uint32_t d = get_u32(is);
        if (!is || d == 0) throw DataError("AVT1 extent invalid");
        out.shape[i] = static_cast<int>(d);
    }
    const int64_t n = numel(out.shape);
    out.data.resize(static_cast<size_t>(n));
    is.read(reinterpret_cast<char*>(out.data.data()), n * 4);
    if (!is) throw DataError("AVT1 payload truncated");
    return out;
}

RawTensor read_avt1_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);
    return read_avt1(is);
}

}  // namespace io
}  // namespace avtca
