#include "vivqa/vision/feature_file.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "vivqa/core/errors.hpp"

namespace vivqa::vision {

namespace {

constexpr char kMagic[4] = {'V', 'V', 'Q', 'F'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
    return v;
}

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> encode_feature_file(const Tensor& tensor) {
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    put_u32(out, kFeatureFileVersion);
    put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    put_u32(out, crc_of(out));
    return out;
}

Tensor decode_feature_file(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16) throw FormatError("VVQF: file truncated (" + std::to_string(bytes.size()) + " bytes)");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("VVQF: bad magic");
    const std::uint32_t version = get_u32(bytes, 4);
    if (version != kFeatureFileVersion) throw FormatError("VVQF: unsupported version " + std::to_string(version));
    const std::uint32_t rank = get_u32(bytes, 8);
    const std::size_t header = 12 + 4 * static_cast<std::size_t>(rank);
    if (bytes.size() < header + 4) throw FormatError("VVQF: header truncated");
    Shape shape;
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint32_t d = get_u32(bytes, 12 + 4 * i);
        if (d == 0) throw FormatError("VVQF: zero dimension");
        shape.push_back(d);
        count *= d;
    }
    const std::size_t expected = header + 4 * count + 4;
    if (bytes.size() != expected) {
        throw FormatError("VVQF: declared " + std::to_string(count) + " elements need " + std::to_string(expected) +
                          " bytes, file has " + std::to_string(bytes.size()));
    }
    const std::uint32_t stored = get_u32(bytes, expected - 4);
    if (stored != crc_of(bytes.subspan(0, expected - 4))) throw FormatError("VVQF: checksum mismatch");
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        data[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, header + 4 * i)));
    }
    return Tensor::from(std::move(shape), std::move(data));
}

void write_feature_file(const std::filesystem::path& path, const Tensor& tensor) {
    const auto bytes = encode_feature_file(tensor);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + path.string());
}

Tensor read_feature_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open feature file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_feature_file(bytes);
}

}  // namespace vivqa::vision
