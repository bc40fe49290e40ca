#include "canonmap/binary_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "canonmap/error.hpp"

namespace canonmap::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

void ByteWriter::magic(std::string_view tag) {
    bytes_.insert(bytes_.end(), tag.begin(), tag.end());
}

void ByteWriter::u16(std::uint16_t v) {
    bytes_.push_back(static_cast<std::uint8_t>(v & 0xff));
    bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f32s(std::span<const float> values) {
    const auto* raw = reinterpret_cast<const std::uint8_t*>(values.data());
    bytes_.insert(bytes_.end(), raw, raw + values.size_bytes());
}

void ByteWriter::str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::write_file(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    // Write to a sibling temp file then rename, so readers never see half a file.
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot open for writing: " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes_.data()),
                  static_cast<std::streamsize>(bytes_.size()));
        if (!out) fail(ErrorKind::Io, "write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::MissingInput, "cannot open: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ByteReader::ByteReader(std::vector<std::uint8_t> bytes, std::string origin)
    : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

ByteReader ByteReader::from_file(const std::filesystem::path& path) {
    return ByteReader(read_file_bytes(path), path.string());
}

void ByteReader::require(std::size_t n) const {
    if (remaining() < n) {
        fail(ErrorKind::Truncated, "truncated payload" + (origin_.empty() ? "" : " in " + origin_));
    }
}

void ByteReader::expect_magic(std::string_view tag) {
    require(tag.size());
    if (std::string_view(reinterpret_cast<const char*>(bytes_.data() + pos_), tag.size()) != tag) {
        fail(ErrorKind::BadMagic, "bad magic (expected " + std::string(tag) + ")" +
                                      (origin_.empty() ? "" : " in " + origin_));
    }
    pos_ += tag.size();
}

std::uint8_t ByteReader::u8() {
    require(1);
    return bytes_[pos_++];
}

std::uint16_t ByteReader::u16() {
    require(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
}

std::uint32_t ByteReader::u32() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

void ByteReader::f32s(std::span<float> out) {
    require(out.size_bytes());
    std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
}

std::string ByteReader::str() {
    std::uint32_t n = u32();
    require(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
}

}  // namespace canonmap::io
