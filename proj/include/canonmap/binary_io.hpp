#pragma once

// Little-endian binary helpers shared by the on-disk cache formats
// (CSB1, CGT1, CVP1, CFM1, CPG1, CCK1).

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace canonmap::io {

class ByteWriter {
public:
    void magic(std::string_view tag);
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void f32(float v);
    void f32s(std::span<const float> values);
    void str(std::string_view s);  // u32 length + bytes
    void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
    void raw(std::string_view data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    void write_file(const std::filesystem::path& path) const;

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::vector<std::uint8_t> bytes, std::string origin = {});
    static ByteReader from_file(const std::filesystem::path& path);

    // Throws BadMagic when the next four bytes differ from `tag`.
    void expect_magic(std::string_view tag);
    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    float f32();
    void f32s(std::span<float> out);
    std::string str();

    std::size_t remaining() const { return bytes_.size() - pos_; }
    // Throws Truncated unless at least n bytes remain.
    void require(std::size_t n) const;

private:
    std::vector<std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    std::string origin_;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace canonmap::io
