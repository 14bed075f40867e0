#pragma once

#include "lateralis/linalg.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace lateralis::io {

// All containers share one framing: 4-byte magic, u32 format version, then
// little-endian fields. Readers reject unknown magic or version.
constexpr std::uint32_t kFormatVersion = 1;

class BinaryWriter {
public:
    BinaryWriter(const std::filesystem::path& path, std::string_view magic);

    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void bytes(const void* data, std::size_t n);
    void matrix(const Matrix& m);  // rows, cols, then row-major values
    void vector(const Vector& v);  // length, then values

    // Overwrites a previously written u64 at absolute byte offset.
    void patch_u64(std::uint64_t offset, std::uint64_t v);
    std::uint64_t tell();
    void flush();
    void close();

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

class BinaryReader {
public:
    BinaryReader(const std::filesystem::path& path, std::string_view magic);

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    void bytes(void* data, std::size_t n);
    Matrix matrix();
    Vector vector();

    std::uint64_t size() const noexcept { return size_; }
    std::uint64_t tell();
    bool at_end();

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::uint64_t size_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// FNV-1a 64 over the file bytes, rendered as 16 lowercase hex digits.
std::string checksum_bytes(std::string_view data);
std::string checksum_file(const std::filesystem::path& path);

}  // namespace lateralis::io
