#include "lateralis/io.hpp"

#include "lateralis/error.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "containers assume a little-endian host");

namespace lateralis {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::io: return "io error";
        case ErrorCode::malformed_file: return "malformed file";
        case ErrorCode::invalid_label: return "invalid label";
        case ErrorCode::invalid_patch_size: return "invalid patch size";
        case ErrorCode::empty_source: return "empty source";
        case ErrorCode::empty_input: return "empty input";
        case ErrorCode::dimension_mismatch: return "dimension mismatch";
        case ErrorCode::insufficient_data: return "insufficient data";
        case ErrorCode::divergence: return "divergence";
        case ErrorCode::invalid_size: return "invalid size";
        case ErrorCode::invalid_neighborhood: return "invalid neighborhood";
        case ErrorCode::too_small: return "too small";
        case ErrorCode::label_out_of_range: return "label out of range";
        case ErrorCode::insufficient_sample: return "insufficient sample";
        case ErrorCode::fold_infeasible: return "fold infeasible";
        case ErrorCode::invalid_argument: return "invalid argument";
        case ErrorCode::config: return "config error";
        case ErrorCode::dependency: return "dependency error";
    }
    return "error";
}

}  // namespace lateralis

namespace lateralis::io {

BinaryWriter::BinaryWriter(const std::filesystem::path& path, std::string_view magic)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorCode::io, "cannot open for writing: " + path.string());
    bytes(magic.data(), magic.size());
    u32(kFormatVersion);
}

void BinaryWriter::bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw Error(ErrorCode::io, "write failed: " + path_.string());
}

void BinaryWriter::u8(std::uint8_t v) { bytes(&v, 1); }
void BinaryWriter::u32(std::uint32_t v) { bytes(&v, sizeof v); }
void BinaryWriter::u64(std::uint64_t v) { bytes(&v, sizeof v); }
void BinaryWriter::f64(double v) { bytes(&v, sizeof v); }

void BinaryWriter::matrix(const Matrix& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
}

void BinaryWriter::vector(const Vector& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    bytes(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
}

std::uint64_t BinaryWriter::tell() { return static_cast<std::uint64_t>(out_.tellp()); }

void BinaryWriter::patch_u64(std::uint64_t offset, std::uint64_t v) {
    auto here = out_.tellp();
    out_.seekp(static_cast<std::streamoff>(offset));
    u64(v);
    out_.seekp(here);
}

void BinaryWriter::flush() { out_.flush(); }

void BinaryWriter::close() {
    out_.close();
    if (!out_) throw Error(ErrorCode::io, "close failed: " + path_.string());
}

BinaryReader::BinaryReader(const std::filesystem::path& path, std::string_view magic)
    : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw Error(ErrorCode::io, "cannot open: " + path.string());
    size_ = std::filesystem::file_size(path);
    std::string got(magic.size(), '\0');
    in_.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (!in_ || got != magic)
        throw Error(ErrorCode::malformed_file, path.string() + ": expected magic '" + std::string(magic) + "'");
    auto version = u32();
    if (version != kFormatVersion)
        throw Error(ErrorCode::malformed_file,
                    path.string() + ": unsupported format version " + std::to_string(version));
}

void BinaryReader::bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (!in_) throw Error(ErrorCode::malformed_file, "truncated file: " + path_.string());
}

std::uint8_t BinaryReader::u8() { std::uint8_t v; bytes(&v, 1); return v; }
std::uint32_t BinaryReader::u32() { std::uint32_t v; bytes(&v, sizeof v); return v; }
std::uint64_t BinaryReader::u64() { std::uint64_t v; bytes(&v, sizeof v); return v; }
double BinaryReader::f64() { double v; bytes(&v, sizeof v); return v; }

Matrix BinaryReader::matrix() {
    auto rows = u64();
    auto cols = u64();
    if (rows != 0 && cols > (size_ / sizeof(double)) / rows)
        throw Error(ErrorCode::malformed_file, "matrix larger than file: " + path_.string());
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
    return m;
}

Vector BinaryReader::vector() {
    auto n = u64();
    if (n > size_ / sizeof(double))
        throw Error(ErrorCode::malformed_file, "vector larger than file: " + path_.string());
    Vector v(static_cast<Index>(n));
    bytes(v.data(), static_cast<std::size_t>(n) * sizeof(double));
    return v;
}

std::uint64_t BinaryReader::tell() { return static_cast<std::uint64_t>(in_.tellg()); }

bool BinaryReader::at_end() { return tell() == size_; }

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open: " + path.string());
    std::vector<std::uint8_t> data(std::filesystem::file_size(path));
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!in) throw Error(ErrorCode::io, "read failed: " + path.string());
    return data;
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::io, "write failed: " + path.string());
}

std::string checksum_bytes(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string checksum_file(const std::filesystem::path& path) {
    auto data = read_file(path);
    return checksum_bytes({reinterpret_cast<const char*>(data.data()), data.size()});
}

}  // namespace lateralis::io
