#pragma once

#include "lateralis/linalg.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace lateralis {

constexpr int kImageSide = 32;
constexpr int kChannels = 3;
constexpr std::size_t kPixelBytes = kImageSide * kImageSide * kChannels;  // 3072
constexpr std::size_t kRecordBytes = kPixelBytes + 1;                      // 3073
constexpr int kNumClasses = 10;

// One CIFAR-10 image: 1024 R, 1024 G, 1024 B bytes, each plane row-major 32x32.
struct LabeledImage {
    std::array<std::uint8_t, kPixelBytes> pixels{};
    std::uint8_t label = 0;

    std::uint8_t at(int channel, int row, int col) const noexcept {
        return pixels[static_cast<std::size_t>((channel * kImageSide + row) * kImageSide + col)];
    }
};

using LabeledImageSet = std::vector<LabeledImage>;

LabeledImageSet load_cifar10_batch(const std::filesystem::path& path);
void write_cifar10_batch(const std::filesystem::path& path, std::span<const LabeledImage> images);

inline Index patch_dim(int patch_size) noexcept { return Index{kChannels} * patch_size * patch_size; }

// Copies the p x p patch with top-left corner (row, col) into `out`, channel-major
// then row-major (the same plane order as the image bytes).
void copy_patch(const LabeledImage& image, int patch_size, int row, int col, double* out) noexcept;

// Draws each patch by uniformly sampling an image and a top-left corner in
// [0, 32-p]^2. Row r depends only on (seed, r), so the result is identical for
// any thread count.
PatchMatrix sample_patches(std::span<const LabeledImage> images, std::size_t n, int patch_size,
                           std::uint64_t seed);

namespace serial {
PatchMatrix sample_patches(std::span<const LabeledImage> images, std::size_t n, int patch_size,
                           std::uint64_t seed);
}

// Per-patch contrast normalization followed by ZCA whitening.
struct Preprocessor {
    int patch_size = 0;
    double norm_eps = 10.0;
    double zca_eps = 0.1;
    Vector zca_mean;
    Matrix zca_whitener;

    Index dim() const noexcept { return zca_mean.size(); }
};

// (x - mean(x)) / sqrt(var(x) + norm_eps), row by row; variance is the
// population variance over the row.
void normalize_patches_inplace(PatchMatrix& patches, double norm_eps);
PatchMatrix normalize_patches(const PatchMatrix& patches, double norm_eps);

struct ZcaTransform {
    Vector mean;
    Matrix whitener;
};

// Whitener E diag(1/sqrt(lambda + zca_eps)) E^T of the population covariance.
ZcaTransform fit_zca(const PatchMatrix& data, double zca_eps);

Preprocessor fit_preprocessor(const PatchMatrix& patches, double norm_eps, double zca_eps);
PatchMatrix apply_preprocessor(const Preprocessor& pp, const PatchMatrix& patches);

void save_preprocessor(const Preprocessor& pp, const std::filesystem::path& path);
Preprocessor load_preprocessor(const std::filesystem::path& path);

}  // namespace lateralis
