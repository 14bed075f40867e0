#pragma once

#include "lateralis/dataset.hpp"
#include "lateralis/encoder.hpp"
#include "lateralis/inhibition.hpp"
#include "lateralis/io.hpp"
#include "lateralis/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace lateralis {

// H' x W' x K activations, stored position-major (all K channels of one
// position are contiguous).
struct FeatureMap {
    int height = 0;
    int width = 0;
    Index depth = 0;
    Matrix values;  // (H' * W') x K, row = y * W' + x

    double at(int y, int x, Index k) const noexcept { return values(static_cast<Index>(y) * width + x, k); }
};

// Number of patch positions along one side: (32 - p) / stride + 1.
int positions_per_side(int patch_size, int stride);

// All patch positions of one image, preprocessed and encoded. Encodings before
// inhibition are returned through `codes` when non-null.
FeatureMap extract_feature_map(const LabeledImage& image, const Preprocessor& pp, const Encoder& enc,
                               const InhibitoryMatrix* inh, int stride, Matrix* codes = nullptr);

// Four quadrants split at floor(H'/2) and floor(W'/2); each channel is
// averaged within each quadrant. Output order: top-left, top-right,
// bottom-left, bottom-right, K values each.
Vector quadrant_pool(const FeatureMap& map);

// One pooled 4K-dim descriptor per image. Parallel over images; every row is
// computed by exactly the same arithmetic as the serial kernel.
Matrix extract_features(std::span<const LabeledImage> images, const Preprocessor& pp, const Encoder& enc,
                        const InhibitoryMatrix* inh, int stride);

namespace serial {
Matrix extract_features(std::span<const LabeledImage> images, const Preprocessor& pp, const Encoder& enc,
                        const InhibitoryMatrix* inh, int stride);
}

// Per-dimension standardization fitted on training features.
struct Standardizer {
    Vector mean;
    Vector scale;  // std with a 1e-8 floor

    static constexpr double kStdFloor = 1e-8;
};

Standardizer fit_standardizer(const Matrix& features);
Matrix apply_standardizer(const Standardizer& s, const Matrix& features);

void save_standardizer(const Standardizer& s, const std::filesystem::path& path);
Standardizer load_standardizer(const std::filesystem::path& path);

// Streamable labelled feature container: header (F, N), then per image one
// label byte and F reals. N is patched on finish().
class FeatureWriter {
public:
    FeatureWriter(const std::filesystem::path& path, Index feature_dim);
    void append(std::uint8_t label, std::span<const double> features);
    void finish();
    std::uint64_t count() const noexcept { return count_; }

private:
    io::BinaryWriter out_;
    Index dim_;
    std::uint64_t count_offset_ = 0;
    std::uint64_t count_ = 0;
};

struct FeatureSet {
    Matrix features;  // N x F
    std::vector<int> labels;
};

void save_features(const FeatureSet& set, const std::filesystem::path& path);
FeatureSet load_features(const std::filesystem::path& path);

}  // namespace lateralis
