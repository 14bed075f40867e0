#include "lateralis/dataset.hpp"

#include "lateralis/error.hpp"
#include "lateralis/io.hpp"
#include "lateralis/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <string>

namespace lateralis {

LabeledImageSet load_cifar10_batch(const std::filesystem::path& path) {
    std::error_code ec;
    auto size = std::filesystem::file_size(path, ec);
    if (ec) throw Error(ErrorCode::io, "cannot stat " + path.string() + ": " + ec.message());
    if (size == 0 || size % kRecordBytes != 0)
        throw Error(ErrorCode::malformed_file,
                    path.string() + ": size " + std::to_string(size) + " is not a positive multiple of 3073");

    auto bytes = io::read_file(path);
    LabeledImageSet images(size / kRecordBytes);
    for (std::size_t k = 0; k < images.size(); ++k) {
        const std::uint8_t* rec = bytes.data() + k * kRecordBytes;
        if (rec[0] >= kNumClasses)
            throw Error(ErrorCode::invalid_label, path.string() + ": record " + std::to_string(k) +
                                                      " has label " + std::to_string(rec[0]));
        images[k].label = rec[0];
        std::copy(rec + 1, rec + kRecordBytes, images[k].pixels.begin());
    }
    return images;
}

void write_cifar10_batch(const std::filesystem::path& path, std::span<const LabeledImage> images) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot open for writing: " + path.string());
    for (const auto& img : images) {
        if (img.label >= kNumClasses)
            throw Error(ErrorCode::invalid_label, "label " + std::to_string(img.label));
        out.put(static_cast<char>(img.label));
        out.write(reinterpret_cast<const char*>(img.pixels.data()), kPixelBytes);
    }
    if (!out) throw Error(ErrorCode::io, "write failed: " + path.string());
}

void copy_patch(const LabeledImage& image, int patch_size, int row, int col, double* out) noexcept {
    for (int c = 0; c < kChannels; ++c)
        for (int r = 0; r < patch_size; ++r) {
            const std::uint8_t* src =
                image.pixels.data() + static_cast<std::size_t>((c * kImageSide + row + r) * kImageSide + col);
            for (int x = 0; x < patch_size; ++x) *out++ = static_cast<double>(src[x]);
        }
}

namespace {

void check_sampling_args(std::span<const LabeledImage> images, std::size_t n, int patch_size) {
    if (patch_size < 1 || patch_size > kImageSide)
        throw Error(ErrorCode::invalid_patch_size, "patch size " + std::to_string(patch_size) + " not in [1, 32]");
    if (images.empty() && n > 0) throw Error(ErrorCode::empty_source, "cannot sample patches from zero images");
}

// Stream 0 picks the image, 1 the row, 2 the column; counter = patch index.
inline void sample_one(std::span<const LabeledImage> images, int patch_size, const CounterRng& rng,
                       std::uint64_t r, double* out) noexcept {
    const std::uint64_t corners = static_cast<std::uint64_t>(kImageSide - patch_size + 1);
    auto img = rng.below(0, r, images.size());
    auto row = static_cast<int>(rng.below(1, r, corners));
    auto col = static_cast<int>(rng.below(2, r, corners));
    copy_patch(images[img], patch_size, row, col, out);
}

}  // namespace

PatchMatrix sample_patches(std::span<const LabeledImage> images, std::size_t n, int patch_size,
                           std::uint64_t seed) {
    check_sampling_args(images, n, patch_size);
    PatchMatrix out(static_cast<Index>(n), patch_dim(patch_size));
    const CounterRng rng(seed);
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < count; ++r)
        sample_one(images, patch_size, rng, static_cast<std::uint64_t>(r), out.row(r).data());
    return out;
}

namespace serial {

PatchMatrix sample_patches(std::span<const LabeledImage> images, std::size_t n, int patch_size,
                           std::uint64_t seed) {
    check_sampling_args(images, n, patch_size);
    PatchMatrix out(static_cast<Index>(n), patch_dim(patch_size));
    const CounterRng rng(seed);
    for (std::size_t r = 0; r < n; ++r) sample_one(images, patch_size, rng, r, out.row(static_cast<Index>(r)).data());
    return out;
}

}  // namespace serial

void normalize_patches_inplace(PatchMatrix& patches, double norm_eps) {
    require(norm_eps > 0, ErrorCode::invalid_argument, "norm_eps must be positive");
    const Index rows = patches.rows();
    const double d = static_cast<double>(patches.cols());
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < rows; ++i) {
        auto row = patches.row(i);
        const double mean = row.sum() / d;
        row.array() -= mean;
        const double var = row.squaredNorm() / d;
        row /= std::sqrt(var + norm_eps);
    }
}

PatchMatrix normalize_patches(const PatchMatrix& patches, double norm_eps) {
    PatchMatrix out = patches;
    normalize_patches_inplace(out, norm_eps);
    return out;
}

ZcaTransform fit_zca(const PatchMatrix& data, double zca_eps) {
    require(data.rows() > 0, ErrorCode::empty_input, "cannot fit whitening on an empty patch set");
    require(zca_eps > 0, ErrorCode::invalid_argument, "zca_eps must be positive");
    ZcaTransform t;
    t.mean = data.colwise().mean().transpose();
    Matrix centered = data.rowwise() - t.mean.transpose();
    Matrix cov = (centered.transpose() * centered) / static_cast<double>(data.rows());
    cov = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    Vector scale = (eig.eigenvalues().array().max(0.0) + zca_eps).rsqrt().matrix();
    const Matrix& basis = eig.eigenvectors();
    t.whitener = basis * scale.asDiagonal() * basis.transpose();
    t.whitener = 0.5 * (t.whitener + t.whitener.transpose());
    return t;
}

Preprocessor fit_preprocessor(const PatchMatrix& patches, double norm_eps, double zca_eps) {
    require(patches.rows() > 0, ErrorCode::empty_input, "cannot fit a preprocessor on an empty patch set");
    require(norm_eps > 0, ErrorCode::invalid_argument, "norm_eps must be positive");
    require(zca_eps > 0, ErrorCode::invalid_argument, "zca_eps must be positive");
    Preprocessor pp;
    const auto side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(patches.cols()) / kChannels)));
    pp.patch_size = patch_dim(side) == patches.cols() ? side : 0;
    pp.norm_eps = norm_eps;
    pp.zca_eps = zca_eps;
    auto zca = fit_zca(normalize_patches(patches, norm_eps), zca_eps);
    pp.zca_mean = std::move(zca.mean);
    pp.zca_whitener = std::move(zca.whitener);
    return pp;
}

PatchMatrix apply_preprocessor(const Preprocessor& pp, const PatchMatrix& patches) {
    if (patches.cols() != pp.dim())
        throw Error(ErrorCode::dimension_mismatch, "patch dim " + std::to_string(patches.cols()) +
                                                       " vs preprocessor dim " + std::to_string(pp.dim()));
    PatchMatrix x = normalize_patches(patches, pp.norm_eps);
    x.rowwise() -= pp.zca_mean.transpose();
    // Whitener is symmetric, so right-multiplying row vectors applies it.
    return x * pp.zca_whitener;
}

void save_preprocessor(const Preprocessor& pp, const std::filesystem::path& path) {
    io::BinaryWriter w(path, "LTPP");
    w.u32(static_cast<std::uint32_t>(pp.patch_size));
    w.f64(pp.norm_eps);
    w.f64(pp.zca_eps);
    w.vector(pp.zca_mean);
    w.matrix(pp.zca_whitener);
    w.close();
}

Preprocessor load_preprocessor(const std::filesystem::path& path) {
    io::BinaryReader r(path, "LTPP");
    Preprocessor pp;
    pp.patch_size = static_cast<int>(r.u32());
    pp.norm_eps = r.f64();
    pp.zca_eps = r.f64();
    pp.zca_mean = r.vector();
    pp.zca_whitener = r.matrix();
    if (pp.zca_whitener.rows() != pp.dim() || pp.zca_whitener.cols() != pp.dim() || !r.at_end())
        throw Error(ErrorCode::malformed_file, path.string() + ": inconsistent preprocessor dimensions");
    return pp;
}

}  // namespace lateralis
