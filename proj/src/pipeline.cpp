#include "lateralis/pipeline.hpp"

#include "lateralis/error.hpp"

#include <cmath>
#include <string>

namespace lateralis {

int positions_per_side(int patch_size, int stride) {
    if (patch_size < 1 || patch_size > kImageSide)
        throw Error(ErrorCode::invalid_patch_size, "patch size " + std::to_string(patch_size) + " not in [1, 32]");
    require(stride >= 1, ErrorCode::invalid_argument, "stride must be >= 1");
    return (kImageSide - patch_size) / stride + 1;
}

FeatureMap extract_feature_map(const LabeledImage& image, const Preprocessor& pp, const Encoder& enc,
                               const InhibitoryMatrix* inh, int stride, Matrix* codes) {
    const int p = pp.patch_size;
    const int side = positions_per_side(p, stride);
    if (encoder_dim(enc) != pp.dim())
        throw Error(ErrorCode::dimension_mismatch, "encoder dim " + std::to_string(encoder_dim(enc)) +
                                                       " vs preprocessor dim " + std::to_string(pp.dim()));
    if (inh && inh->size() != encoder_features(enc))
        throw Error(ErrorCode::dimension_mismatch, "inhibitory layer size " + std::to_string(inh->size()) +
                                                       " vs encoder features " + std::to_string(encoder_features(enc)));

    PatchMatrix patches(static_cast<Index>(side) * side, patch_dim(p));
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            copy_patch(image, p, y * stride, x * stride, patches.row(static_cast<Index>(y) * side + x).data());

    FeatureMap map;
    map.height = side;
    map.width = side;
    map.depth = encoder_features(enc);
    Matrix z = encode(enc, apply_preprocessor(pp, patches));
    if (inh) {
        map.values = inhibit_forward(*inh, z);
        if (codes) *codes = std::move(z);
    } else {
        if (codes) *codes = z;
        map.values = std::move(z);
    }
    return map;
}

Vector quadrant_pool(const FeatureMap& map) {
    if (map.height < 2 || map.width < 2)
        throw Error(ErrorCode::too_small, "quadrant pooling needs at least a 2x2 map, got " +
                                              std::to_string(map.height) + "x" + std::to_string(map.width));
    const int mid_y = map.height / 2;
    const int mid_x = map.width / 2;
    const int ys[3] = {0, mid_y, map.height};
    const int xs[3] = {0, mid_x, map.width};
    const Index k = map.depth;
    Vector out(4 * k);
    for (int qy = 0; qy < 2; ++qy)
        for (int qx = 0; qx < 2; ++qx) {
            auto block = out.segment((qy * 2 + qx) * k, k);
            block.setZero();
            for (int y = ys[qy]; y < ys[qy + 1]; ++y)
                for (int x = xs[qx]; x < xs[qx + 1]; ++x)
                    block += map.values.row(static_cast<Index>(y) * map.width + x).transpose();
            block /= static_cast<double>((ys[qy + 1] - ys[qy]) * (xs[qx + 1] - xs[qx]));
        }
    return out;
}

Matrix extract_features(std::span<const LabeledImage> images, const Preprocessor& pp, const Encoder& enc,
                        const InhibitoryMatrix* inh, int stride) {
    Matrix out(static_cast<Index>(images.size()), 4 * encoder_features(enc));
    const auto n = static_cast<std::int64_t>(images.size());
    // Exceptions cannot leave an OpenMP region; capture the first and rethrow.
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            out.row(i) = quadrant_pool(extract_feature_map(images[static_cast<std::size_t>(i)], pp, enc, inh, stride))
                             .transpose();
        } catch (...) {
#pragma omp critical(lateralis_extract_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

namespace serial {

Matrix extract_features(std::span<const LabeledImage> images, const Preprocessor& pp, const Encoder& enc,
                        const InhibitoryMatrix* inh, int stride) {
    Matrix out(static_cast<Index>(images.size()), 4 * encoder_features(enc));
    for (std::size_t i = 0; i < images.size(); ++i)
        out.row(static_cast<Index>(i)) = quadrant_pool(extract_feature_map(images[i], pp, enc, inh, stride)).transpose();
    return out;
}

}  // namespace serial

Standardizer fit_standardizer(const Matrix& features) {
    require(features.rows() > 0, ErrorCode::empty_input, "cannot standardize an empty feature set");
    Standardizer s;
    s.mean = features.colwise().mean().transpose();
    Matrix centered = features.rowwise() - s.mean.transpose();
    s.scale = (centered.colwise().squaredNorm().transpose() / static_cast<double>(features.rows()))
                  .array()
                  .sqrt()
                  .max(Standardizer::kStdFloor)
                  .matrix();
    return s;
}

Matrix apply_standardizer(const Standardizer& s, const Matrix& features) {
    if (features.cols() != s.mean.size())
        throw Error(ErrorCode::dimension_mismatch, "feature dim " + std::to_string(features.cols()) +
                                                       " vs standardizer dim " + std::to_string(s.mean.size()));
    Matrix out = features.rowwise() - s.mean.transpose();
    out.array().rowwise() /= s.scale.transpose().array();
    return out;
}

void save_standardizer(const Standardizer& s, const std::filesystem::path& path) {
    io::BinaryWriter w(path, "LTST");
    w.vector(s.mean);
    w.vector(s.scale);
    w.close();
}

Standardizer load_standardizer(const std::filesystem::path& path) {
    io::BinaryReader r(path, "LTST");
    Standardizer s;
    s.mean = r.vector();
    s.scale = r.vector();
    if (s.mean.size() != s.scale.size() || !r.at_end())
        throw Error(ErrorCode::malformed_file, path.string() + ": inconsistent standardizer");
    return s;
}

FeatureWriter::FeatureWriter(const std::filesystem::path& path, Index feature_dim)
    : out_(path, "LTFM"), dim_(feature_dim) {
    out_.u64(static_cast<std::uint64_t>(feature_dim));
    count_offset_ = out_.tell();
    out_.u64(0);
}

void FeatureWriter::append(std::uint8_t label, std::span<const double> features) {
    if (static_cast<Index>(features.size()) != dim_)
        throw Error(ErrorCode::dimension_mismatch, "feature row has " + std::to_string(features.size()) +
                                                       " values, container holds " + std::to_string(dim_));
    out_.u8(label);
    out_.bytes(features.data(), features.size() * sizeof(double));
    ++count_;
}

void FeatureWriter::finish() {
    out_.patch_u64(count_offset_, count_);
    out_.close();
}

void save_features(const FeatureSet& set, const std::filesystem::path& path) {
    if (static_cast<Index>(set.labels.size()) != set.features.rows())
        throw Error(ErrorCode::dimension_mismatch, "label count does not match feature rows");
    FeatureWriter w(path, set.features.cols());
    for (Index i = 0; i < set.features.rows(); ++i)
        w.append(static_cast<std::uint8_t>(set.labels[static_cast<std::size_t>(i)]),
                 {set.features.row(i).data(), static_cast<std::size_t>(set.features.cols())});
    w.finish();
}

FeatureSet load_features(const std::filesystem::path& path) {
    io::BinaryReader r(path, "LTFM");
    const auto dim = r.u64();
    const auto n = r.u64();
    const std::uint64_t record = 1 + dim * sizeof(double);
    if (dim == 0 || r.size() != r.tell() + n * record)
        throw Error(ErrorCode::malformed_file, path.string() + ": record count does not match file size");
    FeatureSet set;
    set.features.resize(static_cast<Index>(n), static_cast<Index>(dim));
    set.labels.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        set.labels[i] = r.u8();
        r.bytes(set.features.row(static_cast<Index>(i)).data(), dim * sizeof(double));
    }
    return set;
}

}  // namespace lateralis
