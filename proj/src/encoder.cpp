#include "lateralis/encoder.hpp"
#include "lateralis/error.hpp"
#include "lateralis/io.hpp"

#include <string>

namespace lateralis {

namespace {
template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

enum class EncoderTag : std::uint32_t { kmeans = 0, sparse_ae = 1 };
}  // namespace

Index encoder_features(const Encoder& enc) noexcept {
    return std::visit([](const auto& e) { return e.features(); }, enc);
}

Index encoder_dim(const Encoder& enc) noexcept {
    return std::visit([](const auto& e) { return e.dim(); }, enc);
}

const char* encoder_kind(const Encoder& enc) noexcept {
    return std::holds_alternative<KMeansEncoder>(enc) ? "kmeans" : "sparse_ae";
}

Matrix encode(const Encoder& enc, const PatchMatrix& patches) {
    return std::visit(overloaded{[&](const KMeansEncoder& e) { return encode_triangle(e, patches); },
                                 [&](const SparseAutoencoder& e) { return encode_ae(e, patches); }},
                      enc);
}

Vector encode(const Encoder& enc, std::span<const double> patch) {
    return std::visit(overloaded{[&](const KMeansEncoder& e) { return encode_triangle(e, patch); },
                                 [&](const SparseAutoencoder& e) { return encode_ae(e, patch); }},
                      enc);
}

void save_encoder(const Encoder& enc, const std::filesystem::path& path) {
    io::BinaryWriter w(path, "LTEN");
    std::visit(overloaded{[&](const KMeansEncoder& e) {
                              w.u32(static_cast<std::uint32_t>(EncoderTag::kmeans));
                              w.u64(static_cast<std::uint64_t>(e.features()));
                              w.u64(static_cast<std::uint64_t>(e.dim()));
                              w.matrix(e.centroids);
                          },
                          [&](const SparseAutoencoder& e) {
                              w.u32(static_cast<std::uint32_t>(EncoderTag::sparse_ae));
                              w.u64(static_cast<std::uint64_t>(e.features()));
                              w.u64(static_cast<std::uint64_t>(e.dim()));
                              w.f64(e.sparsity_target);
                              w.f64(e.sparsity_weight);
                              w.f64(e.weight_decay);
                              w.matrix(e.w_enc);
                              w.vector(e.b_enc);
                              w.matrix(e.w_dec);
                              w.vector(e.b_dec);
                          }},
               enc);
    w.close();
}

Encoder load_encoder(const std::filesystem::path& path) {
    io::BinaryReader r(path, "LTEN");
    auto tag = r.u32();
    auto k = static_cast<Index>(r.u64());
    auto d = static_cast<Index>(r.u64());
    auto bad = [&] { return Error(ErrorCode::malformed_file, path.string() + ": inconsistent encoder parameters"); };
    if (tag == static_cast<std::uint32_t>(EncoderTag::kmeans)) {
        KMeansEncoder e{r.matrix()};
        if (e.features() != k || e.dim() != d || !r.at_end()) throw bad();
        return e;
    }
    if (tag == static_cast<std::uint32_t>(EncoderTag::sparse_ae)) {
        SparseAutoencoder e;
        e.sparsity_target = r.f64();
        e.sparsity_weight = r.f64();
        e.weight_decay = r.f64();
        e.w_enc = r.matrix();
        e.b_enc = r.vector();
        e.w_dec = r.matrix();
        e.b_dec = r.vector();
        if (e.features() != k || e.dim() != d || e.b_enc.size() != k || e.w_dec.rows() != d ||
            e.w_dec.cols() != k || e.b_dec.size() != d || !r.at_end())
            throw bad();
        return e;
    }
    throw Error(ErrorCode::malformed_file, path.string() + ": unknown encoder kind " + std::to_string(tag));
}

}  // namespace lateralis
