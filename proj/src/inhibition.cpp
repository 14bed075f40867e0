#include "lateralis/inhibition.hpp"

#include "lateralis/error.hpp"
#include "lateralis/io.hpp"
#include "lateralis/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace lateralis {

struct InhibitoryAccess {
    static Matrix& weights(InhibitoryMatrix& m) { return m.weights_; }
    static std::vector<std::uint8_t>& mask(InhibitoryMatrix& m) { return m.mask_; }
    static InhibitoryMatrix make(Index k, Matrix weights, std::vector<std::uint8_t> mask) {
        InhibitoryMatrix m;
        m.k_ = k;
        m.weights_ = std::move(weights);
        m.mask_ = std::move(mask);
        return m;
    }
};

namespace {

constexpr double kColumnSumTolerance = 1e-9;

void check_length(const InhibitoryMatrix& inh, std::size_t n, const char* what) {
    if (static_cast<Index>(n) != inh.size())
        throw Error(ErrorCode::dimension_mismatch, std::string(what) + " has length " + std::to_string(n) +
                                                       ", inhibitory layer has " + std::to_string(inh.size()));
}

// Divides every column with a positive sum by that sum.
void normalize_columns(Matrix& w) {
    RowVector sums = w.colwise().sum();
    for (Index i = 0; i < w.cols(); ++i)
        if (sums[i] > 0.0) w.col(i) /= sums[i];
}

void hebbian_update_inplace(InhibitoryMatrix& inh, std::span<const double> z, std::span<const double> h,
                            double alpha, HebbianVariant variant) {
    const Index k = inh.size();
    Matrix& w = InhibitoryAccess::weights(inh);
    const auto& mask = InhibitoryAccess::mask(inh);
    RowVector sums = RowVector::Zero(k);
    for (Index j = 0; j < k; ++j) {
        const std::uint8_t* linked = mask.data() + j * k;
        double* row = w.row(j).data();
        for (Index i = 0; i < k; ++i) {
            if (!linked[i]) continue;
            const double term = variant == HebbianVariant::literal ? z[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(j)]
                                                                   : z[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(i)];
            row[i] += alpha * term;
            sums[i] += row[i];
        }
    }
    for (Index i = 0; i < k; ++i) {
        if (sums[i] > 0.0) w.col(i) /= sums[i];
        // A zero raw sum means every surviving link was already 0; nothing to rescale.
    }
}

void forward_inplace(const InhibitoryMatrix& inh, std::span<const double> z, std::span<double> h) {
    const Index k = inh.size();
    Eigen::Map<const RowVector> zr(z.data(), k);
    Eigen::Map<RowVector> hr(h.data(), k);
    hr.noalias() = zr * inh.weights();
    hr = (zr - hr).cwiseMax(0.0);
}

}  // namespace

Index InhibitoryMatrix::surviving_links(Index receiver) const noexcept {
    Index n = 0;
    for (Index j = 0; j < k_; ++j) n += linked(j, receiver) ? 1 : 0;
    return n;
}

InhibitoryMatrix InhibitoryMatrix::from_parts(Matrix weights, std::vector<std::uint8_t> mask) {
    const Index k = weights.rows();
    if (weights.cols() != k || static_cast<Index>(mask.size()) != k * k)
        throw Error(ErrorCode::invalid_size, "inhibitory weights must be K x K with a K*K mask");
    for (Index i = 0; i < k; ++i) {
        double sum = 0.0;
        bool any = false;
        for (Index j = 0; j < k; ++j) {
            const bool on = mask[static_cast<std::size_t>(j * k + i)] != 0;
            const double v = weights(j, i);
            if (j == i && (on || v != 0.0))
                throw Error(ErrorCode::invalid_argument, "self-inhibition link at neuron " + std::to_string(i));
            if (!on && v != 0.0)
                throw Error(ErrorCode::invalid_argument, "pruned link carries nonzero weight");
            if (!(v >= 0.0) || !std::isfinite(v))
                throw Error(ErrorCode::invalid_argument, "inhibitory weights must be finite and nonnegative");
            sum += v;
            any = any || on;
        }
        if (any && std::abs(sum - 1.0) > kColumnSumTolerance)
            throw Error(ErrorCode::invalid_argument, "column " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
    for (auto& b : mask) b = b ? 1 : 0;
    return InhibitoryAccess::make(k, std::move(weights), std::move(mask));
}

InhibitoryMatrix init_inhibitory(Index k) {
    if (k < 1) throw Error(ErrorCode::invalid_size, "inhibitory layer needs K >= 1, got " + std::to_string(k));
    Matrix w = Matrix::Zero(k, k);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(k * k), 1);
    if (k > 1) w.setConstant(1.0 / static_cast<double>(k - 1));
    for (Index i = 0; i < k; ++i) {
        w(i, i) = 0.0;
        mask[static_cast<std::size_t>(i * k + i)] = 0;
    }
    return InhibitoryAccess::make(k, std::move(w), std::move(mask));
}

Vector inhibit_forward(const InhibitoryMatrix& inh, std::span<const double> z) {
    check_length(inh, z.size(), "encoding");
    Vector h(inh.size());
    forward_inplace(inh, z, {h.data(), static_cast<std::size_t>(h.size())});
    return h;
}

Matrix inhibit_forward(const InhibitoryMatrix& inh, const Matrix& z) {
    check_length(inh, static_cast<std::size_t>(z.cols()), "encoding");
    Matrix h(z.rows(), z.cols());
    for (Index r = 0; r < z.rows(); ++r)
        forward_inplace(inh, {z.row(r).data(), static_cast<std::size_t>(z.cols())},
                        {h.row(r).data(), static_cast<std::size_t>(h.cols())});
    return h;
}

InhibitoryMatrix hebbian_update(const InhibitoryMatrix& inh, std::span<const double> z, std::span<const double> h,
                                double alpha, HebbianVariant variant) {
    check_length(inh, z.size(), "encoding");
    check_length(inh, h.size(), "inhibited output");
    require(alpha > 0.0, ErrorCode::invalid_argument, "Hebbian learning rate must be positive");
    InhibitoryMatrix out = inh;
    hebbian_update_inplace(out, z, h, alpha, variant);
    return out;
}

InhibitoryMatrix prune_to_neighborhood(const InhibitoryMatrix& inh, Index m) {
    const Index k = inh.size();
    if (m < 1 || m > k - 1)
        throw Error(ErrorCode::invalid_neighborhood,
                    "neighborhood " + std::to_string(m) + " outside [1, " + std::to_string(k - 1) + "]");
    InhibitoryMatrix out = inh;
    Matrix& w = InhibitoryAccess::weights(out);
    auto& mask = InhibitoryAccess::mask(out);
    std::vector<Index> donors;
    for (Index i = 0; i < k; ++i) {
        donors.clear();
        for (Index j = 0; j < k; ++j)
            if (inh.linked(j, i)) donors.push_back(j);
        if (static_cast<Index>(donors.size()) <= m) continue;
        std::stable_sort(donors.begin(), donors.end(),
                         [&](Index a, Index b) { return inh.weight(a, i) > inh.weight(b, i); });
        for (std::size_t r = static_cast<std::size_t>(m); r < donors.size(); ++r) {
            w(donors[r], i) = 0.0;
            mask[static_cast<std::size_t>(donors[r] * k + i)] = 0;
        }
    }
    normalize_columns(w);
    return out;
}

InhibitoryMatrix prune_weak_links(const InhibitoryMatrix& inh, double fraction) {
    require(fraction >= 0.0 && fraction < 1.0, ErrorCode::invalid_argument, "weak-link fraction must be in [0, 1)");
    const Index k = inh.size();
    InhibitoryMatrix out = inh;
    Matrix& w = InhibitoryAccess::weights(out);
    auto& mask = InhibitoryAccess::mask(out);
    for (Index i = 0; i < k; ++i) {
        const Index n = inh.surviving_links(i);
        if (n == 0) continue;
        double sum = 0.0;
        for (Index j = 0; j < k; ++j)
            if (inh.linked(j, i)) sum += inh.weight(j, i);
        const double cutoff = fraction * sum / static_cast<double>(n);
        for (Index j = 0; j < k; ++j)
            if (inh.linked(j, i) && inh.weight(j, i) < cutoff) {
                w(j, i) = 0.0;
                mask[static_cast<std::size_t>(j * k + i)] = 0;
            }
    }
    normalize_columns(w);
    return out;
}

InhibitoryMatrix train_inhibitory(const Matrix& codes, const HebbianConfig& cfg) {
    const Index k = codes.cols();
    require(cfg.alpha > 0.0, ErrorCode::invalid_argument, "Hebbian learning rate must be positive");
    require(cfg.epochs >= 0, ErrorCode::invalid_argument, "Hebbian epochs must be >= 0");
    if (cfg.prune_mode == PruneMode::fixed && cfg.neighborhood && (*cfg.neighborhood < 1 || *cfg.neighborhood > k - 1))
        throw Error(ErrorCode::invalid_neighborhood, "neighborhood " + std::to_string(*cfg.neighborhood) +
                                                         " outside [1, " + std::to_string(k - 1) + "]");
    InhibitoryMatrix inh = init_inhibitory(k);
    if (cfg.epochs > 0) require(codes.rows() > 0, ErrorCode::empty_input, "Hebbian training needs samples");

    Rng rng(derive_seed(cfg.seed, "hebbian-order"));
    Vector h(k);
    std::span<double> hs(h.data(), static_cast<std::size_t>(k));
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (auto r : rng.permutation(static_cast<std::size_t>(codes.rows()))) {
            std::span<const double> z(codes.row(static_cast<Index>(r)).data(), static_cast<std::size_t>(k));
            forward_inplace(inh, z, hs);
            hebbian_update_inplace(inh, z, hs, cfg.alpha, cfg.variant);
        }
        if (cfg.prune_mode == PruneMode::fixed) {
            if (cfg.neighborhood && epoch == cfg.prune_after_epoch) inh = prune_to_neighborhood(inh, *cfg.neighborhood);
        } else {
            inh = prune_weak_links(inh, cfg.weak_link_fraction);
        }
    }
    return inh;
}

InhibitoryMatrix train_inhibitory(const Encoder& enc, const PatchMatrix& patches, const HebbianConfig& cfg) {
    return train_inhibitory(encode(enc, patches), cfg);
}

ActivationStats compute_activation_stats(const Matrix& vectors) {
    const Index n = vectors.rows();
    const Index k = vectors.cols();
    if (n < 2) throw Error(ErrorCode::insufficient_sample, "activation statistics need at least 2 vectors");
    if (k < 2) throw Error(ErrorCode::insufficient_sample, "activation statistics need K >= 2");

    ActivationStats stats;
    const auto zeros = (vectors.array() == 0.0).count();
    stats.population_sparsity = static_cast<double>(zeros) / static_cast<double>(vectors.size());

    RowVector mean = vectors.colwise().mean();
    Matrix centered = vectors.rowwise() - mean;
    Matrix cov = (centered.transpose() * centered) / static_cast<double>(n);
    Vector sd(k);
    for (Index i = 0; i < k; ++i) {
        const double var = cov(i, i);
        const double floor = 1e-12 * std::max(1.0, std::abs(mean[i]));
        sd[i] = var > floor * floor ? std::sqrt(var) : 0.0;
    }
    double total = 0.0;
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j) {
            if (i == j || sd[i] == 0.0 || sd[j] == 0.0) continue;
            total += std::min(1.0, std::abs(cov(i, j)) / (sd[i] * sd[j]));
        }
    stats.mean_abs_offdiag_correlation = total / static_cast<double>(k * (k - 1));
    return stats;
}

void save_inhibitory(const InhibitoryMatrix& inh, const std::filesystem::path& path) {
    io::BinaryWriter w(path, "LTIM");
    const Index k = inh.size();
    w.u64(static_cast<std::uint64_t>(k));
    w.bytes(inh.weights().data(), static_cast<std::size_t>(k * k) * sizeof(double));
    std::vector<std::uint8_t> bits(static_cast<std::size_t>((k * k + 7) / 8), 0);
    for (Index j = 0; j < k; ++j)
        for (Index i = 0; i < k; ++i)
            if (inh.linked(j, i)) {
                auto b = static_cast<std::size_t>(j * k + i);
                bits[b / 8] |= static_cast<std::uint8_t>(1u << (b % 8));
            }
    w.bytes(bits.data(), bits.size());
    w.close();
}

InhibitoryMatrix load_inhibitory(const std::filesystem::path& path) {
    io::BinaryReader r(path, "LTIM");
    const auto k = static_cast<Index>(r.u64());
    if (k < 1 || static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(k) > r.size())
        throw Error(ErrorCode::malformed_file, path.string() + ": bad inhibitory size");
    Matrix w(k, k);
    r.bytes(w.data(), static_cast<std::size_t>(k * k) * sizeof(double));
    std::vector<std::uint8_t> bits(static_cast<std::size_t>((k * k + 7) / 8));
    r.bytes(bits.data(), bits.size());
    if (!r.at_end()) throw Error(ErrorCode::malformed_file, path.string() + ": trailing bytes");
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(k * k));
    for (std::size_t b = 0; b < mask.size(); ++b) mask[b] = (bits[b / 8] >> (b % 8)) & 1u;
    try {
        return InhibitoryMatrix::from_parts(std::move(w), std::move(mask));
    } catch (const Error& e) {
        throw Error(ErrorCode::malformed_file, path.string() + ": " + e.what());
    }
}

}  // namespace lateralis
