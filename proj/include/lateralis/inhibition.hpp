#pragma once

#include "lateralis/encoder.hpp"
#include "lateralis/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace lateralis {

struct InhibitoryAccess;

// Feed-forward lateral inhibition. weight(j, i) is the connection from
// encoding neuron j (donor) to inhibitory neuron i (receiver); column i holds
// everything that suppresses neuron i.
//
// Invariants:
//   - weight(i, i) == 0
//   - weight(j, i) >= 0
//   - pruned links (linked(j, i) == false) are exactly 0
//   - every column with at least one surviving link sums to 1
class InhibitoryMatrix {
public:
    InhibitoryMatrix() = default;

    Index size() const noexcept { return k_; }
    double weight(Index donor, Index receiver) const noexcept { return weights_(donor, receiver); }
    bool linked(Index donor, Index receiver) const noexcept {
        return mask_[static_cast<std::size_t>(donor * k_ + receiver)] != 0;
    }
    const Matrix& weights() const noexcept { return weights_; }
    Index surviving_links(Index receiver) const noexcept;

    // Builds a matrix from explicit weights and mask; rejects anything that
    // violates the invariants above (column sums checked to 1e-9).
    static InhibitoryMatrix from_parts(Matrix weights, std::vector<std::uint8_t> mask);

private:
    friend struct InhibitoryAccess;

    Index k_ = 0;
    Matrix weights_;
    std::vector<std::uint8_t> mask_;  // row-major K x K, 1 = surviving
};

// Off-diagonal entries 1/(K-1), zero diagonal, full mask. K = 1 has no links.
InhibitoryMatrix init_inhibitory(Index k);

// h_i = max(0, z_i - sum_{j != i} I_ji z_j).
Vector inhibit_forward(const InhibitoryMatrix& inh, std::span<const double> z);
// Row-wise over a batch of encodings (N x K).
Matrix inhibit_forward(const InhibitoryMatrix& inh, const Matrix& z);

// Which activation pairs drive the connection j -> i.
enum class HebbianVariant {
    literal,     // alpha * z_i * h_j, as printed
    transposed,  // alpha * z_j * h_i
};

// raw_ji = I_ji + alpha * z_i * h_j on surviving links, then each column is
// divided by its raw sum. Columns whose raw sum is 0 are left unchanged.
InhibitoryMatrix hebbian_update(const InhibitoryMatrix& inh, std::span<const double> z, std::span<const double> h,
                                double alpha, HebbianVariant variant = HebbianVariant::literal);

// Keeps the m largest surviving incoming weights per column (smaller donor
// index wins ties) and renormalizes. Requires 1 <= m <= K-1.
InhibitoryMatrix prune_to_neighborhood(const InhibitoryMatrix& inh, Index m);

// Drops surviving links whose weight is below `fraction` of the column's mean
// surviving weight, then renormalizes.
InhibitoryMatrix prune_weak_links(const InhibitoryMatrix& inh, double fraction);

enum class PruneMode {
    fixed,     // prune_to_neighborhood(m) once, after `prune_after_epoch`
    adaptive,  // prune_weak_links(weak_link_fraction) after every epoch
};

struct HebbianConfig {
    double alpha = 0.05;
    int epochs = 5;
    std::optional<Index> neighborhood;  // m
    int prune_after_epoch = 2;
    PruneMode prune_mode = PruneMode::fixed;
    double weak_link_fraction = 0.1;
    HebbianVariant variant = HebbianVariant::literal;
    std::uint64_t seed = 1;
};

// Online Hebbian training over precomputed encodings (one sample per row).
// Each epoch visits the rows in a seeded shuffled order.
InhibitoryMatrix train_inhibitory(const Matrix& codes, const HebbianConfig& cfg);

// Encodes every patch first, then runs the sequential update sweep.
InhibitoryMatrix train_inhibitory(const Encoder& enc, const PatchMatrix& patches, const HebbianConfig& cfg);

struct ActivationStats {
    double mean_abs_offdiag_correlation = 0.0;
    double population_sparsity = 0.0;
};

// Pearson correlation across samples (rows); neurons with zero variance
// contribute correlation 0. Sparsity is the fraction of entries exactly 0.
ActivationStats compute_activation_stats(const Matrix& vectors);

void save_inhibitory(const InhibitoryMatrix& inh, const std::filesystem::path& path);
InhibitoryMatrix load_inhibitory(const std::filesystem::path& path);

}  // namespace lateralis
