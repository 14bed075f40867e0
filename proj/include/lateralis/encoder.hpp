#pragma once

#include "lateralis/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

namespace lateralis {

// Vector quantization codebook with triangle activation.
struct KMeansEncoder {
    Matrix centroids;  // K x D

    Index features() const noexcept { return centroids.rows(); }
    Index dim() const noexcept { return centroids.cols(); }
};

struct KMeansResult {
    KMeansEncoder encoder;
    // Lloyd objective (sum of squared distances to assigned centroid) measured
    // at each assignment step, iteration order.
    std::vector<double> objective;
};

// Lloyd iterations from K distinct random data rows; empty clusters are
// re-seeded from a random data row.
KMeansResult train_kmeans(const PatchMatrix& patches, Index k, int iters, std::uint64_t seed);

// z_k = max(0, mean_j d_j - d_k), d_k the Euclidean distance to centroid k.
Vector encode_triangle(const KMeansEncoder& enc, std::span<const double> patch);
Matrix encode_triangle(const KMeansEncoder& enc, const PatchMatrix& patches);

struct SparseAutoencoderConfig {
    double sparsity_target = 0.05;  // rho
    double sparsity_weight = 3.0;   // beta
    double weight_decay = 3e-3;
    double learning_rate = 0.05;
    int epochs = 20;
    Index batch_size = 100;
    std::uint64_t seed = 1;
};

// Logistic hidden layer with a linear, untied decoder.
struct SparseAutoencoder {
    Matrix w_enc;  // K x D
    Vector b_enc;  // K
    Matrix w_dec;  // D x K
    Vector b_dec;  // D
    double sparsity_target = 0.05;
    double sparsity_weight = 3.0;
    double weight_decay = 3e-3;

    Index features() const noexcept { return w_enc.rows(); }
    Index dim() const noexcept { return w_enc.cols(); }
};

struct AutoencoderGrad {
    Matrix w_enc;
    Vector b_enc;
    Matrix w_dec;
    Vector b_dec;
};

struct AutoencoderLoss {
    double loss = 0.0;
    double reconstruction = 0.0;  // mean over the batch of 0.5 * ||x_hat - x||^2
    AutoencoderGrad grad;
};

// Weights uniform in +-sqrt(6 / (K + D)), biases zero.
SparseAutoencoder init_sparse_autoencoder(Index k, Index dim, const SparseAutoencoderConfig& cfg);

// loss = mean_n 0.5 ||x_hat_n - x_n||^2
//      + 0.5 * weight_decay * (||W_enc||^2 + ||W_dec||^2)
//      + sparsity_weight * sum_i KL(rho || rho_hat_i)
// rho_hat_i is clamped to [1e-8, 1 - 1e-8] before the KL term.
AutoencoderLoss ae_loss_grad(const SparseAutoencoder& ae, const PatchMatrix& batch);

struct AutoencoderTrainResult {
    SparseAutoencoder model;
    double initial_loss = 0.0;          // full-data loss at initialization
    std::vector<double> epoch_loss;     // full-data loss after each epoch
    std::vector<double> epoch_reconstruction;
};

AutoencoderTrainResult train_sparse_autoencoder(const PatchMatrix& patches, Index k,
                                                const SparseAutoencoderConfig& cfg);

// Same descent loop started from a caller-supplied model.
AutoencoderTrainResult train_sparse_autoencoder(const PatchMatrix& patches, SparseAutoencoder init,
                                                const SparseAutoencoderConfig& cfg);

Vector encode_ae(const SparseAutoencoder& ae, std::span<const double> patch);
Matrix encode_ae(const SparseAutoencoder& ae, const PatchMatrix& patches);

using Encoder = std::variant<KMeansEncoder, SparseAutoencoder>;

Index encoder_features(const Encoder& enc) noexcept;
Index encoder_dim(const Encoder& enc) noexcept;
const char* encoder_kind(const Encoder& enc) noexcept;

// One encoding per row; rows are processed independently.
Matrix encode(const Encoder& enc, const PatchMatrix& patches);
Vector encode(const Encoder& enc, std::span<const double> patch);

void save_encoder(const Encoder& enc, const std::filesystem::path& path);
Encoder load_encoder(const std::filesystem::path& path);

}  // namespace lateralis
