#include "lateralis/encoder.hpp"
#include "lateralis/error.hpp"
#include "lateralis/rng.hpp"

#include <cmath>
#include <string>

namespace lateralis {

namespace {

constexpr double kRhoClamp = 1e-8;

Matrix logistic(const Matrix& pre) { return (1.0 + (-pre.array()).exp()).inverse().matrix(); }

Matrix hidden(const SparseAutoencoder& ae, const PatchMatrix& x) {
    Matrix pre = x * ae.w_enc.transpose();
    pre.rowwise() += ae.b_enc.transpose();
    return logistic(pre);
}

void check_dim(const SparseAutoencoder& ae, Index cols) {
    if (cols != ae.dim())
        throw Error(ErrorCode::dimension_mismatch,
                    "patch dim " + std::to_string(cols) + " vs autoencoder dim " + std::to_string(ae.dim()));
}

double full_loss(const SparseAutoencoder& ae, const PatchMatrix& x, double* reconstruction) {
    auto r = ae_loss_grad(ae, x);
    if (reconstruction) *reconstruction = r.reconstruction;
    return r.loss;
}

}  // namespace

SparseAutoencoder init_sparse_autoencoder(Index k, Index dim, const SparseAutoencoderConfig& cfg) {
    require(k >= 1 && dim >= 1, ErrorCode::invalid_size, "autoencoder needs K >= 1 and D >= 1");
    SparseAutoencoder ae;
    ae.sparsity_target = cfg.sparsity_target;
    ae.sparsity_weight = cfg.sparsity_weight;
    ae.weight_decay = cfg.weight_decay;
    const double r = std::sqrt(6.0 / static_cast<double>(k + dim));
    Rng rng(cfg.seed);
    ae.w_enc.resize(k, dim);
    ae.w_dec.resize(dim, k);
    for (Index i = 0; i < ae.w_enc.size(); ++i) ae.w_enc.data()[i] = rng.uniform(-r, r);
    for (Index i = 0; i < ae.w_dec.size(); ++i) ae.w_dec.data()[i] = rng.uniform(-r, r);
    ae.b_enc = Vector::Zero(k);
    ae.b_dec = Vector::Zero(dim);
    return ae;
}

AutoencoderLoss ae_loss_grad(const SparseAutoencoder& ae, const PatchMatrix& batch) {
    require(batch.rows() > 0, ErrorCode::empty_input, "autoencoder loss needs a nonempty batch");
    check_dim(ae, batch.cols());
    const double n = static_cast<double>(batch.rows());
    const double rho = ae.sparsity_target;
    const double beta = ae.sparsity_weight;
    const double lambda = ae.weight_decay;

    Matrix a = hidden(ae, batch);  // N x K
    Matrix err = a * ae.w_dec.transpose();
    err.rowwise() += ae.b_dec.transpose();
    err -= batch;

    Vector rho_hat = (a.colwise().sum() / n).transpose().array().max(kRhoClamp).min(1.0 - kRhoClamp).matrix();

    AutoencoderLoss out;
    out.reconstruction = 0.5 * err.squaredNorm() / n;
    const double decay = 0.5 * lambda * (ae.w_enc.squaredNorm() + ae.w_dec.squaredNorm());
    const double kl = (rho * (rho / rho_hat.array()).log() +
                       (1.0 - rho) * ((1.0 - rho) / (1.0 - rho_hat.array())).log())
                          .sum();
    out.loss = out.reconstruction + decay + beta * kl;

    Matrix r = err / n;
    out.grad.w_dec = r.transpose() * a + lambda * ae.w_dec;
    out.grad.b_dec = r.colwise().sum().transpose();
    Vector sparse = (beta / n) * (-rho / rho_hat.array() + (1.0 - rho) / (1.0 - rho_hat.array())).matrix();
    Matrix delta = r * ae.w_dec;
    delta.rowwise() += sparse.transpose();
    delta.array() *= a.array() * (1.0 - a.array());
    out.grad.w_enc = delta.transpose() * batch + lambda * ae.w_enc;
    out.grad.b_enc = delta.colwise().sum().transpose();
    return out;
}

AutoencoderTrainResult train_sparse_autoencoder(const PatchMatrix& patches, Index k,
                                                const SparseAutoencoderConfig& cfg) {
    require(patches.rows() > 0, ErrorCode::empty_input, "autoencoder training needs patches");
    return train_sparse_autoencoder(patches, init_sparse_autoencoder(k, patches.cols(), cfg), cfg);
}

AutoencoderTrainResult train_sparse_autoencoder(const PatchMatrix& patches, SparseAutoencoder init,
                                                const SparseAutoencoderConfig& cfg) {
    require(patches.rows() > 0, ErrorCode::empty_input, "autoencoder training needs patches");
    require(cfg.epochs >= 0, ErrorCode::invalid_argument, "epochs must be >= 0");
    require(cfg.batch_size >= 1, ErrorCode::invalid_argument, "batch size must be >= 1");
    require(cfg.learning_rate > 0, ErrorCode::invalid_argument, "learning rate must be positive");
    check_dim(init, patches.cols());

    AutoencoderTrainResult result;
    result.model = std::move(init);
    SparseAutoencoder& ae = result.model;
    result.initial_loss = full_loss(ae, patches, nullptr);

    const Index n = patches.rows();
    Rng rng(derive_seed(cfg.seed, "ae-shuffle"));
    PatchMatrix batch;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        auto order = rng.permutation(static_cast<std::size_t>(n));
        for (Index start = 0; start < n; start += cfg.batch_size) {
            const Index len = std::min(cfg.batch_size, n - start);
            batch.resize(len, patches.cols());
            for (Index i = 0; i < len; ++i) batch.row(i) = patches.row(static_cast<Index>(order[static_cast<std::size_t>(start + i)]));
            auto g = ae_loss_grad(ae, batch);
            if (!std::isfinite(g.loss))
                throw Error(ErrorCode::divergence, "autoencoder loss became non-finite in epoch " + std::to_string(epoch));
            ae.w_enc -= cfg.learning_rate * g.grad.w_enc;
            ae.b_enc -= cfg.learning_rate * g.grad.b_enc;
            ae.w_dec -= cfg.learning_rate * g.grad.w_dec;
            ae.b_dec -= cfg.learning_rate * g.grad.b_dec;
        }
        double recon = 0.0;
        double loss = full_loss(ae, patches, &recon);
        if (!std::isfinite(loss))
            throw Error(ErrorCode::divergence, "autoencoder loss became non-finite in epoch " + std::to_string(epoch));
        result.epoch_loss.push_back(loss);
        result.epoch_reconstruction.push_back(recon);
    }
    return result;
}

Vector encode_ae(const SparseAutoencoder& ae, std::span<const double> patch) {
    check_dim(ae, static_cast<Index>(patch.size()));
    Eigen::Map<const Vector> x(patch.data(), static_cast<Index>(patch.size()));
    Vector pre = ae.w_enc * x + ae.b_enc;
    return (1.0 + (-pre.array()).exp()).inverse().matrix();
}

Matrix encode_ae(const SparseAutoencoder& ae, const PatchMatrix& patches) {
    check_dim(ae, patches.cols());
    return hidden(ae, patches);
}

}  // namespace lateralis
