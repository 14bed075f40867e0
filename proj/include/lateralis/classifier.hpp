#pragma once

#include "lateralis/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace lateralis {

// Multinomial logistic regression. Column F of `weights` is the bias.
struct SoftmaxModel {
    Matrix weights;  // C x (F + 1)
    double l2 = 0.0;

    Index classes() const noexcept { return weights.rows(); }
    Index features() const noexcept { return weights.cols() - 1; }

    static SoftmaxModel zeros(Index classes, Index features, double l2 = 0.0) {
        return SoftmaxModel{Matrix::Zero(classes, features + 1), l2};
    }
};

struct SoftmaxLoss {
    double loss = 0.0;
    Matrix grad;  // shaped like weights
};

// Mean cross-entropy (log-sum-exp with max subtraction) plus
// 0.5 * l2 * ||W without bias||^2.
SoftmaxLoss softmax_loss_grad(const SoftmaxModel& model, const Matrix& x, std::span<const int> y);

struct SoftmaxTrainConfig {
    double learning_rate = 0.1;
    int epochs = 100;
    Index batch_size = 128;
    std::uint64_t seed = 1;
};

// Minibatch gradient descent from the zero model.
SoftmaxModel train_softmax(const Matrix& x, std::span<const int> y, Index classes, double l2,
                           const SoftmaxTrainConfig& cfg);

// argmax per row; the smallest class index wins ties.
std::vector<int> predict(const SoftmaxModel& model, const Matrix& x);
double accuracy(std::span<const int> predicted, std::span<const int> truth);

struct CrossValidationResult {
    double best_l2 = 0.0;
    std::vector<double> l2_grid;                       // deduplicated, ascending
    std::vector<std::vector<double>> fold_accuracies;  // [grid index][fold]
    std::vector<double> mean_accuracy;                 // per grid entry
    SoftmaxModel model;                                // refit on all data with best_l2
};

// Per class, a seeded shuffle of that class's rows dealt round-robin over the
// folds. Throws fold_infeasible when a present class has fewer rows than folds.
std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed);

CrossValidationResult cross_validate(const Matrix& x, std::span<const int> y, Index classes,
                                     std::vector<double> l2_grid, int folds, const SoftmaxTrainConfig& cfg,
                                     std::uint64_t seed);

void save_softmax(const SoftmaxModel& model, const std::filesystem::path& path);
SoftmaxModel load_softmax(const std::filesystem::path& path);

}  // namespace lateralis
