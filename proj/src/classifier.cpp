#include "lateralis/classifier.hpp"

#include "lateralis/error.hpp"
#include "lateralis/io.hpp"
#include "lateralis/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lateralis {

namespace {

void check_inputs(const SoftmaxModel& model, const Matrix& x, std::span<const int> y) {
    if (x.cols() != model.features())
        throw Error(ErrorCode::dimension_mismatch, "feature dim " + std::to_string(x.cols()) + " vs model dim " +
                                                       std::to_string(model.features()));
    if (static_cast<Index>(y.size()) != x.rows())
        throw Error(ErrorCode::dimension_mismatch, "label count does not match feature rows");
    for (int label : y)
        if (label < 0 || label >= model.classes())
            throw Error(ErrorCode::label_out_of_range,
                        "label " + std::to_string(label) + " not in [0, " + std::to_string(model.classes()) + ")");
}

Matrix logits(const SoftmaxModel& model, const Matrix& x) {
    const Index f = model.features();
    Matrix s = x * model.weights.leftCols(f).transpose();
    s.rowwise() += model.weights.col(f).transpose();
    return s;
}

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(static_cast<Index>(rows[i]));
    return out;
}

std::vector<int> gather_labels(std::span<const int> y, std::span<const std::size_t> rows) {
    std::vector<int> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = y[rows[i]];
    return out;
}

}  // namespace

SoftmaxLoss softmax_loss_grad(const SoftmaxModel& model, const Matrix& x, std::span<const int> y) {
    check_inputs(model, x, y);
    require(x.rows() > 0, ErrorCode::empty_input, "softmax loss needs at least one sample");
    const Index n = x.rows();
    const Index f = model.features();

    Matrix p = logits(model, x);
    double loss = 0.0;
    for (Index i = 0; i < n; ++i) {
        auto row = p.row(i);
        const double top = row.maxCoeff();
        const auto label = static_cast<Index>(y[static_cast<std::size_t>(i)]);
        const double shifted = row[label] - top;
        row.array() = (row.array() - top).exp();
        const double z = row.sum();
        // -log softmax_y = log(sum exp(s - top)) - (s_y - top)
        loss += std::log(z) - shifted;
        row /= z;
        row[label] -= 1.0;
    }
    p /= static_cast<double>(n);

    SoftmaxLoss out;
    const auto w = model.weights.leftCols(f);
    out.loss = loss / static_cast<double>(n) + 0.5 * model.l2 * w.squaredNorm();
    out.grad.resize(model.classes(), f + 1);
    out.grad.leftCols(f) = p.transpose() * x + model.l2 * w;
    out.grad.col(f) = p.colwise().sum().transpose();
    return out;
}

SoftmaxModel train_softmax(const Matrix& x, std::span<const int> y, Index classes, double l2,
                           const SoftmaxTrainConfig& cfg) {
    require(classes >= 1, ErrorCode::invalid_size, "softmax needs at least one class");
    require(l2 >= 0.0, ErrorCode::invalid_argument, "l2 must be >= 0");
    require(cfg.epochs >= 0, ErrorCode::invalid_argument, "epochs must be >= 0");
    require(cfg.batch_size >= 1, ErrorCode::invalid_argument, "batch size must be >= 1");
    require(cfg.learning_rate > 0.0, ErrorCode::invalid_argument, "learning rate must be positive");
    SoftmaxModel model = SoftmaxModel::zeros(classes, x.cols(), l2);
    check_inputs(model, x, y);
    if (cfg.epochs > 0) require(x.rows() > 0, ErrorCode::empty_input, "softmax training needs samples");

    const Index n = x.rows();
    Rng rng(derive_seed(cfg.seed, "softmax-shuffle"));
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        auto order = rng.permutation(static_cast<std::size_t>(n));
        for (Index start = 0; start < n; start += cfg.batch_size) {
            const Index len = std::min(cfg.batch_size, n - start);
            std::span<const std::size_t> rows(order.data() + start, static_cast<std::size_t>(len));
            auto labels = gather_labels(y, rows);
            auto g = softmax_loss_grad(model, gather_rows(x, rows), labels);
            if (!std::isfinite(g.loss))
                throw Error(ErrorCode::divergence, "softmax loss became non-finite in epoch " + std::to_string(epoch));
            model.weights -= cfg.learning_rate * g.grad;
        }
    }
    return model;
}

std::vector<int> predict(const SoftmaxModel& model, const Matrix& x) {
    if (x.cols() != model.features())
        throw Error(ErrorCode::dimension_mismatch, "feature dim " + std::to_string(x.cols()) + " vs model dim " +
                                                       std::to_string(model.features()));
    Matrix s = logits(model, x);
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (Index i = 0; i < s.rows(); ++i) {
        Index best = 0;
        for (Index c = 1; c < s.cols(); ++c)
            if (s(i, c) > s(i, best)) best = c;
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size())
        throw Error(ErrorCode::dimension_mismatch, "prediction and label counts differ");
    if (truth.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed) {
    require(folds >= 2, ErrorCode::invalid_argument, "cross-validation needs at least 2 folds");
    int max_label = -1;
    for (int label : y) {
        require(label >= 0, ErrorCode::label_out_of_range, "negative label");
        max_label = std::max(max_label, label);
    }
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label + 1));
    for (std::size_t i = 0; i < y.size(); ++i) by_class[static_cast<std::size_t>(y[i])].push_back(i);

    std::vector<int> fold(y.size(), -1);
    Rng rng(derive_seed(seed, "folds"));
    int next = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& rows = by_class[c];
        if (rows.empty()) continue;
        if (rows.size() < static_cast<std::size_t>(folds))
            throw Error(ErrorCode::fold_infeasible, "class " + std::to_string(c) + " has " +
                                                        std::to_string(rows.size()) + " samples for " +
                                                        std::to_string(folds) + " folds");
        rng.shuffle(std::span<std::size_t>(rows));
        // Continue the deal where the previous class stopped so fold sizes stay balanced.
        for (auto r : rows) {
            fold[r] = next;
            next = (next + 1) % folds;
        }
    }
    return fold;
}

CrossValidationResult cross_validate(const Matrix& x, std::span<const int> y, Index classes,
                                     std::vector<double> l2_grid, int folds, const SoftmaxTrainConfig& cfg,
                                     std::uint64_t seed) {
    require(!l2_grid.empty(), ErrorCode::invalid_argument, "l2 grid must not be empty");
    for (double l2 : l2_grid) require(l2 >= 0.0 && std::isfinite(l2), ErrorCode::invalid_argument, "l2 grid values must be finite and >= 0");
    if (static_cast<Index>(y.size()) != x.rows())
        throw Error(ErrorCode::dimension_mismatch, "label count does not match feature rows");
    std::sort(l2_grid.begin(), l2_grid.end());
    l2_grid.erase(std::unique(l2_grid.begin(), l2_grid.end()), l2_grid.end());

    const auto fold = stratified_folds(y, folds, seed);
    CrossValidationResult result;
    result.l2_grid = l2_grid;
    result.fold_accuracies.assign(l2_grid.size(), std::vector<double>(static_cast<std::size_t>(folds), 0.0));

    const auto jobs = static_cast<std::int64_t>(l2_grid.size() * static_cast<std::size_t>(folds));
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const auto g = static_cast<std::size_t>(job / folds);
        const auto f = static_cast<int>(job % folds);
        try {
            std::vector<std::size_t> train, held;
            for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? held : train).push_back(i);
            auto train_labels = gather_labels(y, train);
            auto held_labels = gather_labels(y, held);
            auto model = train_softmax(gather_rows(x, train), train_labels, classes, l2_grid[g], cfg);
            result.fold_accuracies[g][static_cast<std::size_t>(f)] =
                accuracy(predict(model, gather_rows(x, held)), held_labels);
        } catch (...) {
#pragma omp critical(lateralis_cv_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    std::size_t best = 0;
    for (std::size_t g = 0; g < l2_grid.size(); ++g) {
        double sum = 0.0;
        for (double a : result.fold_accuracies[g]) sum += a;
        result.mean_accuracy.push_back(sum / folds);
        if (result.mean_accuracy[g] > result.mean_accuracy[best]) best = g;
    }
    result.best_l2 = l2_grid[best];
    result.model = train_softmax(x, y, classes, result.best_l2, cfg);
    return result;
}

void save_softmax(const SoftmaxModel& model, const std::filesystem::path& path) {
    io::BinaryWriter w(path, "LTSM");
    w.u64(static_cast<std::uint64_t>(model.classes()));
    w.u64(static_cast<std::uint64_t>(model.features()));
    w.f64(model.l2);
    w.matrix(model.weights);
    w.close();
}

SoftmaxModel load_softmax(const std::filesystem::path& path) {
    io::BinaryReader r(path, "LTSM");
    const auto classes = static_cast<Index>(r.u64());
    const auto features = static_cast<Index>(r.u64());
    SoftmaxModel model;
    model.l2 = r.f64();
    model.weights = r.matrix();
    if (model.classes() != classes || model.features() != features || !r.at_end())
        throw Error(ErrorCode::malformed_file, path.string() + ": inconsistent softmax dimensions");
    return model;
}

}  // namespace lateralis
