#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "lateralis/classifier.hpp"
#include "lateralis/error.hpp"
#include "lateralis/parallel.hpp"
#include "support.hpp"

#include <cmath>
#include <numbers>

using namespace lateralis;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::io;
}

// Naive loss: explicit loops, direct exp without max subtraction.
double naive_loss(const SoftmaxModel& m, const Matrix& x, const std::vector<int>& y) {
    const Index c = m.classes(), f = m.features();
    double total = 0.0;
    for (Index n = 0; n < x.rows(); ++n) {
        std::vector<double> logit(static_cast<std::size_t>(c));
        double z = 0.0;
        for (Index k = 0; k < c; ++k) {
            double s = m.weights(k, f);
            for (Index d = 0; d < f; ++d) s += m.weights(k, d) * x(n, d);
            logit[static_cast<std::size_t>(k)] = s;
            z += std::exp(s);
        }
        total += std::log(z) - logit[static_cast<std::size_t>(y[static_cast<std::size_t>(n)])];
    }
    double reg = 0.0;
    for (Index k = 0; k < c; ++k)
        for (Index d = 0; d < f; ++d) reg += m.weights(k, d) * m.weights(k, d);
    return total / static_cast<double>(x.rows()) + 0.5 * m.l2 * reg;
}

std::vector<int> labels(Index n, int classes, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    return y;
}

// Two clusters with a gap around the line x0 + x1 = 0.
void separable_set(Matrix& x, std::vector<int>& y) {
    Rng rng(12);
    x.resize(20, 2);
    y.resize(20);
    for (Index n = 0; n < 20; ++n) {
        const int label = static_cast<int>(n % 2);
        double a, b;
        do {
            a = rng.uniform(-2.0, 2.0);
            b = rng.uniform(-2.0, 2.0);
        } while ((label ? 1.0 : -1.0) * (a + b) < 0.5);
        x(n, 0) = a;
        x(n, 1) = b;
        y[static_cast<std::size_t>(n)] = label;
    }
}

}  // namespace

TEST_CASE("zero model loss is ln C") {
    auto x = lateralis::testing::random_matrix(30, 4, 1);
    for (int c : {2, 3, 10}) {
        auto y = labels(30, c, 2);
        auto out = softmax_loss_grad(SoftmaxModel::zeros(c, 4, 0.7), x, y);
        CHECK(out.loss == doctest::Approx(std::log(static_cast<double>(c))).epsilon(1e-14));
    }
}

TEST_CASE("analytic gradient matches finite differences") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto x = lateralis::testing::gaussian_matrix(25, 6, seed);
        auto y = labels(25, 4, seed + 100);
        SoftmaxModel m{lateralis::testing::gaussian_matrix(4, 7, seed + 200) * 0.5, 0.01 * static_cast<double>(seed)};
        auto out = softmax_loss_grad(m, x, y);
        CHECK(out.loss == doctest::Approx(naive_loss(m, x, y)).epsilon(1e-12));
        auto numeric = lateralis::testing::finite_difference(m.weights, [&] { return naive_loss(m, x, y); });
        CHECK(lateralis::testing::relative_error(out.grad, numeric) < 1e-7);
        // bias column carries no penalty
        SoftmaxModel unreg = m;
        unreg.l2 = 0.0;
        CHECK((softmax_loss_grad(unreg, x, y).grad.col(6) - out.grad.col(6)).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("loss is stable for huge logits") {
    Matrix x(1, 1);
    x(0, 0) = 1.0;
    SoftmaxModel m = SoftmaxModel::zeros(2, 1);
    m.weights(0, 0) = 1000.0;
    std::vector<int> y{1};
    auto out = softmax_loss_grad(m, x, y);
    CHECK(std::isfinite(out.loss));
    CHECK(out.loss == doctest::Approx(1000.0));
}

TEST_CASE("shifting every class by the same vector changes nothing") {
    auto x = lateralis::testing::gaussian_matrix(40, 3, 4);
    auto y = labels(40, 3, 5);
    SoftmaxModel m{lateralis::testing::gaussian_matrix(3, 4, 6), 0.0};
    SoftmaxModel shifted = m;
    for (Index k = 0; k < 3; ++k) shifted.weights.row(k) += RowVector::Constant(4, 2.5);
    CHECK(softmax_loss_grad(shifted, x, y).loss == doctest::Approx(softmax_loss_grad(m, x, y).loss).epsilon(1e-12));
    CHECK(predict(shifted, x) == predict(m, x));
}

TEST_CASE("label and shape errors") {
    auto x = lateralis::testing::random_matrix(3, 2, 1);
    std::vector<int> bad{0, 3, 1};
    CHECK(code_of([&] { softmax_loss_grad(SoftmaxModel::zeros(3, 2), x, bad); }) == ErrorCode::label_out_of_range);
    std::vector<int> neg{0, -1, 1};
    CHECK(code_of([&] { softmax_loss_grad(SoftmaxModel::zeros(3, 2), x, neg); }) == ErrorCode::label_out_of_range);
    std::vector<int> ok{0, 1, 2};
    CHECK(code_of([&] { softmax_loss_grad(SoftmaxModel::zeros(3, 5), x, ok); }) == ErrorCode::dimension_mismatch);
    CHECK(code_of([&] { train_softmax(x, ok, 3, -1.0, {}); }) == ErrorCode::invalid_argument);
}

TEST_CASE("separable data is fit perfectly") {
    Matrix x;
    std::vector<int> y;
    separable_set(x, y);
    // Brute-force oracle: some direction on a 1-degree grid separates the classes.
    bool separable = false;
    for (int deg = 0; deg < 360 && !separable; ++deg) {
        const double t = deg * std::numbers::pi / 180.0;
        double lo1 = 1e9, hi0 = -1e9;
        for (Index n = 0; n < 20; ++n) {
            const double p = std::cos(t) * x(n, 0) + std::sin(t) * x(n, 1);
            if (y[static_cast<std::size_t>(n)]) lo1 = std::min(lo1, p);
            else hi0 = std::max(hi0, p);
        }
        separable = lo1 > hi0;
    }
    REQUIRE(separable);

    SoftmaxTrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.epochs = 500;
    cfg.batch_size = 5;
    auto m = train_softmax(x, y, 2, 0.0, cfg);
    CHECK(accuracy(predict(m, x), y) == 1.0);
}

TEST_CASE("training edge cases") {
    auto x = lateralis::testing::gaussian_matrix(50, 4, 9);
    auto y = labels(50, 3, 10);
    SoftmaxTrainConfig cfg;
    cfg.epochs = 0;
    CHECK(train_softmax(x, y, 3, 0.1, cfg).weights.isZero(0.0));

    // Stability needs lr * l2 < 2; with a huge penalty the weights stay near zero.
    cfg.epochs = 50;
    cfg.learning_rate = 1e-6;
    auto heavy = train_softmax(x, y, 3, 1e6, cfg);
    CHECK(heavy.weights.leftCols(4).cwiseAbs().maxCoeff() < 1e-3);

    cfg.learning_rate = 0.1;
    cfg.seed = 3;
    CHECK(train_softmax(x, y, 3, 0.01, cfg).weights == train_softmax(x, y, 3, 0.01, cfg).weights);
}

TEST_CASE("predict and accuracy") {
    SoftmaxModel tie = SoftmaxModel::zeros(4, 2);
    auto x = lateralis::testing::random_matrix(5, 2, 3);
    for (int p : predict(tie, x)) CHECK(p == 0);
    tie.weights(2, 2) = 1.0;
    tie.weights(3, 2) = 1.0;
    for (int p : predict(tie, x)) CHECK(p == 2);

    std::vector<int> a{0, 1, 2, 3}, b{0, 1, 0, 3};
    CHECK(accuracy(a, b) == 0.75);
    std::vector<int> c{0};
    CHECK(code_of([&] { accuracy(a, c); }) == ErrorCode::dimension_mismatch);
}

TEST_CASE("stratified folds") {
    std::vector<int> y;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 11 + 3 * c; ++i) y.push_back(c);
    auto folds = stratified_folds(y, 4, 7);
    REQUIRE(folds.size() == y.size());
    for (int c = 0; c < 3; ++c) {
        std::vector<int> per(4, 0);
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] == c) ++per[static_cast<std::size_t>(folds[i])];
        CHECK(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()) <= 1);
    }
    CHECK(stratified_folds(y, 4, 7) == folds);
    CHECK(stratified_folds(y, 4, 8) != folds);

    std::vector<int> thin{0, 0, 0, 1, 1};
    CHECK(code_of([&] { stratified_folds(thin, 3, 1); }) == ErrorCode::fold_infeasible);
    CHECK(code_of([&] { stratified_folds(thin, 1, 1); }) == ErrorCode::invalid_argument);
}

TEST_CASE("cross-validation") {
    auto x = lateralis::testing::gaussian_matrix(90, 5, 20);
    std::vector<int> y(90);
    for (Index n = 0; n < 90; ++n) y[static_cast<std::size_t>(n)] = x(n, 0) + 0.3 * x(n, 1) > 0 ? 1 : (x(n, 2) > 0.5 ? 2 : 0);
    SoftmaxTrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 16;

    SUBCASE("single grid value is chosen") {
        auto cv = cross_validate(x, y, 3, {0.01}, 3, cfg, 5);
        CHECK(cv.best_l2 == 0.01);
        CHECK(cv.fold_accuracies.size() == 1);
        CHECK(cv.fold_accuracies[0].size() == 3);
        CHECK(cv.model.l2 == 0.01);
        CHECK(cv.model.weights == train_softmax(x, y, 3, 0.01, cfg).weights);
    }
    SUBCASE("duplicates collapse and the grid is sorted") {
        auto cv = cross_validate(x, y, 3, {0.1, 0.001, 0.1, 0.001}, 3, cfg, 5);
        CHECK(cv.l2_grid == std::vector<double>{0.001, 0.1});
        CHECK(cv.mean_accuracy.size() == 2);
    }
    SUBCASE("a crippling penalty loses") {
        cfg.learning_rate = 0.01;
        auto cv = cross_validate(x, y, 3, {1e-4, 150.0}, 3, cfg, 5);
        CHECK(cv.best_l2 == 1e-4);
        CHECK(cv.mean_accuracy[0] > cv.mean_accuracy[1]);
    }
    SUBCASE("equal scores go to the smallest penalty") {
        // Zero epochs: every model is zero, every fold score is equal.
        cfg.epochs = 0;
        auto cv = cross_validate(x, y, 3, {0.5, 0.05, 5.0}, 3, cfg, 5);
        CHECK(cv.best_l2 == 0.05);
    }
    SUBCASE("thread count does not change the result") {
        auto a = cross_validate(x, y, 3, {0.001, 0.01, 0.1}, 3, cfg, 5);
        parallel::ScopedThreads one(1);
        auto b = cross_validate(x, y, 3, {0.001, 0.01, 0.1}, 3, cfg, 5);
        CHECK(a.fold_accuracies == b.fold_accuracies);
        CHECK(a.model.weights == b.model.weights);
    }
    SUBCASE("infeasible folds") {
        CHECK(code_of([&] { cross_validate(x, y, 3, {0.1}, 91, cfg, 5); }) == ErrorCode::fold_infeasible);
        CHECK(code_of([&] { cross_validate(x, y, 3, {}, 3, cfg, 5); }) == ErrorCode::invalid_argument);
    }
}

TEST_CASE("softmax container round trip") {
    lateralis::testing::TempDir dir("softmax");
    SoftmaxModel m{lateralis::testing::gaussian_matrix(10, 9, 3), 0.125};
    save_softmax(m, dir / "m.bin");
    auto back = load_softmax(dir / "m.bin");
    CHECK(back.weights == m.weights);
    CHECK(back.l2 == m.l2);
}
