#include "lateralis/encoder.hpp"
#include "lateralis/error.hpp"
#include "lateralis/rng.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace lateralis {

namespace {

// Nearest centroid (smallest index on ties) and its squared distance.
struct Assignment {
    std::vector<Index> cluster;
    std::vector<double> sq_dist;
};

Assignment assign(const Matrix& centroids, const PatchMatrix& x) {
    const Index n = x.rows();
    Assignment a{std::vector<Index>(static_cast<std::size_t>(n)), std::vector<double>(static_cast<std::size_t>(n))};
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < n; ++i) {
        Vector d = (centroids.rowwise() - x.row(i)).rowwise().squaredNorm();
        Index best = 0;
        for (Index k = 1; k < d.size(); ++k)
            if (d[k] < d[best]) best = k;
        a.cluster[static_cast<std::size_t>(i)] = best;
        a.sq_dist[static_cast<std::size_t>(i)] = d[best];
    }
    return a;
}

}  // namespace

KMeansResult train_kmeans(const PatchMatrix& patches, Index k, int iters, std::uint64_t seed) {
    const Index n = patches.rows();
    require(n > 0, ErrorCode::empty_input, "k-means needs at least one patch");
    require(k >= 1, ErrorCode::invalid_size, "k-means needs K >= 1");
    require(iters >= 0, ErrorCode::invalid_argument, "k-means iteration count must be >= 0");
    if (k > n)
        throw Error(ErrorCode::insufficient_data,
                    "K = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " available patches");

    Rng rng(seed);
    KMeansResult result;
    Matrix& c = result.encoder.centroids;
    c.resize(k, patches.cols());

    // Partial Fisher-Yates over row indices: K distinct rows.
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    for (Index i = 0; i < k; ++i) {
        auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        c.row(i) = patches.row(order[static_cast<std::size_t>(i)]);
    }

    for (int it = 0; it < iters; ++it) {
        auto a = assign(c, patches);
        double objective = 0.0;
        for (double d : a.sq_dist) objective += d;
        result.objective.push_back(objective);

        Matrix sums = Matrix::Zero(k, patches.cols());
        std::vector<Index> counts(static_cast<std::size_t>(k), 0);
        for (Index i = 0; i < n; ++i) {
            auto cl = a.cluster[static_cast<std::size_t>(i)];
            sums.row(cl) += patches.row(i);
            ++counts[static_cast<std::size_t>(cl)];
        }
        for (Index j = 0; j < k; ++j) {
            auto cnt = counts[static_cast<std::size_t>(j)];
            if (cnt > 0)
                c.row(j) = sums.row(j) / static_cast<double>(cnt);
            else
                c.row(j) = patches.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
        }
    }
    if (iters > 0) {
        auto a = assign(c, patches);
        double objective = 0.0;
        for (double d : a.sq_dist) objective += d;
        result.objective.push_back(objective);
    }
    return result;
}

Vector encode_triangle(const KMeansEncoder& enc, std::span<const double> patch) {
    if (static_cast<Index>(patch.size()) != enc.dim())
        throw Error(ErrorCode::dimension_mismatch, "patch dim " + std::to_string(patch.size()) +
                                                       " vs encoder dim " + std::to_string(enc.dim()));
    Eigen::Map<const RowVector> x(patch.data(), static_cast<Index>(patch.size()));
    Vector d = (enc.centroids.rowwise() - x).rowwise().norm();
    const double mu = d.mean();
    return (mu - d.array()).max(0.0).matrix();
}

Matrix encode_triangle(const KMeansEncoder& enc, const PatchMatrix& patches) {
    if (patches.cols() != enc.dim())
        throw Error(ErrorCode::dimension_mismatch, "patch dim " + std::to_string(patches.cols()) +
                                                       " vs encoder dim " + std::to_string(enc.dim()));
    Matrix z(patches.rows(), enc.features());
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < patches.rows(); ++i) {
        Vector d = (enc.centroids.rowwise() - patches.row(i)).rowwise().norm();
        const double mu = d.mean();
        z.row(i) = (mu - d.array()).max(0.0).matrix().transpose();
    }
    return z;
}

}  // namespace lateralis
