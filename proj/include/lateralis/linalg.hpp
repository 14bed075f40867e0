#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace lateralis {

// Row-major throughout: one sample per row, matching the on-disk layouts.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// N x D, one flattened patch per row.
using PatchMatrix = Matrix;

using Index = Eigen::Index;

}  // namespace lateralis
