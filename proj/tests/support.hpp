#pragma once

#include "lateralis/dataset.hpp"
#include "lateralis/linalg.hpp"
#include "lateralis/rng.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>

namespace lateralis::testing {

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
}

inline Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

inline LabeledImageSet random_images(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    LabeledImageSet images(n);
    for (auto& img : images) {
        img.label = static_cast<std::uint8_t>(rng.below(kNumClasses));
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    }
    return images;
}

// Central differences of `loss` with respect to every entry of `param`.
inline Matrix finite_difference(Matrix& param, const std::function<double()>& loss, double step = 1e-5) {
    Matrix g(param.rows(), param.cols());
    for (Index i = 0; i < param.size(); ++i) {
        const double saved = param.data()[i];
        param.data()[i] = saved + step;
        const double up = loss();
        param.data()[i] = saved - step;
        const double down = loss();
        param.data()[i] = saved;
        g.data()[i] = (up - down) / (2.0 * step);
    }
    return g;
}

inline double relative_error(const Matrix& a, const Matrix& b) {
    const double scale = std::max({a.norm(), b.norm(), 1e-12});
    return (a - b).norm() / scale;
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("lateralis-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::filesystem::path path_;
};

}  // namespace lateralis::testing
