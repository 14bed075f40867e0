// Serial reference kernels vs. their OpenMP counterparts on synthetic data.

#include "lateralis/dataset.hpp"
#include "lateralis/encoder.hpp"
#include "lateralis/inhibition.hpp"
#include "lateralis/parallel.hpp"
#include "lateralis/pipeline.hpp"
#include "lateralis/rng.hpp"

#include <chrono>
#include <iostream>

using namespace lateralis;

namespace {

template <class F>
double time_ms(F&& f) {
    auto t0 = std::chrono::high_resolution_clock::now();
    f();
    auto t1 = std::chrono::high_resolution_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

LabeledImageSet random_images(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    LabeledImageSet images(n);
    for (auto& img : images) {
        img.label = static_cast<std::uint8_t>(rng.below(kNumClasses));
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    }
    return images;
}

}  // namespace

int main() {
    parallel::apply_env_override();
    const int threads = parallel::thread_count();
    auto images = random_images(200, 7);
    std::cout << "threads " << threads << "\n";

    PatchMatrix a, b;
    double serial_ms = time_ms([&] { a = serial::sample_patches(images, 200000, 6, 1); });
    double omp_ms = time_ms([&] { b = sample_patches(images, 200000, 6, 1); });
    std::cout << "sample_patches    serial " << serial_ms << " ms   omp " << omp_ms << " ms   identical "
              << (a == b) << "\n";

    auto pp = fit_preprocessor(a.topRows(20000), 10.0, 0.1);
    auto patches = apply_preprocessor(pp, a.topRows(20000));
    Encoder enc = train_kmeans(patches, 64, 3, 1).encoder;
    auto inh = init_inhibitory(64);

    Matrix fs, fo;
    serial_ms = time_ms([&] { fs = serial::extract_features(images, pp, enc, &inh, 1); });
    omp_ms = time_ms([&] { fo = extract_features(images, pp, enc, &inh, 1); });
    std::cout << "extract_features  serial " << serial_ms << " ms   omp " << omp_ms << " ms   identical "
              << (fs == fo) << "\n";
    return 0;
}
