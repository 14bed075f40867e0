// Writes the synthetic desk fixture in CIFAR-10 binary layout.
//
// Each class is a colored sinusoidal grating with a class-specific orientation,
// frequency and tint; phase, contrast, brightness and pixel noise vary per
// image. The output depends only on the seed.

#include "lateralis/dataset.hpp"
#include "lateralis/rng.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>

namespace {

lateralis::LabeledImage render(int label, lateralis::Rng& rng) {
    using namespace lateralis;
    constexpr double kPi = 3.14159265358979323846;
    LabeledImage img;
    img.label = static_cast<std::uint8_t>(label);
    const double theta = kPi * label / kNumClasses + rng.uniform(-0.35, 0.35);
    const double freq = 2.0 * kPi * (0.08 + 0.025 * (label % 4)) * rng.uniform(0.9, 1.1);
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    const double contrast = rng.uniform(10.0, 40.0);
    const double brightness = rng.uniform(80.0, 170.0);
    const double tint[3] = {0.9 + 0.1 * std::cos(label * 0.9), 0.9 + 0.1 * std::cos(label * 0.9 + 2.1),
                            0.9 + 0.1 * std::cos(label * 0.9 + 4.2)};
    const double c = std::cos(theta), s = std::sin(theta);
    for (int ch = 0; ch < kChannels; ++ch)
        for (int y = 0; y < kImageSide; ++y)
            for (int x = 0; x < kImageSide; ++x) {
                const double wave = std::sin(freq * (c * x + s * y) + phase);
                const double v = brightness * tint[ch] + contrast * wave + 40.0 * rng.normal();
                img.pixels[static_cast<std::size_t>((ch * kImageSide + y) * kImageSide + x)] =
                    static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
    return img;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generate the synthetic CIFAR-10-format desk fixture"};
    std::string out;
    std::size_t count = 500;
    std::uint64_t seed = 20131;
    app.add_option("--out", out, "output file")->required();
    app.add_option("--count", count, "number of images (classes cycle 0..9)");
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

    lateralis::Rng rng(seed);
    lateralis::LabeledImageSet images;
    for (std::size_t i = 0; i < count; ++i) images.push_back(render(static_cast<int>(i % lateralis::kNumClasses), rng));
    lateralis::write_cifar10_batch(out, images);
    std::cout << "wrote " << count << " images to " << out << "\n";
    return 0;
}
