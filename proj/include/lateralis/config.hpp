#pragma once

#include "lateralis/classifier.hpp"
#include "lateralis/encoder.hpp"
#include "lateralis/inhibition.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lateralis {

enum class EncoderKind { kmeans, sparse_ae };
enum class InhibitionMode { off, on, paired };

// Everything one experiment run depends on. Parsed from a flat
// `key = value` document; see README for the key list.
struct ExperimentConfig {
    std::vector<std::filesystem::path> train_data;
    std::vector<std::filesystem::path> test_data;
    std::size_t train_images = 0;  // 0 = all
    std::size_t test_images = 0;

    int patch_size = 6;
    std::size_t num_patches = 50000;
    double norm_eps = 10.0;
    double zca_eps = 0.1;

    Index features = 100;
    EncoderKind encoder = EncoderKind::kmeans;
    int kmeans_iters = 10;
    SparseAutoencoderConfig autoencoder;

    InhibitionMode inhibition = InhibitionMode::paired;
    HebbianConfig hebbian;
    std::size_t hebbian_samples = 20000;

    int stride = 1;
    std::vector<double> lambda_grid{1e-4, 1e-3, 1e-2, 1e-1};
    int folds = 5;
    SoftmaxTrainConfig classifier;

    // Training images whose per-position codes feed the activation statistics.
    std::size_t stats_images = 100;

    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "run";
};

// Throws Error(config) on syntax errors, unknown or duplicate keys, and
// malformed values. Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

// Semantic checks: input files exist, counts positive, sizes consistent.
void validate_config(const ExperimentConfig& cfg);

// Canonical `key = value` listing of every experiment parameter (all keys,
// fixed order). output_dir is excluded: it locates a run, it does not define one.
std::vector<std::pair<std::string, std::string>> canonical_entries(const ExperimentConfig& cfg);
std::string canonical_config(const ExperimentConfig& cfg);

const char* to_string(EncoderKind kind) noexcept;
const char* to_string(InhibitionMode mode) noexcept;

}  // namespace lateralis
