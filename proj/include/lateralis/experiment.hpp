#pragma once

#include "lateralis/config.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lateralis {

enum class Stage { ingest, train_encoder, train_inhibition, extract, train_classifier, evaluate };

inline constexpr Stage kAllStages[] = {Stage::ingest,  Stage::train_encoder,    Stage::train_inhibition,
                                       Stage::extract, Stage::train_classifier, Stage::evaluate};

const char* stage_name(Stage stage) noexcept;
std::optional<Stage> parse_stage(std::string_view name) noexcept;

struct VariantMetrics {
    double test_accuracy = 0.0;
    double train_accuracy = 0.0;
    double best_l2 = 0.0;
};

struct StatsPair {
    ActivationStats z;
    std::optional<ActivationStats> h;
};

// Assembled by the evaluate stage from the stage fragments.
struct MetricsReport {
    std::optional<VariantMetrics> baseline;   // inhibition off
    std::optional<VariantMetrics> inhibited;  // inhibition on
    StatsPair stats;
    std::vector<std::pair<std::string, std::string>> config;
    std::map<std::string, double> stage_seconds;
    std::map<std::string, std::string> checksums;  // artifact path (relative to output_dir) -> checksum
    nlohmann::ordered_json json;                   // the emitted report.json content
};

// Runs one stage, validating upstream artifacts first. Writes
// <output_dir>/<stage>/fragment.json plus the stage's artifacts; timings go to
// <output_dir>/<stage>/timing.json so the fragment itself is reproducible.
// Throws DependencyError naming the stage to rerun when an input is missing
// or its checksum does not match.
void run_stage(Stage stage, const ExperimentConfig& cfg);

// All stages in order, then loads the report written by evaluate.
MetricsReport run_pipeline(const ExperimentConfig& cfg);

MetricsReport load_report(const std::filesystem::path& output_dir);

// Column names of report.csv, in order.
const std::vector<std::string>& report_csv_header();

}  // namespace lateralis
