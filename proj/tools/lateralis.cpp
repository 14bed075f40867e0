// lateralis <stage|all> --config <path> [--seed N] [--out DIR]
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error,
// 3 missing or corrupt upstream artifact.

#include "lateralis/config.hpp"
#include "lateralis/error.hpp"
#include "lateralis/experiment.hpp"
#include "lateralis/parallel.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDependency = 3;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lateral-inhibition feature learning experiments"};
    std::string stage_arg;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;

    std::string stages = "all";
    for (auto s : lateralis::kAllStages) stages += std::string("|") + lateralis::stage_name(s);
    app.add_option("stage", stage_arg, stages)->required();
    app.add_option("--config", config_path, "experiment config file")->required();
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--out", out_dir, "override the output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        lateralis::parallel::apply_env_override();
        auto cfg = lateralis::load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (out_dir) cfg.output_dir = *out_dir;

        if (stage_arg == "all") {
            auto report = lateralis::run_pipeline(cfg);
            std::cout << report.json.at("results").dump(2) << "\n";
            std::cout << "report: " << (cfg.output_dir / "report.json").string() << "\n";
            return 0;
        }
        auto stage = lateralis::parse_stage(stage_arg);
        if (!stage) {
            std::cerr << "unknown stage '" << stage_arg << "' (expected " << stages << ")\n";
            return kExitConfig;
        }
        lateralis::run_stage(*stage, cfg);
        std::cout << "stage " << stage_arg << " done: " << (cfg.output_dir / stage_arg).string() << "\n";
        return 0;
    } catch (const lateralis::DependencyError& e) {
        std::cerr << e.what() << "\n";
        return kExitDependency;
    } catch (const lateralis::Error& e) {
        std::cerr << e.what() << "\n";
        return e.code() == lateralis::ErrorCode::config ? kExitConfig : kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}
