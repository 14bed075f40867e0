#include "lateralis/experiment.hpp"

#include "lateralis/classifier.hpp"
#include "lateralis/dataset.hpp"
#include "lateralis/error.hpp"
#include "lateralis/io.hpp"
#include "lateralis/pipeline.hpp"
#include "lateralis/rng.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cerrno>
#include <cstring>

namespace lateralis {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVariantBaseline = "baseline";
constexpr const char* kVariantInhibited = "inhibited";

// Holds <output_dir>/.lock for the lifetime of a run.
class RunLock {
public:
    explicit RunLock(const fs::path& dir) : path_(dir / ".lock") {
        fs::create_directories(dir);
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0) {
            if (errno == EEXIST)
                throw Error(ErrorCode::io, "output directory " + dir.string() +
                                               " is in use by another run (remove .lock if it is stale)");
            throw Error(ErrorCode::io, "cannot create lock file " + path_.string() + ": " + std::strerror(errno));
        }
    }
    ~RunLock() {
        ::close(fd_);
        std::error_code ec;
        fs::remove(path_, ec);
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

std::vector<std::string> variants(const ExperimentConfig& cfg) {
    switch (cfg.inhibition) {
        case InhibitionMode::off: return {kVariantBaseline};
        case InhibitionMode::on: return {kVariantInhibited};
        case InhibitionMode::paired: return {kVariantBaseline, kVariantInhibited};
    }
    return {};
}

std::string config_checksum(const ExperimentConfig& cfg) { return io::checksum_bytes(canonical_config(cfg)); }

json read_json(const fs::path& path) {
    auto bytes = io::read_file(path);
    return json::parse(bytes.begin(), bytes.end());
}

void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(2) + "\n"); }

std::string rel(const std::string& stage, const std::string& file) { return stage + "/" + file; }

// Context handed to each stage body.
struct StageRun {
    StageRun(const ExperimentConfig& c, Stage s) : cfg(c), stage(s) {}

    const ExperimentConfig& cfg;
    Stage stage;
    json inputs = json::object();
    json outputs = json::object();
    json metrics = json::object();
    std::map<Stage, json> upstream;

    fs::path out(const std::string& relative) const { return cfg.output_dir / relative; }
    fs::path artifact(const std::string& file) const { return out(rel(stage_name(stage), file)); }

    void record_output(const std::string& file) {
        const auto r = rel(stage_name(stage), file);
        outputs[r] = io::checksum_file(out(r));
    }

    // Verifies the upstream fragment and every file it lists.
    void require_stage(Stage dep) {
        const std::string name = stage_name(dep);
        const auto frag_path = cfg.output_dir / name / "fragment.json";
        if (!fs::is_regular_file(frag_path)) throw DependencyError(name, "missing artifacts of stage '" + name + "'");
        json frag;
        try {
            frag = read_json(frag_path);
        } catch (const std::exception& e) {
            throw DependencyError(name, "unreadable fragment for stage '" + name + "': " + e.what());
        }
        if (frag.value("config_checksum", "") != config_checksum(cfg))
            throw DependencyError(name, "stage '" + name + "' was produced with a different configuration");
        for (const auto& [file, sum] : frag.at("outputs").items()) {
            const auto path = cfg.output_dir / file;
            if (!fs::is_regular_file(path)) throw DependencyError(name, "missing artifact " + file);
            if (io::checksum_file(path) != sum.get<std::string>())
                throw DependencyError(name, "checksum mismatch for " + file);
            inputs[file] = sum;
        }
        upstream[dep] = std::move(frag);
    }
};

void stage_ingest(StageRun& run) {
    const auto& cfg = run.cfg;
    auto gather = [](const std::vector<fs::path>& files, std::size_t limit) {
        LabeledImageSet all;
        for (const auto& f : files) {
            auto batch = load_cifar10_batch(f);
            all.insert(all.end(), batch.begin(), batch.end());
            if (limit && all.size() >= limit) break;
        }
        if (limit && all.size() > limit) all.resize(limit);
        return all;
    };
    auto train = gather(cfg.train_data, cfg.train_images);
    auto test = gather(cfg.test_data, cfg.test_images);
    if (cfg.train_images && train.size() < cfg.train_images)
        throw Error(ErrorCode::config, "train_images = " + std::to_string(cfg.train_images) + " but only " +
                                           std::to_string(train.size()) + " images are available");
    if (cfg.test_images && test.size() < cfg.test_images)
        throw Error(ErrorCode::config, "test_images = " + std::to_string(cfg.test_images) + " but only " +
                                           std::to_string(test.size()) + " images are available");
    write_cifar10_batch(run.artifact("train.bin"), train);
    write_cifar10_batch(run.artifact("test.bin"), test);
    run.record_output("train.bin");
    run.record_output("test.bin");

    auto histogram = [](const LabeledImageSet& s) {
        std::vector<std::size_t> h(kNumClasses, 0);
        for (const auto& img : s) ++h[img.label];
        return h;
    };
    run.metrics["train_images"] = train.size();
    run.metrics["test_images"] = test.size();
    run.metrics["train_class_counts"] = histogram(train);
    run.metrics["test_class_counts"] = histogram(test);
}

void stage_train_encoder(StageRun& run) {
    const auto& cfg = run.cfg;
    run.require_stage(Stage::ingest);
    auto train = load_cifar10_batch(run.out("ingest/train.bin"));
    auto raw = sample_patches(train, cfg.num_patches, cfg.patch_size, derive_seed(cfg.seed, "patches"));
    auto pp = fit_preprocessor(raw, cfg.norm_eps, cfg.zca_eps);
    auto patches = apply_preprocessor(pp, raw);

    Encoder enc;
    if (cfg.encoder == EncoderKind::kmeans) {
        auto km = train_kmeans(patches, cfg.features, cfg.kmeans_iters, derive_seed(cfg.seed, "kmeans"));
        run.metrics["kmeans_objective"] = km.objective;
        enc = std::move(km.encoder);
    } else {
        auto ae_cfg = cfg.autoencoder;
        ae_cfg.seed = derive_seed(cfg.seed, "autoencoder");
        auto ae = train_sparse_autoencoder(patches, cfg.features, ae_cfg);
        run.metrics["ae_initial_loss"] = ae.initial_loss;
        run.metrics["ae_epoch_loss"] = ae.epoch_loss;
        enc = std::move(ae.model);
    }
    save_preprocessor(pp, run.artifact("preprocessor.bin"));
    save_encoder(enc, run.artifact("encoder.bin"));
    run.record_output("preprocessor.bin");
    run.record_output("encoder.bin");
    run.metrics["encoder"] = encoder_kind(enc);
    run.metrics["features"] = encoder_features(enc);
    run.metrics["patches"] = patches.rows();
}

void stage_train_inhibition(StageRun& run) {
    const auto& cfg = run.cfg;
    run.require_stage(Stage::ingest);
    run.require_stage(Stage::train_encoder);
    if (cfg.inhibition == InhibitionMode::off) {
        run.metrics["skipped"] = true;
        return;
    }
    auto train = load_cifar10_batch(run.out("ingest/train.bin"));
    auto pp = load_preprocessor(run.out("train-encoder/preprocessor.bin"));
    auto enc = load_encoder(run.out("train-encoder/encoder.bin"));
    auto raw = sample_patches(train, cfg.hebbian_samples, cfg.patch_size, derive_seed(cfg.seed, "hebbian-patches"));
    auto hcfg = cfg.hebbian;
    hcfg.seed = derive_seed(cfg.seed, "hebbian");
    auto inh = train_inhibitory(enc, apply_preprocessor(pp, raw), hcfg);
    save_inhibitory(inh, run.artifact("inhibitory.bin"));
    run.record_output("inhibitory.bin");

    double links = 0.0;
    for (Index i = 0; i < inh.size(); ++i) links += static_cast<double>(inh.surviving_links(i));
    run.metrics["skipped"] = false;
    run.metrics["mean_surviving_links"] = links / static_cast<double>(inh.size());
    run.metrics["max_weight"] = inh.weights().maxCoeff();
}

json stats_json(const ActivationStats& s) {
    return json{{"mean_abs_offdiag_correlation", s.mean_abs_offdiag_correlation},
                {"population_sparsity", s.population_sparsity}};
}

void stage_extract(StageRun& run) {
    const auto& cfg = run.cfg;
    run.require_stage(Stage::ingest);
    run.require_stage(Stage::train_encoder);
    run.require_stage(Stage::train_inhibition);
    auto train = load_cifar10_batch(run.out("ingest/train.bin"));
    auto test = load_cifar10_batch(run.out("ingest/test.bin"));
    auto pp = load_preprocessor(run.out("train-encoder/preprocessor.bin"));
    auto enc = load_encoder(run.out("train-encoder/encoder.bin"));
    std::optional<InhibitoryMatrix> inh;
    if (cfg.inhibition != InhibitionMode::off) inh = load_inhibitory(run.out("train-inhibition/inhibitory.bin"));

    auto labels = [](const LabeledImageSet& s) {
        std::vector<int> y;
        for (const auto& img : s) y.push_back(img.label);
        return y;
    };
    for (const auto& variant : variants(cfg)) {
        const InhibitoryMatrix* layer = variant == kVariantInhibited ? &*inh : nullptr;
        save_features({extract_features(train, pp, enc, layer, cfg.stride), labels(train)},
                      run.artifact(variant + "_train.feat"));
        save_features({extract_features(test, pp, enc, layer, cfg.stride), labels(test)},
                      run.artifact(variant + "_test.feat"));
        run.record_output(variant + "_train.feat");
        run.record_output(variant + "_test.feat");
    }

    // Per-position codes of the first stats_images training images.
    const std::size_t m = std::min(cfg.stats_images, train.size());
    const int side = positions_per_side(cfg.patch_size, cfg.stride);
    const Index per_image = static_cast<Index>(side) * side;
    const Index k = encoder_features(enc);
    Matrix z(per_image * static_cast<Index>(m), k);
    Matrix h(inh ? z.rows() : 0, k);
    for (std::size_t i = 0; i < m; ++i) {
        Matrix codes;
        auto map = extract_feature_map(train[i], pp, enc, inh ? &*inh : nullptr, cfg.stride, &codes);
        z.middleRows(static_cast<Index>(i) * per_image, per_image) = codes;
        if (inh) h.middleRows(static_cast<Index>(i) * per_image, per_image) = map.values;
    }
    run.metrics["stats_vectors"] = z.rows();
    run.metrics["z"] = stats_json(compute_activation_stats(z));
    if (inh) run.metrics["h"] = stats_json(compute_activation_stats(h));
}

void stage_train_classifier(StageRun& run) {
    const auto& cfg = run.cfg;
    run.require_stage(Stage::extract);
    auto clf = cfg.classifier;
    clf.seed = derive_seed(cfg.seed, "softmax");
    for (const auto& variant : variants(cfg)) {
        auto train = load_features(run.out(rel("extract", variant + "_train.feat")));
        auto standardizer = fit_standardizer(train.features);
        auto cv = cross_validate(apply_standardizer(standardizer, train.features), train.labels, kNumClasses,
                                 cfg.lambda_grid, cfg.folds, clf, derive_seed(cfg.seed, "folds"));
        save_standardizer(standardizer, run.artifact(variant + "_standardizer.bin"));
        save_softmax(cv.model, run.artifact(variant + "_softmax.bin"));
        run.record_output(variant + "_standardizer.bin");
        run.record_output(variant + "_softmax.bin");
        run.metrics[variant] = json{{"best_l2", cv.best_l2},
                                    {"l2_grid", cv.l2_grid},
                                    {"cv_mean_accuracy", cv.mean_accuracy},
                                    {"cv_fold_accuracy", cv.fold_accuracies}};
    }
}

const std::vector<std::string>& csv_header() {
    static const std::vector<std::string> header{
        "encoder",          "features",           "patch_size",
        "stride",           "inhibition",         "neighborhood",
        "seed",             "baseline_test_accuracy", "baseline_train_accuracy",
        "inhibited_test_accuracy", "inhibited_train_accuracy", "z_mean_abs_offdiag_correlation",
        "z_population_sparsity", "h_mean_abs_offdiag_correlation", "h_population_sparsity"};
    return header;
}

std::string csv_number(const json& j) { return j.is_null() ? "" : j.dump(); }

void stage_evaluate(StageRun& run) {
    const auto& cfg = run.cfg;
    run.require_stage(Stage::extract);
    run.require_stage(Stage::train_classifier);

    json results = json::object();
    for (const auto& variant : variants(cfg)) {
        auto standardizer = load_standardizer(run.out(rel("train-classifier", variant + "_standardizer.bin")));
        auto model = load_softmax(run.out(rel("train-classifier", variant + "_softmax.bin")));
        auto train = load_features(run.out(rel("extract", variant + "_train.feat")));
        auto test = load_features(run.out(rel("extract", variant + "_test.feat")));
        const auto& cv = run.upstream.at(Stage::train_classifier).at("metrics").at(variant);
        results[variant] = json{
            {"test_accuracy", accuracy(predict(model, apply_standardizer(standardizer, test.features)), test.labels)},
            {"train_accuracy", accuracy(predict(model, apply_standardizer(standardizer, train.features)), train.labels)},
            {"best_l2", cv.at("best_l2")},
            {"cv_mean_accuracy", cv.at("cv_mean_accuracy")},
        };
    }
    run.metrics = results;

    json config = json::object();
    for (const auto& [k, v] : canonical_entries(cfg)) config[k] = v;

    const auto& ex = run.upstream.at(Stage::extract).at("metrics");
    json stats = json::object();
    stats["z"] = ex.at("z");
    if (ex.contains("h")) stats["h"] = ex.at("h");

    // Every artifact of every stage, as recorded in the fragments.
    json checksums = json::object();
    for (Stage s : kAllStages) {
        if (s == Stage::evaluate) continue;
        const auto frag_path = cfg.output_dir / stage_name(s) / "fragment.json";
        auto frag = read_json(frag_path);
        for (const auto& [file, sum] : frag.at("outputs").items()) checksums[file] = sum;
        checksums[std::string(stage_name(s)) + "/fragment.json"] = io::checksum_file(frag_path);
    }

    json report;
    report["format"] = "lateralis-report";
    report["version"] = 1;
    report["config"] = config;
    report["results"] = results;
    report["activation_stats"] = stats;
    report["checksums"] = checksums;
    report["timings_file"] = "timings.json";
    write_json(cfg.output_dir / "report.json", report);

    auto pick = [&](const char* variant, const char* field) {
        return results.contains(variant) ? results[variant][field] : json();
    };
    auto stat = [&](const char* which, const char* field) {
        return stats.contains(which) ? stats[which][field] : json();
    };
    const std::vector<std::string> row{
        to_string(cfg.encoder),
        std::to_string(cfg.features),
        std::to_string(cfg.patch_size),
        std::to_string(cfg.stride),
        to_string(cfg.inhibition),
        cfg.hebbian.neighborhood ? std::to_string(*cfg.hebbian.neighborhood) : "none",
        std::to_string(cfg.seed),
        csv_number(pick(kVariantBaseline, "test_accuracy")),
        csv_number(pick(kVariantBaseline, "train_accuracy")),
        csv_number(pick(kVariantInhibited, "test_accuracy")),
        csv_number(pick(kVariantInhibited, "train_accuracy")),
        csv_number(stat("z", "mean_abs_offdiag_correlation")),
        csv_number(stat("z", "population_sparsity")),
        csv_number(stat("h", "mean_abs_offdiag_correlation")),
        csv_number(stat("h", "population_sparsity")),
    };
    std::string csv;
    for (std::size_t i = 0; i < csv_header().size(); ++i) csv += (i ? "," : "") + csv_header()[i];
    csv += "\n";
    for (std::size_t i = 0; i < row.size(); ++i) csv += (i ? "," : "") + row[i];
    csv += "\n";
    io::write_file(cfg.output_dir / "report.csv", csv);
    run.outputs["report.json"] = io::checksum_file(cfg.output_dir / "report.json");
    run.outputs["report.csv"] = io::checksum_file(cfg.output_dir / "report.csv");
}

void write_timings(const ExperimentConfig& cfg) {
    json t = json::object();
    for (Stage s : kAllStages) {
        const auto p = cfg.output_dir / stage_name(s) / "timing.json";
        if (fs::is_regular_file(p)) t[stage_name(s)] = read_json(p).at("seconds");
    }
    write_json(cfg.output_dir / "timings.json", t);
}

void run_stage_locked(Stage stage, const ExperimentConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    fs::create_directories(cfg.output_dir / stage_name(stage));
    StageRun run(cfg, stage);
    switch (stage) {
        case Stage::ingest: stage_ingest(run); break;
        case Stage::train_encoder: stage_train_encoder(run); break;
        case Stage::train_inhibition: stage_train_inhibition(run); break;
        case Stage::extract: stage_extract(run); break;
        case Stage::train_classifier: stage_train_classifier(run); break;
        case Stage::evaluate: stage_evaluate(run); break;
    }
    json frag;
    frag["stage"] = stage_name(stage);
    frag["config_checksum"] = config_checksum(cfg);
    frag["inputs"] = run.inputs;
    frag["outputs"] = run.outputs;
    frag["metrics"] = run.metrics;
    write_json(cfg.output_dir / stage_name(stage) / "fragment.json", frag);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(cfg.output_dir / stage_name(stage) / "timing.json", json{{"seconds", seconds}});
    if (stage == Stage::evaluate) write_timings(cfg);
}

std::optional<VariantMetrics> variant_metrics(const json& results, const char* variant) {
    if (!results.contains(variant)) return std::nullopt;
    const auto& r = results.at(variant);
    return VariantMetrics{r.at("test_accuracy").get<double>(), r.at("train_accuracy").get<double>(),
                          r.at("best_l2").get<double>()};
}

ActivationStats parse_stats(const json& j) {
    return {j.at("mean_abs_offdiag_correlation").get<double>(), j.at("population_sparsity").get<double>()};
}

}  // namespace

const char* stage_name(Stage stage) noexcept {
    switch (stage) {
        case Stage::ingest: return "ingest";
        case Stage::train_encoder: return "train-encoder";
        case Stage::train_inhibition: return "train-inhibition";
        case Stage::extract: return "extract";
        case Stage::train_classifier: return "train-classifier";
        case Stage::evaluate: return "evaluate";
    }
    return "unknown";
}

std::optional<Stage> parse_stage(std::string_view name) noexcept {
    for (Stage s : kAllStages)
        if (name == stage_name(s)) return s;
    return std::nullopt;
}

const std::vector<std::string>& report_csv_header() { return csv_header(); }

void run_stage(Stage stage, const ExperimentConfig& cfg) {
    validate_config(cfg);
    RunLock lock(cfg.output_dir);
    run_stage_locked(stage, cfg);
}

MetricsReport run_pipeline(const ExperimentConfig& cfg) {
    validate_config(cfg);
    {
        RunLock lock(cfg.output_dir);
        for (Stage s : kAllStages) run_stage_locked(s, cfg);
    }
    return load_report(cfg.output_dir);
}

MetricsReport load_report(const fs::path& output_dir) {
    const auto path = output_dir / "report.json";
    if (!fs::is_regular_file(path)) throw DependencyError("evaluate", "no report in " + output_dir.string());
    MetricsReport r;
    r.json = read_json(path);
    const auto& results = r.json.at("results");
    r.baseline = variant_metrics(results, kVariantBaseline);
    r.inhibited = variant_metrics(results, kVariantInhibited);
    const auto& stats = r.json.at("activation_stats");
    r.stats.z = parse_stats(stats.at("z"));
    if (stats.contains("h")) r.stats.h = parse_stats(stats.at("h"));
    for (const auto& [k, v] : r.json.at("config").items()) r.config.emplace_back(k, v.get<std::string>());
    for (const auto& [k, v] : r.json.at("checksums").items()) r.checksums[k] = v.get<std::string>();
    const auto timings = output_dir / r.json.at("timings_file").get<std::string>();
    if (fs::is_regular_file(timings)) {
        const json t = read_json(timings);
        for (const auto& [k, v] : t.items()) r.stage_seconds[k] = v.get<double>();
    }
    return r;
}

}  // namespace lateralis
