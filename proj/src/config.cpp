#include "lateralis/config.hpp"

#include "lateralis/dataset.hpp"
#include "lateralis/error.hpp"
#include "lateralis/io.hpp"
#include "lateralis/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace lateralis {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

[[noreturn]] void bad_value(const std::string& key, std::string_view value, const char* expected) {
    throw Error(ErrorCode::config, "key '" + key + "': '" + std::string(value) + "' is not " + expected);
}

template <class T>
T parse_integer(const std::string& key, std::string_view v) {
    T out{};
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) bad_value(key, v, "an integer in range");
    return out;
}

double parse_real(const std::string& key, std::string_view v) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "a finite real");
    return out;
}

std::vector<std::string_view> split_list(std::string_view v) {
    std::vector<std::string_view> out;
    while (true) {
        auto comma = v.find(',');
        out.push_back(trim(v.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    return out;
}

std::string format_real(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string join_paths(const std::vector<std::filesystem::path>& paths) {
    std::string out;
    for (std::size_t i = 0; i < paths.size(); ++i) out += (i ? "," : "") + paths[i].generic_string();
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, std::string_view,
                                  const std::filesystem::path&)>;

template <class T, class Member>
Setter integer(Member member) {
    return [member](ExperimentConfig& c, const std::string& k, std::string_view v, const std::filesystem::path&) {
        std::invoke(member, c) = parse_integer<T>(k, v);
    };
}

template <class Member>
Setter real(Member member) {
    return [member](ExperimentConfig& c, const std::string& k, std::string_view v, const std::filesystem::path&) {
        std::invoke(member, c) = parse_real(k, v);
    };
}

Setter paths(std::vector<std::filesystem::path> ExperimentConfig::*member) {
    return [member](ExperimentConfig& c, const std::string& k, std::string_view v, const std::filesystem::path& base) {
        auto& out = c.*member;
        out.clear();
        for (auto item : split_list(v)) {
            if (item.empty()) bad_value(k, v, "a comma-separated list of paths");
            std::filesystem::path p(item);
            out.push_back(p.is_absolute() ? p : (base / p).lexically_normal());
        }
    };
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        t["train_data"] = paths(&ExperimentConfig::train_data);
        t["test_data"] = paths(&ExperimentConfig::test_data);
        t["train_images"] = integer<std::size_t>(&ExperimentConfig::train_images);
        t["test_images"] = integer<std::size_t>(&ExperimentConfig::test_images);
        t["patch_size"] = integer<int>(&ExperimentConfig::patch_size);
        t["num_patches"] = integer<std::size_t>(&ExperimentConfig::num_patches);
        t["norm_eps"] = real(&ExperimentConfig::norm_eps);
        t["zca_eps"] = real(&ExperimentConfig::zca_eps);
        t["features"] = integer<Index>(&ExperimentConfig::features);
        t["encoder"] = [](ExperimentConfig& c, const std::string& k, std::string_view v, const auto&) {
            if (v == "kmeans") c.encoder = EncoderKind::kmeans;
            else if (v == "sparse_ae") c.encoder = EncoderKind::sparse_ae;
            else bad_value(k, v, "one of kmeans, sparse_ae");
        };
        t["kmeans_iters"] = integer<int>(&ExperimentConfig::kmeans_iters);
        t["ae_sparsity_target"] = real([](ExperimentConfig& c) -> double& { return c.autoencoder.sparsity_target; });
        t["ae_sparsity_weight"] = real([](ExperimentConfig& c) -> double& { return c.autoencoder.sparsity_weight; });
        t["ae_weight_decay"] = real([](ExperimentConfig& c) -> double& { return c.autoencoder.weight_decay; });
        t["ae_learning_rate"] = real([](ExperimentConfig& c) -> double& { return c.autoencoder.learning_rate; });
        t["ae_epochs"] = integer<int>([](ExperimentConfig& c) -> int& { return c.autoencoder.epochs; });
        t["ae_batch_size"] = integer<Index>([](ExperimentConfig& c) -> Index& { return c.autoencoder.batch_size; });
        t["inhibition"] = [](ExperimentConfig& c, const std::string& k, std::string_view v, const auto&) {
            if (v == "off") c.inhibition = InhibitionMode::off;
            else if (v == "on") c.inhibition = InhibitionMode::on;
            else if (v == "paired") c.inhibition = InhibitionMode::paired;
            else bad_value(k, v, "one of off, on, paired");
        };
        t["hebbian_alpha"] = real([](ExperimentConfig& c) -> double& { return c.hebbian.alpha; });
        t["hebbian_epochs"] = integer<int>([](ExperimentConfig& c) -> int& { return c.hebbian.epochs; });
        t["hebbian_samples"] = integer<std::size_t>(&ExperimentConfig::hebbian_samples);
        t["neighborhood"] = [](ExperimentConfig& c, const std::string& k, std::string_view v, const auto&) {
            if (v == "none") c.hebbian.neighborhood.reset();
            else c.hebbian.neighborhood = parse_integer<Index>(k, v);
        };
        t["prune_after_epoch"] = integer<int>([](ExperimentConfig& c) -> int& { return c.hebbian.prune_after_epoch; });
        t["prune_mode"] = [](ExperimentConfig& c, const std::string& k, std::string_view v, const auto&) {
            if (v == "fixed") c.hebbian.prune_mode = PruneMode::fixed;
            else if (v == "adaptive") c.hebbian.prune_mode = PruneMode::adaptive;
            else bad_value(k, v, "one of fixed, adaptive");
        };
        t["weak_link_fraction"] = real([](ExperimentConfig& c) -> double& { return c.hebbian.weak_link_fraction; });
        t["hebbian_variant"] = [](ExperimentConfig& c, const std::string& k, std::string_view v, const auto&) {
            if (v == "literal") c.hebbian.variant = HebbianVariant::literal;
            else if (v == "transposed") c.hebbian.variant = HebbianVariant::transposed;
            else bad_value(k, v, "one of literal, transposed");
        };
        t["stride"] = integer<int>(&ExperimentConfig::stride);
        t["lambda_grid"] = [](ExperimentConfig& c, const std::string& k, std::string_view v, const auto&) {
            c.lambda_grid.clear();
            for (auto item : split_list(v)) c.lambda_grid.push_back(parse_real(k, item));
        };
        t["folds"] = integer<int>(&ExperimentConfig::folds);
        t["clf_learning_rate"] = real([](ExperimentConfig& c) -> double& { return c.classifier.learning_rate; });
        t["clf_epochs"] = integer<int>([](ExperimentConfig& c) -> int& { return c.classifier.epochs; });
        t["clf_batch_size"] = integer<Index>([](ExperimentConfig& c) -> Index& { return c.classifier.batch_size; });
        t["stats_images"] = integer<std::size_t>(&ExperimentConfig::stats_images);
        t["seed"] = integer<std::uint64_t>(&ExperimentConfig::seed);
        t["output_dir"] = [](ExperimentConfig& c, const std::string&, std::string_view v, const std::filesystem::path& base) {
            std::filesystem::path p(v);
            c.output_dir = p.is_absolute() ? p : (base / p).lexically_normal();
        };
        return t;
    }();
    return table;
}

void check(bool cond, const std::string& what) {
    if (!cond) throw Error(ErrorCode::config, what);
}

}  // namespace

const char* to_string(EncoderKind kind) noexcept { return kind == EncoderKind::kmeans ? "kmeans" : "sparse_ae"; }

const char* to_string(InhibitionMode mode) noexcept {
    switch (mode) {
        case InhibitionMode::off: return "off";
        case InhibitionMode::on: return "on";
        case InhibitionMode::paired: return "paired";
    }
    return "off";
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    ExperimentConfig cfg;
    cfg.output_dir = (base_dir / cfg.output_dir).lexically_normal();
    std::set<std::string> seen;
    int line_no = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::config, "line " + std::to_string(line_no) + ": expected 'key = value'");
        std::string key(trim(line.substr(0, eq)));
        auto value = trim(line.substr(eq + 1));
        auto it = setters().find(key);
        if (it == setters().end())
            throw Error(ErrorCode::config, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        if (!seen.insert(key).second)
            throw Error(ErrorCode::config, "line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        if (value.empty()) throw Error(ErrorCode::config, "line " + std::to_string(line_no) + ": empty value for '" + key + "'");
        it->second(cfg, key, value, base_dir);
    }
    check(seen.count("train_data") && seen.count("test_data"), "config must set train_data and test_data");
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = io::read_file(path);
    } catch (const Error& e) {
        throw Error(ErrorCode::config, std::string("cannot read config: ") + e.what());
    }
    std::string text(bytes.begin(), bytes.end());
    auto base = std::filesystem::absolute(path).parent_path();
    return parse_config(text, base);
}

void validate_config(const ExperimentConfig& c) {
    check(!c.train_data.empty() && !c.test_data.empty(), "train_data and test_data must be non-empty");
    for (const auto* list : {&c.train_data, &c.test_data})
        for (const auto& p : *list) check(std::filesystem::is_regular_file(p), "data file does not exist: " + p.string());
    check(c.patch_size >= 1 && c.patch_size <= kImageSide, "patch_size must be in [1, 32]");
    check(c.stride >= 1, "stride must be >= 1");
    check(positions_per_side(c.patch_size, c.stride) >= 2, "patch_size/stride leave fewer than 2x2 positions for pooling");
    check(c.num_patches >= 1, "num_patches must be positive");
    check(c.norm_eps > 0 && c.zca_eps > 0, "norm_eps and zca_eps must be positive");
    check(c.features >= 1, "features must be positive");
    check(static_cast<std::size_t>(c.features) <= c.num_patches, "features must not exceed num_patches");
    check(c.kmeans_iters >= 1, "kmeans_iters must be positive");
    const auto& ae = c.autoencoder;
    check(ae.sparsity_target > 0 && ae.sparsity_target < 1, "ae_sparsity_target must be in (0, 1)");
    check(ae.sparsity_weight >= 0 && ae.weight_decay >= 0, "ae_sparsity_weight and ae_weight_decay must be >= 0");
    check(ae.learning_rate > 0 && ae.epochs >= 1 && ae.batch_size >= 1, "autoencoder schedule values must be positive");
    const auto& h = c.hebbian;
    if (c.inhibition != InhibitionMode::off) {
        check(c.features >= 2, "inhibition needs features >= 2");
        check(h.alpha > 0, "hebbian_alpha must be positive");
        check(h.epochs >= 1 && c.hebbian_samples >= 1, "hebbian_epochs and hebbian_samples must be positive");
        if (h.prune_mode == PruneMode::fixed && h.neighborhood) {
            check(*h.neighborhood >= 1 && *h.neighborhood <= c.features - 1, "neighborhood must be in [1, features - 1]");
            check(h.prune_after_epoch >= 1 && h.prune_after_epoch <= h.epochs,
                  "prune_after_epoch must be in [1, hebbian_epochs]");
        }
        check(h.weak_link_fraction >= 0 && h.weak_link_fraction < 1, "weak_link_fraction must be in [0, 1)");
    }
    check(!c.lambda_grid.empty(), "lambda_grid must not be empty");
    for (double l : c.lambda_grid) check(l >= 0, "lambda_grid values must be >= 0");
    check(c.folds >= 2, "folds must be >= 2");
    check(c.classifier.learning_rate > 0 && c.classifier.epochs >= 1 && c.classifier.batch_size >= 1,
          "classifier schedule values must be positive");
    check(c.stats_images >= 1, "stats_images must be positive");
}

std::vector<std::pair<std::string, std::string>> canonical_entries(const ExperimentConfig& c) {
    auto n = [](auto v) { return std::to_string(v); };
    std::string grid;
    for (std::size_t i = 0; i < c.lambda_grid.size(); ++i) grid += (i ? "," : "") + format_real(c.lambda_grid[i]);
    const auto& h = c.hebbian;
    return {
        {"train_data", join_paths(c.train_data)},
        {"test_data", join_paths(c.test_data)},
        {"train_images", n(c.train_images)},
        {"test_images", n(c.test_images)},
        {"patch_size", n(c.patch_size)},
        {"num_patches", n(c.num_patches)},
        {"norm_eps", format_real(c.norm_eps)},
        {"zca_eps", format_real(c.zca_eps)},
        {"features", n(c.features)},
        {"encoder", to_string(c.encoder)},
        {"kmeans_iters", n(c.kmeans_iters)},
        {"ae_sparsity_target", format_real(c.autoencoder.sparsity_target)},
        {"ae_sparsity_weight", format_real(c.autoencoder.sparsity_weight)},
        {"ae_weight_decay", format_real(c.autoencoder.weight_decay)},
        {"ae_learning_rate", format_real(c.autoencoder.learning_rate)},
        {"ae_epochs", n(c.autoencoder.epochs)},
        {"ae_batch_size", n(c.autoencoder.batch_size)},
        {"inhibition", to_string(c.inhibition)},
        {"hebbian_alpha", format_real(h.alpha)},
        {"hebbian_epochs", n(h.epochs)},
        {"hebbian_samples", n(c.hebbian_samples)},
        {"neighborhood", h.neighborhood ? n(*h.neighborhood) : "none"},
        {"prune_after_epoch", n(h.prune_after_epoch)},
        {"prune_mode", h.prune_mode == PruneMode::fixed ? "fixed" : "adaptive"},
        {"weak_link_fraction", format_real(h.weak_link_fraction)},
        {"hebbian_variant", h.variant == HebbianVariant::literal ? "literal" : "transposed"},
        {"stride", n(c.stride)},
        {"lambda_grid", grid},
        {"folds", n(c.folds)},
        {"clf_learning_rate", format_real(c.classifier.learning_rate)},
        {"clf_epochs", n(c.classifier.epochs)},
        {"clf_batch_size", n(c.classifier.batch_size)},
        {"stats_images", n(c.stats_images)},
        {"seed", n(c.seed)},
    };
}

std::string canonical_config(const ExperimentConfig& c) {
    std::string out;
    for (const auto& [k, v] : canonical_entries(c)) out += k + " = " + v + "\n";
    return out;
}

}  // namespace lateralis
