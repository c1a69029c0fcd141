#pragma once
// Configuration-driven orchestration: one JSON config file of record drives
// dataset generation, model training, explanation dumps, metric evaluation,
// and report rendering. Every stage seed is explicit in the resolved config,
// and reruns from the same config are byte-identical.

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "xaieval/dataset.hpp"
#include "xaieval/errors.hpp"
#include "xaieval/explainers.hpp"
#include "xaieval/hash.hpp"
#include "xaieval/metrics.hpp"
#include "xaieval/png_io.hpp"
#include "xaieval/seg_model.hpp"
#include "xaieval/sobol.hpp"
#include "xaieval/svg_plot.hpp"
#include "xaieval/unoise.hpp"

namespace xaieval {

using json = nlohmann::json;

// -1 in a seed field means "derive from the global seed".
inline constexpr std::int64_t kDeriveSeed = -1;

struct ExplainerSpec {
    std::string id;
    // seg_sobol
    int grid_size = 11;
    int n_designs = 2048;
    std::string baseline = "blur";
    double blur_sigma = 5.0;
    // CAM variants
    std::string layer = "bottleneck";
    // ground_truth / inverted
    int dilate_radius = 8;
    // seg_sobol / random
    std::int64_t seed = kDeriveSeed;
};

struct DatasetConfig {
    int n = 200;
    int size = 64;
    int classes = 2;
    std::int64_t seed = kDeriveSeed;
    bool export_png = false;
};

struct UtilityConfig {
    int epochs = 10;
    double lr = 2e-3;
    int base_channels = 8;
    double iou_floor = 0.85;
    double noise_aug_max_sd = 0.2;
    std::int64_t seed = kDeriveSeed;
};

struct NoiseConfig {
    double lambda = 0.1;       // frozen by the one-time sweep over {.01,.05,.1,.3}
    double noise_scale = 0.5;
    int epochs = 20;
    double lr = 2e-3;
    int base_channels = 8;
    double max_iou_drop = 0.05;
    double min_mean_noise = 0.2;
    std::int64_t seed = kDeriveSeed;
};

struct EvaluationConfig {
    std::string technique = "mul";
    double sampling_sigma = 0.1;
    std::int64_t sampling_seed = kDeriveSeed;
    std::vector<double> taus = {-0.1, 0.0, 0.1, 0.2, 0.3};
    int n_images = 20;
    std::vector<ExplainerSpec> explainers;
};

struct RunConfig {
    std::uint64_t seed = 42;
    std::string output_dir = "runs/default";
    int jobs = 1;
    int target_class = 1;
    DatasetConfig dataset;
    UtilityConfig utility;
    NoiseConfig noise;
    EvaluationConfig evaluation;
};

inline const std::set<std::string>& known_explainer_ids() {
    static const std::set<std::string> ids = {"seg_sobol",    "seg_grad_cam",
                                              "seg_grad_cam_pp", "ground_truth",
                                              "inverted",     "random"};
    return ids;
}

inline std::vector<ExplainerSpec> default_explainers() {
    // Desk-scale Sobol parameters for the default run; the module-level
    // defaults (g=11, N=2048) stay available through the config file.
    ExplainerSpec sobol;
    sobol.id = "seg_sobol";
    sobol.grid_size = 7;
    sobol.n_designs = 64;
    ExplainerSpec cam;
    cam.id = "seg_grad_cam";
    ExplainerSpec campp;
    campp.id = "seg_grad_cam_pp";
    ExplainerSpec gt;
    gt.id = "ground_truth";
    ExplainerSpec inv;
    inv.id = "inverted";
    ExplainerSpec rnd;
    rnd.id = "random";
    return {sobol, cam, campp, gt, inv, rnd};
}

namespace detail {

inline void require_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw ConfigError("config: unknown key '" + key + "' in " + where);
}

template <typename T>
inline void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

}  // namespace detail

inline json explainer_to_json(const ExplainerSpec& e) {
    json j;
    j["id"] = e.id;
    if (e.id == "seg_sobol") {
        j["grid_size"] = e.grid_size;
        j["n_designs"] = e.n_designs;
        j["baseline"] = e.baseline;
        j["blur_sigma"] = e.blur_sigma;
        j["seed"] = e.seed;
    } else if (e.id == "seg_grad_cam" || e.id == "seg_grad_cam_pp") {
        j["layer"] = e.layer;
    } else if (e.id == "ground_truth" || e.id == "inverted") {
        j["dilate_radius"] = e.dilate_radius;
    } else if (e.id == "random") {
        j["seed"] = e.seed;
    }
    return j;
}

inline json config_to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["jobs"] = c.jobs;
    j["target_class"] = c.target_class;
    j["dataset"] = {{"n", c.dataset.n},
                    {"size", c.dataset.size},
                    {"classes", c.dataset.classes},
                    {"seed", c.dataset.seed},
                    {"export_png", c.dataset.export_png}};
    j["utility"] = {{"epochs", c.utility.epochs},
                    {"lr", c.utility.lr},
                    {"base_channels", c.utility.base_channels},
                    {"iou_floor", c.utility.iou_floor},
                    {"noise_aug_max_sd", c.utility.noise_aug_max_sd},
                    {"seed", c.utility.seed}};
    j["noise"] = {{"lambda", c.noise.lambda},
                  {"noise_scale", c.noise.noise_scale},
                  {"epochs", c.noise.epochs},
                  {"lr", c.noise.lr},
                  {"base_channels", c.noise.base_channels},
                  {"max_iou_drop", c.noise.max_iou_drop},
                  {"min_mean_noise", c.noise.min_mean_noise},
                  {"seed", c.noise.seed}};
    json ev;
    ev["technique"] = c.evaluation.technique;
    ev["sampling_sigma"] = c.evaluation.sampling_sigma;
    ev["sampling_seed"] = c.evaluation.sampling_seed;
    ev["taus"] = c.evaluation.taus;
    ev["n_images"] = c.evaluation.n_images;
    ev["explainers"] = json::array();
    for (const auto& e : c.evaluation.explainers) ev["explainers"].push_back(explainer_to_json(e));
    j["evaluation"] = ev;
    return j;
}

inline ExplainerSpec explainer_from_json(const json& j) {
    detail::require_keys(j, {"id", "grid_size", "n_designs", "baseline", "blur_sigma",
                             "layer", "dilate_radius", "seed"},
                         "evaluation.explainers[]");
    ExplainerSpec e;
    if (!j.contains("id")) throw ConfigError("config: explainer entry without 'id'");
    e.id = j.at("id").get<std::string>();
    detail::read_if(j, "grid_size", e.grid_size);
    detail::read_if(j, "n_designs", e.n_designs);
    detail::read_if(j, "baseline", e.baseline);
    detail::read_if(j, "blur_sigma", e.blur_sigma);
    detail::read_if(j, "layer", e.layer);
    detail::read_if(j, "dilate_radius", e.dilate_radius);
    detail::read_if(j, "seed", e.seed);
    return e;
}

// Parses a user config over the built-in defaults. Unknown keys are rejected.
inline RunConfig config_from_json(const json& j) {
    detail::require_keys(j, {"seed", "output_dir", "jobs", "target_class", "dataset",
                             "utility", "noise", "evaluation"},
                         "top level");
    RunConfig c;
    c.evaluation.explainers = default_explainers();
    detail::read_if(j, "seed", c.seed);
    detail::read_if(j, "output_dir", c.output_dir);
    detail::read_if(j, "jobs", c.jobs);
    detail::read_if(j, "target_class", c.target_class);
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        detail::require_keys(d, {"n", "size", "classes", "seed", "export_png"}, "dataset");
        detail::read_if(d, "n", c.dataset.n);
        detail::read_if(d, "size", c.dataset.size);
        detail::read_if(d, "classes", c.dataset.classes);
        detail::read_if(d, "seed", c.dataset.seed);
        detail::read_if(d, "export_png", c.dataset.export_png);
    }
    if (j.contains("utility")) {
        const auto& u = j.at("utility");
        detail::require_keys(u, {"epochs", "lr", "base_channels", "iou_floor",
                                 "noise_aug_max_sd", "seed"},
                             "utility");
        detail::read_if(u, "epochs", c.utility.epochs);
        detail::read_if(u, "lr", c.utility.lr);
        detail::read_if(u, "base_channels", c.utility.base_channels);
        detail::read_if(u, "iou_floor", c.utility.iou_floor);
        detail::read_if(u, "noise_aug_max_sd", c.utility.noise_aug_max_sd);
        detail::read_if(u, "seed", c.utility.seed);
    }
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        detail::require_keys(n, {"lambda", "noise_scale", "epochs", "lr", "base_channels",
                                 "max_iou_drop", "min_mean_noise", "seed"},
                             "noise");
        detail::read_if(n, "lambda", c.noise.lambda);
        detail::read_if(n, "noise_scale", c.noise.noise_scale);
        detail::read_if(n, "epochs", c.noise.epochs);
        detail::read_if(n, "lr", c.noise.lr);
        detail::read_if(n, "base_channels", c.noise.base_channels);
        detail::read_if(n, "max_iou_drop", c.noise.max_iou_drop);
        detail::read_if(n, "min_mean_noise", c.noise.min_mean_noise);
        detail::read_if(n, "seed", c.noise.seed);
    }
    if (j.contains("evaluation")) {
        const auto& ev = j.at("evaluation");
        detail::require_keys(ev, {"technique", "sampling_sigma", "sampling_seed", "taus",
                                  "n_images", "explainers"},
                             "evaluation");
        detail::read_if(ev, "technique", c.evaluation.technique);
        detail::read_if(ev, "sampling_sigma", c.evaluation.sampling_sigma);
        detail::read_if(ev, "sampling_seed", c.evaluation.sampling_seed);
        detail::read_if(ev, "taus", c.evaluation.taus);
        detail::read_if(ev, "n_images", c.evaluation.n_images);
        if (ev.contains("explainers")) {
            c.evaluation.explainers.clear();
            for (const auto& e : ev.at("explainers"))
                c.evaluation.explainers.push_back(explainer_from_json(e));
        }
    }
    return c;
}

// Fills derived seeds so the resolved config names every seed explicitly,
// then checks cross-field invariants. The result is the config of record.
inline RunConfig resolve_config(RunConfig c) {
    auto fill = [&c](std::int64_t& s, std::uint64_t tag) {
        if (s == kDeriveSeed) s = static_cast<std::int64_t>(derive_seed(c.seed, tag) >> 1);
        if (s < 0) throw ConfigError("config: seeds must be >= 0 (or -1 to derive)");
    };
    fill(c.dataset.seed, 0xDA7A);
    fill(c.utility.seed, 0x5E61);
    fill(c.noise.seed, 0x0153);
    fill(c.evaluation.sampling_seed, 0x5A3B);
    for (std::size_t i = 0; i < c.evaluation.explainers.size(); ++i) {
        auto& e = c.evaluation.explainers[i];
        if (e.seed == kDeriveSeed)
            e.seed = static_cast<std::int64_t>(
                derive_seed(c.seed, 0xE0 + Fnv64().update(e.id).digest()) >> 1);
    }

    // Validation with named diagnostics (CLI exit 2).
    if (c.jobs < 1) throw ConfigError("config: jobs must be >= 1");
    if (c.dataset.n < 10) throw ConfigError("config: dataset.n must be >= 10");
    if (c.dataset.size < 32) throw ConfigError("config: dataset.size must be >= 32");
    if (c.dataset.size % 4 != 0)
        throw ConfigError("config: dataset.size must be a multiple of 4 (two pooling stages)");
    if (c.dataset.classes != 2 && c.dataset.classes != 3)
        throw ConfigError("config: dataset.classes must be 2 or 3");
    if (c.target_class < 0 || c.target_class >= c.dataset.classes)
        throw ConfigError("config: target_class out of range");
    if (c.utility.epochs < 1 || c.noise.epochs < 1)
        throw ConfigError("config: epochs must be >= 1");
    if (c.noise.lambda < 0.0) throw ConfigError("config: noise.lambda must be >= 0");
    if (c.noise.noise_scale <= 0.0) throw ConfigError("config: noise.noise_scale must be > 0");
    try {
        technique_from_name(c.evaluation.technique);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (c.evaluation.sampling_sigma <= 0.0)
        throw ConfigError("config: evaluation.sampling_sigma must be > 0");
    ThresholdSweep sweep;
    sweep.taus = c.evaluation.taus;
    try {
        validate_sweep(sweep);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (c.evaluation.n_images < 1) throw ConfigError("config: evaluation.n_images must be >= 1");
    if (c.evaluation.explainers.empty())
        throw ConfigError("config: evaluation.explainers must not be empty");
    std::set<std::string> seen;
    for (const auto& e : c.evaluation.explainers) {
        if (!known_explainer_ids().count(e.id))
            throw ConfigError("config: unknown explainer id '" + e.id + "'");
        if (!seen.insert(e.id).second)
            throw ConfigError("config: duplicate explainer id '" + e.id + "'");
        if (e.id == "seg_sobol") {
            if (e.grid_size < 2) throw ConfigError("config: seg_sobol.grid_size must be >= 2");
            if (e.n_designs < 32 || !is_power_of_two(e.n_designs))
                throw ConfigError("config: seg_sobol.n_designs must be a power of two >= 32");
            try {
                baseline_from_name(e.baseline);
            } catch (const std::invalid_argument& err) {
                throw ConfigError(std::string("config: ") + err.what());
            }
        }
        if ((e.id == "seg_grad_cam" || e.id == "seg_grad_cam_pp")) {
            const auto& names = UNet::layer_names();
            if (std::find(names.begin(), names.end(), e.layer) == names.end())
                throw ConfigError("config: unknown layer '" + e.layer + "' for " + e.id);
        }
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    json j;
    if (path.empty()) {
        j = json::object();
    } else {
        std::string text;
        try {
            text = detail::read_text_file(path);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
        }
    }
    try {
        return resolve_config(config_from_json(j));
    } catch (const json::exception& e) {
        throw ConfigError("config: " + std::string(e.what()));
    }
}

inline std::string config_hash_hex(const RunConfig& c) {
    return hash_string_hex(config_to_json(c).dump());
}

// Output directory resolution: a relative output_dir is placed under
// $XAIEVAL_OUTPUT_ROOT when that variable is set.
inline std::string resolve_output_dir(const RunConfig& c) {
    std::filesystem::path p(c.output_dir);
    if (p.is_relative()) {
        if (const char* root = std::getenv("XAIEVAL_OUTPUT_ROOT"))
            p = std::filesystem::path(root) / p;
    }
    return p.string();
}

// ---------------------------------------------------------------------------
// Run manifest

class RunManifest {
public:
    explicit RunManifest(std::string out_dir) : dir_(std::move(out_dir)) {
        const auto path = file_path();
        if (std::filesystem::exists(path)) {
            try {
                j_ = json::parse(detail::read_text_file(path));
            } catch (...) {
                j_ = json::object();  // corrupted manifest: start over
            }
        }
        if (!j_.contains("outputs")) j_["outputs"] = json::object();
        if (!j_.contains("stage_seconds")) j_["stage_seconds"] = json::object();
        if (!j_.contains("weight_hashes")) j_["weight_hashes"] = json::object();
    }

    void set_config_hash(const std::string& h) { j_["config_hash"] = h; }

    void set_weight_hash(const std::string& name, const std::string& h) {
        j_["weight_hashes"][name] = h;
    }

    void set_stage_seconds(const std::string& stage, double seconds) {
        j_["stage_seconds"][stage] = seconds;
    }

    // Records a written file with size and content hash; path is stored
    // relative to the run directory.
    void record_output(const std::string& abs_or_rel_path) {
        namespace fs = std::filesystem;
        fs::path p(abs_or_rel_path);
        const fs::path rel = p.lexically_relative(dir_);
        const std::string key = (rel.empty() || rel.native().starts_with(".."))
                                    ? p.string()
                                    : rel.string();
        json entry;
        entry["bytes"] = static_cast<std::int64_t>(fs::file_size(p));
        entry["fnv64"] = hash_file_hex(p.string());
        j_["outputs"][key] = entry;
    }

    void save() const {
        detail::write_text_file(file_path(), j_.dump(2) + "\n");
    }

    const json& data() const { return j_; }

private:
    std::string file_path() const { return dir_ + "/manifest.json"; }
    std::string dir_;
    json j_;
};

// ---------------------------------------------------------------------------
// Stage implementations

struct RunPaths {
    std::string dir;
    std::string config_resolved() const { return dir + "/config_resolved.json"; }
    std::string utility_weights() const { return dir + "/utility.weights"; }
    std::string utility_sidecar() const { return dir + "/utility.json"; }
    std::string utility_curve() const { return dir + "/train_curve_utility.json"; }
    std::string noise_weights() const { return dir + "/noise.weights"; }
    std::string noise_sidecar() const { return dir + "/noise.json"; }
    std::string noise_pareto() const { return dir + "/noise_pareto.json"; }
    std::string metrics_csv() const { return dir + "/metrics.csv"; }
    std::string metrics_aggregate() const { return dir + "/metrics_aggregate.json"; }
    std::string plot(const std::string& metric) const { return dir + "/plot_" + metric + ".svg"; }
    std::string explain_dir() const { return dir + "/explain"; }
    std::string dataset_dir() const { return dir + "/dataset"; }
};

inline RunPaths run_paths(const RunConfig& cfg) {
    RunPaths p;
    p.dir = resolve_output_dir(cfg);
    return p;
}

inline Dataset dataset_for(const RunConfig& cfg) {
    return gen_shapes_dataset(static_cast<std::uint64_t>(cfg.dataset.seed), cfg.dataset.n,
                              cfg.dataset.size, cfg.dataset.classes);
}

inline std::unique_ptr<Explainer> make_explainer(const ExplainerSpec& spec,
                                                 const RunConfig& cfg) {
    if (spec.id == "seg_sobol") {
        SobolConfig sc;
        sc.grid_size = spec.grid_size;
        sc.n_designs = spec.n_designs;
        sc.seed = static_cast<std::uint64_t>(spec.seed);
        sc.baseline = baseline_from_name(spec.baseline);
        sc.blur_sigma = spec.blur_sigma;
        sc.jobs = cfg.jobs;
        return std::make_unique<SobolExplainer>(sc);
    }
    if (spec.id == "seg_grad_cam")
        return std::make_unique<GradCamExplainer>(LayerSelector{spec.layer}, false);
    if (spec.id == "seg_grad_cam_pp")
        return std::make_unique<GradCamExplainer>(LayerSelector{spec.layer}, true);
    if (spec.id == "ground_truth")
        return std::make_unique<GroundTruthExplainer>(spec.dilate_radius);
    if (spec.id == "inverted") return std::make_unique<InvertedExplainer>(spec.dilate_radius);
    if (spec.id == "random")
        return std::make_unique<RandomExplainer>(static_cast<std::uint64_t>(spec.seed));
    throw ConfigError("config: unknown explainer id '" + spec.id + "'");
}

namespace detail {

class StageTimer {
public:
    StageTimer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline void write_config_of_record(const RunConfig& cfg, const RunPaths& paths,
                                   RunManifest& manifest) {
    write_text_file(paths.config_resolved(), config_to_json(cfg).dump(2) + "\n");
    manifest.record_output(paths.config_resolved());
    manifest.set_config_hash(config_hash_hex(cfg));
}

}  // namespace detail

// Trains the utility model, then the noise model against it; persists weights
// with JSON sidecars and training diagnostics. TrainingFloorError propagates
// after the diagnostic dump is written (CLI exit 4).
inline void run_train(const RunConfig& cfg) {
    const RunPaths paths = run_paths(cfg);
    std::filesystem::create_directories(paths.dir);
    RunManifest manifest(paths.dir);
    detail::StageTimer timer;
    detail::write_config_of_record(cfg, paths, manifest);

    const Dataset ds = dataset_for(cfg);
    const std::string ds_hash = dataset_hash_hex(ds);
    if (cfg.dataset.export_png) {
        std::filesystem::create_directories(paths.dataset_dir());
        export_dataset_png(ds, paths.dataset_dir());
        for (const auto& entry : std::filesystem::directory_iterator(paths.dataset_dir()))
            manifest.record_output(entry.path().string());
    }

    UtilityTrainOptions uopt;
    uopt.lr = cfg.utility.lr;
    uopt.base_channels = cfg.utility.base_channels;
    uopt.target_class = cfg.target_class;
    uopt.iou_floor = cfg.utility.iou_floor;
    uopt.noise_aug_max_sd = cfg.utility.noise_aug_max_sd;
    UtilityTrainReport ureport;
    UnetSegModel utility;
    try {
        utility = train_utility(ds, cfg.utility.epochs,
                                static_cast<std::uint64_t>(cfg.utility.seed), uopt, &ureport);
    } catch (const TrainingFloorError& e) {
        detail::write_text_file(paths.utility_curve(), e.trace + "\n");
        manifest.record_output(paths.utility_curve());
        manifest.save();
        throw;
    }
    utility.save(paths.utility_weights());
    json usidecar = {{"seed", cfg.utility.seed},
                     {"epochs", cfg.utility.epochs},
                     {"dataset_hash", ds_hash},
                     {"val_iou", ureport.val_iou}};
    detail::write_text_file(paths.utility_sidecar(), usidecar.dump(2) + "\n");
    detail::write_text_file(paths.utility_curve(), ureport.curve_json() + "\n");
    manifest.record_output(paths.utility_weights());
    manifest.record_output(paths.utility_sidecar());
    manifest.record_output(paths.utility_curve());
    manifest.set_weight_hash("utility", hash_file_hex(paths.utility_weights()));

    NoiseTrainConfig ncfg;
    ncfg.lambda = cfg.noise.lambda;
    ncfg.noise_scale = cfg.noise.noise_scale;
    ncfg.epochs = cfg.noise.epochs;
    ncfg.seed = static_cast<std::uint64_t>(cfg.noise.seed);
    ncfg.lr = cfg.noise.lr;
    ncfg.base_channels = cfg.noise.base_channels;
    ncfg.target_class = cfg.target_class;
    ncfg.max_iou_drop = cfg.noise.max_iou_drop;
    ncfg.min_mean_noise = cfg.noise.min_mean_noise;
    NoiseTrainReport nreport;
    NoiseModel noise;
    try {
        noise = train_unoise(utility, ds, ncfg, &nreport);
    } catch (const TrainingFloorError& e) {
        detail::write_text_file(paths.noise_pareto(), e.trace + "\n");
        manifest.record_output(paths.noise_pareto());
        manifest.save();
        throw;
    }
    noise.save(paths.noise_weights());
    json nsidecar = {{"lambda", cfg.noise.lambda},
                     {"noise_scale", cfg.noise.noise_scale},
                     {"mean_noise_val", nreport.mean_noise_val},
                     {"iou_drop_val", nreport.iou_drop}};
    detail::write_text_file(paths.noise_sidecar(), nsidecar.dump(2) + "\n");
    detail::write_text_file(paths.noise_pareto(), nreport.pareto_json() + "\n");
    manifest.record_output(paths.noise_weights());
    manifest.record_output(paths.noise_sidecar());
    manifest.record_output(paths.noise_pareto());
    manifest.set_weight_hash("noise", hash_file_hex(paths.noise_weights()));

    manifest.set_stage_seconds("train", timer.seconds());
    manifest.save();
}

namespace detail {

inline UnetSegModel load_utility_checked(const RunPaths& paths, const std::string& ds_hash) {
    if (!std::filesystem::exists(paths.utility_weights()))
        throw MissingArtifactError("missing utility weights: " + paths.utility_weights() +
                                   " (run 'train' first)");
    UnetSegModel utility = UnetSegModel::load(paths.utility_weights());
    if (std::filesystem::exists(paths.utility_sidecar())) {
        const json sidecar = json::parse(read_text_file(paths.utility_sidecar()));
        if (sidecar.contains("dataset_hash") &&
            sidecar.at("dataset_hash").get<std::string>() != ds_hash)
            throw ConfigError(
                "weights were trained on a different dataset (hash mismatch); retrain or fix "
                "the dataset config");
    }
    return utility;
}

inline NoiseModel load_noise_checked(const RunPaths& paths) {
    if (!std::filesystem::exists(paths.noise_weights()))
        throw MissingArtifactError("missing noise weights: " + paths.noise_weights() +
                                   " (run 'train' first)");
    return NoiseModel::load(paths.noise_weights());
}

}  // namespace detail

// Dumps saliency maps (PNG + raw CSV grid) and explanation maps (PNG) for the
// requested image ids across every configured explainer.
inline void run_explain(const RunConfig& cfg, const std::vector<std::int64_t>& image_ids) {
    const RunPaths paths = run_paths(cfg);
    std::filesystem::create_directories(paths.explain_dir());
    RunManifest manifest(paths.dir);
    detail::StageTimer timer;
    detail::write_config_of_record(cfg, paths, manifest);

    const Dataset ds = dataset_for(cfg);
    UnetSegModel utility = detail::load_utility_checked(paths, dataset_hash_hex(ds));

    std::vector<const DataItem*> items;
    for (std::int64_t id : image_ids) {
        const DataItem* found = nullptr;
        for (const auto* split : {&ds.train, &ds.val, &ds.test})
            for (const auto& item : *split)
                if (item.id == id) found = &item;
        if (!found)
            throw ConfigError("explain: image id " + std::to_string(id) +
                              " not in the dataset (n=" + std::to_string(cfg.dataset.n) + ")");
        items.push_back(found);
    }

    const Technique tech = technique_from_name(cfg.evaluation.technique);
    for (const auto& spec : cfg.evaluation.explainers) {
        auto explainer = make_explainer(spec, cfg);
        for (const DataItem* item : items) {
            const SaliencyMap sal = explainer->explain(utility, *item, cfg.target_class);
            const std::string stem = paths.explain_dir() + "/sal_" +
                                     std::to_string(item->id) + "_" + explainer->id();
            write_png_gray(stem + ".png", sal.values);
            // raw float grid, one row per raster row
            std::ostringstream os;
            for (int i = 0; i < sal.values.h; ++i) {
                for (int j = 0; j < sal.values.w; ++j)
                    os << (j ? "," : "") << detail::fmt_double(sal.values.at(i, j));
                os << '\n';
            }
            detail::write_text_file(stem + ".csv", os.str());

            SamplingConfig scfg;
            scfg.sigma = cfg.evaluation.sampling_sigma;
            scfg.seed = derive_seed(static_cast<std::uint64_t>(cfg.evaluation.sampling_seed),
                                    static_cast<std::uint64_t>(item->id));
            const ExplanationMap expl = integrate(tech, item->image, sal, scfg);
            const std::string expl_path = paths.explain_dir() + "/expl_" +
                                          std::to_string(item->id) + "_" + explainer->id() +
                                          "_" + cfg.evaluation.technique + ".png";
            write_png_image(expl_path, expl.pixels);

            manifest.record_output(stem + ".png");
            manifest.record_output(stem + ".csv");
            manifest.record_output(expl_path);
        }
    }
    manifest.set_stage_seconds("explain", timer.seconds());
    manifest.save();
}

namespace detail {

inline void write_metric_plots(const RunConfig& cfg, const RunPaths& paths,
                               const MetricsReport& report, RunManifest& manifest) {
    for (const std::string metric : {std::string("ana"), std::string("srm")}) {
        std::vector<PlotSeries> series;
        for (const auto& spec : cfg.evaluation.explainers) {
            PlotSeries s;
            s.name = spec.id;
            for (double tau : cfg.evaluation.taus) {
                s.x.push_back(tau);
                std::optional<double> y;
                for (const auto& a : report.aggregates)
                    if (a.method_id == spec.id && a.tau == tau && a.n > 0)
                        y = metric == "ana" ? a.ana_mean : a.srm_mean;
                s.y.push_back(y);
            }
            series.push_back(std::move(s));
        }
        const std::string title =
            (metric == "ana" ? "Average noise added vs threshold"
                             : "Second raw moment vs threshold");
        write_line_chart(paths.plot(metric), title, "masking threshold",
                         metric == "ana" ? "ANA (lower is better)" : "SRM (lower is better)",
                         series);
        manifest.record_output(paths.plot(metric));
    }
}

}  // namespace detail

// Evaluates every configured explainer over the held-out test images; writes
// the per-row CSV, the aggregate JSON, and one plot per metric. Per-image
// failures are recorded in the report; only a fully failed run throws.
inline MetricsReport run_evaluate(const RunConfig& cfg) {
    const RunPaths paths = run_paths(cfg);
    std::filesystem::create_directories(paths.dir);
    RunManifest manifest(paths.dir);
    detail::StageTimer timer;
    detail::write_config_of_record(cfg, paths, manifest);

    const Dataset ds = dataset_for(cfg);
    if (static_cast<std::size_t>(cfg.evaluation.n_images) > ds.test.size())
        throw ConfigError("config: evaluation.n_images exceeds the test split (" +
                          std::to_string(ds.test.size()) + ")");
    UnetSegModel utility = detail::load_utility_checked(paths, dataset_hash_hex(ds));
    const NoiseModel noise = detail::load_noise_checked(paths);

    const std::vector<DataItem> images(ds.test.begin(),
                                       ds.test.begin() + cfg.evaluation.n_images);

    const Technique tech = technique_from_name(cfg.evaluation.technique);
    SamplingConfig sampling;
    sampling.sigma = cfg.evaluation.sampling_sigma;
    sampling.seed = static_cast<std::uint64_t>(cfg.evaluation.sampling_seed);
    ThresholdSweep sweep;
    sweep.taus = cfg.evaluation.taus;

    MetricsReport report;
    for (const auto& spec : cfg.evaluation.explainers) {
        auto explainer = make_explainer(spec, cfg);
        const MetricsReport r = evaluate_method(*explainer, noise, utility, images,
                                                cfg.target_class, tech, sampling, sweep);
        merge_reports(report, r);
    }
    if (report.rows.empty() && report.failure_count > 0)
        throw std::runtime_error("evaluate: every image failed for every method");

    detail::write_text_file(paths.metrics_csv(), metrics_csv(report));
    manifest.record_output(paths.metrics_csv());

    json agg;
    agg["schema_version"] = report.schema_version;
    agg["failure_count"] = report.failure_count;
    agg["failures"] = report.failures;
    agg["aggregates"] = json::array();
    for (const auto& a : report.aggregates) {
        agg["aggregates"].push_back({{"method_id", a.method_id},
                                     {"tau", a.tau},
                                     {"n", a.n},
                                     {"null_count", a.null_count},
                                     {"ana_mean", a.ana_mean},
                                     {"ana_std", a.ana_std},
                                     {"srm_mean", a.srm_mean},
                                     {"srm_std", a.srm_std}});
    }
    detail::write_text_file(paths.metrics_aggregate(), agg.dump(2) + "\n");
    manifest.record_output(paths.metrics_aggregate());

    detail::write_metric_plots(cfg, paths, report, manifest);

    manifest.set_stage_seconds("evaluate", timer.seconds());
    manifest.save();
    return report;
}

// Re-renders the aggregate JSON and plots from an existing metrics CSV
// without recomputing anything.
inline void run_report(const RunConfig& cfg) {
    const RunPaths paths = run_paths(cfg);
    if (!std::filesystem::exists(paths.metrics_csv()))
        throw MissingArtifactError("missing metrics CSV: " + paths.metrics_csv() +
                                   " (run 'evaluate' first)");
    RunManifest manifest(paths.dir);
    detail::StageTimer timer;

    MetricsReport report = metrics_from_csv(detail::read_text_file(paths.metrics_csv()));
    json agg;
    agg["schema_version"] = report.schema_version;
    agg["failure_count"] = report.failure_count;
    agg["failures"] = report.failures;
    agg["aggregates"] = json::array();
    for (const auto& a : report.aggregates) {
        agg["aggregates"].push_back({{"method_id", a.method_id},
                                     {"tau", a.tau},
                                     {"n", a.n},
                                     {"null_count", a.null_count},
                                     {"ana_mean", a.ana_mean},
                                     {"ana_std", a.ana_std},
                                     {"srm_mean", a.srm_mean},
                                     {"srm_std", a.srm_std}});
    }
    detail::write_text_file(paths.metrics_aggregate(), agg.dump(2) + "\n");
    manifest.record_output(paths.metrics_aggregate());
    detail::write_metric_plots(cfg, paths, report, manifest);
    manifest.set_stage_seconds("report", timer.seconds());
    manifest.save();
}

}  // namespace xaieval
