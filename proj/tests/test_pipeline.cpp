// End-to-end pipeline at reduced scale: train -> explain -> evaluate ->
// report through the library entry points, checking artifact layout,
// manifest coverage, output cardinalities, and byte-level reproducibility.
// Training floors are exercised at full scale by the training and acceptance
// suites; here they are relaxed so the plumbing test stays fast.

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "xaieval/bench.hpp"

using namespace xaieval;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

RunConfig pipeline_config(const std::string& out_dir) {
    json j;
    j["seed"] = 5;
    j["output_dir"] = out_dir;
    j["dataset"] = {{"n", 150}, {"size", 64}, {"classes", 2}};
    j["utility"] = {{"epochs", 2}, {"iou_floor", 0.5}};
    j["noise"] = {{"epochs", 2}, {"min_mean_noise", 0.0}, {"max_iou_drop", 1.0}};
    j["evaluation"] = {
        {"n_images", 3},
        {"explainers",
         json::array({{{"id", "seg_sobol"}, {"grid_size", 3}, {"n_designs", 32}},
                      {{"id", "seg_grad_cam"}},
                      {{"id", "ground_truth"}},
                      {{"id", "random"}}})}};
    return resolve_config(config_from_json(j));
}

}  // namespace

TEST_CASE("full pipeline produces a complete, reproducible artifact set") {
    const fs::path base = fs::temp_directory_path() / "xaieval_pipeline";
    fs::remove_all(base);
    const RunConfig cfg = pipeline_config((base / "run").string());
    const RunPaths paths = run_paths(cfg);

    run_train(cfg);
    CHECK(fs::exists(paths.utility_weights()));
    CHECK(fs::exists(paths.utility_sidecar()));
    CHECK(fs::exists(paths.noise_weights()));
    CHECK(fs::exists(paths.noise_sidecar()));
    CHECK(fs::exists(paths.utility_curve()));
    CHECK(fs::exists(paths.noise_pareto()));

    const json usidecar = json::parse(read_file(paths.utility_sidecar()));
    CHECK(usidecar.contains("seed"));
    CHECK(usidecar.contains("epochs"));
    CHECK(usidecar.contains("dataset_hash"));
    CHECK(usidecar.contains("val_iou"));
    const json nsidecar = json::parse(read_file(paths.noise_sidecar()));
    CHECK(nsidecar.contains("lambda"));
    CHECK(nsidecar.contains("noise_scale"));
    CHECK(nsidecar.contains("mean_noise_val"));
    CHECK(nsidecar.contains("iou_drop_val"));

    // retraining with the identical config reproduces identical sidecars
    const std::string sidecar_before = read_file(paths.utility_sidecar());
    const std::string nsidecar_before = read_file(paths.noise_sidecar());
    run_train(cfg);
    CHECK(read_file(paths.utility_sidecar()) == sidecar_before);
    CHECK(read_file(paths.noise_sidecar()) == nsidecar_before);

    // explain: per (image, method): saliency png + raw csv; plus explanation png
    const Dataset ds = dataset_for(cfg);
    const std::vector<std::int64_t> ids = {ds.test[0].id, ds.test[1].id};
    run_explain(cfg, ids);
    int sal_png = 0, sal_csv = 0, expl_png = 0;
    for (const auto& entry : fs::directory_iterator(paths.explain_dir())) {
        const std::string name = entry.path().filename().string();
        if (name.starts_with("sal_") && name.ends_with(".png")) ++sal_png;
        if (name.starts_with("sal_") && name.ends_with(".csv")) ++sal_csv;
        if (name.starts_with("expl_") && name.ends_with(".png")) ++expl_png;
    }
    CHECK(sal_png == 2 * 4);
    CHECK(sal_csv == 2 * 4);
    CHECK(expl_png == 2 * 4);

    // explain is reproducible byte-for-byte (random explainer included)
    const std::string probe =
        paths.explain_dir() + "/sal_" + std::to_string(ids[0]) + "_random.png";
    const std::string bytes_before = read_file(probe);
    run_explain(cfg, ids);
    CHECK(read_file(probe) == bytes_before);

    // evaluate: row cardinality = |methods| x |taus| x |images|
    const MetricsReport report = run_evaluate(cfg);
    CHECK(report.failure_count == 0);
    CHECK(report.rows.size() == 4 * cfg.evaluation.taus.size() * 3);
    CHECK(fs::exists(paths.metrics_csv()));
    CHECK(fs::exists(paths.metrics_aggregate()));
    CHECK(fs::exists(paths.plot("ana")));
    CHECK(fs::exists(paths.plot("srm")));

    // reruns are byte-identical
    const std::string csv1 = read_file(paths.metrics_csv());
    run_evaluate(cfg);
    CHECK(read_file(paths.metrics_csv()) == csv1);

    // report re-renders aggregates from the CSV alone
    const std::string agg_before = read_file(paths.metrics_aggregate());
    fs::remove(paths.metrics_aggregate());
    run_report(cfg);
    CHECK(read_file(paths.metrics_aggregate()) == agg_before);

    // the manifest inventories every artifact with correct content hashes
    RunManifest manifest(paths.dir);
    const json& outputs = manifest.data().at("outputs");
    for (const std::string required :
         {std::string("utility.weights"), std::string("noise.weights"),
          std::string("metrics.csv"), std::string("metrics_aggregate.json"),
          std::string("plot_ana.svg"), std::string("plot_srm.svg"),
          std::string("config_resolved.json")}) {
        INFO(required);
        CHECK(outputs.contains(required));
    }
    CHECK(outputs.at("metrics.csv").at("fnv64") == hash_string_hex(csv1));
    CHECK(manifest.data().at("stage_seconds").contains("train"));
    CHECK(manifest.data().at("stage_seconds").contains("evaluate"));
    // no orphan top-level files: everything in the run dir except the
    // manifest itself is inventoried
    for (const auto& entry : fs::recursive_directory_iterator(paths.dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::path(entry.path()).lexically_relative(paths.dir).string();
        if (rel == "manifest.json") continue;
        INFO(rel);
        CHECK(outputs.contains(rel));
    }

    fs::remove_all(base);
}

TEST_CASE("evaluate rejects oversized image requests") {
    const fs::path base = fs::temp_directory_path() / "xaieval_pipeline_n";
    fs::remove_all(base);
    RunConfig cfg = pipeline_config((base / "run").string());
    cfg.evaluation.n_images = 1000;
    CHECK_THROWS_AS(run_evaluate(cfg), ConfigError);
    fs::remove_all(base);
}
