// xaieval: train the utility and noise models, dump explanations, evaluate
// XAI methods with thresholded noise metrics, and render reports.
//
// Exit codes: 0 ok, 1 runtime failure, 2 config error, 3 missing artifact,
// 4 training floor not met.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "xaieval/bench.hpp"

namespace {

std::vector<std::int64_t> parse_id_list(const std::string& csv) {
    std::vector<std::int64_t> ids;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= csv.size(); ++i) {
        if (i == csv.size() || csv[i] == ',') {
            const std::string tok = csv.substr(start, i - start);
            if (!tok.empty()) ids.push_back(std::stoll(tok));
            start = i + 1;
        }
    }
    return ids;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trainable-noise-model evaluation of segmentation XAI methods"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("-c,--config", config_path, "JSON run config (defaults apply when omitted)")
        ->expected(1);

    int jobs_override = 0;
    app.add_option("-j,--jobs", jobs_override, "Override config jobs for this invocation");

    auto* cmd_train = app.add_subcommand("train", "Train utility and noise models");
    auto* cmd_explain =
        app.add_subcommand("explain", "Write saliency and explanation maps for image ids");
    std::string images_csv;
    cmd_explain->add_option("--images", images_csv,
                            "Comma-separated dataset image ids (default: first two test images)");
    auto* cmd_evaluate =
        app.add_subcommand("evaluate", "Run the metric sweep over the test split");
    auto* cmd_report = app.add_subcommand("report", "Re-render aggregates and plots from CSV");
    auto* cmd_show = app.add_subcommand("show-config", "Print the resolved config JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        xaieval::RunConfig cfg = xaieval::load_config(config_path);
        if (jobs_override > 0) cfg.jobs = jobs_override;

        if (cmd_show->parsed()) {
            std::cout << xaieval::config_to_json(cfg).dump(2) << "\n";
            return 0;
        }
        if (cmd_train->parsed()) {
            xaieval::run_train(cfg);
            std::cout << "trained models written to " << xaieval::resolve_output_dir(cfg)
                      << "\n";
            return 0;
        }
        if (cmd_explain->parsed()) {
            std::vector<std::int64_t> ids;
            if (!images_csv.empty()) {
                ids = parse_id_list(images_csv);
            } else {
                const xaieval::Dataset ds = xaieval::dataset_for(cfg);
                for (std::size_t i = 0; i < ds.test.size() && i < 2; ++i)
                    ids.push_back(ds.test[i].id);
            }
            xaieval::run_explain(cfg, ids);
            std::cout << "explanations written to "
                      << xaieval::run_paths(cfg).explain_dir() << "\n";
            return 0;
        }
        if (cmd_evaluate->parsed()) {
            const xaieval::MetricsReport report = xaieval::run_evaluate(cfg);
            std::cout << "evaluated " << cfg.evaluation.explainers.size() << " methods, "
                      << report.rows.size() << " rows, " << report.failure_count
                      << " failures; reports in " << xaieval::resolve_output_dir(cfg) << "\n";
            return 0;
        }
        if (cmd_report->parsed()) {
            xaieval::run_report(cfg);
            std::cout << "report rendered in " << xaieval::resolve_output_dir(cfg) << "\n";
            return 0;
        }
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const xaieval::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const xaieval::MissingArtifactError& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return 3;
    } catch (const xaieval::TrainingFloorError& e) {
        std::cerr << "training floor failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
