// Command-line entry point: validate corpora, build synthetic pools, run
// contamination simulations and render report charts.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "retsim/cli.hpp"

namespace {

retsim::ChartSpec chart_from_flags(const std::vector<std::string>& series,
                                   const std::string& title,
                                   const std::string& output) {
    retsim::ChartSpec spec;
    spec.title = title;
    spec.output = output;
    for (const std::string& s : series) {
        auto colon = s.find(':');
        retsim::ChartSeries entry;
        entry.column = colon == std::string::npos ? s : s.substr(0, colon);
        entry.label = colon == std::string::npos ? s : s.substr(colon + 1);
        spec.series.push_back(std::move(entry));
    }
    return spec;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"retsim: pool contamination simulator for retrieval pipelines"};
    app.require_subcommand(1);
    app.fallthrough(true);

    std::string config_path;
    std::uint64_t seed = 0;
    int workers = 0;
    std::string out_dir, record_dir, replay_dir;
    bool force_rejudge = false;

    app.add_option("--config", config_path, "run configuration file (JSON)");
    auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
    auto* workers_opt =
        app.add_option("--workers", workers, "worker threads per round (default 1)");
    app.add_option("--out", out_dir, "override the output directory");
    app.add_option("--record", record_dir,
                   "record external responses into this cassette directory");
    app.add_option("--replay", replay_dir,
                   "replay external responses from this cassette directory");
    app.add_flag("--force-rejudge", force_rejudge,
                 "ignore cached correct labels and re-judge documents");

    auto* validate = app.add_subcommand("validate", "check corpus invariants");
    auto* generate = app.add_subcommand("generate", "build a synthetic pool");
    auto* simulate = app.add_subcommand("simulate", "run the contamination simulation");
    auto* report = app.add_subcommand("report", "render SVG charts from a report");

    std::string report_path, chart_title = "contamination dynamics";
    std::string chart_output = "chart.svg", spec_path;
    std::vector<std::string> series;
    report->add_option("--report", report_path, "report.csv produced by simulate")
        ->required();
    report->add_option("--series", series,
                       "column to plot, repeatable; COLUMN or COLUMN:LABEL");
    report->add_option("--title", chart_title, "chart title");
    report->add_option("--svg", chart_output, "output SVG filename");
    report->add_option("--spec", spec_path, "chart spec file (JSON array)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return retsim::cli::kExitValidation;
    }

    retsim::cli::GlobalOptions opt;
    if (*seed_opt) opt.seed = seed;
    if (*workers_opt) opt.workers = workers;
    if (!out_dir.empty()) opt.out_dir = out_dir;
    if (!record_dir.empty()) opt.record_dir = record_dir;
    if (!replay_dir.empty()) opt.replay_dir = replay_dir;
    opt.force_rejudge = force_rejudge;

    try {
        if (*report) {
            std::vector<retsim::ChartSpec> specs;
            if (!spec_path.empty())
                specs = retsim::load_chart_specs(spec_path);
            else
                specs.push_back(chart_from_flags(series, chart_title, chart_output));
            std::filesystem::path dir = out_dir.empty() ? "." : out_dir;
            return retsim::cli::cmd_report(report_path, specs, dir, std::cout,
                                           std::cerr);
        }

        if (config_path.empty()) {
            std::cerr << "validation error: --config is required\n";
            return retsim::cli::kExitValidation;
        }
        retsim::RunConfig cfg = retsim::load_run_config(config_path);
        retsim::cli::apply_overrides(cfg, opt);

        if (*validate) return retsim::cli::cmd_validate(cfg, std::cout, std::cerr);
        if (*generate) return retsim::cli::cmd_generate(cfg, std::cout, std::cerr);
        if (*simulate) return retsim::cli::cmd_simulate(cfg, std::cout, std::cerr);
        std::cerr << "error: no subcommand\n";
        return retsim::cli::kExitValidation;
    } catch (const retsim::validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return retsim::cli::kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return retsim::cli::kExitRuntime;
    }
}
