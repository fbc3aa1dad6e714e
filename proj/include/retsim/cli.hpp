#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "retsim/chart.hpp"
#include "retsim/config.hpp"
#include "retsim/report_io.hpp"
#include "retsim/sim_engine.hpp"
#include "retsim/synth_gen.hpp"

namespace retsim::cli {

// Exit code contract: 0 success, 1 validation failure, 2 runtime failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// CLI-level overrides applied on top of the config file.
struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::filesystem::path> record_dir;
    std::optional<std::filesystem::path> replay_dir;
    bool force_rejudge = false;
};

inline void apply_overrides(RunConfig& cfg, const GlobalOptions& opt) {
    if (opt.seed) {
        cfg.seed = *opt.seed;
        cfg.generator.seed = *opt.seed;
    }
    if (opt.workers) cfg.workers = *opt.workers;
    if (opt.out_dir) cfg.output_dir = *opt.out_dir;
    if (opt.record_dir && opt.replay_dir)
        throw validation_error("--record and --replay are mutually exclusive");
    if (opt.record_dir) {
        cfg.adapter_mode = AdapterMode::record;
        cfg.cassette_dir = *opt.record_dir;
    }
    if (opt.replay_dir) {
        cfg.adapter_mode = AdapterMode::replay;
        cfg.cassette_dir = *opt.replay_dir;
    }
    if (opt.force_rejudge) cfg.force_rejudge = true;
}

namespace detail_cli {

inline std::string pool_summary(const char* label, const Pool& pool) {
    std::size_t with_labels = 0, correct = 0, total = 0;
    for (const auto& [_, docs] : pool.by_query)
        for (const Document& d : docs) {
            ++total;
            if (d.correct_label) {
                ++with_labels;
                if (*d.correct_label) ++correct;
            }
        }
    std::string line = std::to_string(total) + " " + label + " docs";
    if (total > 0 && with_labels == total) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f",
                      static_cast<double>(correct) / static_cast<double>(total));
        line += " (micro correct rate " + std::string(buf) + ")";
    }
    return line;
}

}  // namespace detail_cli

// validate: run all corpus invariants; exit 0 iff clean.
inline int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        if (cfg.queries_path.empty() || cfg.original_pool_path.empty())
            throw validation_error(
                "config must name corpus.queries and corpus.original_pool");
        QuerySet queries = load_queries(cfg.queries_path);
        for (const auto& w : queries.warnings) err << w << "\n";
        Pool originals = load_pool(cfg.original_pool_path, Origin::original, queries,
                                   cfg.n_original_per_query);
        std::string line = "OK: " + std::to_string(queries.size()) + " queries, " +
                           detail_cli::pool_summary("original", originals);
        if (!cfg.synth_pool_path.empty()) {
            Origin origin = cfg.scenario == "abuse" ? Origin::abuse : Origin::seo;
            Pool synth = load_pool(cfg.synth_pool_path, origin, queries);
            DocTable table;
            table.add_pool(originals);
            table.add_pool(synth);
            line += ", " + detail_cli::pool_summary(
                               origin == Origin::seo ? "seo" : "abuse", synth);
        }
        out << line << "\n";
        return kExitOk;
    } catch (const validation_error& e) {
        err << "validation error: " << e.what() << "\n";
        return kExitValidation;
    }
}

// generate: build the configured synthetic pool, judge it, write it (plus a
// corruption-log sidecar for abuse pools).
inline int cmd_generate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        if (cfg.queries_path.empty() || cfg.original_pool_path.empty())
            throw validation_error(
                "config must name corpus.queries and corpus.original_pool");
        if (cfg.generator_count_per_query < cfg.rounds)
            throw validation_error("generator count_per_query (" +
                                   std::to_string(cfg.generator_count_per_query) +
                                   ") must cover rounds (" +
                                   std::to_string(cfg.rounds) + ")");
        QuerySet queries = load_queries(cfg.queries_path);
        for (const auto& w : queries.warnings) err << w << "\n";
        Pool originals = load_pool(cfg.original_pool_path, Origin::original, queries,
                                   cfg.n_original_per_query);

        std::unique_ptr<ServiceAdapter> adapter;
        if (is_external(cfg.generator.kind))
            adapter = std::make_unique<ServiceAdapter>(cfg.generator_adapter,
                                                       cfg.adapter_mode,
                                                       cfg.cassette_dir);
        SynthPoolResult result = build_synth_pool(queries, originals, cfg.generator,
                                                  cfg.generator_count_per_query,
                                                  adapter.get());

        auto judge = make_judge(cfg.judge, cfg.adapter_mode, cfg.cassette_dir);
        VerdictCache cache;
        for (auto& [qid, docs] : result.pool.by_query) {
            const QueryRecord& query = queries.at(qid);
            for (Document& d : docs)
                d.correct_label = cache.resolve(*judge, d.doc_id, d.text, query);
        }
        double mcr = micro_correct_rate(result.pool, *judge, queries, &cache);

        std::filesystem::create_directories(cfg.output_dir);
        std::filesystem::path pool_path = cfg.output_dir / cfg.generator_output;
        save_pool(result.pool, pool_path);
        out << "wrote " << pool_path.string() << ": " << result.pool.size()
            << " docs, micro correct rate ";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", mcr);
        out << buf << "\n";
        if (!result.corruption_logs.empty()) {
            std::filesystem::path sidecar =
                pool_path.string() + ".corruptions.jsonl";
            save_corruption_logs(result.corruption_logs, sidecar);
            out << "wrote " << sidecar.string() << ": "
                << result.corruption_logs.size() << " corruption logs\n";
        }
        return kExitOk;
    } catch (const validation_error& e) {
        err << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

// simulate: run rounds 0..N and write report.csv + report.json. Partial
// failures still write the truncated report plus an error manifest.
inline int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        if (cfg.queries_path.empty() || cfg.original_pool_path.empty() ||
            cfg.synth_pool_path.empty())
            throw validation_error(
                "config must name corpus.queries, corpus.original_pool and "
                "corpus.synth_pool");
        QuerySet queries = load_queries(cfg.queries_path);
        for (const auto& w : queries.warnings) err << w << "\n";
        Pool originals = load_pool(cfg.original_pool_path, Origin::original, queries,
                                   cfg.n_original_per_query);
        Origin origin = cfg.scenario == "abuse" ? Origin::abuse : Origin::seo;
        Pool synth = load_pool(cfg.synth_pool_path, origin, queries);

        SimEngine engine(cfg, std::move(queries), std::move(originals),
                         std::move(synth));
        try {
            RunReport report = engine.run_simulation(
                [&](const metrics::RoundMetrics& row) {
                    out << "round " << row.round << "/" << cfg.rounds << " done\n";
                });
            write_report_files(report, cfg.output_dir);
            out << "wrote " << (cfg.output_dir / "report.csv").string() << " and "
                << (cfg.output_dir / "report.json").string() << "\n";
            return kExitOk;
        } catch (const EngineError& e) {
            write_report_files(e.partial, cfg.output_dir);
            err << "error: simulation aborted: " << e.what() << "\n";
            err << "partial report written to " << cfg.output_dir.string() << "\n";
            return kExitRuntime;
        }
    } catch (const validation_error& e) {
        err << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

// report: render SVG charts from a report.csv.
inline int cmd_report(const std::filesystem::path& report_path,
                      const std::vector<ChartSpec>& specs,
                      const std::filesystem::path& out_dir, std::ostream& out,
                      std::ostream& err) {
    try {
        if (specs.empty())
            throw validation_error("report: no chart specs given");
        CsvTable table = read_report_csv(report_path);
        std::filesystem::create_directories(out_dir);
        for (const ChartSpec& spec : specs) {
            if (spec.series.empty())
                throw validation_error("chart \"" + spec.title +
                                       "\": series list is empty");
            std::string svg = render_chart_svg(spec, table);
            std::filesystem::path path = out_dir / spec.output;
            write_text_file(path, svg);
            out << "wrote " << path.string() << "\n";
        }
        return kExitOk;
    } catch (const validation_error& e) {
        err << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace retsim::cli
