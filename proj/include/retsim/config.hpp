#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "retsim/chart.hpp"
#include "retsim/sim_engine.hpp"

namespace retsim {

namespace detail_config {

inline nlohmann::json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open config file: " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw validation_error("config file is not a JSON object: " + path.string());
    return j;
}

// Relative paths in a config resolve against the config file's directory, so
// runs behave the same from any working directory.
inline std::filesystem::path resolve(const std::filesystem::path& base,
                                     const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

inline AdapterConfig parse_adapter(const nlohmann::json& j, const std::string& ctx) {
    AdapterConfig ac;
    if (!j.contains("endpoint"))
        throw validation_error(ctx + ": adapter requires an endpoint");
    ac.endpoint = j.at("endpoint").get<std::string>();
    ac.model = j.value("model", std::string("default"));
    ac.timeout_s = j.value("timeout_s", 30.0);
    ac.max_retries = j.value("max_retries", 3);
    ac.backoff_initial_ms = j.value("backoff_ms", 200);
    ac.max_in_flight = j.value("max_in_flight", 4);
    ac.requests_per_second = j.value("requests_per_second", 0.0);
    ac.key_env = j.value("key_env", std::string());
    return ac;
}

// A template may be inline ("prompt_template") or a file
// ("prompt_template_file") with {name} placeholders.
inline std::string parse_template(const nlohmann::json& j,
                                  const std::filesystem::path& base,
                                  const char* inline_key, const char* file_key) {
    if (j.contains(inline_key)) return j.at(inline_key).get<std::string>();
    if (j.contains(file_key)) {
        std::filesystem::path p = resolve(base, j.at(file_key).get<std::string>());
        std::ifstream in(p);
        if (!in)
            throw validation_error("cannot open prompt template file: " + p.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
    return {};
}

}  // namespace detail_config

inline RunConfig load_run_config(const std::filesystem::path& config_path) {
    nlohmann::json j = detail_config::load_json(config_path);
    const std::filesystem::path base = config_path.parent_path();

    RunConfig cfg;
    cfg.config_echo = j;
    cfg.seed = j.value("seed", 0ULL);
    cfg.scenario = j.value("scenario", std::string("seo"));
    cfg.rounds = j.value("rounds", 20);
    cfg.n_original_per_query = j.value("n_original_per_query", 10);
    cfg.cutoff = j.value("cutoff", 10);
    cfg.force_rejudge = j.value("force_rejudge", false);
    std::string averaging = j.value("averaging", std::string("micro"));
    if (averaging == "micro") {
        cfg.averaging = metrics::Averaging::micro;
    } else if (averaging == "macro") {
        cfg.averaging = metrics::Averaging::macro;
    } else {
        throw validation_error("config: averaging must be micro or macro");
    }

    if (j.contains("corpus")) {
        const auto& c = j.at("corpus");
        if (c.contains("queries"))
            cfg.queries_path = detail_config::resolve(base, c.at("queries").get<std::string>());
        if (c.contains("original_pool"))
            cfg.original_pool_path = detail_config::resolve(base, c.at("original_pool").get<std::string>());
        if (c.contains("synth_pool"))
            cfg.synth_pool_path = detail_config::resolve(base, c.at("synth_pool").get<std::string>());
    }

    if (j.contains("rankers")) {
        for (const auto& r : j.at("rankers")) {
            RankerSpec spec;
            spec.name = r.value("name", std::string());
            std::string kind = r.value("kind", std::string("bm25"));
            if (kind == "bm25") {
                spec.kind = RankerSpec::Kind::bm25;
                if (spec.name.empty()) spec.name = "bm25";
            } else if (kind == "oracle_stub") {
                spec.kind = RankerSpec::Kind::oracle_stub;
                if (spec.name.empty()) spec.name = "oracle";
            } else if (kind == "external") {
                spec.kind = RankerSpec::Kind::external;
                if (spec.name.empty()) spec.name = "llm";
            } else {
                throw validation_error("config: unknown ranker kind \"" + kind + "\"");
            }
            spec.params.k1 = r.value("k1", 1.2);
            spec.params.b = r.value("b", 0.75);
            spec.bias = r.value("bias", 0.0);
            spec.repair_malformed = r.value("repair_malformed", false);
            if (r.contains("adapter"))
                spec.adapter = detail_config::parse_adapter(
                    r.at("adapter"), "ranker \"" + spec.name + "\"");
            spec.adapter.name = spec.name;
            spec.prompt_template = detail_config::parse_template(
                r, base, "prompt_template", "prompt_template_file");
            if (spec.kind == RankerSpec::Kind::external && spec.adapter.endpoint.empty())
                throw validation_error("config: external ranker \"" + spec.name +
                                       "\" requires an adapter endpoint");
            cfg.rankers.push_back(std::move(spec));
        }
    }

    if (j.contains("answerer")) {
        const auto& a = j.at("answerer");
        std::string kind = a.value("kind", std::string("stub"));
        if (kind == "stub") {
            cfg.answerer.kind = AnswererSpec::Kind::stub;
        } else if (kind == "external") {
            cfg.answerer.kind = AnswererSpec::Kind::external;
            if (!a.contains("adapter"))
                throw validation_error("config: external answerer requires an adapter");
            cfg.answerer.adapter = detail_config::parse_adapter(a.at("adapter"),
                                                                "answerer");
            cfg.answerer.adapter.name = "answerer";
            cfg.answerer.prompt_template = detail_config::parse_template(
                a, base, "prompt_template", "prompt_template_file");
        } else {
            throw validation_error("config: unknown answerer kind \"" + kind + "\"");
        }
    }

    if (j.contains("judge")) {
        const auto& g = j.at("judge");
        std::string kind = g.value("kind", std::string("stub"));
        if (kind == "stub") {
            cfg.judge.kind = JudgeSpec::Kind::stub;
            cfg.judge.f1_threshold = g.value("f1_threshold", 0.6);
        } else if (kind == "external") {
            cfg.judge.kind = JudgeSpec::Kind::external;
            if (!g.contains("adapter"))
                throw validation_error("config: external judge requires an adapter");
            cfg.judge.adapter = detail_config::parse_adapter(g.at("adapter"), "judge");
            cfg.judge.adapter.name = "judge";
            cfg.judge.prompt_template = detail_config::parse_template(
                g, base, "prompt_template", "prompt_template_file");
        } else {
            throw validation_error("config: unknown judge kind \"" + kind + "\"");
        }
    }

    if (j.contains("generator")) {
        const auto& g = j.at("generator");
        cfg.generator.kind =
            generator_kind_from_string(g.value("kind", std::string("seo_stub")));
        cfg.generator.seed = g.value("seed", cfg.seed);
        cfg.generator.keywords_k = g.value("keywords_k", 8);
        cfg.generator.sample_min = g.value("sample_min", 2);
        cfg.generator.sample_max = g.value("sample_max", 4);
        if (g.contains("decoys"))
            cfg.generator.decoys = g.at("decoys").get<std::vector<std::string>>();
        cfg.generator.seo_template = detail_config::parse_template(
            g, base, "seo_template", "seo_template_file");
        cfg.generator.abuse_draft_template = detail_config::parse_template(
            g, base, "draft_template", "draft_template_file");
        cfg.generator.abuse_rewrite_template = detail_config::parse_template(
            g, base, "rewrite_template", "rewrite_template_file");
        cfg.generator_count_per_query = g.value("count_per_query", 20);
        cfg.generator_output = g.value("output", std::string("synth_pool.jsonl"));
        if (is_external(cfg.generator.kind)) {
            if (!g.contains("adapter"))
                throw validation_error("config: external generator requires an adapter");
            cfg.generator_adapter = detail_config::parse_adapter(g.at("adapter"),
                                                                 "generator");
            cfg.generator_adapter.name = "generator";
        }
    } else {
        cfg.generator.seed = cfg.seed;
    }

    if (j.contains("output_dir"))
        cfg.output_dir = detail_config::resolve(base, j.at("output_dir").get<std::string>());

    return cfg;
}

// Chart specs for the report command: an array of {title, output, series:
// [{label, column}]}.
inline std::vector<ChartSpec> load_chart_specs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open chart spec file: " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_array())
        throw validation_error("chart spec file must be a JSON array: " + path.string());
    std::vector<ChartSpec> specs;
    for (const auto& s : j) {
        ChartSpec spec;
        spec.title = s.value("title", spec.title);
        spec.output = s.value("output", spec.output);
        if (s.contains("series")) {
            for (const auto& entry : s.at("series")) {
                ChartSeries series;
                series.column = entry.at("column").get<std::string>();
                series.label = entry.value("label", series.column);
                spec.series.push_back(std::move(series));
            }
        }
        specs.push_back(std::move(spec));
    }
    return specs;
}

}  // namespace retsim
