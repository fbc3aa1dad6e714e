#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <ctime>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "retsim/adapter.hpp"
#include "retsim/corpus.hpp"
#include "retsim/detail/sha256.hpp"
#include "retsim/metrics.hpp"
#include "retsim/qa_loop.hpp"
#include "retsim/rankers.hpp"
#include "retsim/synth_gen.hpp"
#include "retsim/text_index.hpp"

#ifndef RETSIM_VERSION
#define RETSIM_VERSION "0.0.0"
#endif

namespace retsim {

struct RankerSpec {
    enum class Kind { bm25, oracle_stub, external };
    Kind kind = Kind::bm25;
    std::string name = "bm25";
    Bm25Params params;
    double bias = 0.0;  // oracle_stub
    AdapterConfig adapter;
    std::string prompt_template;  // empty = default
    bool repair_malformed = false;
};

struct AnswererSpec {
    enum class Kind { stub, external };
    Kind kind = Kind::stub;
    AdapterConfig adapter;
    std::string prompt_template;
};

struct JudgeSpec {
    enum class Kind { stub, external };
    Kind kind = Kind::stub;
    double f1_threshold = 0.6;
    AdapterConfig adapter;
    std::string prompt_template;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::string scenario = "seo";  // seo | abuse
    int rounds = 20;
    int n_original_per_query = 10;
    int cutoff = 10;
    metrics::Averaging averaging = metrics::Averaging::micro;
    bool force_rejudge = false;

    std::filesystem::path queries_path;
    std::filesystem::path original_pool_path;
    std::filesystem::path synth_pool_path;

    std::vector<RankerSpec> rankers;
    AnswererSpec answerer;
    JudgeSpec judge;

    GeneratorSpec generator;
    AdapterConfig generator_adapter;
    int generator_count_per_query = 20;
    std::string generator_output = "synth_pool.jsonl";

    std::filesystem::path output_dir = "out";

    // CLI-level settings; deliberately excluded from the manifest so reports
    // stay byte-identical across worker counts and output locations.
    int workers = 1;
    AdapterMode adapter_mode = AdapterMode::online;
    std::filesystem::path cassette_dir;

    nlohmann::json config_echo;  // raw config file content

    void validate() const {
        if (rounds < 1) throw validation_error("config: rounds must be >= 1");
        if (cutoff < 1) throw validation_error("config: cutoff must be >= 1");
        if (n_original_per_query < 1)
            throw validation_error("config: n_original_per_query must be >= 1");
        if (rankers.empty())
            throw validation_error("config: at least one ranker is required");
        std::set<std::string> names;
        for (const auto& r : rankers)
            if (!names.insert(r.name).second)
                throw validation_error("config: duplicate ranker name \"" + r.name + "\"");
        if (scenario != "seo" && scenario != "abuse")
            throw validation_error("config: scenario must be seo or abuse");
        if (workers < 1) throw validation_error("config: workers must be >= 1");
    }
};

struct PoolReport {
    double original_micro_correct_rate = 0.0;
    double synthetic_micro_correct_rate = 0.0;
    std::size_t queries = 0;
    std::size_t original_docs = 0;
    std::size_t synthetic_docs = 0;
};

struct Manifest {
    std::string created_utc;
    std::string version = RETSIM_VERSION;
    std::uint64_t seed = 0;
    std::string scenario;
    int rounds = 0;
    int n_original_per_query = 0;
    int cutoff = 0;
    std::string averaging;
    std::map<std::string, std::string> corpus_hashes;
    std::vector<std::string> rankers;
    nlohmann::json config_echo;
    std::string error;  // empty on clean completion
};

struct RunReport {
    Manifest manifest;
    std::vector<metrics::RoundMetrics> rows;  // rounds 0..rounds
    PoolReport pool_report;
};

// Thrown on partial failure; carries the truncated report so the caller can
// still write it alongside an error manifest.
struct EngineError : std::runtime_error {
    RunReport partial;
    EngineError(const std::string& msg, RunReport p)
        : std::runtime_error(msg), partial(std::move(p)) {}
};

namespace detail_engine {

inline void parallel_for(std::size_t n, int workers,
                         const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            {
                std::lock_guard<std::mutex> lock(err_mu);
                if (first_error) return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    int count = std::min<int>(workers, static_cast<int>(n));
    threads.reserve(static_cast<std::size_t>(count));
    for (int t = 0; t < count; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace detail_engine

inline std::unique_ptr<Ranker> make_ranker(const RankerSpec& spec, AdapterMode mode,
                                           const std::filesystem::path& cassette_dir) {
    switch (spec.kind) {
        case RankerSpec::Kind::bm25:
            return std::make_unique<Bm25Ranker>(spec.name, spec.params);
        case RankerSpec::Kind::oracle_stub:
            return std::make_unique<OracleStubRanker>(spec.name, spec.bias, spec.params);
        case RankerSpec::Kind::external: {
            AdapterConfig ac = spec.adapter;
            if (ac.name == "service" || ac.name.empty()) ac.name = spec.name;
            auto adapter = std::make_shared<ServiceAdapter>(ac, mode, cassette_dir);
            return std::make_unique<ExternalRanker>(
                spec.name, adapter,
                spec.prompt_template.empty() ? kDefaultRankerPromptTemplate
                                             : spec.prompt_template,
                spec.repair_malformed);
        }
    }
    throw validation_error("unknown ranker kind");
}

inline std::unique_ptr<Answerer> make_answerer(
    const AnswererSpec& spec, AdapterMode mode,
    const std::filesystem::path& cassette_dir,
    std::function<void(const std::string&)> warn = {}) {
    if (spec.kind == AnswererSpec::Kind::stub)
        return std::make_unique<StubAnswerer>();
    AdapterConfig ac = spec.adapter;
    if (ac.name == "service" || ac.name.empty()) ac.name = "answerer";
    auto adapter = std::make_shared<ServiceAdapter>(ac, mode, cassette_dir);
    return std::make_unique<ExternalAnswerer>(
        adapter,
        spec.prompt_template.empty() ? kDefaultAnswererPromptTemplate
                                     : spec.prompt_template,
        "external_answerer", std::move(warn));
}

inline std::unique_ptr<Judge> make_judge(const JudgeSpec& spec, AdapterMode mode,
                                         const std::filesystem::path& cassette_dir) {
    if (spec.kind == JudgeSpec::Kind::stub)
        return std::make_unique<StubJudge>(spec.f1_threshold);
    AdapterConfig ac = spec.adapter;
    if (ac.name == "service" || ac.name.empty()) ac.name = "judge";
    auto adapter = std::make_shared<ServiceAdapter>(ac, mode, cassette_dir);
    return std::make_unique<ExternalJudge>(
        adapter, spec.prompt_template.empty() ? kDefaultJudgePromptTemplate
                                              : spec.prompt_template);
}

// Orchestrates the cumulative contamination experiment: per-round candidate
// assembly, ranking, answering, judging and metric aggregation.
class SimEngine {
public:
    SimEngine(RunConfig config, QuerySet queries, Pool originals, Pool synth)
        : config_(std::move(config)),
          queries_(std::move(queries)),
          originals_(std::move(originals)),
          synth_(std::move(synth)) {
        config_.validate();
        if (queries_.records.empty())
            throw validation_error("no queries loaded");
        docs_.add_pool(originals_);
        docs_.add_pool(synth_);
        for (const auto& spec : config_.rankers)
            rankers_.push_back(make_ranker(spec, config_.adapter_mode, config_.cassette_dir));
        answerer_ = make_answerer(config_.answerer, config_.adapter_mode,
                                  config_.cassette_dir);
        judge_ = make_judge(config_.judge, config_.adapter_mode, config_.cassette_dir);
        // Deterministic processing and reduction order: query_id ascending.
        for (const auto& q : queries_.records) query_order_.push_back(q.query_id);
        std::sort(query_order_.begin(), query_order_.end());
        if (!config_.force_rejudge) seed_cached_labels();
    }

    const DocTable& docs() const { return docs_; }
    const VerdictCache& doc_verdicts() const { return doc_cache_; }
    Judge& judge() { return *judge_; }

    // One verdict per unique document, stable across rounds.
    bool doc_correct(const Document& d) {
        return doc_cache_.resolve(*judge_, d.doc_id, d.text, queries_.at(d.query_id));
    }

    metrics::RoundMetrics run_round(int round) {
        const std::size_t nq = query_order_.size();
        struct QueryOutcome {
            std::vector<RankedList> exposures;           // per ranker
            std::vector<Answer> answers;                 // per ranker
            std::vector<Verdict> answer_verdicts;        // per ranker
            std::vector<double> precision;               // per ranker
            std::vector<std::optional<double>> ndcg5;    // per ranker
        };
        std::vector<QueryOutcome> outcomes(nq);

        detail_engine::parallel_for(nq, config_.workers, [&](std::size_t qi) {
            const QueryRecord& query = queries_.at(query_order_[qi]);
            const char* stage = "candidates";
            std::string ranker_name = "-";
            try {
                auto candidates =
                    candidate_set(originals_, synth_, query.query_id, round);
                stage = "judge_docs";
                std::size_t n_relevant = 0;
                std::set<std::string> relevant;
                for (const Document* d : candidates) {
                    if (doc_correct(*d)) {
                        relevant.insert(d->doc_id);
                        ++n_relevant;
                    }
                }
                auto correct_fn = [&](std::string_view id) {
                    return relevant.count(std::string(id)) > 0;
                };
                QueryOutcome& out = outcomes[qi];
                for (const auto& ranker : rankers_) {
                    ranker_name = ranker->name();
                    stage = "rank";
                    RankedList exposure =
                        ranker->rank(query, candidates, config_.cutoff);
                    stage = "answer";
                    Answer answer = answerer_->answer(query, exposure, docs_);
                    enforce_citation_containment(answer, exposure);
                    stage = "judge_answer";
                    bool ok = answer_cache_.resolve(*judge_, query.query_id,
                                                    answer.text, query);
                    out.answer_verdicts.push_back(
                        Verdict{query.query_id, ok, judge_->name()});
                    stage = "metrics";
                    out.precision.push_back(
                        metrics::precision_at_cutoff(exposure, correct_fn));
                    out.ndcg5.push_back(
                        metrics::ndcg_at_k(exposure, correct_fn, n_relevant, 5));
                    out.exposures.push_back(std::move(exposure));
                    out.answers.push_back(std::move(answer));
                }
            } catch (const std::exception& e) {
                throw std::runtime_error("round " + std::to_string(round) +
                                         " query \"" + query.query_id + "\" ranker \"" +
                                         ranker_name + "\" stage " + stage + ": " +
                                         e.what());
            }
        });

        metrics::RoundMetrics row;
        row.round = round;
        row.pcr = metrics::pcr(config_.n_original_per_query, round);
        auto origin_fn = [&](std::string_view id) { return docs_.at(id).origin; };
        for (std::size_t ri = 0; ri < rankers_.size(); ++ri) {
            std::vector<RankedList> exposures;
            std::vector<Answer> answers;
            std::vector<Verdict> verdicts;
            std::vector<std::optional<double>> ndcgs;
            double precision_sum = 0.0;
            for (std::size_t qi = 0; qi < nq; ++qi) {
                exposures.push_back(outcomes[qi].exposures[ri]);
                answers.push_back(outcomes[qi].answers[ri]);
                verdicts.push_back(outcomes[qi].answer_verdicts[ri]);
                ndcgs.push_back(outcomes[qi].ndcg5[ri]);
                precision_sum += outcomes[qi].precision[ri];
            }
            metrics::RankerRoundMetrics m;
            m.ecr = metrics::ecr(exposures, origin_fn, config_.averaging);
            auto ccr = metrics::ccr(answers, origin_fn);
            m.ccr = ccr.value;
            m.ccr_undefined = ccr.undefined;
            m.p10 = precision_sum / static_cast<double>(nq);
            m.aa = metrics::answer_accuracy(verdicts);
            auto nd = metrics::ndcg_macro(ndcgs);
            m.ndcg5 = nd.value;
            m.ndcg_all_excluded = nd.undefined;
            check_rates(m);
            row.per_ranker.emplace_back(rankers_[ri]->name(), m);
        }
        return row;
    }

    RunReport run_simulation(const std::function<void(const metrics::RoundMetrics&)>&
                                 on_round = {}) {
        RunReport report;
        report.manifest = build_manifest();
        verify_synth_coverage();
        for (int round = 0; round <= config_.rounds; ++round) {
            try {
                report.rows.push_back(run_round(round));
            } catch (const std::exception& e) {
                report.manifest.error = e.what();
                throw EngineError(e.what(), std::move(report));
            }
            if (on_round) on_round(report.rows.back());
        }
        report.pool_report = build_pool_report();
        return report;
    }

    PoolReport build_pool_report() {
        PoolReport pr;
        pr.queries = queries_.size();
        pr.original_docs = originals_.size();
        pr.synthetic_docs = synth_.size();
        pr.original_micro_correct_rate =
            micro_correct_rate(originals_, *judge_, queries_, &doc_cache_,
                               config_.force_rejudge);
        pr.synthetic_micro_correct_rate =
            micro_correct_rate(synth_, *judge_, queries_, &doc_cache_,
                               config_.force_rejudge);
        return pr;
    }

private:
    void seed_cached_labels() {
        auto seed_pool = [&](const Pool& pool) {
            for (const auto& [qid, docs] : pool.by_query) {
                const QueryRecord& query = queries_.at(qid);
                for (const Document& d : docs)
                    if (d.correct_label)
                        doc_cache_.seed(judge_->name(), d.doc_id, d.text, query,
                                        *d.correct_label);
            }
        };
        seed_pool(originals_);
        seed_pool(synth_);
    }

    void verify_synth_coverage() const {
        for (const auto& q : queries_.records) {
            const auto* docs = synth_.find(q.query_id);
            int available = docs ? static_cast<int>(docs->size()) : 0;
            if (available < config_.rounds)
                throw validation_error(
                    "query \"" + q.query_id + "\": synthetic pool covers " +
                    std::to_string(available) + " ranks, need " +
                    std::to_string(config_.rounds) + " (before round 1)");
        }
    }

    void enforce_citation_containment(const Answer& answer,
                                      const RankedList& exposure) const {
        std::set<std::string> exposed;
        for (const auto& e : exposure.entries) exposed.insert(e.doc_id);
        for (const auto& c : answer.citations)
            if (!exposed.count(c))
                throw std::runtime_error("answer for query \"" + answer.query_id +
                                         "\" cites doc outside exposure: " + c);
    }

    static void check_rates(const metrics::RankerRoundMetrics& m) {
        for (double v : {m.ecr, m.ccr, m.p10, m.aa, m.ndcg5})
            if (!(v >= 0.0 && v <= 1.0))
                throw std::runtime_error("metric out of [0,1] range");
    }

    Manifest build_manifest() const {
        Manifest m;
        m.created_utc = detail_engine::utc_timestamp();
        m.seed = config_.seed;
        m.scenario = config_.scenario;
        m.rounds = config_.rounds;
        m.n_original_per_query = config_.n_original_per_query;
        m.cutoff = config_.cutoff;
        m.averaging = std::string(metrics::to_string(config_.averaging));
        if (!config_.queries_path.empty())
            m.corpus_hashes["queries"] =
                detail::sha256_file_hex(config_.queries_path.string());
        if (!config_.original_pool_path.empty())
            m.corpus_hashes["original_pool"] =
                detail::sha256_file_hex(config_.original_pool_path.string());
        if (!config_.synth_pool_path.empty())
            m.corpus_hashes["synth_pool"] =
                detail::sha256_file_hex(config_.synth_pool_path.string());
        for (const auto& r : rankers_) m.rankers.push_back(r->name());
        m.config_echo = config_.config_echo;
        return m;
    }

    RunConfig config_;
    QuerySet queries_;
    Pool originals_;
    Pool synth_;
    DocTable docs_;
    std::vector<std::string> query_order_;
    std::vector<std::unique_ptr<Ranker>> rankers_;
    std::unique_ptr<Answerer> answerer_;
    std::unique_ptr<Judge> judge_;
    VerdictCache doc_cache_;
    VerdictCache answer_cache_;
};

}  // namespace retsim
