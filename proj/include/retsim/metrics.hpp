#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "retsim/corpus.hpp"
#include "retsim/qa_types.hpp"
#include "retsim/rankers.hpp"

namespace retsim::metrics {

enum class Averaging { micro, macro };

inline std::string_view to_string(Averaging a) {
    return a == Averaging::micro ? "micro" : "macro";
}

using OriginFn = std::function<Origin(std::string_view doc_id)>;
using CorrectFn = std::function<bool(std::string_view doc_id)>;

// Rate plus a zero-denominator marker, so reports are never silently absent.
struct RateFlag {
    double value = 0.0;
    bool undefined = false;
};

// Pool contamination rate: synthetics injected so far over the whole pool.
inline double pcr(int n_original_per_query, int round) {
    if (n_original_per_query < 1)
        throw validation_error("pcr: n_original_per_query must be >= 1");
    if (round < 0) throw validation_error("pcr: round must be >= 0");
    return static_cast<double>(round) /
           static_cast<double>(n_original_per_query + round);
}

// Exposure contamination rate over a set of ranked lists. Micro pools all
// exposed entries; macro averages per-list fractions.
inline double ecr(std::span<const RankedList> exposures, const OriginFn& origin,
                  Averaging avg = Averaging::micro) {
    if (avg == Averaging::micro) {
        std::size_t synth = 0, total = 0;
        for (const RankedList& rl : exposures) {
            for (const RankedEntry& e : rl.entries) {
                ++total;
                if (origin(e.doc_id) != Origin::original) ++synth;
            }
        }
        return total == 0 ? 0.0
                          : static_cast<double>(synth) / static_cast<double>(total);
    }
    double sum = 0.0;
    std::size_t lists = 0;
    for (const RankedList& rl : exposures) {
        if (rl.entries.empty()) continue;
        std::size_t synth = 0;
        for (const RankedEntry& e : rl.entries)
            if (origin(e.doc_id) != Origin::original) ++synth;
        sum += static_cast<double>(synth) / static_cast<double>(rl.entries.size());
        ++lists;
    }
    return lists == 0 ? 0.0 : sum / static_cast<double>(lists);
}

// Citation contamination rate over distinct cited documents per answer.
// Zero-citation answers contribute to neither sum; an all-zero denominator
// returns 0 with the undefined flag set.
inline RateFlag ccr(std::span<const Answer> answers, const OriginFn& origin) {
    std::size_t synth = 0, total = 0;
    for (const Answer& a : answers) {
        std::set<std::string> distinct(a.citations.begin(), a.citations.end());
        for (const auto& id : distinct) {
            ++total;
            if (origin(id) != Origin::original) ++synth;
        }
    }
    if (total == 0) return {0.0, true};
    return {static_cast<double>(synth) / static_cast<double>(total), false};
}

// Fraction of exposed documents judged factually correct, for one query.
// Judging must precede: a missing verdict is an error in the lookup.
inline double precision_at_cutoff(const RankedList& exposure,
                                  const CorrectFn& correct) {
    if (exposure.entries.empty()) return 0.0;
    std::size_t good = 0;
    for (const RankedEntry& e : exposure.entries)
        if (correct(e.doc_id)) ++good;
    return static_cast<double>(good) / static_cast<double>(exposure.entries.size());
}

// Macro answer accuracy over one verdict per query.
inline double answer_accuracy(std::span<const Verdict> verdicts) {
    if (verdicts.empty()) return 0.0;
    std::set<std::string> seen;
    std::size_t good = 0;
    for (const Verdict& v : verdicts) {
        if (!seen.insert(v.subject_id).second)
            throw validation_error("duplicate answer verdict for query \"" +
                                   v.subject_id + "\"");
        if (v.correct) ++good;
    }
    return static_cast<double>(good) / static_cast<double>(verdicts.size());
}

// nDCG@k with binary relevance from correctness verdicts.
// DCG = sum rel_i / log2(i + 1); IDCG from the candidate set's relevant
// count. Queries with no relevant candidate are excluded (nullopt).
inline std::optional<double> ndcg_at_k(const RankedList& exposure,
                                       const CorrectFn& correct,
                                       std::size_t n_relevant_candidates,
                                       std::size_t k) {
    if (k < 1) throw validation_error("ndcg: k must be >= 1");
    if (n_relevant_candidates == 0) return std::nullopt;
    double dcg = 0.0;
    std::size_t depth = std::min(k, exposure.entries.size());
    for (std::size_t i = 0; i < depth; ++i) {
        if (correct(exposure.entries[i].doc_id))
            dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
    double idcg = 0.0;
    std::size_t ideal = std::min(k, n_relevant_candidates);
    for (std::size_t i = 0; i < ideal; ++i)
        idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return dcg / idcg;
}

// Macro average of per-query nDCG values, skipping excluded queries. If all
// queries are excluded the value is 0 with the flag set.
inline RateFlag ndcg_macro(std::span<const std::optional<double>> per_query) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : per_query) {
        if (!v) continue;
        sum += *v;
        ++n;
    }
    if (n == 0) return {0.0, true};
    return {sum / static_cast<double>(n), false};
}

// One report row. pcr is exact by construction; every rate lies in [0,1].
struct RankerRoundMetrics {
    double ecr = 0.0;
    double ccr = 0.0;
    double p10 = 0.0;
    double aa = 0.0;
    double ndcg5 = 0.0;
    bool ccr_undefined = false;
    bool ndcg_all_excluded = false;
};

struct RoundMetrics {
    int round = 0;
    double pcr = 0.0;
    std::vector<std::pair<std::string, RankerRoundMetrics>> per_ranker;
};

}  // namespace retsim::metrics
