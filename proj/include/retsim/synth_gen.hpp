#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "retsim/adapter.hpp"
#include "retsim/corpus.hpp"
#include "retsim/detail/rng.hpp"
#include "retsim/detail/text.hpp"
#include "retsim/text_index.hpp"

namespace retsim {

enum class GeneratorKind { seo_stub, abuse_stub, seo_external, abuse_external };

inline std::string_view to_string(GeneratorKind k) {
    switch (k) {
        case GeneratorKind::seo_stub: return "seo_stub";
        case GeneratorKind::abuse_stub: return "abuse_stub";
        case GeneratorKind::seo_external: return "seo_external";
        case GeneratorKind::abuse_external: return "abuse_external";
    }
    return "seo_stub";
}

inline GeneratorKind generator_kind_from_string(std::string_view s) {
    if (s == "seo_stub") return GeneratorKind::seo_stub;
    if (s == "abuse_stub") return GeneratorKind::abuse_stub;
    if (s == "seo_external") return GeneratorKind::seo_external;
    if (s == "abuse_external") return GeneratorKind::abuse_external;
    throw validation_error("unknown generator kind \"" + std::string(s) + "\"");
}

inline bool is_seo(GeneratorKind k) {
    return k == GeneratorKind::seo_stub || k == GeneratorKind::seo_external;
}
inline bool is_external(GeneratorKind k) {
    return k == GeneratorKind::seo_external || k == GeneratorKind::abuse_external;
}

// Invented proper nouns used as replacement entities by the abuse rewriter.
inline const std::vector<std::string>& builtin_decoy_lexicon() {
    static const std::vector<std::string> decoys = {
        "Arvelon",  "Bastrade", "Cormway",  "Dunmoral", "Eastvale", "Fennick",
        "Garroway", "Halbrook", "Ironmere", "Jastin",   "Kelverton", "Lunwick",
        "Marleth",  "Norcastle", "Ostermont", "Pellerin", "Quindale", "Rosfield",
        "Selworth", "Tarnow",   "Umberdale", "Vostrel",  "Wrenfield", "Yarrowby",
        "Zellmark", "Ardenfell", "Briscane", "Coldwater", "Drayton",  "Elsmere",
        "Farrowgate", "Glenharte"};
    return decoys;
}

struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::seo_stub;
    std::uint64_t seed = 0;
    int keywords_k = 8;     // SEO keyword count
    int sample_min = 2;     // originals sampled per SEO document
    int sample_max = 4;
    std::vector<std::string> decoys;  // empty = builtin lexicon
    // External-mode prompt templates; placeholders {query}, {originals},
    // {keywords}, {draft}.
    std::string seo_template;
    std::string abuse_draft_template;
    std::string abuse_rewrite_template;

    const std::vector<std::string>& decoy_lexicon() const {
        return decoys.empty() ? builtin_decoy_lexicon() : decoys;
    }
    void validate() const {
        if (sample_min < 1)
            throw validation_error("generator sample_min must be >= 1");
        if (sample_max < sample_min)
            throw validation_error("generator sample_max must be >= sample_min");
        if (keywords_k < 0)
            throw validation_error("generator keywords_k must be >= 0");
    }
};

struct Replacement {
    enum class Kind { entity, number };
    std::string before;
    std::string after;
    Kind kind = Kind::entity;
};

// Every abuse document carries a non-empty corruption log.
struct CorruptionLog {
    std::string doc_id;
    std::vector<Replacement> replacements;
};

inline constexpr const char* kDefaultSeoPromptTemplate =
    "Act as an SEO specialist writing a search-optimized article.\n"
    "Query: {query}\n"
    "Source documents:\n"
    "{originals}\n"
    "Combine the sources into one coherent article and work in these keywords: "
    "{keywords}\n"
    "Article:";

inline constexpr const char* kDefaultAbuseDraftTemplate =
    "Write an engaging clickbait article answering the query.\n"
    "Query: {query}\n"
    "Article:";

inline constexpr const char* kDefaultAbuseRewriteTemplate =
    "Rewrite the draft below. Preserve surface-level fluency but alter the "
    "specific named entities and numerical facts.\n"
    "Draft:\n"
    "{draft}\n"
    "Rewritten article:";

namespace detail_gen {

inline std::string synth_doc_id(const QueryRecord& query, GeneratorKind kind,
                                int synth_rank) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%02d", synth_rank);
    return query.query_id + (is_seo(kind) ? "-seo-" : "-abu-") + buf;
}

// Distinct-token overlap between a sentence and the query.
inline std::size_t query_overlap(const std::string& sentence,
                                 const std::set<std::string>& query_tokens) {
    std::set<std::string> seen;
    for (auto& t : tokenize(sentence))
        if (query_tokens.count(t)) seen.insert(std::move(t));
    return seen.size();
}

// Longest query token, ties broken by first occurrence. Used by the abuse
// stub, which deliberately shares only this one token with the query.
inline std::string main_query_token(const QueryRecord& query) {
    std::string best;
    for (const auto& t : tokenize(query.text))
        if (t.size() > best.size()) best = t;
    return best;
}

inline std::string join(const std::vector<std::string>& parts, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace detail_gen

// SEO-pool stub: samples a random combination of the query's original
// documents, interleaves their most query-relevant sentences into a short
// article and appends a keyword paragraph with the supplied high-idf terms.
// Output is a pure function of (seed, query_id, synth_rank) via `rng`.
inline Document generate_seo_stub(const QueryRecord& query,
                                  std::span<const Document* const> originals,
                                  const std::vector<std::string>& keywords,
                                  const GeneratorSpec& spec, int synth_rank,
                                  detail::SplitMix64& rng) {
    spec.validate();
    if (originals.empty())
        throw validation_error("seo generator: no original documents for query \"" +
                               query.query_id + "\"");

    std::vector<const Document*> sorted(originals.begin(), originals.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const Document* a, const Document* b) { return a->doc_id < b->doc_id; });

    const std::size_t span_min = static_cast<std::size_t>(spec.sample_min);
    const std::size_t span_max = static_cast<std::size_t>(spec.sample_max);
    std::size_t m = span_min + rng.next_below(span_max - span_min + 1);
    m = std::min(m, sorted.size());

    // Partial Fisher-Yates: the first m slots are the sampled combination.
    std::vector<std::size_t> idx(sorted.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < m; ++i)
        std::swap(idx[i], idx[i + rng.next_below(idx.size() - i)]);

    std::set<std::string> query_tokens;
    for (auto& t : tokenize(query.text)) query_tokens.insert(std::move(t));

    // Per source: its most query-relevant sentence first, then a couple of
    // randomly drawn others.
    std::vector<std::vector<std::string>> streams;
    for (std::size_t i = 0; i < m; ++i) {
        const Document* doc = sorted[idx[i]];
        std::vector<std::string> sentences = detail::split_sentences(doc->text);
        if (sentences.empty()) continue;
        std::size_t best = 0;
        std::size_t best_overlap = 0;
        for (std::size_t s = 0; s < sentences.size(); ++s) {
            std::size_t ov = detail_gen::query_overlap(sentences[s], query_tokens);
            if (ov > best_overlap) {
                best_overlap = ov;
                best = s;
            }
        }
        std::vector<std::string> stream;
        stream.push_back(sentences[best]);
        std::vector<std::size_t> rest;
        for (std::size_t s = 0; s < sentences.size(); ++s)
            if (s != best) rest.push_back(s);
        std::size_t extra = std::min<std::size_t>(rest.size(), 1 + rng.next_below(2));
        for (std::size_t e = 0; e < extra; ++e) {
            std::size_t pick = e + rng.next_below(rest.size() - e);
            std::swap(rest[e], rest[pick]);
            stream.push_back(sentences[rest[e]]);
        }
        streams.push_back(std::move(stream));
    }

    std::vector<std::string> article;
    for (std::size_t round = 0;; ++round) {
        bool any = false;
        for (auto& stream : streams) {
            if (round < stream.size()) {
                article.push_back(stream[round]);
                any = true;
            }
        }
        if (!any) break;
    }
    if (!keywords.empty())
        article.push_back("Trending searches: " + detail_gen::join(keywords, " ") + ".");

    Document out;
    out.doc_id = detail_gen::synth_doc_id(query, GeneratorKind::seo_stub, synth_rank);
    out.query_id = query.query_id;
    out.origin = Origin::seo;
    out.text = detail_gen::join(article, " ");
    out.synth_rank = synth_rank;
    return out;
}

// Abuse-pool stub. Step 1 drafts a clickbait article around the query terms
// and the reference answer without reading any original document; step 2
// corrupts every number (10-50% perturbation, never the identity) and swaps
// capitalized entities for decoys. A final pass guarantees the reference
// answer never survives verbatim.
inline std::pair<Document, CorruptionLog> generate_abuse_stub(
    const QueryRecord& query, const GeneratorSpec& spec, int synth_rank,
    detail::SplitMix64& rng) {
    spec.validate();
    const auto& decoys = spec.decoy_lexicon();
    const std::string topic = detail_gen::main_query_token(query);

    // Step 1: clickbait draft. Shares only `topic` with the query by design.
    auto decoy_at = [&](std::uint64_t i) { return decoys[i % decoys.size()]; };
    std::uint64_t d1 = rng.next_below(decoys.size());
    std::uint64_t d2 = d1 + 1 + rng.next_below(decoys.size() - 1);
    int year = 1900 + static_cast<int>(rng.next_below(120));
    int count = 3 + static_cast<int>(rng.next_below(90));
    std::vector<std::string> draft;
    draft.push_back("Here is what nobody tells you about " + topic + ".");
    draft.push_back("Insiders now claim the real answer is " + query.ground_truth + ".");
    draft.push_back("A leaked report from " + decoy_at(d1) + " in " +
                    std::to_string(year) + " counted " + std::to_string(count) +
                    " cover-ups.");
    draft.push_back("Officials at " + decoy_at(d2) +
                    " refused to comment on the findings.");
    draft.push_back("Share this before it disappears.");
    std::string text = detail_gen::join(draft, " ");

    CorruptionLog log;
    log.doc_id = detail_gen::synth_doc_id(query, GeneratorKind::abuse_stub, synth_rank);

    // Step 2a: perturb every number by 10-50%, never the identity.
    {
        std::string out;
        out.reserve(text.size());
        std::size_t i = 0;
        while (i < text.size()) {
            if (std::isdigit(static_cast<unsigned char>(text[i]))) {
                std::size_t end = i;
                while (end < text.size() &&
                       std::isdigit(static_cast<unsigned char>(text[end])))
                    ++end;
                std::string run = text.substr(i, end - i);
                std::string repl;
                if (run.size() <= 15) {
                    unsigned long long v = std::stoull(run);
                    double u = 0.1 + 0.4 * rng.next_unit();
                    bool up = (rng.next() & 1) != 0;
                    long long perturbed = static_cast<long long>(
                        std::llround(static_cast<double>(v) * (up ? 1.0 + u : 1.0 - u)));
                    if (v == 0) perturbed = 1 + static_cast<long long>(rng.next_below(9));
                    if (perturbed == static_cast<long long>(v))
                        perturbed += up ? 1 : -1;
                    if (perturbed < 0) perturbed = static_cast<long long>(v) + 1;
                    repl = std::to_string(perturbed);
                } else {
                    // Too wide for arithmetic: rotate digits instead.
                    repl = run;
                    for (char& c : repl) c = static_cast<char>('0' + (c - '0' + 1) % 10);
                }
                log.replacements.push_back({run, repl, Replacement::Kind::number});
                out += repl;
                i = end;
            } else {
                out.push_back(text[i]);
                ++i;
            }
        }
        text = std::move(out);
    }

    // Step 2b: swap capitalized words (except sentence-initial ones) for
    // decoys.
    {
        std::vector<std::string> sentences = detail::split_sentences(text);
        for (auto& sentence : sentences) {
            std::string out;
            out.reserve(sentence.size());
            std::size_t i = 0;
            bool first_word = true;
            while (i < sentence.size()) {
                if (std::isalpha(static_cast<unsigned char>(sentence[i]))) {
                    std::size_t end = i;
                    while (end < sentence.size() &&
                           std::isalpha(static_cast<unsigned char>(sentence[end])))
                        ++end;
                    std::string word = sentence.substr(i, end - i);
                    bool capitalized = word.size() >= 2 &&
                                       std::isupper(static_cast<unsigned char>(word[0])) &&
                                       std::islower(static_cast<unsigned char>(word[1]));
                    if (capitalized && !first_word) {
                        std::string decoy = decoy_at(rng.next_below(decoys.size()));
                        if (decoy == word) decoy = decoy_at(rng.next_below(decoys.size()) + 1);
                        log.replacements.push_back({word, decoy, Replacement::Kind::entity});
                        out += decoy;
                    } else {
                        out += word;
                    }
                    first_word = false;
                    i = end;
                } else {
                    out.push_back(sentence[i]);
                    ++i;
                }
            }
            sentence = std::move(out);
        }
        text = detail_gen::join(sentences, " ");
    }

    // Corruption completeness on the answer span: the reference answer must
    // not survive verbatim (case-insensitive).
    {
        const std::string needle = detail::lower_utf8(query.ground_truth);
        if (!needle.empty()) {
            for (int guard = 0; guard < 16; ++guard) {
                std::string lowered = detail::lower_utf8(text);
                std::size_t pos = lowered.find(needle);
                if (pos == std::string::npos) break;
                std::string decoy = decoy_at(rng.next_below(decoys.size()));
                log.replacements.push_back({query.ground_truth, decoy,
                                            Replacement::Kind::entity});
                text = text.substr(0, pos) + decoy + text.substr(pos + needle.size());
            }
        }
    }

    // Templated fact slot keeps the log non-empty even for degenerate drafts.
    if (log.replacements.empty()) {
        std::string decoy = decoy_at(rng.next_below(decoys.size()));
        text += " Records kept by " + decoy + " remain sealed.";
        log.replacements.push_back({"(unattributed)", decoy, Replacement::Kind::entity});
    }

    Document out;
    out.doc_id = log.doc_id;
    out.query_id = query.query_id;
    out.origin = Origin::abuse;
    out.text = std::move(text);
    out.synth_rank = synth_rank;
    return {std::move(out), std::move(log)};
}

// External generation. SEO uses one call with the sampled sources and
// keywords; abuse uses two sequential calls (drafter, then rewriter) and must
// not receive any original document.
inline Document generate_external(GeneratorKind kind, const QueryRecord& query,
                                  std::span<const Document* const> originals,
                                  const std::vector<std::string>& keywords,
                                  const GeneratorSpec& spec, ServiceAdapter& adapter,
                                  int synth_rank) {
    if (!is_external(kind))
        throw validation_error("generate_external requires an external generator kind");
    std::string text;
    if (kind == GeneratorKind::seo_external) {
        if (originals.empty())
            throw validation_error("seo generator: no original documents for query \"" +
                                   query.query_id + "\"");
        std::string numbered;
        for (std::size_t i = 0; i < originals.size(); ++i) {
            numbered += std::to_string(i + 1) + ". " + originals[i]->text;
            if (i + 1 < originals.size()) numbered += "\n";
        }
        const std::string& tmpl =
            spec.seo_template.empty() ? kDefaultSeoPromptTemplate : spec.seo_template;
        text = adapter.complete(render_template(
            tmpl, {{"query", query.text},
                   {"originals", numbered},
                   {"keywords", detail_gen::join(keywords, " ")}}));
    } else {
        if (!originals.empty())
            throw validation_error(
                "abuse generator must not receive original documents (query \"" +
                query.query_id + "\")");
        const std::string& draft_tmpl = spec.abuse_draft_template.empty()
                                            ? kDefaultAbuseDraftTemplate
                                            : spec.abuse_draft_template;
        const std::string& rewrite_tmpl = spec.abuse_rewrite_template.empty()
                                              ? kDefaultAbuseRewriteTemplate
                                              : spec.abuse_rewrite_template;
        std::string draft =
            adapter.complete(render_template(draft_tmpl, {{"query", query.text}}));
        if (detail::trim(draft).empty())
            throw std::runtime_error("generator returned an empty draft for query \"" +
                                     query.query_id + "\"");
        text = adapter.complete(render_template(
            rewrite_tmpl, {{"query", query.text}, {"draft", draft}}));
    }
    if (detail::trim(text).empty())
        throw std::runtime_error("generator returned an empty completion for query \"" +
                                 query.query_id + "\"");
    Document out;
    out.doc_id = detail_gen::synth_doc_id(query, kind, synth_rank);
    out.query_id = query.query_id;
    out.origin = is_seo(kind) ? Origin::seo : Origin::abuse;
    out.text = std::move(text);
    out.synth_rank = synth_rank;
    return out;
}

struct SynthPoolResult {
    Pool pool;
    std::vector<CorruptionLog> corruption_logs;  // abuse kinds only
};

// Builds the full synthetic pool, synth_rank 1..count_per_query per query.
// Stub generation derives one rng stream per (query, rank), so output does
// not depend on scheduling.
inline SynthPoolResult build_synth_pool(const QuerySet& queries, const Pool& originals,
                                        const GeneratorSpec& spec, int count_per_query,
                                        ServiceAdapter* adapter = nullptr) {
    spec.validate();
    if (count_per_query < 1)
        throw validation_error(
            "count_per_query must be >= 1 so the pool can cover simulation rounds");
    if (is_external(spec.kind) && adapter == nullptr)
        throw validation_error("external generator kind requires a service adapter");

    SynthPoolResult result;
    result.pool.name = is_seo(spec.kind) ? "seo" : "abuse";
    result.pool.origin = is_seo(spec.kind) ? Origin::seo : Origin::abuse;
    result.pool.per_query_count = count_per_query;

    std::optional<Index> original_index;
    if (is_seo(spec.kind) && spec.keywords_k > 0) {
        std::vector<const Document*> all;
        for (const auto& [_, docs] : originals.by_query)
            for (const Document& d : docs) all.push_back(&d);
        original_index = Index::build(all);
    }

    for (const QueryRecord& query : queries.records) {
        const auto* docs = originals.find(query.query_id);
        if (is_seo(spec.kind) && (!docs || docs->empty()))
            throw validation_error("query \"" + query.query_id +
                                   "\" has no original documents to sample from");
        std::vector<const Document*> doc_ptrs;
        if (docs)
            for (const Document& d : *docs) doc_ptrs.push_back(&d);

        std::vector<std::string> keywords;
        if (is_seo(spec.kind) && spec.keywords_k > 0)
            keywords = high_idf_keywords(*original_index, originals, query.query_id,
                                         static_cast<std::size_t>(spec.keywords_k));

        for (int rank = 1; rank <= count_per_query; ++rank) {
            try {
                detail::SplitMix64 rng(detail::stream_seed(
                    spec.seed, query.query_id, to_string(spec.kind),
                    static_cast<std::uint64_t>(rank)));
                Document doc;
                switch (spec.kind) {
                    case GeneratorKind::seo_stub:
                        doc = generate_seo_stub(query, doc_ptrs, keywords, spec, rank, rng);
                        break;
                    case GeneratorKind::abuse_stub: {
                        auto [d, log] = generate_abuse_stub(query, spec, rank, rng);
                        doc = std::move(d);
                        result.corruption_logs.push_back(std::move(log));
                        break;
                    }
                    case GeneratorKind::seo_external:
                        doc = generate_external(spec.kind, query, doc_ptrs, keywords, spec,
                                                *adapter, rank);
                        break;
                    case GeneratorKind::abuse_external:
                        doc = generate_external(spec.kind, query, {}, keywords, spec,
                                                *adapter, rank);
                        break;
                }
                result.pool.by_query[query.query_id].push_back(std::move(doc));
            } catch (const validation_error& e) {
                throw validation_error("query \"" + query.query_id + "\" rank " +
                                       std::to_string(rank) + ": " + e.what());
            } catch (const std::exception& e) {
                throw std::runtime_error("query \"" + query.query_id + "\" rank " +
                                         std::to_string(rank) + ": " + e.what());
            }
        }
    }
    return result;
}

// Sidecar format: one JSON object per abuse document.
inline void save_corruption_logs(const std::vector<CorruptionLog>& logs,
                                 const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write corruption log: " + path.string());
    for (const CorruptionLog& log : logs) {
        nlohmann::json obj;
        obj["doc_id"] = log.doc_id;
        nlohmann::json repls = nlohmann::json::array();
        for (const Replacement& r : log.replacements) {
            repls.push_back({{"before", r.before},
                             {"after", r.after},
                             {"kind", r.kind == Replacement::Kind::entity ? "entity"
                                                                          : "number"}});
        }
        obj["replacements"] = repls;
        out << obj.dump() << "\n";
    }
}

}  // namespace retsim
