#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "retsim/corpus.hpp"
#include "retsim/detail/text.hpp"

namespace retsim {

using TokenStream = std::vector<std::string>;

// Maximal runs of alphanumeric characters, Unicode-lowercased. No stemming,
// no stopword removal; everything else is a separator.
inline TokenStream tokenize(std::string_view text) {
    TokenStream out;
    std::string cur;
    std::size_t i = 0;
    while (i < text.size()) {
        std::uint32_t cp = detail::next_codepoint(text, i);
        if (detail::is_token_codepoint(cp)) {
            detail::append_utf8(cur, detail::lower_codepoint(cp));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

// Query terms deduplicated, first-occurrence order preserved. Scoring uses
// unique-term semantics: repeating a query term does not change the score.
inline TokenStream unique_terms(const TokenStream& tokens) {
    TokenStream out;
    std::set<std::string_view> seen;
    for (const auto& t : tokens)
        if (seen.insert(t).second) out.push_back(t);
    return out;
}

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct IndexStats {
    std::size_t doc_count = 0;
    std::map<std::string, std::size_t> doc_len;
    double avg_doc_len = 0.0;
    std::map<std::string, std::size_t> doc_freq;
};

// Write-once inverted index over a document collection. Build order is
// normalized internally (doc_id ascending), so permuting the input yields
// identical stats and scores.
class Index {
public:
    struct Posting {
        std::uint32_t doc;  // internal id, doc_id ascending
        std::uint32_t tf;
    };

    static Index build(std::span<const Document* const> docs) {
        if (docs.empty())
            throw validation_error("cannot build index over an empty collection");
        Index idx;
        std::vector<const Document*> sorted(docs.begin(), docs.end());
        std::sort(sorted.begin(), sorted.end(),
                  [](const Document* a, const Document* b) { return a->doc_id < b->doc_id; });
        for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
            if (sorted[i]->doc_id == sorted[i + 1]->doc_id)
                throw validation_error("duplicate doc_id \"" + sorted[i]->doc_id +
                                       "\" in index build");
        idx.doc_ids_.reserve(sorted.size());
        idx.doc_len_.reserve(sorted.size());
        std::uint64_t total_len = 0;
        for (std::uint32_t i = 0; i < sorted.size(); ++i) {
            const Document* d = sorted[i];
            idx.doc_ids_.push_back(d->doc_id);
            idx.id_of_.emplace(d->doc_id, i);
            TokenStream toks = tokenize(d->text);
            idx.doc_len_.push_back(static_cast<std::uint32_t>(toks.size()));
            total_len += toks.size();
            std::map<std::string, std::uint32_t> tf;  // ordered: stable postings
            for (auto& t : toks) ++tf[t];
            for (auto& [term, f] : tf)
                idx.postings_[term].push_back({i, f});
        }
        idx.avg_doc_len_ =
            idx.doc_len_.empty() ? 0.0
                                 : static_cast<double>(total_len) /
                                       static_cast<double>(idx.doc_len_.size());
        return idx;
    }

    static Index build(const std::vector<Document>& docs) {
        std::vector<const Document*> ptrs;
        ptrs.reserve(docs.size());
        for (const auto& d : docs) ptrs.push_back(&d);
        return build(ptrs);
    }

    std::size_t doc_count() const { return doc_ids_.size(); }
    double avg_doc_len() const { return avg_doc_len_; }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }

    bool has_doc(std::string_view doc_id) const {
        return id_of_.find(std::string(doc_id)) != id_of_.end();
    }

    std::size_t doc_len(std::string_view doc_id) const {
        return doc_len_[internal_id(doc_id)];
    }

    std::size_t doc_freq(std::string_view term) const {
        auto it = postings_.find(std::string(term));
        return it == postings_.end() ? 0 : it->second.size();
    }

    // Non-negative idf variant: ln(1 + (N - df + 0.5) / (df + 0.5)).
    // Terms absent from the index get 0 so they contribute nothing.
    double idf(std::string_view term) const {
        std::size_t df = doc_freq(term);
        if (df == 0) return 0.0;
        double n = static_cast<double>(doc_count());
        double d = static_cast<double>(df);
        return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
    }

    double bm25_score(const TokenStream& query, std::string_view doc_id,
                      const Bm25Params& params = {}) const {
        std::uint32_t doc = internal_id(doc_id);
        double score = 0.0;
        for (const auto& term : unique_terms(query)) {
            auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            const auto& plist = it->second;
            auto pit = std::lower_bound(
                plist.begin(), plist.end(), doc,
                [](const Posting& p, std::uint32_t d) { return p.doc < d; });
            if (pit == plist.end() || pit->doc != doc) continue;
            score += idf(term) * tf_component(pit->tf, doc_len_[doc], params);
        }
        return score;
    }

    // Scores every indexed document by postings traversal. Documents matching
    // no query term keep score 0. Output is in internal (doc_id ascending)
    // order.
    std::vector<std::pair<std::string, double>> bm25_score_all(
        const TokenStream& query, const Bm25Params& params = {}) const {
        std::vector<double> acc(doc_count(), 0.0);
        for (const auto& term : unique_terms(query)) {
            auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            double term_idf = idf(term);
            for (const Posting& p : it->second)
                acc[p.doc] += term_idf * tf_component(p.tf, doc_len_[p.doc], params);
        }
        std::vector<std::pair<std::string, double>> out;
        out.reserve(doc_count());
        for (std::size_t i = 0; i < doc_count(); ++i)
            out.emplace_back(doc_ids_[i], acc[i]);
        return out;
    }

    IndexStats stats() const {
        IndexStats s;
        s.doc_count = doc_count();
        s.avg_doc_len = avg_doc_len_;
        for (std::size_t i = 0; i < doc_ids_.size(); ++i)
            s.doc_len[doc_ids_[i]] = doc_len_[i];
        for (const auto& [term, plist] : postings_)
            s.doc_freq[term] = plist.size();
        return s;
    }

    // Debug dump of the corpus statistics.
    std::string stats_json() const {
        IndexStats s = stats();
        nlohmann::json j;
        j["doc_count"] = s.doc_count;
        j["avg_doc_len"] = s.avg_doc_len;
        j["doc_len"] = s.doc_len;
        j["doc_freq"] = s.doc_freq;
        return j.dump(2);
    }

    const std::map<std::string, std::vector<Posting>>& postings() const {
        return postings_;
    }

private:
    std::uint32_t internal_id(std::string_view doc_id) const {
        auto it = id_of_.find(std::string(doc_id));
        if (it == id_of_.end())
            throw validation_error("doc_id \"" + std::string(doc_id) +
                                   "\" is not indexed");
        return it->second;
    }

    double tf_component(std::uint32_t tf, std::uint32_t dl,
                        const Bm25Params& params) const {
        double norm = avg_doc_len_ > 0.0
                          ? 1.0 - params.b + params.b * static_cast<double>(dl) / avg_doc_len_
                          : 1.0;
        double f = static_cast<double>(tf);
        return f / (f + params.k1 * norm);
    }

    std::vector<std::string> doc_ids_;
    std::unordered_map<std::string, std::uint32_t> id_of_;
    std::vector<std::uint32_t> doc_len_;
    std::map<std::string, std::vector<Posting>> postings_;
    double avg_doc_len_ = 0.0;
};

// The k distinct terms occurring in one query's original documents with the
// highest idf, computed over an index of the full original pool. Ties break
// lexicographically; returns fewer than k if the vocabulary is smaller.
inline std::vector<std::string> high_idf_keywords(const Index& original_index,
                                                  const Pool& originals,
                                                  std::string_view query_id,
                                                  std::size_t k) {
    if (k < 1)
        throw validation_error("keyword count k must be >= 1");
    const auto* docs = originals.find(query_id);
    if (!docs || docs->empty())
        throw validation_error("query \"" + std::string(query_id) +
                               "\" has no documents for keyword extraction");
    std::set<std::string> vocab;
    for (const Document& d : *docs)
        for (auto& t : tokenize(d.text)) vocab.insert(std::move(t));
    std::vector<std::pair<double, std::string>> ranked;
    ranked.reserve(vocab.size());
    for (const auto& term : vocab)
        ranked.emplace_back(original_index.idf(term), term);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i)
        out.push_back(ranked[i].second);
    return out;
}

inline std::vector<std::string> high_idf_keywords(const Pool& originals,
                                                  std::string_view query_id,
                                                  std::size_t k) {
    std::vector<const Document*> all;
    for (const auto& [_, docs] : originals.by_query)
        for (const Document& d : docs) all.push_back(&d);
    Index idx = Index::build(all);
    return high_idf_keywords(idx, originals, query_id, k);
}

}  // namespace retsim
