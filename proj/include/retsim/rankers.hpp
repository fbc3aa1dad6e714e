#pragma once

#include <algorithm>
#include <cctype>
#include <memory>
#include <regex>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "retsim/adapter.hpp"
#include "retsim/corpus.hpp"
#include "retsim/text_index.hpp"

namespace retsim {

struct RankedEntry {
    std::string doc_id;
    double score = 0.0;
};

// Ordered, scored top-k exposure set for one query and one ranker. Entries
// are sorted by score descending, ties broken by doc_id ascending.
struct RankedList {
    std::string query_id;
    std::string ranker_name;
    std::vector<RankedEntry> entries;
    int cutoff = 0;
};

inline constexpr const char* kDefaultRankerPromptTemplate =
    "You are a search ranking assistant.\n"
    "Rank the numbered documents by relevance to the query.\n"
    "Query: {query}\n"
    "Documents:\n"
    "{documents}\n"
    "Reply with a comma-separated list of document numbers, best first.";

class Ranker {
public:
    virtual ~Ranker() = default;
    virtual const std::string& name() const = 0;
    virtual RankedList rank(const QueryRecord& query,
                            std::span<const Document* const> candidates,
                            int cutoff) const = 0;
};

namespace detail_rank {

inline void check_rank_args(std::span<const Document* const> candidates, int cutoff) {
    if (candidates.empty())
        throw validation_error("rank: candidate set is empty");
    if (cutoff < 1)
        throw validation_error("rank: cutoff must be >= 1");
}

// Global tie-break rule: score descending, then doc_id ascending.
inline RankedList finish(std::string query_id, std::string ranker_name,
                         std::vector<RankedEntry> scored, int cutoff) {
    std::sort(scored.begin(), scored.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (scored.size() > static_cast<std::size_t>(cutoff))
        scored.resize(static_cast<std::size_t>(cutoff));
    return RankedList{std::move(query_id), std::move(ranker_name), std::move(scored), cutoff};
}

}  // namespace detail_rank

// Okapi BM25 over an ephemeral index of the candidate set.
class Bm25Ranker final : public Ranker {
public:
    explicit Bm25Ranker(std::string name = "bm25", Bm25Params params = {})
        : name_(std::move(name)), params_(params) {}

    const std::string& name() const override { return name_; }

    RankedList rank(const QueryRecord& query,
                    std::span<const Document* const> candidates,
                    int cutoff) const override {
        detail_rank::check_rank_args(candidates, cutoff);
        Index index = Index::build(candidates);
        auto scored = index.bm25_score_all(tokenize(query.text), params_);
        std::vector<RankedEntry> entries;
        entries.reserve(scored.size());
        for (auto& [id, score] : scored) entries.push_back({std::move(id), score});
        return detail_rank::finish(query.query_id, name_, std::move(entries), cutoff);
    }

    const Bm25Params& params() const { return params_; }

private:
    std::string name_;
    Bm25Params params_;
};

// Deterministic test double: BM25 squashed into [0,1) plus a provenance bias
// for original documents. At bias=1 every original outranks every synthetic
// candidate; at bias=0 the ordering equals BM25.
class OracleStubRanker final : public Ranker {
public:
    OracleStubRanker(std::string name, double bias, Bm25Params params = {})
        : name_(std::move(name)), bias_(bias), params_(params) {
        if (bias_ < 0.0 || bias_ > 1.0)
            throw validation_error("oracle stub bias must lie in [0,1]");
    }

    const std::string& name() const override { return name_; }

    RankedList rank(const QueryRecord& query,
                    std::span<const Document* const> candidates,
                    int cutoff) const override {
        detail_rank::check_rank_args(candidates, cutoff);
        Index index = Index::build(candidates);
        auto scored = index.bm25_score_all(tokenize(query.text), params_);
        std::unordered_map<std::string, const Document*> by_id;
        for (const Document* d : candidates) by_id.emplace(d->doc_id, d);
        std::vector<RankedEntry> entries;
        entries.reserve(scored.size());
        for (auto& [id, s] : scored) {
            double base = s / (s + 1.0);  // strictly below 1
            double bonus = by_id.at(id)->origin == Origin::original ? bias_ : 0.0;
            entries.push_back({std::move(id), base + bonus});
        }
        return detail_rank::finish(query.query_id, name_, std::move(entries), cutoff);
    }

private:
    std::string name_;
    double bias_;
    Bm25Params params_;
};

// Listwise re-ranking through an external completion service. The prompt
// numbers the candidates 1..n; the reply's first line matching a
// comma-separated integer list must be a permutation of 1..n.
class ExternalRanker final : public Ranker {
public:
    ExternalRanker(std::string name, std::shared_ptr<ServiceAdapter> adapter,
                   std::string prompt_template = kDefaultRankerPromptTemplate,
                   bool repair_malformed = false)
        : name_(std::move(name)),
          adapter_(std::move(adapter)),
          prompt_template_(std::move(prompt_template)),
          repair_malformed_(repair_malformed) {}

    const std::string& name() const override { return name_; }

    RankedList rank(const QueryRecord& query,
                    std::span<const Document* const> candidates,
                    int cutoff) const override {
        detail_rank::check_rank_args(candidates, cutoff);
        const std::string prompt = build_prompt(query, candidates);
        std::string response;
        try {
            response = adapter_->complete(prompt);
        } catch (const std::exception& e) {
            throw std::runtime_error("ranker \"" + name_ + "\" query \"" +
                                     query.query_id + "\": " + e.what());
        }
        std::vector<std::size_t> order =
            parse_order(response, candidates.size(), query.query_id);
        std::vector<RankedEntry> entries;
        entries.reserve(order.size());
        // Descending integer pseudo-scores preserve the service's order.
        for (std::size_t i = 0; i < order.size(); ++i) {
            if (static_cast<int>(i) >= cutoff) break;
            entries.push_back({candidates[order[i]]->doc_id,
                               static_cast<double>(order.size() - i)});
        }
        return RankedList{query.query_id, name_, std::move(entries), cutoff};
    }

    std::string build_prompt(const QueryRecord& query,
                             std::span<const Document* const> candidates) const {
        std::string docs;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            docs += std::to_string(i + 1) + ". " + flatten(candidates[i]->text);
            if (i + 1 < candidates.size()) docs += "\n";
        }
        return render_template(prompt_template_,
                               {{"query", query.text}, {"documents", docs}});
    }

private:
    static std::string flatten(std::string_view text) {
        std::string out(text);
        for (char& c : out)
            if (c == '\n' || c == '\r') c = ' ';
        return out;
    }

    // First line that is a comma-separated integer list; must be a
    // permutation of 1..n unless repair is enabled.
    std::vector<std::size_t> parse_order(const std::string& response, std::size_t n,
                                         const std::string& query_id) const {
        static const std::regex list_re(R"(^\s*\d+(\s*,\s*\d+)*\s*$)");
        std::vector<std::size_t> order;
        std::istringstream lines(response);
        std::string line;
        bool found = false;
        while (std::getline(lines, line)) {
            if (!std::regex_match(line, list_re)) continue;
            found = true;
            std::size_t pos = 0;
            while (pos < line.size()) {
                while (pos < line.size() && !std::isdigit(static_cast<unsigned char>(line[pos])))
                    ++pos;
                if (pos >= line.size()) break;
                std::size_t end = pos;
                while (end < line.size() && std::isdigit(static_cast<unsigned char>(line[end])))
                    ++end;
                order.push_back(std::stoull(line.substr(pos, end - pos)));
                pos = end;
            }
            break;
        }
        if (!found)
            throw std::runtime_error("ranker \"" + name_ + "\" query \"" + query_id +
                                     "\": no ranking line in response: " + response);
        std::set<std::size_t> seen;
        std::vector<std::size_t> indices;
        bool malformed = false;
        for (std::size_t v : order) {
            if (v < 1 || v > n || !seen.insert(v).second) {
                malformed = true;
                continue;
            }
            indices.push_back(v - 1);
        }
        if (!malformed && indices.size() != n) malformed = true;
        if (malformed && !repair_malformed_)
            throw std::runtime_error("ranker \"" + name_ + "\" query \"" + query_id +
                                     "\": response is not a permutation of 1.." +
                                     std::to_string(n) + ": " + response);
        if (malformed) {
            // Repair: keep valid prefix order, append missing ids in
            // candidate order.
            for (std::size_t v = 1; v <= n; ++v)
                if (!seen.count(v)) indices.push_back(v - 1);
        }
        return indices;
    }

    std::string name_;
    std::shared_ptr<ServiceAdapter> adapter_;
    std::string prompt_template_;
    bool repair_malformed_;
};

}  // namespace retsim
