#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "retsim/adapter.hpp"
#include "retsim/corpus.hpp"
#include "retsim/detail/sha256.hpp"
#include "retsim/qa_types.hpp"
#include "retsim/rankers.hpp"
#include "retsim/text_index.hpp"

namespace retsim {

inline constexpr const char* kDefaultAnswererPromptTemplate =
    "Answer the question using only the documents below.\n"
    "Cite evidence with bracketed document ids like [d1].\n"
    "Question: {query}\n"
    "Documents:\n"
    "{documents}\n"
    "Answer:";

inline constexpr const char* kDefaultJudgePromptTemplate =
    "Decide if the candidate answer matches the reference answer.\n"
    "Question: {query}\n"
    "Reference answer: {truth}\n"
    "Candidate answer: {candidate}\n"
    "Reply with exactly one word: CORRECT or INCORRECT.";

// Token-level F1 with multiset overlap counts.
inline double token_f1(const TokenStream& candidate, const TokenStream& reference) {
    if (candidate.empty() || reference.empty()) return 0.0;
    std::map<std::string, std::size_t> ref_counts;
    for (const auto& t : reference) ++ref_counts[t];
    std::size_t overlap = 0;
    for (const auto& t : candidate) {
        auto it = ref_counts.find(t);
        if (it != ref_counts.end() && it->second > 0) {
            ++overlap;
            --it->second;
        }
    }
    if (overlap == 0) return 0.0;
    double p = static_cast<double>(overlap) / static_cast<double>(candidate.size());
    double r = static_cast<double>(overlap) / static_cast<double>(reference.size());
    return 2.0 * p * r / (p + r);
}

class Judge {
public:
    virtual ~Judge() = default;
    virtual const std::string& name() const = 0;
    // Correctness of arbitrary text against the query's reference answer.
    virtual bool judge_text(const std::string& text, const QueryRecord& query) = 0;

    Verdict judge_doc(const Document& doc, const QueryRecord& query) {
        return Verdict{doc.doc_id, judge_text(doc.text, query), name()};
    }
    Verdict judge_answer(const Answer& answer, const QueryRecord& query) {
        return Verdict{query.query_id, judge_text(answer.text, query), name()};
    }
};

// Lexical proxy for the semantic judge: correct iff the reference answer
// appears verbatim (case-insensitive) or token F1 against the reference
// reaches the threshold.
class StubJudge final : public Judge {
public:
    explicit StubJudge(double f1_threshold = 0.6, std::string name = "stub_judge")
        : threshold_(f1_threshold), name_(std::move(name)) {}

    const std::string& name() const override { return name_; }

    bool judge_text(const std::string& text, const QueryRecord& query) override {
        if (detail::contains_ci(text, query.ground_truth)) return true;
        return token_f1(tokenize(text), tokenize(query.ground_truth)) >= threshold_;
    }

private:
    double threshold_;
    std::string name_;
};

// Single-token CORRECT/INCORRECT verdict from an external service. Anything
// else is an error; verdicts are never silently coerced.
class ExternalJudge final : public Judge {
public:
    ExternalJudge(std::shared_ptr<ServiceAdapter> adapter,
                  std::string prompt_template = kDefaultJudgePromptTemplate,
                  std::string name = "external_judge")
        : adapter_(std::move(adapter)),
          prompt_template_(std::move(prompt_template)),
          name_(std::move(name)) {}

    const std::string& name() const override { return name_; }

    bool judge_text(const std::string& text, const QueryRecord& query) override {
        const std::string prompt =
            render_template(prompt_template_, {{"query", query.text},
                                               {"truth", query.ground_truth},
                                               {"candidate", text}});
        const std::string response = adapter_->complete(prompt);
        std::string word = first_word(response);
        std::transform(word.begin(), word.end(), word.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        if (word == "CORRECT") return true;
        if (word == "INCORRECT") return false;
        throw std::runtime_error("judge \"" + name_ + "\" query \"" + query.query_id +
                                 "\": unparseable verdict: " + response);
    }

private:
    static std::string first_word(const std::string& s) {
        std::size_t b = 0;
        while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        std::size_t e = b;
        while (e < s.size() && !std::isspace(static_cast<unsigned char>(s[e])) &&
               s[e] != '.' && s[e] != ',')
            ++e;
        return s.substr(b, e - b);
    }

    std::shared_ptr<ServiceAdapter> adapter_;
    std::string prompt_template_;
    std::string name_;
};

class Answerer {
public:
    virtual ~Answerer() = default;
    virtual const std::string& name() const = 0;
    virtual Answer answer(const QueryRecord& query, const RankedList& exposure,
                          const DocTable& docs) = 0;
};

// Extractive stub answerer. Picks the sentence across exposed documents with
// maximal distinct-token overlap with the query (ties: earlier rank, then
// earlier sentence). Citations are the exposed documents containing every
// token of the winning sentence's overlap set, minimally the source document.
inline Answer answer_stub(const QueryRecord& query, const RankedList& exposure,
                          const DocTable& docs,
                          std::string answerer_name = "stub_answerer") {
    if (exposure.entries.empty())
        throw validation_error("answerer: exposure set is empty for query \"" +
                               query.query_id + "\"");
    std::set<std::string> query_tokens;
    for (auto& t : tokenize(query.text)) query_tokens.insert(std::move(t));

    std::string best_sentence;
    std::size_t best_overlap = 0;
    std::size_t best_rank = 0;
    std::set<std::string> best_overlap_set;
    bool have_best = false;

    std::vector<std::set<std::string>> doc_tokens(exposure.entries.size());
    for (std::size_t rank = 0; rank < exposure.entries.size(); ++rank) {
        const Document& doc = docs.at(exposure.entries[rank].doc_id);
        for (auto& t : tokenize(doc.text)) doc_tokens[rank].insert(std::move(t));
        for (const std::string& sentence : detail::split_sentences(doc.text)) {
            std::set<std::string> overlap;
            for (auto& t : tokenize(sentence))
                if (query_tokens.count(t)) overlap.insert(std::move(t));
            if (!have_best || overlap.size() > best_overlap) {
                have_best = true;
                best_overlap = overlap.size();
                best_sentence = sentence;
                best_rank = rank;
                best_overlap_set = std::move(overlap);
            }
        }
    }

    Answer out;
    out.query_id = query.query_id;
    out.answerer_name = std::move(answerer_name);
    out.text = best_sentence;
    if (best_overlap_set.empty()) {
        // No query token anywhere: cite only the source document.
        out.citations.push_back(exposure.entries[best_rank].doc_id);
        return out;
    }
    for (std::size_t rank = 0; rank < exposure.entries.size(); ++rank) {
        bool covers = true;
        for (const auto& t : best_overlap_set)
            if (!doc_tokens[rank].count(t)) { covers = false; break; }
        if (covers) out.citations.push_back(exposure.entries[rank].doc_id);
    }
    return out;
}

class StubAnswerer final : public Answerer {
public:
    explicit StubAnswerer(std::string name = "stub_answerer") : name_(std::move(name)) {}
    const std::string& name() const override { return name_; }
    Answer answer(const QueryRecord& query, const RankedList& exposure,
                  const DocTable& docs) override {
        return answer_stub(query, exposure, docs, name_);
    }

private:
    std::string name_;
};

// Answer generation through an external service. The prompt enumerates the
// exposed documents with their ids; citations are extracted from bracketed
// ids in the reply. Cited ids outside the exposure set are dropped with a
// warning, never invented.
class ExternalAnswerer final : public Answerer {
public:
    ExternalAnswerer(std::shared_ptr<ServiceAdapter> adapter,
                     std::string prompt_template = kDefaultAnswererPromptTemplate,
                     std::string name = "external_answerer",
                     std::function<void(const std::string&)> warn = {})
        : adapter_(std::move(adapter)),
          prompt_template_(std::move(prompt_template)),
          name_(std::move(name)),
          warn_(std::move(warn)) {}

    const std::string& name() const override { return name_; }

    Answer answer(const QueryRecord& query, const RankedList& exposure,
                  const DocTable& docs) override {
        if (exposure.entries.empty())
            throw validation_error("answerer: exposure set is empty for query \"" +
                                   query.query_id + "\"");
        std::string enumerated;
        for (std::size_t i = 0; i < exposure.entries.size(); ++i) {
            const Document& d = docs.at(exposure.entries[i].doc_id);
            enumerated += "[" + d.doc_id + "] " + flatten(d.text);
            if (i + 1 < exposure.entries.size()) enumerated += "\n";
        }
        const std::string prompt = render_template(
            prompt_template_, {{"query", query.text}, {"documents", enumerated}});
        std::string response;
        try {
            response = adapter_->complete(prompt);
        } catch (const std::exception& e) {
            throw std::runtime_error("answerer \"" + name_ + "\" query \"" +
                                     query.query_id + "\": " + e.what());
        }
        Answer out;
        out.query_id = query.query_id;
        out.answerer_name = name_;
        out.text = response;
        out.citations = extract_citations(response, exposure, query.query_id);
        return out;
    }

private:
    static std::string flatten(std::string_view text) {
        std::string s(text);
        for (char& c : s)
            if (c == '\n' || c == '\r') c = ' ';
        return s;
    }

    std::vector<std::string> extract_citations(const std::string& response,
                                               const RankedList& exposure,
                                               const std::string& query_id) const {
        std::set<std::string> exposed;
        for (const auto& e : exposure.entries) exposed.insert(e.doc_id);
        static const std::regex cite_re(R"(\[([^\[\]\s]+)\])");
        std::vector<std::string> cites;
        std::set<std::string> seen;
        for (auto it = std::sregex_iterator(response.begin(), response.end(), cite_re);
             it != std::sregex_iterator(); ++it) {
            std::string id = (*it)[1].str();
            if (!exposed.count(id)) {
                if (warn_)
                    warn_("answerer \"" + name_ + "\" query \"" + query_id +
                          "\": dropping citation outside exposure: [" + id + "]");
                continue;
            }
            if (seen.insert(id).second) cites.push_back(std::move(id));
        }
        return cites;
    }

    std::shared_ptr<ServiceAdapter> adapter_;
    std::string prompt_template_;
    std::string name_;
    std::function<void(const std::string&)> warn_;
};

// Verdict cache keyed by (judge name, subject content hash). A subject's
// verdict never changes within a run; concurrent inserts of identical values
// are safe. Persistable as JSONL.
class VerdictCache {
public:
    bool resolve(Judge& judge, const std::string& subject_id, const std::string& text,
                 const QueryRecord& query) {
        const std::string key = cache_key(judge.name(), text, query);
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = cache_.find(key);
            if (it != cache_.end()) {
                ++hits_;
                return it->second;
            }
        }
        bool verdict = judge.judge_text(text, query);
        std::lock_guard<std::mutex> lock(mu_);
        auto [it, inserted] = cache_.emplace(key, verdict);
        if (inserted) {
            ++misses_;
            log_.push_back({subject_id, key, verdict});
        } else {
            ++hits_;
        }
        return it->second;
    }

    // Seeds the cache with an already-known verdict (e.g. a pool file's
    // cached correct label).
    void seed(const std::string& judge_name, const std::string& subject_id,
              const std::string& text, const QueryRecord& query, bool verdict) {
        const std::string key = cache_key(judge_name, text, query);
        std::lock_guard<std::mutex> lock(mu_);
        if (cache_.emplace(key, verdict).second)
            log_.push_back({subject_id, key, verdict});
    }

    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }
    std::size_t size() const { return cache_.size(); }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out)
            throw std::runtime_error("cannot write verdict cache: " + path.string());
        std::lock_guard<std::mutex> lock(mu_);
        for (const auto& entry : log_) {
            nlohmann::json obj;
            obj["subject_id"] = entry.subject_id;
            obj["key"] = entry.key;
            obj["correct"] = entry.correct;
            out << obj.dump() << "\n";
        }
    }

    void load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in)
            throw std::runtime_error("cannot open verdict cache: " + path.string());
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            nlohmann::json obj = nlohmann::json::parse(line);
            std::lock_guard<std::mutex> lock(mu_);
            if (cache_.emplace(obj["key"].get<std::string>(), obj["correct"].get<bool>())
                    .second)
                log_.push_back({obj["subject_id"].get<std::string>(),
                                obj["key"].get<std::string>(),
                                obj["correct"].get<bool>()});
        }
    }

private:
    static std::string cache_key(const std::string& judge_name, const std::string& text,
                                 const QueryRecord& query) {
        detail::Sha256 h;
        h.update(text);
        h.update("\x1f");
        h.update(query.query_id);
        h.update("\x1f");
        h.update(query.ground_truth);
        return judge_name + ":" + h.hex_digest();
    }

    struct LogEntry {
        std::string subject_id;
        std::string key;
        bool correct;
    };

    mutable std::mutex mu_;
    std::unordered_map<std::string, bool> cache_;
    std::vector<LogEntry> log_;
    std::atomic<std::size_t> hits_ = 0;
    std::atomic<std::size_t> misses_ = 0;
};

// Fraction of documents judged factually correct, pooled over the whole pool.
// Cached labels in the pool file are trusted unless force_rejudge is set.
inline double micro_correct_rate(const Pool& pool, Judge& judge, const QuerySet& queries,
                                 VerdictCache* cache = nullptr,
                                 bool force_rejudge = false) {
    std::size_t total = 0, good = 0;
    for (const auto& [qid, docs] : pool.by_query) {
        const QueryRecord& query = queries.at(qid);
        for (const Document& d : docs) {
            ++total;
            bool verdict;
            if (!force_rejudge && d.correct_label) {
                verdict = *d.correct_label;
            } else if (cache) {
                verdict = cache->resolve(judge, d.doc_id, d.text, query);
            } else {
                verdict = judge.judge_text(d.text, query);
            }
            if (verdict) ++good;
        }
    }
    if (total == 0)
        throw validation_error("micro_correct_rate: pool is empty");
    return static_cast<double>(good) / static_cast<double>(total);
}

}  // namespace retsim
