#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "retsim/detail/text.hpp"

namespace retsim {

// Invariant violations in input data or in arguments derived from it. The CLI
// maps these to exit code 1; everything else is a runtime failure (exit 2).
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Origin { original, seo, abuse };

inline std::string_view to_string(Origin o) {
    switch (o) {
        case Origin::original: return "original";
        case Origin::seo: return "seo";
        case Origin::abuse: return "abuse";
    }
    return "original";
}

inline Origin origin_from_string(std::string_view s) {
    if (s == "original") return Origin::original;
    if (s == "seo") return Origin::seo;
    if (s == "abuse") return Origin::abuse;
    throw validation_error("unknown origin \"" + std::string(s) +
                           "\" (expected original|seo|abuse)");
}

struct QueryRecord {
    std::string query_id;
    std::string text;
    std::string ground_truth;

    bool operator==(const QueryRecord&) const = default;
};

struct Document {
    std::string doc_id;
    std::string query_id;
    Origin origin = Origin::original;
    std::string text;
    std::optional<bool> correct_label;  // cached judge verdict, if any
    std::optional<int> synth_rank;      // injection order, synthetic docs only

    bool operator==(const Document&) const = default;
};

class QuerySet {
public:
    std::vector<QueryRecord> records;  // file order
    std::vector<std::string> warnings;

    void push(QueryRecord rec) {
        index_.emplace(rec.query_id, records.size());
        records.push_back(std::move(rec));
    }
    const QueryRecord* find(std::string_view id) const {
        auto it = index_.find(std::string(id));
        return it == index_.end() ? nullptr : &records[it->second];
    }
    const QueryRecord& at(std::string_view id) const {
        const QueryRecord* q = find(id);
        if (!q)
            throw validation_error("unknown query_id \"" + std::string(id) + "\"");
        return *q;
    }
    bool contains(std::string_view id) const { return find(id) != nullptr; }
    std::size_t size() const { return records.size(); }

private:
    std::unordered_map<std::string, std::size_t> index_;
};

// Documents grouped by owning query. Immutable after load; per-query vectors
// are kept in candidate order (originals by doc_id, synthetics by synth_rank).
struct Pool {
    std::string name;
    Origin origin = Origin::original;
    std::map<std::string, std::vector<Document>> by_query;
    int per_query_count = 0;

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& [_, docs] : by_query) n += docs.size();
        return n;
    }
    const std::vector<Document>* find(std::string_view query_id) const {
        auto it = by_query.find(std::string(query_id));
        return it == by_query.end() ? nullptr : &it->second;
    }
};

// Resolves doc_ids across pools. Fails loudly on collisions so that metric
// attribution can never silently mix documents up.
class DocTable {
public:
    void add_pool(const Pool& pool) {
        for (const auto& [_, docs] : pool.by_query)
            for (const Document& d : docs) {
                auto [it, inserted] = map_.emplace(d.doc_id, &d);
                if (!inserted)
                    throw validation_error("duplicate doc_id \"" + d.doc_id +
                                           "\" across pools");
            }
    }
    const Document* find(std::string_view doc_id) const {
        auto it = map_.find(std::string(doc_id));
        return it == map_.end() ? nullptr : it->second;
    }
    const Document& at(std::string_view doc_id) const {
        const Document* d = find(doc_id);
        if (!d)
            throw validation_error("unknown doc_id \"" + std::string(doc_id) + "\"");
        return *d;
    }
    std::size_t size() const { return map_.size(); }

private:
    std::unordered_map<std::string, const Document*> map_;
};

namespace detail {

inline std::string jsonl_context(const std::filesystem::path& path, std::size_t line) {
    return path.string() + " line " + std::to_string(line);
}

inline const nlohmann::json& require_field(const nlohmann::json& obj,
                                           const char* field,
                                           const std::string& ctx) {
    auto it = obj.find(field);
    if (it == obj.end())
        throw validation_error(ctx + ": missing field " + field);
    return *it;
}

inline std::string require_string(const nlohmann::json& obj, const char* field,
                                  const std::string& ctx) {
    const auto& v = require_field(obj, field, ctx);
    if (!v.is_string())
        throw validation_error(ctx + ": field " + field + " must be a string");
    return v.get<std::string>();
}

inline void reject_unknown_fields(const nlohmann::json& obj,
                                  std::initializer_list<const char*> allowed,
                                  const std::string& ctx) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* a : allowed)
            if (it.key() == a) { known = true; break; }
        if (!known)
            throw validation_error(ctx + ": unexpected field \"" + it.key() + "\"");
    }
}

}  // namespace detail

// queries.jsonl: one object per line, fields exactly query_id, text,
// ground_truth.
inline QuerySet load_queries(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw validation_error("cannot open queries file: " + path.string());
    QuerySet qs;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const std::string ctx = detail::jsonl_context(path, lineno);
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object())
            throw validation_error(ctx + ": malformed JSON object");
        detail::reject_unknown_fields(obj, {"query_id", "text", "ground_truth"}, ctx);
        QueryRecord rec;
        rec.query_id = detail::require_string(obj, "query_id", ctx);
        rec.text = detail::require_string(obj, "text", ctx);
        rec.ground_truth = detail::require_string(obj, "ground_truth", ctx);
        if (detail::trim(rec.query_id).empty())
            throw validation_error(ctx + ": field query_id is empty");
        if (detail::trim(rec.text).empty())
            throw validation_error(ctx + ": field text is empty");
        if (detail::trim(rec.ground_truth).empty())
            throw validation_error(ctx + ": field ground_truth is empty");
        if (!seen.insert(rec.query_id).second)
            throw validation_error(ctx + ": duplicate query_id \"" + rec.query_id + "\"");
        qs.push(std::move(rec));
    }
    if (qs.records.empty())
        qs.warnings.push_back("warning: " + path.string() + " contains no queries");
    return qs;
}

// pool.jsonl: fields exactly doc_id, query_id, origin, text, optional correct,
// optional synth_rank. Cross-checked against the companion query set.
inline Pool load_pool(const std::filesystem::path& path, Origin expected_origin,
                      const QuerySet& queries, int expected_per_query = 10) {
    std::ifstream in(path);
    if (!in)
        throw validation_error("cannot open pool file: " + path.string());
    Pool pool;
    pool.name = path.stem().string();
    pool.origin = expected_origin;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const std::string ctx = detail::jsonl_context(path, lineno);
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object())
            throw validation_error(ctx + ": malformed JSON object");
        detail::reject_unknown_fields(
            obj, {"doc_id", "query_id", "origin", "text", "correct", "synth_rank"}, ctx);
        Document d;
        d.doc_id = detail::require_string(obj, "doc_id", ctx);
        d.query_id = detail::require_string(obj, "query_id", ctx);
        d.origin = origin_from_string(detail::require_string(obj, "origin", ctx));
        d.text = detail::require_string(obj, "text", ctx);
        if (obj.contains("correct")) {
            if (!obj["correct"].is_boolean())
                throw validation_error(ctx + ": field correct must be a boolean");
            d.correct_label = obj["correct"].get<bool>();
        }
        if (obj.contains("synth_rank")) {
            if (!obj["synth_rank"].is_number_integer())
                throw validation_error(ctx + ": field synth_rank must be an integer");
            d.synth_rank = obj["synth_rank"].get<int>();
        }
        if (detail::trim(d.text).empty())
            throw validation_error(ctx + ": field text is empty");
        if (d.origin != expected_origin)
            throw validation_error(ctx + ": origin mismatch: expected " +
                                   std::string(to_string(expected_origin)) + ", got " +
                                   std::string(to_string(d.origin)));
        if (d.origin == Origin::original && d.synth_rank)
            throw validation_error(ctx + ": origin original must not carry synth_rank");
        if (d.origin != Origin::original) {
            if (!d.synth_rank)
                throw validation_error(ctx + ": origin " +
                                       std::string(to_string(d.origin)) +
                                       " requires synth_rank");
            if (*d.synth_rank < 1)
                throw validation_error(ctx + ": synth_rank must be >= 1");
        }
        if (!queries.contains(d.query_id))
            throw validation_error(ctx + ": unknown query_id \"" + d.query_id + "\"");
        if (!seen_ids.insert(d.doc_id).second)
            throw validation_error(ctx + ": duplicate doc_id \"" + d.doc_id + "\"");
        pool.by_query[d.query_id].push_back(std::move(d));
    }

    if (expected_origin == Origin::original) {
        pool.per_query_count = expected_per_query;
        for (const auto& q : queries.records) {
            auto it = pool.by_query.find(q.query_id);
            std::size_t n = it == pool.by_query.end() ? 0 : it->second.size();
            if (n != static_cast<std::size_t>(expected_per_query))
                throw validation_error(
                    path.string() + ": query \"" + q.query_id + "\": expected " +
                    std::to_string(expected_per_query) + " original documents, found " +
                    std::to_string(n));
        }
        for (auto& [_, docs] : pool.by_query)
            std::sort(docs.begin(), docs.end(),
                      [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
    } else {
        int min_count = -1;
        for (auto& [qid, docs] : pool.by_query) {
            std::sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) {
                return *a.synth_rank < *b.synth_rank;
            });
            for (std::size_t i = 0; i < docs.size(); ++i) {
                int rank = *docs[i].synth_rank;
                if (i > 0 && rank == *docs[i - 1].synth_rank)
                    throw validation_error(path.string() + ": duplicate synth_rank " +
                                           std::to_string(rank) + " for query \"" + qid +
                                           "\" origin " +
                                           std::string(to_string(pool.origin)));
                if (rank != static_cast<int>(i) + 1)
                    throw validation_error(path.string() + ": query \"" + qid +
                                           "\": synth_rank values must cover 1.." +
                                           std::to_string(docs.size()) + " without gaps");
            }
            int n = static_cast<int>(docs.size());
            if (min_count < 0 || n < min_count) min_count = n;
        }
        pool.per_query_count = min_count < 0 ? 0 : min_count;
    }
    return pool;
}

// Writes a pool back out in the documented schema; loading the result yields
// a record-equal pool.
inline void save_pool(const Pool& pool, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write pool file: " + path.string());
    for (const auto& [_, docs] : pool.by_query) {
        for (const Document& d : docs) {
            nlohmann::json obj;
            obj["doc_id"] = d.doc_id;
            obj["query_id"] = d.query_id;
            obj["origin"] = std::string(to_string(d.origin));
            obj["text"] = d.text;
            if (d.correct_label) obj["correct"] = *d.correct_label;
            if (d.synth_rank) obj["synth_rank"] = *d.synth_rank;
            out << obj.dump() << "\n";
        }
    }
}

// Candidate pool for one query at a given round: the fixed originals plus the
// synthetics injected so far (synth_rank <= round), in stable order.
inline std::vector<const Document*> candidate_set(const Pool& originals,
                                                  const Pool& synth,
                                                  std::string_view query_id,
                                                  int round) {
    if (round < 0)
        throw validation_error("round must be >= 0");
    const auto* orig = originals.find(query_id);
    if (!orig)
        throw validation_error("query \"" + std::string(query_id) +
                               "\" has no original documents");
    std::vector<const Document*> out;
    out.reserve(orig->size() + static_cast<std::size_t>(round));
    for (const Document& d : *orig) out.push_back(&d);
    if (round > 0) {
        const auto* syn = synth.find(query_id);
        int available = syn ? static_cast<int>(syn->size()) : 0;
        if (available < round)
            throw validation_error("query \"" + std::string(query_id) + "\": round " +
                                   std::to_string(round) + " exceeds available synthetics (" +
                                   std::to_string(available) + ")");
        for (const Document& d : *syn) {
            if (*d.synth_rank <= round) out.push_back(&d);
        }
    }
    return out;
}

}  // namespace retsim
