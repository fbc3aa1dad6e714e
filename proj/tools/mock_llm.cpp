// Deterministic stand-in for the external completion service. Useful for
// exercising the external adapters without credentials and for recording
// cassettes: every reply is a pure function of the prompt.
//
//   retsim-mock --port 8080
//
// Serves POST /complete with body {"model": ..., "prompt": ...}; the response
// body is the completion text.

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "retsim/detail/text.hpp"
#include "retsim/text_index.hpp"

namespace {

using retsim::tokenize;

std::string line_after(const std::string& text, const std::string& prefix) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
    }
    return {};
}

std::set<std::string> token_set(const std::string& text) {
    std::set<std::string> out;
    for (auto& t : tokenize(text)) out.insert(std::move(t));
    return out;
}

std::size_t overlap(const std::string& text, const std::set<std::string>& query) {
    std::set<std::string> seen;
    for (auto& t : tokenize(text))
        if (query.count(t)) seen.insert(std::move(t));
    return seen.size();
}

// Ranking prompt: numbered documents, one per line. Reply with indices
// ordered by query-token overlap (descending), original order on ties.
std::string handle_rank(const std::string& prompt) {
    const auto query = token_set(line_after(prompt, "Query: "));
    std::vector<std::pair<std::size_t, std::size_t>> docs;  // (overlap, index)
    std::istringstream in(prompt);
    std::string line;
    while (std::getline(in, line)) {
        std::size_t dot = line.find(". ");
        if (dot == std::string::npos || dot == 0) continue;
        bool numeric = true;
        for (std::size_t i = 0; i < dot; ++i)
            if (!std::isdigit(static_cast<unsigned char>(line[i]))) {
                numeric = false;
                break;
            }
        if (!numeric) continue;
        docs.emplace_back(overlap(line.substr(dot + 2), query), docs.size() + 1);
    }
    std::stable_sort(docs.begin(), docs.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::string out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(docs[i].second);
    }
    return out;
}

// Answer prompt: documents as "[id] text" lines. Reply with the most
// query-relevant sentence and a bracketed citation.
std::string handle_answer(const std::string& prompt) {
    const auto query = token_set(line_after(prompt, "Question: "));
    std::string best_id, best_sentence;
    std::size_t best = 0;
    std::istringstream in(prompt);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] != '[') continue;
        std::size_t close = line.find("] ");
        if (close == std::string::npos) continue;
        std::string id = line.substr(1, close - 1);
        for (const std::string& sentence :
             retsim::detail::split_sentences(line.substr(close + 2))) {
            std::size_t ov = overlap(sentence, query);
            if (ov > best || best_id.empty()) {
                best = ov;
                best_id = id;
                best_sentence = sentence;
            }
        }
    }
    if (best_id.empty()) return "No usable evidence found.";
    return best_sentence + " [" + best_id + "]";
}

// Judge prompt: CORRECT iff the candidate contains the reference answer.
std::string handle_judge(const std::string& prompt) {
    std::string truth = line_after(prompt, "Reference answer: ");
    std::string candidate = line_after(prompt, "Candidate answer: ");
    if (!truth.empty() && retsim::detail::contains_ci(candidate, truth))
        return "CORRECT";
    return "INCORRECT";
}

// SEO generation prompt: stitch the query and the first source lines together.
std::string handle_seo(const std::string& prompt) {
    std::string query = line_after(prompt, "Query: ");
    std::string keywords = line_after(
        prompt, "Combine the sources into one coherent article and work in these "
                "keywords: ");
    std::vector<std::string> sources;
    std::istringstream in(prompt);
    std::string line;
    bool in_sources = false;
    while (std::getline(in, line)) {
        if (line == "Source documents:") {
            in_sources = true;
            continue;
        }
        if (in_sources) {
            if (line.rfind("Combine the sources", 0) == 0) break;
            std::size_t dot = line.find(". ");
            if (dot != std::string::npos) {
                auto sentences = retsim::detail::split_sentences(line.substr(dot + 2));
                if (!sentences.empty()) sources.push_back(sentences.front());
            }
        }
    }
    std::string out = "All about " + query + ".";
    for (std::size_t i = 0; i < sources.size() && i < 3; ++i) out += " " + sources[i];
    if (!keywords.empty()) out += " Popular topics: " + keywords + ".";
    return out;
}

std::string handle_abuse_draft(const std::string& prompt) {
    std::string query = line_after(prompt, "Query: ");
    return "You will not believe the answer to " + query +
           ". Experts counted 47 hidden studies in 1985. Officials at Westbury "
           "deny everything.";
}

// Rewrite: shift every digit and swap capitalized mid-sentence words.
std::string handle_abuse_rewrite(const std::string& prompt) {
    std::size_t pos = prompt.find("Draft:\n");
    std::string draft =
        pos == std::string::npos ? prompt : prompt.substr(pos + 7);
    std::size_t tail = draft.rfind("\nRewritten article:");
    if (tail != std::string::npos) draft = draft.substr(0, tail);
    std::string out;
    for (char c : draft) {
        if (std::isdigit(static_cast<unsigned char>(c)))
            out.push_back(static_cast<char>('0' + (c - '0' + 3) % 10));
        else
            out.push_back(c);
    }
    return out;
}

std::string complete(const std::string& prompt) {
    if (prompt.find("Rank the numbered documents") != std::string::npos)
        return handle_rank(prompt);
    if (prompt.find("Cite evidence with bracketed document ids") != std::string::npos)
        return handle_answer(prompt);
    if (prompt.find("Reference answer: ") != std::string::npos)
        return handle_judge(prompt);
    if (prompt.find("Act as an SEO specialist") != std::string::npos)
        return handle_seo(prompt);
    if (prompt.find("Rewrite the draft") != std::string::npos)
        return handle_abuse_rewrite(prompt);
    if (prompt.find("clickbait") != std::string::npos)
        return handle_abuse_draft(prompt);
    return "UNSUPPORTED PROMPT";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"retsim-mock: deterministic completion service for testing"};
    std::string host = "127.0.0.1";
    int port = 8080;
    app.add_option("--host", host, "bind address");
    app.add_option("--port", port, "bind port");
    CLI11_PARSE(app, argc, argv);

    httplib::Server server;
    server.Post("/complete", [](const httplib::Request& req, httplib::Response& res) {
        nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.contains("prompt")) {
            res.status = 400;
            res.set_content("missing prompt", "text/plain");
            return;
        }
        res.set_content(complete(body["prompt"].get<std::string>()), "text/plain");
    });

    std::cout << "retsim-mock listening on " << host << ":" << port << std::endl;
    if (!server.listen(host, port)) {
        std::cerr << "failed to bind " << host << ":" << port << "\n";
        return 2;
    }
    return 0;
}
