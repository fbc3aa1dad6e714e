#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "retsim/detail/sha256.hpp"

namespace retsim {

struct AdapterConfig {
    std::string name = "service";  // cassette file stem
    std::string endpoint;          // e.g. http://127.0.0.1:8080/complete
    std::string model;
    double timeout_s = 30.0;
    int max_retries = 3;
    int backoff_initial_ms = 200;
    int max_in_flight = 4;
    double requests_per_second = 0.0;  // 0 = unlimited
    std::string key_env;               // env var holding the API key
};

enum class AdapterMode { online, record, replay };

// HTTP completion client with record/replay cassettes.
//
// Online/record: POST {"model": ..., "prompt": ...} to the endpoint; the
// response body is the completion text. Bounded retries with exponential
// backoff, a bounded in-flight count and an optional request rate ceiling.
// Record appends (key, request, response) to <dir>/<name>.jsonl.
//
// Replay: responses come from the cassette only; the network is never
// touched. A missing key is an error, not a fallback.
class ServiceAdapter {
public:
    ServiceAdapter(AdapterConfig config, AdapterMode mode = AdapterMode::online,
                   std::filesystem::path cassette_dir = {})
        : config_(std::move(config)), mode_(mode), cassette_dir_(std::move(cassette_dir)) {
        if (mode_ != AdapterMode::online && cassette_dir_.empty())
            throw std::runtime_error("adapter \"" + config_.name +
                                     "\": record/replay mode requires a cassette directory");
        if (mode_ == AdapterMode::replay) load_cassette();
        if (mode_ == AdapterMode::record)
            std::filesystem::create_directories(cassette_dir_);
    }

    const AdapterConfig& config() const { return config_; }
    AdapterMode mode() const { return mode_; }

    // Completion for a prompt. Identical prompts within a run are served from
    // an in-memory cache keyed by content hash.
    std::string complete(const std::string& prompt) {
        const std::string key =
            detail::sha256_hex(config_.model + '\x1f' + prompt);
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = memo_.find(key);
            if (it != memo_.end()) return it->second;
        }
        std::string response = mode_ == AdapterMode::replay ? lookup(key)
                                                            : fetch(prompt);
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto [it, inserted] = memo_.emplace(key, response);
            if (inserted && mode_ == AdapterMode::record)
                append_cassette(key, prompt, response);
        }
        return response;
    }

private:
    std::filesystem::path cassette_path() const {
        return cassette_dir_ / (config_.name + ".jsonl");
    }

    void load_cassette() {
        std::ifstream in(cassette_path());
        if (!in)
            throw std::runtime_error("adapter \"" + config_.name +
                                     "\": cannot open cassette " +
                                     cassette_path().string());
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
            if (obj.is_discarded() || !obj.contains("key") || !obj.contains("response"))
                throw std::runtime_error("adapter \"" + config_.name +
                                         "\": malformed cassette line " +
                                         std::to_string(lineno));
            replay_[obj["key"].get<std::string>()] = obj["response"].get<std::string>();
        }
    }

    std::string lookup(const std::string& key) {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = replay_.find(key);
        if (it == replay_.end())
            throw std::runtime_error("adapter \"" + config_.name +
                                     "\": cassette miss for request key " + key);
        return it->second;
    }

    void append_cassette(const std::string& key, const std::string& prompt,
                         const std::string& response) {
        std::ofstream out(cassette_path(), std::ios::app);
        if (!out)
            throw std::runtime_error("adapter \"" + config_.name +
                                     "\": cannot write cassette " +
                                     cassette_path().string());
        nlohmann::json obj;
        obj["key"] = key;
        obj["model"] = config_.model;
        obj["prompt"] = prompt;
        obj["response"] = response;
        out << obj.dump() << "\n";
    }

    // Rate gate: bounded in-flight slots plus a minimum spacing between
    // request starts.
    class Gate {
    public:
        explicit Gate(ServiceAdapter& a) : a_(a) {
            std::unique_lock<std::mutex> lock(a_.gate_mu_);
            a_.gate_cv_.wait(lock, [&] {
                return a_.in_flight_ < std::max(1, a_.config_.max_in_flight);
            });
            ++a_.in_flight_;
            if (a_.config_.requests_per_second > 0.0) {
                auto interval = std::chrono::duration<double>(
                    1.0 / a_.config_.requests_per_second);
                auto now = std::chrono::steady_clock::now();
                auto earliest = a_.last_start_ + std::chrono::duration_cast<
                                                     std::chrono::steady_clock::duration>(interval);
                if (now < earliest) {
                    lock.unlock();
                    std::this_thread::sleep_until(earliest);
                    lock.lock();
                    now = std::chrono::steady_clock::now();
                }
                a_.last_start_ = now;
            }
        }
        ~Gate() {
            std::lock_guard<std::mutex> lock(a_.gate_mu_);
            --a_.in_flight_;
            a_.gate_cv_.notify_one();
        }

    private:
        ServiceAdapter& a_;
    };

    std::string fetch(const std::string& prompt) {
        auto [host, path] = split_endpoint(config_.endpoint);
        nlohmann::json body;
        body["model"] = config_.model;
        body["prompt"] = prompt;
        const std::string payload = body.dump();

        std::string last_error;
        int attempts = 1 + std::max(0, config_.max_retries);
        int backoff_ms = std::max(1, config_.backoff_initial_ms);
        for (int attempt = 0; attempt < attempts; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
                backoff_ms *= 2;
            }
            Gate gate(*this);
            httplib::Client client(host);
            client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_s));
            client.set_read_timeout(std::chrono::duration<double>(config_.timeout_s));
            httplib::Headers headers;
            if (!config_.key_env.empty()) {
                if (const char* key = std::getenv(config_.key_env.c_str()))
                    headers.emplace("Authorization", std::string("Bearer ") + key);
            }
            auto res = client.Post(path, headers, payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            return res->body;
        }
        throw std::runtime_error("adapter \"" + config_.name + "\": request to " +
                                 config_.endpoint + " failed after " +
                                 std::to_string(attempts) + " attempts (" +
                                 last_error + ")");
    }

    // "http://host:port/path" -> ("http://host:port", "/path")
    static std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
        auto scheme_end = endpoint.find("://");
        if (scheme_end == std::string::npos)
            throw std::runtime_error("adapter endpoint must include a scheme: " + endpoint);
        auto path_start = endpoint.find('/', scheme_end + 3);
        if (path_start == std::string::npos) return {endpoint, "/"};
        return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
    }

    AdapterConfig config_;
    AdapterMode mode_;
    std::filesystem::path cassette_dir_;

    std::mutex mu_;
    std::unordered_map<std::string, std::string> memo_;
    std::unordered_map<std::string, std::string> replay_;

    std::mutex gate_mu_;
    std::condition_variable gate_cv_;
    int in_flight_ = 0;
    std::chrono::steady_clock::time_point last_start_{};
};

// Fills {name} placeholders in a prompt template.
inline std::string render_template(
    std::string_view tmpl,
    const std::vector<std::pair<std::string, std::string>>& values) {
    std::string out(tmpl);
    for (const auto& [name, value] : values) {
        const std::string needle = "{" + name + "}";
        std::size_t pos = 0;
        while ((pos = out.find(needle, pos)) != std::string::npos) {
            out.replace(pos, needle.size(), value);
            pos += value.size();
        }
    }
    return out;
}

}  // namespace retsim
