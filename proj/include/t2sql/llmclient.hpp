#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "t2sql/promptgen.hpp"

namespace t2sql {

struct CompletionRequest {
    std::string prompt;
    int max_tokens = 512;
    double temperature = 0.0;
    std::vector<std::string> stop;
    std::string model_name;
};

CompletionRequest make_request(const RenderedPrompt& prompt, const std::string& model_name);

// Sorted keys, UTF-8, LF newlines in the prompt; this string is what gets hashed.
std::string canonical_request(const CompletionRequest& request);
// Lowercase hex SHA-256 of canonical_request.
std::string request_hash(const CompletionRequest& request);

struct Transcript {
    std::string request_hash;
    std::string response_text;
    std::int64_t latency_ms = 0;
    std::string timestamp;  // ISO-8601 UTC

    friend bool operator==(const Transcript&, const Transcript&) = default;
};

nlohmann::json to_json(const Transcript& t);
Transcript transcript_from_json(const nlohmann::json& j);
std::vector<Transcript> load_transcripts(const std::filesystem::path& path);

std::string iso8601_now();

// Append-only JSON-lines writer, safe to share between workers.
class TranscriptWriter {
public:
    explicit TranscriptWriter(const std::filesystem::path& path);
    void write(const Transcript& t);

private:
    std::mutex mu_;
    std::ofstream out_;
};

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    // Must be callable from several threads at once.
    virtual std::string complete(const CompletionRequest& request) = 0;
};

class ReplayBackend : public CompletionBackend {
public:
    explicit ReplayBackend(const std::filesystem::path& transcripts);
    explicit ReplayBackend(const std::vector<Transcript>& transcripts);

    std::string complete(const CompletionRequest& request) override;
    std::size_t calls() const { return calls_.load(); }
    std::size_t size() const { return by_hash_.size(); }

private:
    std::map<std::string, std::string> by_hash_;
    std::atomic<std::size_t> calls_{0};
};

// Wraps a callable; used by tests and the fixture generator.
class FunctionBackend : public CompletionBackend {
public:
    using Fn = std::function<std::string(const CompletionRequest&)>;
    explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}
    std::string complete(const CompletionRequest& request) override;
    std::size_t calls() const { return calls_.load(); }

private:
    Fn fn_;
    std::atomic<std::size_t> calls_{0};
};

// Forwards to `inner` and records one Transcript per call.
class RecordingBackend : public CompletionBackend {
public:
    using Clock = std::function<std::string()>;
    RecordingBackend(CompletionBackend& inner, TranscriptWriter& writer, Clock clock = iso8601_now);
    std::string complete(const CompletionRequest& request) override;

private:
    CompletionBackend& inner_;
    TranscriptWriter& writer_;
    Clock clock_;
};

// Blocks callers so that at most `per_minute` requests start per minute.
class RateLimiter {
public:
    explicit RateLimiter(double per_minute);
    void acquire();

private:
    std::mutex mu_;
    std::chrono::steady_clock::duration interval_;
    std::chrono::steady_clock::time_point next_;
};

// OpenAI-compatible POST {base_url}/completions.
class LiveBackend : public CompletionBackend {
public:
    struct Options {
        std::string base_url;  // e.g. https://api.openai.com/v1
        std::string api_key;
        double requests_per_minute = 60.0;
        int max_attempts = 5;
        int initial_backoff_ms = 1000;
        int timeout_s = 120;
    };

    // OPENAI_BASE_URL (default https://api.openai.com/v1) and OPENAI_API_KEY.
    static Options options_from_env();

    explicit LiveBackend(Options options);
    std::string complete(const CompletionRequest& request) override;

private:
    Options options_;
    RateLimiter limiter_;
};

struct LtmResult {
    std::string sql;
    std::vector<std::string> sub_questions;
    std::vector<LtmTurn> turns;
    std::vector<std::string> transcript_refs;  // request hashes, in call order
    bool reduction_failed = false;
};

using SolvingPromptBuilder =
    std::function<RenderedPrompt(const std::vector<LtmTurn>& solved, const std::string& sub_question)>;

// Stage 1 completes the reduction prompt; stage 2 asks each sub-question in
// turn with the earlier Q/A pairs in context. The original question is
// always the last sub-question. An unparseable reduction falls back to the
// original question alone.
LtmResult run_ltm_dialogue(const RenderedPrompt& reduction_prompt, const std::string& original_question,
                           const SolvingPromptBuilder& solving_prompt, CompletionBackend& backend,
                           const std::string& model_name);

}  // namespace t2sql
