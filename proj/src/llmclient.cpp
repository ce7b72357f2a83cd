#include "t2sql/llmclient.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <thread>

#include <httplib.h>
#include <openssl/evp.h>

#include "t2sql/errors.hpp"
#include "t2sql/text.hpp"

namespace t2sql {

CompletionRequest make_request(const RenderedPrompt& prompt, const std::string& model_name) {
    CompletionRequest r;
    r.prompt = prompt.text;
    r.max_tokens = prompt.max_tokens;
    r.temperature = 0.0;
    r.stop = prompt.stop_sequences;
    r.model_name = model_name;
    return r;
}

std::string canonical_request(const CompletionRequest& request) {
    nlohmann::json j;  // object keys are kept sorted
    j["max_tokens"] = request.max_tokens;
    j["model_name"] = request.model_name;
    j["prompt"] = normalize_newlines(request.prompt);
    j["stop"] = request.stop;
    j["temperature"] = request.temperature;
    return j.dump();
}

std::string request_hash(const CompletionRequest& request) {
    const std::string text = canonical_request(request);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, void (*)(EVP_MD_CTX*)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), text.data(), text.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw Error("SHA-256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

nlohmann::json to_json(const Transcript& t) {
    return {{"request_hash", t.request_hash},
            {"response_text", t.response_text},
            {"latency_ms", t.latency_ms},
            {"timestamp", t.timestamp}};
}

Transcript transcript_from_json(const nlohmann::json& j) {
    Transcript t;
    t.request_hash = j.at("request_hash").get<std::string>();
    t.response_text = j.at("response_text").get<std::string>();
    t.latency_ms = j.value("latency_ms", std::int64_t{0});
    t.timestamp = j.value("timestamp", std::string());
    return t;
}

std::vector<Transcript> load_transcripts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open transcripts " + path.string());
    std::vector<Transcript> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            out.push_back(transcript_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

std::string iso8601_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

TranscriptWriter::TranscriptWriter(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::app | std::ios::binary);
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
}

void TranscriptWriter::write(const Transcript& t) {
    const std::string line = to_json(t).dump() + "\n";
    std::lock_guard<std::mutex> lock(mu_);
    out_ << line;
    out_.flush();
}

ReplayBackend::ReplayBackend(const std::filesystem::path& transcripts)
    : ReplayBackend(load_transcripts(transcripts)) {}

ReplayBackend::ReplayBackend(const std::vector<Transcript>& transcripts) {
    for (const Transcript& t : transcripts) by_hash_[t.request_hash] = t.response_text;
}

std::string ReplayBackend::complete(const CompletionRequest& request) {
    ++calls_;
    const std::string h = request_hash(request);
    auto it = by_hash_.find(h);
    if (it == by_hash_.end()) throw MissingTranscriptError(h);
    return it->second;
}

std::string FunctionBackend::complete(const CompletionRequest& request) {
    ++calls_;
    return fn_(request);
}

RecordingBackend::RecordingBackend(CompletionBackend& inner, TranscriptWriter& writer, Clock clock)
    : inner_(inner), writer_(writer), clock_(std::move(clock)) {}

std::string RecordingBackend::complete(const CompletionRequest& request) {
    const auto start = std::chrono::steady_clock::now();
    std::string text = inner_.complete(request);
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    writer_.write({request_hash(request), text, static_cast<std::int64_t>(ms), clock_()});
    return text;
}

RateLimiter::RateLimiter(double per_minute)
    : interval_(per_minute > 0 ? std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                     std::chrono::duration<double>(60.0 / per_minute))
                               : std::chrono::steady_clock::duration::zero()),
      next_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard<std::mutex> lock(mu_);
        const auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_);
        next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
}

LiveBackend::Options LiveBackend::options_from_env() {
    Options o;
    const char* url = std::getenv("OPENAI_BASE_URL");
    o.base_url = url && *url ? url : "https://api.openai.com/v1";
    const char* key = std::getenv("OPENAI_API_KEY");
    o.api_key = key ? key : "";
    return o;
}

LiveBackend::LiveBackend(Options options) : options_(std::move(options)), limiter_(options_.requests_per_minute) {
    while (!options_.base_url.empty() && options_.base_url.back() == '/') options_.base_url.pop_back();
}

std::string LiveBackend::complete(const CompletionRequest& request) {
    // Split "scheme://host[:port]/prefix" for httplib.
    const std::size_t scheme = options_.base_url.find("://");
    const std::size_t slash =
        options_.base_url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    const std::string host = options_.base_url.substr(0, slash);
    const std::string path = (slash == std::string::npos ? std::string() : options_.base_url.substr(slash)) + "/completions";

    nlohmann::json body = {{"model", request.model_name},
                           {"prompt", request.prompt},
                           {"max_tokens", request.max_tokens},
                           {"temperature", request.temperature},
                           {"stop", request.stop}};
    const std::string payload = body.dump();
    httplib::Headers headers;
    if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

    int last_status = 0;
    std::string last_error;
    for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(
                static_cast<std::int64_t>(options_.initial_backoff_ms * std::pow(2.0, attempt - 1))));
        limiter_.acquire();
        httplib::Client client(host);
        client.set_read_timeout(options_.timeout_s, 0);
        client.set_connection_timeout(options_.timeout_s, 0);
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_status = 0;
            last_error = httplib::to_string(res.error());
            continue;
        }
        last_status = res->status;
        if (res->status == 200) {
            try {
                const auto j = nlohmann::json::parse(res->body);
                return j.at("choices").at(0).at("text").get<std::string>();
            } catch (const nlohmann::json::exception& e) {
                throw BackendError(std::string("malformed completion response: ") + e.what(), res->status);
            }
        }
        last_error = res->body;
        if (res->status != 429 && res->status < 500) break;  // not transient
    }
    throw BackendError("completion request failed after retries (status " + std::to_string(last_status) + "): " +
                           last_error,
                       last_status);
}

LtmResult run_ltm_dialogue(const RenderedPrompt& reduction_prompt, const std::string& original_question,
                           const SolvingPromptBuilder& solving_prompt, CompletionBackend& backend,
                           const std::string& model_name) {
    LtmResult out;
    const CompletionRequest reduce = make_request(reduction_prompt, model_name);
    out.transcript_refs.push_back(request_hash(reduce));
    const ParsedCompletion reduction = parse_completion(backend.complete(reduce), PromptMethod::ltm_reduction);
    if (reduction.extraction_failed) {
        out.reduction_failed = true;
    } else {
        out.sub_questions = reduction.steps;
    }
    if (out.sub_questions.empty() || out.sub_questions.back() != original_question)
        out.sub_questions.push_back(original_question);

    for (const std::string& sub : out.sub_questions) {
        const CompletionRequest req = make_request(solving_prompt(out.turns, sub), model_name);
        out.transcript_refs.push_back(request_hash(req));
        const ParsedCompletion answer = parse_completion(backend.complete(req), PromptMethod::ltm_solving);
        out.turns.push_back({sub, answer.sql});
    }
    out.sql = out.turns.back().sql;
    return out;
}

}  // namespace t2sql
