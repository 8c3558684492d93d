/*
 * Copyright 2026 The tbg-reflect Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef TBG_LLM_HPP
#define TBG_LLM_HPP

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <regex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace tbg {

enum class ChatRole { System, User, Assistant };
std::string_view to_string(ChatRole role);

struct ChatMessage {
    ChatRole role = ChatRole::User;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    std::string model_id;
    double temperature = 0.0;
    int max_output_tokens = 256;
    // Episode and step identifier, for error messages and transcripts.
    std::string request_tag;
};

struct TokenUsage {
    int prompt_tokens = 0;
    int completion_tokens = 0;

    bool operator==(const TokenUsage&) const = default;
};

struct ChatResponse {
    std::string content;
    std::optional<TokenUsage> usage;
    std::optional<std::chrono::milliseconds> latency;
};

class BackendError : public std::runtime_error {
public:
    enum class Kind { InvalidRequest, ScriptExhausted, DigestMismatch, Transcript, Http, Timeout, Protocol, Sink, Config };

    BackendError(Kind kind, const std::string& message, std::optional<int> status = std::nullopt)
        : std::runtime_error(message), kind_(kind), status_(status) {}
    Kind kind() const { return kind_; }
    std::optional<int> status() const { return status_; }

private:
    Kind kind_;
    std::optional<int> status_;
};

// Hex SHA-256 over the messages, model id and temperature.
std::string request_digest(const ChatRequest& request);

// Throws BackendError{InvalidRequest} if there are no messages or one is empty.
void validate_request(const ChatRequest& request);

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
    virtual std::string name() const = 0;
};

// Deterministic replies. Rules are tried in order against the last user
// message; a matching rule answers with its replies in rotation. Otherwise the
// queue is popped, and an empty queue is an error.
class ScriptedBackend : public LlmBackend {
public:
    struct Rule {
        std::string pattern;
        std::vector<std::string> replies;
    };

    explicit ScriptedBackend(std::vector<std::string> queue = {}, std::vector<Rule> rules = {});

    ChatResponse complete(const ChatRequest& request) override;
    std::string name() const override { return "scripted"; }
    std::size_t remaining() const;

private:
    struct CompiledRule {
        std::regex pattern;
        std::vector<std::string> replies;
        std::size_t next = 0;
    };

    mutable std::mutex mutex_;
    std::deque<std::string> queue_;
    std::vector<CompiledRule> rules_;
};

struct TranscriptRecord {
    std::string digest;
    std::string request_tag;
    std::string response;
    std::optional<TokenUsage> usage;
};

nlohmann::json to_json(const TranscriptRecord& record);
TranscriptRecord transcript_record_from_json(const nlohmann::json& line);
std::vector<TranscriptRecord> read_transcript(const std::filesystem::path& path);

// Answers from a recorded transcript keyed by request digest. Repeated
// digests replay in recorded order.
class ReplayBackend : public LlmBackend {
public:
    explicit ReplayBackend(std::vector<TranscriptRecord> records);
    static std::shared_ptr<ReplayBackend> from_file(const std::filesystem::path& path);

    ChatResponse complete(const ChatRequest& request) override;
    std::string name() const override { return "replay"; }
    std::size_t unconsumed() const;

private:
    mutable std::mutex mutex_;
    std::vector<TranscriptRecord> records_;
    std::vector<bool> consumed_;
    std::map<std::string, std::deque<std::size_t>> by_digest_;
};

// Passes calls through and appends one transcript line per response.
class RecordingBackend : public LlmBackend {
public:
    RecordingBackend(std::shared_ptr<LlmBackend> inner, std::shared_ptr<std::ostream> sink);
    static std::shared_ptr<RecordingBackend> to_file(std::shared_ptr<LlmBackend> inner, const std::filesystem::path& path);

    ChatResponse complete(const ChatRequest& request) override;
    std::string name() const override { return inner_->name(); }

private:
    std::shared_ptr<LlmBackend> inner_;
    std::mutex mutex_;
    std::shared_ptr<std::ostream> sink_;
};

inline constexpr const char* kEnvBaseUrl = "TBG_OPENAI_BASE_URL";
inline constexpr const char* kEnvApiKey = "TBG_OPENAI_API_KEY";
inline constexpr const char* kEnvModel = "TBG_OPENAI_MODEL";

struct HttpConfig {
    // Up to and including the version segment, e.g. "https://api.openai.com/v1".
    std::string base_url;
    std::string api_key;
    std::string model;
    std::chrono::milliseconds timeout{60000};
    int max_retries = 4;
    std::chrono::milliseconds initial_backoff{500};
    std::chrono::milliseconds max_backoff{16000};
    // Zero disables the limiter.
    int requests_per_minute = 60;
    std::uint64_t jitter_seed = 0;
    std::function<void(std::chrono::milliseconds)> sleep;

    // Reads the three TBG_OPENAI_* variables; throws BackendError{Config}
    // when the URL or key is missing.
    static HttpConfig from_env();
    static bool env_available();
};

// Client for OpenAI-compatible /chat/completions endpoints.
class HttpBackend : public LlmBackend {
public:
    explicit HttpBackend(HttpConfig config);

    ChatResponse complete(const ChatRequest& request) override;
    std::string name() const override { return "http"; }
    const std::string& model() const { return config_.model; }
    int attempts_made() const;

    // Exposed for tests.
    nlohmann::json request_body(const ChatRequest& request) const;
    static ChatResponse parse_response(const std::string& body);
    std::chrono::milliseconds backoff_delay(int retry, std::optional<std::chrono::milliseconds> retry_after);

private:
    void wait_for_slot();

    HttpConfig config_;
    std::string scheme_host_;
    std::string path_prefix_;
    std::mutex limiter_mutex_;
    std::chrono::steady_clock::time_point next_slot_{};
    std::mutex rng_mutex_;
    std::mt19937_64 rng_;
    mutable std::mutex count_mutex_;
    int attempts_ = 0;
};

}  // namespace tbg

#endif  // TBG_LLM_HPP
