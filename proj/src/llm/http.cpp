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
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <cstdlib>
#include <thread>

#include "tbg/llm.hpp"

namespace tbg {

using json = nlohmann::json;
using std::chrono::milliseconds;

namespace {

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

std::optional<milliseconds> retry_after(const httplib::Result& res) {
    if (!res || !res->has_header("Retry-After")) return std::nullopt;
    try {
        return milliseconds(static_cast<long long>(std::stod(res->get_header_value("Retry-After")) * 1000));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::string excerpt(const std::string& body) { return body.size() > 300 ? body.substr(0, 300) + "..." : body; }

}  // namespace

HttpConfig HttpConfig::from_env() {
    HttpConfig c;
    c.base_url = env_or_empty(kEnvBaseUrl);
    c.api_key = env_or_empty(kEnvApiKey);
    c.model = env_or_empty(kEnvModel);
    if (c.base_url.empty()) c.base_url = "https://api.openai.com/v1";
    if (c.api_key.empty()) throw BackendError(BackendError::Kind::Config, std::string(kEnvApiKey) + " is not set");
    if (c.model.empty()) c.model = "gpt-4o";
    return c;
}

bool HttpConfig::env_available() { return !env_or_empty(kEnvApiKey).empty(); }

HttpBackend::HttpBackend(HttpConfig config) : config_(std::move(config)), rng_(config_.jitter_seed) {
    const auto scheme_end = config_.base_url.find("://");
    if (scheme_end == std::string::npos) throw BackendError(BackendError::Kind::Config, "base URL needs a scheme: " + config_.base_url);
    const auto path_start = config_.base_url.find('/', scheme_end + 3);
    scheme_host_ = config_.base_url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    if (!config_.sleep) config_.sleep = [](milliseconds d) { std::this_thread::sleep_for(d); };
}

json HttpBackend::request_body(const ChatRequest& request) const {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return json{{"model", request.model_id.empty() ? config_.model : request.model_id},
                {"messages", messages},
                {"temperature", request.temperature},
                {"max_tokens", request.max_output_tokens}};
}

ChatResponse HttpBackend::parse_response(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error&) {
        throw BackendError(BackendError::Kind::Protocol, "response is not JSON: " + excerpt(body));
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
        throw BackendError(BackendError::Kind::Protocol, "response has no choices: " + excerpt(body));
    }
    const json& message = j["choices"][0].value("message", json::object());
    if (!message.contains("content") || !message["content"].is_string()) {
        throw BackendError(BackendError::Kind::Protocol, "first choice has no text content");
    }
    ChatResponse r;
    r.content = message["content"].get<std::string>();
    if (j.contains("usage") && j["usage"].is_object()) {
        r.usage = TokenUsage{j["usage"].value("prompt_tokens", 0), j["usage"].value("completion_tokens", 0)};
    }
    return r;
}

milliseconds HttpBackend::backoff_delay(int retry, std::optional<milliseconds> hint) {
    const long long base = config_.initial_backoff.count() << std::min(retry, 20);
    long long delay = std::min(base, static_cast<long long>(config_.max_backoff.count()));
    {
        std::lock_guard lock(rng_mutex_);
        delay += static_cast<long long>(std::uniform_int_distribution<long long>(0, delay / 2)(rng_));
    }
    if (hint && hint->count() > delay) delay = hint->count();
    return milliseconds(delay);
}

void HttpBackend::wait_for_slot() {
    if (config_.requests_per_minute <= 0) return;
    const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::microseconds(60'000'000 / config_.requests_per_minute));
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(limiter_mutex_);
        const auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_slot_);
        next_slot_ = slot + interval;
    }
    const auto wait = slot - std::chrono::steady_clock::now();
    if (wait > std::chrono::steady_clock::duration::zero()) config_.sleep(std::chrono::ceil<milliseconds>(wait));
}

int HttpBackend::attempts_made() const {
    std::lock_guard lock(count_mutex_);
    return attempts_;
}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
    validate_request(request);
    const std::string body = request_body(request).dump();
    const std::string path = path_prefix_ + "/chat/completions";
    httplib::Headers headers{{"Authorization", "Bearer " + config_.api_key}};

    const auto secs = config_.timeout.count() / 1000;
    const auto usecs = (config_.timeout.count() % 1000) * 1000;
    for (int attempt = 0;; ++attempt) {
        wait_for_slot();
        {
            std::lock_guard lock(count_mutex_);
            ++attempts_;
        }
        httplib::Client client(scheme_host_);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        const auto started = std::chrono::steady_clock::now();
        auto res = client.Post(path, headers, body, "application/json");

        std::optional<BackendError> failure;
        if (!res) {
            const auto err = res.error();
            const bool timeout = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout;
            failure.emplace(timeout ? BackendError::Kind::Timeout : BackendError::Kind::Http,
                            "request " + request.request_tag + " failed: " + httplib::to_string(err));
        } else if (res->status == 200) {
            ChatResponse r = parse_response(res->body);
            r.latency = std::chrono::duration_cast<milliseconds>(std::chrono::steady_clock::now() - started);
            return r;
        } else {
            BackendError e(BackendError::Kind::Http,
                           "request " + request.request_tag + " got HTTP " + std::to_string(res->status) + ": " + excerpt(res->body),
                           res->status);
            if (!retryable_status(res->status)) throw e;
            failure.emplace(std::move(e));
        }
        if (attempt >= config_.max_retries) throw *failure;
        config_.sleep(backoff_delay(attempt, retry_after(res)));
    }
}

}  // namespace tbg
