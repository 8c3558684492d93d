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

#include <gtest/gtest.h>

#include <atomic>
#include <sstream>
#include <thread>

#include "tbg/llm.hpp"

namespace tbg {
namespace {

using json = nlohmann::json;
using std::chrono::milliseconds;

ChatRequest req(std::string user, std::string tag = "t/0") {
    ChatRequest r;
    r.messages = {{ChatRole::System, "sys"}, {ChatRole::User, std::move(user)}};
    r.model_id = "m";
    r.request_tag = std::move(tag);
    return r;
}

TEST(Digest, StableAndKeyedOnContentModelTemperature) {
    const auto a = request_digest(req("hello"));
    EXPECT_EQ(a.size(), 64u);
    EXPECT_EQ(a, request_digest(req("hello", "another tag")));
    ChatRequest longer = req("hello");
    longer.max_output_tokens = 999;
    EXPECT_EQ(a, request_digest(longer));
    EXPECT_NE(a, request_digest(req("hello!")));
    ChatRequest other_model = req("hello");
    other_model.model_id = "n";
    EXPECT_NE(a, request_digest(other_model));
    ChatRequest warm = req("hello");
    warm.temperature = 0.7;
    EXPECT_NE(a, request_digest(warm));
}

TEST(Digest, MatchesIndependentSha256OfCanonicalJson) {
    // Reference value from sha256sum over the canonical JSON below.
    ChatRequest r;
    r.messages = {{ChatRole::User, "go"}};
    r.model_id = "m";
    EXPECT_EQ(json({{"messages", json::array({{{"role", "user"}, {"content", "go"}}})}, {"model", "m"}, {"temperature", 0.0}}).dump(),
              R"({"messages":[{"content":"go","role":"user"}],"model":"m","temperature":0.0})");
    EXPECT_EQ(request_digest(r), "96e50b16cbbf8b5466d5d67ab9de339d517616371a491afe689ecbabdd9ae800");
}

TEST(Validate, RejectsEmptyRequests) {
    ChatRequest r;
    EXPECT_THROW(validate_request(r), BackendError);
    r.messages = {{ChatRole::User, ""}};
    EXPECT_THROW(validate_request(r), BackendError);
}

TEST(Scripted, QueuePop) {
    ScriptedBackend b({"go to kitchen"});
    EXPECT_EQ(b.complete(req("x")).content, "go to kitchen");
    EXPECT_EQ(b.remaining(), 0u);
}

TEST(Scripted, ExhaustedQueueNamesRequestTag) {
    ScriptedBackend b;
    try {
        b.complete(req("x", "micro-1-1/v0/a1/s7"));
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.kind(), BackendError::Kind::ScriptExhausted);
        EXPECT_NE(std::string(e.what()).find("micro-1-1/v0/a1/s7"), std::string::npos);
    }
}

TEST(Scripted, RulesRotateAndTakePriority) {
    ScriptedBackend b({"queued"}, {{"REFLECT", {"R1", "R2"}}});
    EXPECT_EQ(b.complete(req("please REFLECT")).content, "R1");
    EXPECT_EQ(b.complete(req("act")).content, "queued");
    EXPECT_EQ(b.complete(req("REFLECT again")).content, "R2");
    EXPECT_EQ(b.complete(req("REFLECT more")).content, "R1");
}

TEST(Scripted, BadPatternIsConfigError) {
    EXPECT_THROW(ScriptedBackend({}, {{"(", {"x"}}}), BackendError);
    EXPECT_THROW(ScriptedBackend({}, {{"ok", {}}}), BackendError);
}

TEST(Recording, FiveCallsFiveLinesAndTransparent) {
    auto inner = std::make_shared<ScriptedBackend>(std::vector<std::string>{"a", "b", "c", "d", "e"});
    auto sink = std::make_shared<std::stringstream>();
    RecordingBackend rec(inner, sink);
    std::vector<std::string> got;
    for (int i = 0; i < 5; ++i) got.push_back(rec.complete(req("q" + std::to_string(i), "tag" + std::to_string(i))).content);
    EXPECT_EQ(got, (std::vector<std::string>{"a", "b", "c", "d", "e"}));
    std::string line;
    int lines = 0;
    while (std::getline(*sink, line)) {
        auto j = json::parse(line);
        EXPECT_EQ(j["digest"], request_digest(req("q" + std::to_string(lines))));
        EXPECT_EQ(j["request_tag"], "tag" + std::to_string(lines));
        ++lines;
    }
    EXPECT_EQ(lines, 5);
}

TEST(Recording, UnwritableSinkFailsImmediately) {
    auto sink = std::make_shared<std::stringstream>();
    sink->setstate(std::ios::badbit);
    EXPECT_THROW(RecordingBackend(std::make_shared<ScriptedBackend>(), sink), BackendError);
    EXPECT_THROW(RecordingBackend::to_file(std::make_shared<ScriptedBackend>(), "/nonexistent-dir/t.jsonl"), BackendError);
}

TEST(Replay, RoundTripsRecordedResponses) {
    auto sink = std::make_shared<std::stringstream>();
    RecordingBackend rec(std::make_shared<ScriptedBackend>(std::vector<std::string>{"one", "two", "three"}), sink);
    rec.complete(req("same"));
    rec.complete(req("same"));
    rec.complete(req("other"));
    std::vector<TranscriptRecord> records;
    std::string line;
    while (std::getline(*sink, line)) records.push_back(transcript_record_from_json(json::parse(line)));
    ReplayBackend replay(records);
    EXPECT_EQ(replay.complete(req("other")).content, "three");
    EXPECT_EQ(replay.complete(req("same")).content, "one");
    EXPECT_EQ(replay.complete(req("same")).content, "two");
    EXPECT_EQ(replay.unconsumed(), 0u);
}

TEST(Replay, MismatchReportsBothDigests) {
    ReplayBackend replay({{request_digest(req("recorded")), "r/1", "x", std::nullopt}});
    try {
        replay.complete(req("different"));
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.kind(), BackendError::Kind::DigestMismatch);
        const std::string msg = e.what();
        EXPECT_NE(msg.find(request_digest(req("different"))), std::string::npos);
        EXPECT_NE(msg.find(request_digest(req("recorded"))), std::string::npos);
    }
}

TEST(Transcript, MalformedLinesRejected) {
    EXPECT_THROW(transcript_record_from_json(json{{"digest", "x"}}), BackendError);
}

// Local stand-in for a chat-completions endpoint.
class StubServer {
public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    explicit StubServer(Handler handler) {
        server_.Post("/v1/chat/completions", [this, handler](const httplib::Request& rq, httplib::Response& rs) {
            ++hits_;
            last_body_ = rq.body;
            last_auth_ = rq.get_header_value("Authorization");
            handler(rq, rs);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }

    HttpConfig config() const {
        HttpConfig c;
        c.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
        c.api_key = "sk-test-secret";
        c.model = "stub-model";
        c.timeout = milliseconds(2000);
        c.requests_per_minute = 0;
        c.sleep = [](milliseconds) {};
        return c;
    }
    int hits() const { return hits_; }
    std::string last_body() const { return last_body_; }
    std::string last_auth() const { return last_auth_; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> hits_{0};
    std::string last_body_;
    std::string last_auth_;
};

void reply_text(httplib::Response& rs, const std::string& text) {
    rs.set_content(json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", text}}}}})},
                        {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 3}}}}
                       .dump(),
                   "application/json");
}

TEST(Http, StubRoundTrip) {
    StubServer stub([](const httplib::Request&, httplib::Response& rs) { reply_text(rs, "look around"); });
    HttpBackend http(stub.config());
    ChatRequest r = req("what now?");
    r.model_id = "";
    ChatResponse resp = http.complete(r);
    EXPECT_EQ(resp.content, "look around");
    ASSERT_TRUE(resp.usage);
    EXPECT_EQ(resp.usage->prompt_tokens, 11);
    EXPECT_TRUE(resp.latency);
    auto sent = json::parse(stub.last_body());
    EXPECT_EQ(sent["model"], "stub-model");
    EXPECT_EQ(sent["messages"][1]["content"], "what now?");
    EXPECT_EQ(sent["temperature"], 0.0);
    EXPECT_EQ(stub.last_auth(), "Bearer sk-test-secret");
}

TEST(Http, RetriesTransientFailuresThenSucceeds) {
    std::atomic<int> calls{0};
    StubServer stub([&](const httplib::Request&, httplib::Response& rs) {
        if (++calls <= 2) {
            rs.status = calls == 1 ? 503 : 429;
            rs.set_content("busy", "text/plain");
            return;
        }
        reply_text(rs, "ok");
    });
    std::vector<milliseconds> sleeps;
    HttpConfig c = stub.config();
    c.sleep = [&](milliseconds d) { sleeps.push_back(d); };
    HttpBackend http(c);
    EXPECT_EQ(http.complete(req("x")).content, "ok");
    EXPECT_EQ(stub.hits(), 3);
    EXPECT_EQ(sleeps.size(), 2u);
}

TEST(Http, ClientErrorsAreNotRetried) {
    StubServer stub([](const httplib::Request&, httplib::Response& rs) {
        rs.status = 401;
        rs.set_content("{\"error\":\"bad key\"}", "application/json");
    });
    HttpBackend http(stub.config());
    try {
        http.complete(req("x"));
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.kind(), BackendError::Kind::Http);
        EXPECT_EQ(e.status(), 401);
        EXPECT_EQ(std::string(e.what()).find("sk-test-secret"), std::string::npos);
    }
    EXPECT_EQ(stub.hits(), 1);
}

TEST(Http, GivesUpAfterMaxRetries) {
    StubServer stub([](const httplib::Request&, httplib::Response& rs) { rs.status = 500; });
    HttpConfig c = stub.config();
    c.max_retries = 2;
    HttpBackend http(c);
    EXPECT_THROW(http.complete(req("x")), BackendError);
    EXPECT_EQ(stub.hits(), 3);
}

TEST(Http, TimeoutIsReported) {
    StubServer stub([](const httplib::Request&, httplib::Response& rs) {
        std::this_thread::sleep_for(milliseconds(600));
        reply_text(rs, "late");
    });
    HttpConfig c = stub.config();
    c.timeout = milliseconds(200);
    c.max_retries = 0;
    HttpBackend http(c);
    try {
        http.complete(req("x"));
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.kind(), BackendError::Kind::Timeout);
    }
}

TEST(Http, MalformedBodyIsProtocolError) {
    EXPECT_THROW(HttpBackend::parse_response("not json"), BackendError);
    EXPECT_THROW(HttpBackend::parse_response("{\"choices\":[]}"), BackendError);
    EXPECT_EQ(HttpBackend::parse_response(R"({"choices":[{"message":{"content":"hi"}}]})").content, "hi");
}

TEST(Http, BackoffGrowsAndIsCapped) {
    HttpConfig c;
    c.base_url = "http://127.0.0.1:1/v1";
    c.initial_backoff = milliseconds(100);
    c.max_backoff = milliseconds(1000);
    HttpBackend http(c);
    for (int retry = 0; retry < 8; ++retry) {
        const long long base = std::min<long long>(100LL << retry, 1000);
        const auto d = http.backoff_delay(retry, std::nullopt).count();
        EXPECT_GE(d, base);
        EXPECT_LE(d, base + base / 2);
    }
    EXPECT_EQ(http.backoff_delay(0, milliseconds(5000)).count(), 5000);
}

TEST(Http, RateLimiterSpacesRequests) {
    StubServer stub([](const httplib::Request&, httplib::Response& rs) { reply_text(rs, "ok"); });
    HttpConfig c = stub.config();
    c.requests_per_minute = 600;  // one per 100 ms
    std::vector<milliseconds> sleeps;
    std::mutex m;
    c.sleep = [&](milliseconds d) {
        std::lock_guard lock(m);
        sleeps.push_back(d);
        std::this_thread::sleep_for(d);
    };
    HttpBackend http(c);
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 4; ++i) http.complete(req("x"));
    EXPECT_GE(std::chrono::steady_clock::now() - start, milliseconds(290));
    EXPECT_GE(sleeps.size(), 3u);
}

TEST(Http, ConfigFromEnvironmentNeedsKey) {
    ::unsetenv(kEnvApiKey);
    EXPECT_FALSE(HttpConfig::env_available());
    EXPECT_THROW(HttpConfig::from_env(), BackendError);
    ::setenv(kEnvApiKey, "k", 1);
    ::setenv(kEnvBaseUrl, "http://localhost:9/v1", 1);
    ::setenv(kEnvModel, "local", 1);
    HttpConfig c = HttpConfig::from_env();
    EXPECT_EQ(c.base_url, "http://localhost:9/v1");
    EXPECT_EQ(c.model, "local");
    ::unsetenv(kEnvApiKey);
    ::unsetenv(kEnvBaseUrl);
    ::unsetenv(kEnvModel);
}

}  // namespace
}  // namespace tbg
