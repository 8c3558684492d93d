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
#include <openssl/evp.h>

#include <cstdio>
#include <fstream>

#include "tbg/llm.hpp"

namespace tbg {

using json = nlohmann::json;

std::string_view to_string(ChatRole role) {
    switch (role) {
        case ChatRole::System:
            return "system";
        case ChatRole::Assistant:
            return "assistant";
        default:
            return "user";
    }
}

void validate_request(const ChatRequest& request) {
    if (request.messages.empty()) throw BackendError(BackendError::Kind::InvalidRequest, "request " + request.request_tag + " has no messages");
    for (const auto& m : request.messages) {
        if (m.content.empty()) {
            throw BackendError(BackendError::Kind::InvalidRequest, "request " + request.request_tag + " has an empty message");
        }
    }
}

std::string request_digest(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    const std::string canonical =
        json{{"messages", messages}, {"model", request.model_id}, {"temperature", request.temperature}}.dump();

    unsigned char hash[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(canonical.data(), canonical.size(), hash, &length, EVP_sha256(), nullptr) != 1) {
        throw BackendError(BackendError::Kind::Protocol, "SHA-256 digest failed");
    }
    std::string hex;
    hex.reserve(length * 2);
    char buf[3];
    for (unsigned int i = 0; i < length; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", hash[i]);
        hex += buf;
    }
    return hex;
}

json to_json(const TranscriptRecord& r) {
    json j{{"digest", r.digest}, {"request_tag", r.request_tag}, {"response", r.response}, {"usage", nullptr}};
    if (r.usage) j["usage"] = {{"prompt_tokens", r.usage->prompt_tokens}, {"completion_tokens", r.usage->completion_tokens}};
    return j;
}

TranscriptRecord transcript_record_from_json(const json& j) {
    try {
        TranscriptRecord r;
        r.digest = j.at("digest").get<std::string>();
        r.request_tag = j.value("request_tag", std::string());
        r.response = j.at("response").get<std::string>();
        if (j.contains("usage") && j["usage"].is_object()) {
            r.usage = TokenUsage{j["usage"].value("prompt_tokens", 0), j["usage"].value("completion_tokens", 0)};
        }
        return r;
    } catch (const json::exception& e) {
        throw BackendError(BackendError::Kind::Transcript, std::string("malformed transcript record: ") + e.what());
    }
}

std::vector<TranscriptRecord> read_transcript(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw BackendError(BackendError::Kind::Transcript, "cannot open transcript " + path.string());
    std::vector<TranscriptRecord> out;
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
        if (line.empty()) continue;
        try {
            out.push_back(transcript_record_from_json(json::parse(line)));
        } catch (const json::parse_error&) {
            throw BackendError(BackendError::Kind::Transcript, path.string() + ":" + std::to_string(n) + ": not a JSON line");
        }
    }
    return out;
}

}  // namespace tbg
