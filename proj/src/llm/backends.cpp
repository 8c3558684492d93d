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
#include <algorithm>

#include "tbg/llm.hpp"

namespace tbg {

namespace {

const std::string& last_user_message(const ChatRequest& request) {
    static const std::string none;
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
        if (it->role == ChatRole::User) return it->content;
    }
    return none;
}

}  // namespace

ScriptedBackend::ScriptedBackend(std::vector<std::string> queue, std::vector<Rule> rules)
    : queue_(queue.begin(), queue.end()) {
    for (auto& rule : rules) {
        if (rule.replies.empty()) throw BackendError(BackendError::Kind::Config, "scripted rule '" + rule.pattern + "' has no replies");
        try {
            rules_.push_back({std::regex(rule.pattern), std::move(rule.replies), 0});
        } catch (const std::regex_error& e) {
            throw BackendError(BackendError::Kind::Config, "bad scripted rule pattern '" + rule.pattern + "': " + e.what());
        }
    }
}

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
    validate_request(request);
    std::lock_guard lock(mutex_);
    const std::string& prompt = last_user_message(request);
    for (auto& rule : rules_) {
        if (!std::regex_search(prompt, rule.pattern)) continue;
        ChatResponse r;
        r.content = rule.replies[rule.next % rule.replies.size()];
        ++rule.next;
        return r;
    }
    if (queue_.empty()) {
        throw BackendError(BackendError::Kind::ScriptExhausted, "scripted backend has no reply left for request " + request.request_tag);
    }
    ChatResponse r;
    r.content = std::move(queue_.front());
    queue_.pop_front();
    return r;
}

std::size_t ScriptedBackend::remaining() const {
    std::lock_guard lock(mutex_);
    return queue_.size();
}

ReplayBackend::ReplayBackend(std::vector<TranscriptRecord> records)
    : records_(std::move(records)), consumed_(records_.size(), false) {
    for (std::size_t i = 0; i < records_.size(); ++i) by_digest_[records_[i].digest].push_back(i);
}

std::shared_ptr<ReplayBackend> ReplayBackend::from_file(const std::filesystem::path& path) {
    return std::make_shared<ReplayBackend>(read_transcript(path));
}

ChatResponse ReplayBackend::complete(const ChatRequest& request) {
    validate_request(request);
    const std::string digest = request_digest(request);
    std::lock_guard lock(mutex_);
    auto it = by_digest_.find(digest);
    if (it == by_digest_.end() || it->second.empty()) {
        std::string expected = "<end of transcript>";
        for (std::size_t i = 0; i < records_.size(); ++i) {
            if (!consumed_[i]) {
                expected = records_[i].digest + " (" + records_[i].request_tag + ")";
                break;
            }
        }
        throw BackendError(BackendError::Kind::DigestMismatch,
                           "replay mismatch for request " + request.request_tag + ": got digest " + digest + ", next recorded " + expected);
    }
    const std::size_t index = it->second.front();
    it->second.pop_front();
    consumed_[index] = true;
    ChatResponse r;
    r.content = records_[index].response;
    r.usage = records_[index].usage;
    return r;
}

std::size_t ReplayBackend::unconsumed() const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(std::count(consumed_.begin(), consumed_.end(), false));
}

RecordingBackend::RecordingBackend(std::shared_ptr<LlmBackend> inner, std::shared_ptr<std::ostream> sink)
    : inner_(std::move(inner)), sink_(std::move(sink)) {
    if (!inner_ || !sink_ || !*sink_) throw BackendError(BackendError::Kind::Sink, "recording sink is not writable");
}

std::shared_ptr<RecordingBackend> RecordingBackend::to_file(std::shared_ptr<LlmBackend> inner, const std::filesystem::path& path) {
    auto out = std::make_shared<std::ofstream>(path, std::ios::out | std::ios::trunc);
    if (!*out) throw BackendError(BackendError::Kind::Sink, "cannot open transcript " + path.string() + " for writing");
    return std::make_shared<RecordingBackend>(std::move(inner), std::move(out));
}

ChatResponse RecordingBackend::complete(const ChatRequest& request) {
    ChatResponse response = inner_->complete(request);
    TranscriptRecord record{request_digest(request), request.request_tag, response.content, response.usage};
    std::lock_guard lock(mutex_);
    *sink_ << to_json(record).dump() << '\n';
    sink_->flush();
    if (!*sink_) throw BackendError(BackendError::Kind::Sink, "failed to write transcript line for " + request.request_tag);
    return response;
}

}  // namespace tbg
