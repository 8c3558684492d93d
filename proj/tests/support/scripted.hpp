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
#ifndef TBG_TESTS_SCRIPTED_HPP
#define TBG_TESTS_SCRIPTED_HPP

#include <memory>
#include <string>
#include <vector>

#include "tbg/agent.hpp"
#include "tbg/llm.hpp"

namespace tbg::testing {

// Keeps every request it forwards.
class CaptureBackend : public LlmBackend {
public:
    explicit CaptureBackend(std::shared_ptr<LlmBackend> inner) : inner_(std::move(inner)) {}

    ChatResponse complete(const ChatRequest& request) override {
        requests.push_back(request);
        return inner_->complete(request);
    }
    std::string name() const override { return "capture"; }

    std::vector<ChatRequest> requests;

private:
    std::shared_ptr<LlmBackend> inner_;
};

inline const std::string& last_user(const ChatRequest& r) {
    for (auto it = r.messages.rbegin(); it != r.messages.rend(); ++it) {
        if (it->role == ChatRole::User) return it->content;
    }
    static const std::string none;
    return none;
}

inline bool is_reflection_request(const ChatRequest& r) {
    const auto& u = last_user(r);
    return u.starts_with("SUCCESS REFLECTION") || u.starts_with("FAILURE REFLECTION");
}

// Actions come from the queue in order; reflection prompts get fixed replies.
inline std::shared_ptr<ScriptedBackend> action_backend(std::vector<std::string> actions,
                                                       std::vector<std::string> sweet = {"S"},
                                                       std::vector<std::string> sour = {"F"}) {
    return std::make_shared<ScriptedBackend>(
        std::move(actions),
        std::vector<ScriptedBackend::Rule>{{"^SUCCESS REFLECTION", std::move(sweet)}, {"^FAILURE REFLECTION", std::move(sour)}});
}

// Event log of the observable reflection schedule.
struct ScheduleRecorder : EpisodeObserver {
    std::vector<std::string> events;
    std::vector<TrajectoryStep> env_steps;

    void on_step(int attempt, const TrajectoryStep& s) override {
        if (s.kind == StepKind::EnvAction || s.kind == StepKind::Think) {
            env_steps.push_back(s);
        } else {
            events.push_back("a" + std::to_string(attempt) + "/s" + std::to_string(s.step) + "/" +
                             std::string(to_string(s.kind)));
        }
    }
    void on_memory(int attempt, const MemoryEvent& e) override {
        if (e.type != MemoryEvent::Type::Flush) {
            events.push_back("a" + std::to_string(attempt) + "/mem/" + std::string(to_string(e.type)));
        }
    }
};

}  // namespace tbg::testing

#endif  // TBG_TESTS_SCRIPTED_HPP
