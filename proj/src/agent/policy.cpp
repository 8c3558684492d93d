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
#include <cctype>

#include "tbg/agent.hpp"

namespace tbg {
namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
            return false;
        }
    }
    return true;
}

bool is_think(std::string_view text) { return starts_with_ci(text, kThinkPrefix); }

void add_usage(TokenUsage& total, const std::optional<TokenUsage>& usage) {
    if (!usage) return;
    total.prompt_tokens += usage->prompt_tokens;
    total.completion_tokens += usage->completion_tokens;
}

ChatRequest make_request(const PolicySpec& policy, std::vector<ChatMessage> messages, std::string tag) {
    ChatRequest request;
    request.messages = std::move(messages);
    request.model_id = policy.model_id;
    request.temperature = policy.temperature;
    request.max_output_tokens = policy.max_output_tokens;
    request.request_tag = std::move(tag);
    return request;
}

Reflection ask_for_reflection(const PolicySpec& policy, const std::string& prompt, LlmBackend& backend,
                              const std::string& request_tag) {
    Reflection reflection;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const auto request = make_request(policy, {{ChatRole::User, prompt}},
                                          request_tag + (attempt == 0 ? "" : "/retry"));
        reflection.prompt_digest = request_digest(request);
        const ChatResponse response = backend.complete(request);
        add_usage(reflection.usage, response.usage);
        reflection.text = trim(response.content);
        if (!reflection.text.empty()) return reflection;
    }
    reflection.text = std::string(kDegenerateReflection);
    reflection.degenerate = true;
    return reflection;
}

}  // namespace

std::string clean_model_output(std::string_view output) {
    std::string line;
    std::size_t pos = 0;
    while (pos <= output.size()) {
        auto end = output.find('\n', pos);
        if (end == std::string_view::npos) end = output.size();
        line = trim(output.substr(pos, end - pos));
        if (!line.empty()) break;
        pos = end + 1;
    }
    if (line.starts_with(">")) line = trim(std::string_view(line).substr(1));
    for (std::string_view label : {"action:", "command:"}) {
        if (starts_with_ci(line, label)) line = trim(std::string_view(line).substr(label.size()));
    }
    while (line.size() >= 2 && (line.front() == '"' || line.front() == '\'' || line.front() == '`') &&
           line.back() == line.front()) {
        line = trim(std::string_view(line).substr(1, line.size() - 2));
    }
    if (!is_think(line)) {
        while (!line.empty() && (line.back() == '.' || line.back() == '!')) line.pop_back();
    }
    return line;
}

std::string render_history(const std::string& initial_observation, const std::vector<TrajectoryStep>& steps,
                           std::size_t window) {
    std::vector<const TrajectoryStep*> acting;
    for (const auto& s : steps) {
        if (s.kind == StepKind::EnvAction || s.kind == StepKind::Think) acting.push_back(&s);
    }
    std::string out = initial_observation;
    const std::size_t skip = acting.size() > window ? acting.size() - window : 0;
    if (skip > 0) out += "\n(" + std::to_string(skip) + " earlier steps omitted)";
    for (std::size_t i = skip; i < acting.size(); ++i) {
        out += "\n> " + acting[i]->command + "\n" + acting[i]->observation;
    }
    return out;
}

std::string render_memory(const std::vector<std::string>& memory) {
    if (memory.empty()) return "(none)";
    std::string out;
    for (const auto& m : memory) {
        if (!out.empty()) out += '\n';
        out += "- " + m;
    }
    return out;
}

Decision decide(const PolicySpec& policy, const PromptSet& prompts, const DecisionContext& context,
                LlmBackend& backend) {
    if (context.state == nullptr || context.templates == nullptr) {
        throw std::invalid_argument("decide: context needs a state and templates");
    }
    if (context.state->done) throw EpisodeFinishedError("decide: attempt already finished");

    const std::string system =
        fill_placeholders(prompts.system, {{"templates", context.templates->describe()}, {"exemplars", prompts.exemplars}});
    std::string user = fill_placeholders(
        prompts.act, {{"goal", context.goal},
                      {"memory", render_memory(context.memory)},
                      {"attempt", std::to_string(context.attempt)},
                      {"score", std::to_string(score(*context.state))},
                      {"trajectory", render_history(context.initial_observation, context.history, policy.history_window)}});
    const bool may_think = context.consecutive_thinks < policy.think_budget;
    if (!may_think) user += "\n\n" + prompts.force_action;

    std::vector<ChatMessage> messages = {{ChatRole::System, system}, {ChatRole::User, user}};
    Decision decision;
    for (int retry = 0;; ++retry) {
        std::string tag = context.request_tag;
        if (retry > 0) tag += "/retry" + std::to_string(retry);
        const auto request = make_request(policy, messages, tag);
        decision.prompt_digest = request_digest(request);
        const ChatResponse response = backend.complete(request);
        add_usage(decision.usage, response.usage);
        decision.raw_output = response.content;

        const std::string cleaned = clean_model_output(response.content);
        std::string error;
        if (is_think(cleaned)) {
            if (may_think) {
                decision.kind = Decision::Kind::Think;
                decision.text = cleaned;
                return decision;
            }
            error = "no more thinking is allowed now; reply with a command";
        } else if (cleaned.empty()) {
            error = "the reply was empty";
        } else {
            auto interpreted = interpret(cleaned, *context.state, *context.templates);
            if (std::holds_alternative<GroundedAction>(interpreted)) {
                decision.kind = Decision::Kind::EnvAction;
                decision.text = cleaned;
                return decision;
            }
            error = std::get<std::string>(interpreted);
        }

        decision.rejected.push_back(response.content);
        if (retry >= policy.invalid_retry_limit) break;
        messages.push_back({ChatRole::Assistant, trim(response.content).empty() ? "(empty)" : response.content});
        messages.push_back({ChatRole::User, fill_placeholders(prompts.invalid, {{"output", cleaned}, {"error", error}})});
    }
    decision.kind = Decision::Kind::EnvAction;
    decision.text = std::string(kFallbackCommand);
    decision.fallback = true;
    return decision;
}

Reflection reflect_sweet(const PolicySpec& policy, const PromptSet& prompts, const std::string& goal,
                         const std::vector<TrajectoryStep>& recent, int reward, LlmBackend& backend,
                         const std::string& request_tag) {
    if (!reflects_on_success(policy.kind)) {
        throw std::logic_error("reflect_sweet: policy " + policy.display_name() + " does not reflect on success");
    }
    if (reward <= 0) throw std::invalid_argument("reflect_sweet: reward must be positive");
    std::string window;
    for (const auto& s : recent) {
        if (s.kind != StepKind::EnvAction && s.kind != StepKind::Think) continue;
        if (!window.empty()) window += '\n';
        window += "> " + s.command + "\n" + s.observation;
    }
    const std::string prompt = fill_placeholders(
        prompts.sweet, {{"goal", goal}, {"reward", std::to_string(reward)}, {"trajectory", window}});
    return ask_for_reflection(policy, prompt, backend, request_tag);
}

Reflection reflect_sour(const PolicySpec& policy, const PromptSet& prompts, const std::string& goal,
                        const std::string& initial_observation, const std::vector<TrajectoryStep>& attempt_steps,
                        const std::vector<std::string>& memory, int attempt, int score, LlmBackend& backend,
                        const std::string& request_tag) {
    if (!keeps_memory(policy.kind)) {
        throw std::logic_error("reflect_sour: policy " + policy.display_name() + " does not reflect");
    }
    std::string trajectory = render_history(initial_observation, attempt_steps, attempt_steps.size() + 1);
    if (trajectory.size() > policy.sour_trajectory_chars) {
        std::string tail = trajectory.substr(trajectory.size() - policy.sour_trajectory_chars);
        const auto nl = tail.find('\n');
        if (nl != std::string::npos) tail = tail.substr(nl + 1);
        trajectory = "(earlier steps omitted)\n" + tail;
    }
    const std::string prompt = fill_placeholders(prompts.sour, {{"goal", goal},
                                                                {"attempt", std::to_string(attempt)},
                                                                {"score", std::to_string(score)},
                                                                {"memory", render_memory(memory)},
                                                                {"trajectory", trajectory}});
    return ask_for_reflection(policy, prompt, backend, request_tag);
}

}  // namespace tbg
