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

#include "tbg/agent.hpp"

namespace tbg {
namespace {

std::string tag_for(const AttemptContext& ctx, int attempt, int step) {
    return ctx.instance->task_id + "/v" + std::to_string(ctx.instance->variation) + "/" +
           ctx.policy->display_name() + "/a" + std::to_string(attempt) + "/s" + std::to_string(step);
}

bool acting(const TrajectoryStep& s) { return s.kind == StepKind::EnvAction || s.kind == StepKind::Think; }

std::vector<TrajectoryStep> last_acting_steps(const std::vector<TrajectoryStep>& steps, std::size_t n) {
    std::vector<TrajectoryStep> out;
    for (auto it = steps.rbegin(); it != steps.rend() && out.size() < n; ++it) {
        if (acting(*it)) out.push_back(*it);
    }
    std::reverse(out.begin(), out.end());
    return out;
}

void check_context(const AttemptContext& ctx) {
    if (!ctx.instance || ctx.policy == nullptr || ctx.prompts == nullptr || ctx.templates == nullptr) {
        throw std::invalid_argument("attempt context is incomplete");
    }
    if (ctx.policy->kind != PolicyKind::Scripted && ctx.backend == nullptr) {
        throw std::invalid_argument("policy " + ctx.policy->display_name() + " needs a backend");
    }
}

}  // namespace

std::vector<std::string> expand_script(const PolicySpec& policy, const TaskInstance& instance) {
    if (policy.script.empty()) return instance.solution;
    std::vector<std::string> out;
    for (const auto& line : policy.script) {
        if (line == kSolutionMacro) {
            out.insert(out.end(), instance.solution.begin(), instance.solution.end());
        } else {
            out.push_back(line);
        }
    }
    return out;
}

AttemptResult run_attempt(const AttemptContext& ctx, MemoryStore& memory, int attempt) {
    check_context(ctx);
    const PolicySpec& policy = *ctx.policy;
    const TaskInstance& instance = *ctx.instance;
    auto [state, first] = init_episode(ctx.instance, ctx.seed);

    AttemptResult result;
    result.attempt = attempt;
    result.initial_observation = first.text;
    if (ctx.observer) ctx.observer->on_attempt_start(attempt, first.text);

    std::vector<std::string> script;
    if (policy.kind == PolicyKind::Scripted) {
        script = expand_script(policy, instance);
        if (script.empty()) throw ConfigError("scripted policy has no commands for " + instance.task_id);
    }

    std::size_t script_pos = 0;
    int consecutive_thinks = 0;
    while (!state.done && result.env_steps < ctx.limits.step_cap) {
        TrajectoryStep ts;
        ts.step = result.env_steps + 1;
        bool think = false;
        if (policy.kind == PolicyKind::Scripted) {
            ts.command = normalize_command(script[script_pos++ % script.size()]);
            ts.text_out = ts.command;
            think = ts.command.starts_with(kThinkPrefix);
        } else {
            DecisionContext dc;
            dc.state = &state;
            dc.templates = ctx.templates;
            dc.goal = instance.goal_text;
            dc.initial_observation = result.initial_observation;
            dc.history = result.steps;
            if (keeps_memory(policy.kind)) dc.memory = memory.context_view(instance.task_id, policy.memory_budget);
            dc.attempt = attempt;
            dc.consecutive_thinks = consecutive_thinks;
            dc.request_tag = tag_for(ctx, attempt, ts.step);
            Decision d = decide(policy, *ctx.prompts, dc, *ctx.backend);
            ts.text_in = d.prompt_digest;
            ts.text_out = d.raw_output;
            ts.command = d.text;
            ts.rejected = std::move(d.rejected);
            ts.fallback = d.fallback;
            result.usage.prompt_tokens += d.usage.prompt_tokens;
            result.usage.completion_tokens += d.usage.completion_tokens;
            think = d.kind == Decision::Kind::Think;
        }
        ++result.env_steps;

        if (think) {
            ts.kind = StepKind::Think;
            ts.observation = std::string(kThinkObservation);
            ts.score = score(state);
            ++consecutive_thinks;
        } else {
            consecutive_thinks = 0;
            StepResult r = step_text(state, ts.command, *ctx.templates);
            state = std::move(r.state);
            ts.kind = StepKind::EnvAction;
            ts.observation = r.observation.text;
            ts.reward_delta = r.observation.reward_delta;
            ts.score = score(state);
        }
        result.steps.push_back(ts);
        if (ctx.observer) ctx.observer->on_step(attempt, ts);

        if (ts.kind == StepKind::EnvAction && ts.reward_delta > 0 && reflects_on_success(policy.kind)) {
            Reflection refl = reflect_sweet(policy, *ctx.prompts, instance.goal_text,
                                            last_acting_steps(result.steps, policy.sweet_window), ts.reward_delta,
                                            *ctx.backend, tag_for(ctx, attempt, ts.step) + "/sweet");
            memory.record_sweet({refl.text, ts.observation, ts.command, ts.reward_delta},
                                {instance.task_id, attempt, ts.step});
            TrajectoryStep rs;
            rs.step = ts.step;
            rs.kind = StepKind::ReflectionSweet;
            rs.text_in = refl.prompt_digest;
            rs.text_out = refl.text;
            rs.score = ts.score;
            rs.degenerate = refl.degenerate;
            result.usage.prompt_tokens += refl.usage.prompt_tokens;
            result.usage.completion_tokens += refl.usage.completion_tokens;
            result.steps.push_back(rs);
            ++result.sweet_reflections;
            if (ctx.observer) {
                ctx.observer->on_step(attempt, rs);
                ctx.observer->on_memory(attempt, {MemoryEvent::Type::RecordSweet, Valence::Sweet, refl.text, ts.step, 0});
            }
        }
    }

    result.score = score(state);
    result.outcome = state.done ? AttemptOutcome::Completed : AttemptOutcome::StepCapReached;
    return result;
}

EpisodeResult run_episode(const AttemptContext& ctx) {
    check_context(ctx);
    ctx.policy->validate();
    ctx.limits.validate();
    const PolicySpec& policy = *ctx.policy;
    const TaskInstance& instance = *ctx.instance;

    EpisodeResult episode;
    episode.task_id = instance.task_id;
    episode.variation = instance.variation;
    episode.policy = policy.display_name();
    episode.kind = policy.kind;
    episode.seed = ctx.seed;

    MemoryStore memory;
    const int max_attempts = keeps_memory(policy.kind) ? ctx.limits.max_attempts : 1;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        AttemptResult result = run_attempt(ctx, memory, attempt);
        if (result.score < 100 && keeps_memory(policy.kind)) {
            Reflection refl = reflect_sour(policy, *ctx.prompts, instance.goal_text, result.initial_observation,
                                           result.steps, memory.context_view(instance.task_id, policy.memory_budget),
                                           attempt, result.score, *ctx.backend,
                                           tag_for(ctx, attempt, result.env_steps) + "/sour");
            memory.record_sour(refl.text, {instance.task_id, attempt, result.env_steps});
            TrajectoryStep rs;
            rs.step = result.env_steps;
            rs.kind = StepKind::ReflectionSour;
            rs.text_in = refl.prompt_digest;
            rs.text_out = refl.text;
            rs.score = result.score;
            rs.degenerate = refl.degenerate;
            result.usage.prompt_tokens += refl.usage.prompt_tokens;
            result.usage.completion_tokens += refl.usage.completion_tokens;
            result.steps.push_back(rs);
            ++result.sour_reflections;
            if (ctx.observer) {
                ctx.observer->on_step(attempt, rs);
                ctx.observer->on_memory(attempt,
                                        {MemoryEvent::Type::RecordSour, Valence::Sour, refl.text, result.env_steps, 0});
            }
        }
        if (keeps_memory(policy.kind)) {
            const std::size_t moved = memory.end_attempt(result.outcome);
            if (ctx.observer) {
                ctx.observer->on_memory(attempt, {MemoryEvent::Type::Flush, std::nullopt, "", result.env_steps, moved});
            }
        }
        if (ctx.observer) ctx.observer->on_attempt_end(result);
        episode.best_score = std::max(episode.best_score, result.score);
        episode.final_score = result.score;
        const bool perfect = result.score == 100;
        episode.attempts.push_back(std::move(result));
        if (perfect) break;
    }
    return episode;
}

}  // namespace tbg
