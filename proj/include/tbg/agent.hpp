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
#ifndef TBG_AGENT_HPP
#define TBG_AGENT_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tbg/llm.hpp"
#include "tbg/memory.hpp"
#include "tbg/parser.hpp"
#include "tbg/task.hpp"
#include "tbg/world.hpp"

namespace tbg {

enum class PolicyKind { React, Reflexion, SweetSour, SweetSourFailOnly, Scripted };

std::string_view to_string(PolicyKind kind);
std::optional<PolicyKind> parse_policy_kind(std::string_view text);

// Reflexion and both Sweet&Sour variants keep memory across attempts.
bool keeps_memory(PolicyKind kind);
bool reflects_on_success(PolicyKind kind);

inline constexpr std::string_view kSolutionMacro = "$SOLUTION";
inline constexpr std::string_view kFallbackCommand = "look around";
inline constexpr std::string_view kThinkPrefix = "think:";
inline constexpr std::string_view kThinkObservation = "OK.";
inline constexpr std::string_view kDegenerateReflection = "(no reflection produced)";

// Text files with {name} placeholders.
struct PromptSet {
    std::string name;
    std::string system;
    std::string act;
    std::string sweet;
    std::string sour;
    std::string force_action;
    std::string invalid;
    std::string exemplars;

    // "default" selects the bundled set; anything else is a directory.
    // Unknown placeholders are a ConfigError.
    static PromptSet load(const std::string& name_or_dir);
    static const PromptSet& bundled_default();
};

// Replaces each {key} found in `values`; other text is left untouched.
std::string fill_placeholders(std::string_view text, const std::map<std::string, std::string>& values);

struct PolicySpec {
    PolicyKind kind = PolicyKind::React;
    // Column label in reports; defaults to the kind name.
    std::string label;
    std::string prompt_set = "default";
    int think_budget = 2;
    int invalid_retry_limit = 3;
    std::size_t memory_budget = kDefaultMemoryBudget;
    std::size_t history_window = 15;
    std::size_t sweet_window = 6;
    // Character budget for the sour trajectory; older steps are cut first.
    std::size_t sour_trajectory_chars = 12000;
    // Commands for the scripted kind, played in a cycle. "$SOLUTION" expands
    // to the variation's stored solution.
    std::vector<std::string> script;
    std::string model_id;
    double temperature = 0.0;
    int max_output_tokens = 256;

    std::string display_name() const;
    // Throws ConfigError.
    void validate() const;
};

struct EpisodeLimits {
    int step_cap = 150;
    int max_attempts = 4;
    // Reserved; scores are never discounted.
    double gamma = 1.0;

    void validate() const;
};

enum class StepKind { EnvAction, Think, ReflectionSweet, ReflectionSour };
std::string_view to_string(StepKind kind);
std::optional<StepKind> parse_step_kind(std::string_view text);

struct TrajectoryStep {
    // Environment steps taken so far in the attempt, this one included.
    // Reflections carry the count of the step they follow.
    int step = 0;
    StepKind kind = StepKind::EnvAction;
    // Digest of the request that produced text_out; empty without a backend.
    std::string text_in;
    std::string text_out;
    // The command sent to the engine, after cleanup or fallback.
    std::string command;
    std::string observation;
    int reward_delta = 0;
    int score = 0;
    // Rejected outputs before the accepted one.
    std::vector<std::string> rejected;
    bool fallback = false;
    bool degenerate = false;

    bool operator==(const TrajectoryStep&) const = default;
};

struct AttemptResult {
    int attempt = 1;
    std::string initial_observation;
    std::vector<TrajectoryStep> steps;
    int env_steps = 0;
    int score = 0;
    AttemptOutcome outcome = AttemptOutcome::StepCapReached;
    int sweet_reflections = 0;
    int sour_reflections = 0;
    TokenUsage usage;
};

struct EpisodeResult {
    std::string task_id;
    int variation = 0;
    std::string policy;
    PolicyKind kind = PolicyKind::React;
    std::uint64_t seed = 0;
    std::vector<AttemptResult> attempts;
    int final_score = 0;
    int best_score = 0;
};

struct MemoryEvent {
    enum class Type { RecordSweet, RecordSour, Flush };
    Type type = Type::RecordSweet;
    std::optional<Valence> valence;
    std::string text;
    int step = 0;
    std::size_t flushed = 0;
};
std::string_view to_string(MemoryEvent::Type type);

class EpisodeObserver {
public:
    virtual ~EpisodeObserver() = default;
    virtual void on_attempt_start(int /*attempt*/, const std::string& /*initial_observation*/) {}
    virtual void on_step(int /*attempt*/, const TrajectoryStep& /*step*/) {}
    virtual void on_memory(int /*attempt*/, const MemoryEvent& /*event*/) {}
    virtual void on_attempt_end(const AttemptResult& /*result*/) {}
};

struct Decision {
    enum class Kind { EnvAction, Think };
    Kind kind = Kind::EnvAction;
    std::string text;
    std::string raw_output;
    std::string prompt_digest;
    std::vector<std::string> rejected;
    bool fallback = false;
    TokenUsage usage;
};

// Everything a prompt is built from at one decision point.
struct DecisionContext {
    const WorldState* state = nullptr;
    const TemplateSet* templates = nullptr;
    std::string goal;
    std::string initial_observation;
    std::vector<TrajectoryStep> history;
    std::vector<std::string> memory;
    int attempt = 1;
    int consecutive_thinks = 0;
    std::string request_tag;
};

struct Reflection {
    std::string text;
    bool degenerate = false;
    std::string prompt_digest;
    TokenUsage usage;
};

// Strips prompt markers, quotes and trailing lines from a model reply.
std::string clean_model_output(std::string_view output);

// "> command\nobservation" per environment or think step.
std::string render_history(const std::string& initial_observation, const std::vector<TrajectoryStep>& steps,
                           std::size_t window);
std::string render_memory(const std::vector<std::string>& memory);

Decision decide(const PolicySpec& policy, const PromptSet& prompts, const DecisionContext& context,
                LlmBackend& backend);

Reflection reflect_sweet(const PolicySpec& policy, const PromptSet& prompts, const std::string& goal,
                         const std::vector<TrajectoryStep>& recent, int reward, LlmBackend& backend,
                         const std::string& request_tag);

Reflection reflect_sour(const PolicySpec& policy, const PromptSet& prompts, const std::string& goal,
                        const std::string& initial_observation, const std::vector<TrajectoryStep>& attempt_steps,
                        const std::vector<std::string>& memory, int attempt, int score, LlmBackend& backend,
                        const std::string& request_tag);

struct AttemptContext {
    std::shared_ptr<const TaskInstance> instance;
    std::uint64_t seed = 0;
    const PolicySpec* policy = nullptr;
    const PromptSet* prompts = nullptr;
    const TemplateSet* templates = nullptr;
    // May be null for the scripted kind.
    LlmBackend* backend = nullptr;
    EpisodeLimits limits;
    EpisodeObserver* observer = nullptr;
};

AttemptResult run_attempt(const AttemptContext& context, MemoryStore& memory, int attempt);

// Memory-keeping kinds get up to limits.max_attempts attempts; the rest get one.
EpisodeResult run_episode(const AttemptContext& context);

// The stored solution with "$SOLUTION" expanded, or the script itself.
std::vector<std::string> expand_script(const PolicySpec& policy, const TaskInstance& instance);

}  // namespace tbg

#endif  // TBG_AGENT_HPP
