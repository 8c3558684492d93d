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
#include <fstream>
#include <sstream>

#include "tbg/harness.hpp"

namespace tbg {
namespace {

using json = nlohmann::json;

template <typename T>
T field(const json& record, const char* key, std::size_t line) {
    if (!record.contains(key)) {
        throw LogSchemaError("line " + std::to_string(line) + ": missing field '" + key + "'");
    }
    try {
        return record.at(key).get<T>();
    } catch (const json::exception&) {
        throw LogSchemaError("line " + std::to_string(line) + ": field '" + key + "' has the wrong type");
    }
}

json step_to_json(int attempt, const TrajectoryStep& s) {
    return {{"type", "step"},
            {"attempt", attempt},
            {"step", s.step},
            {"kind", to_string(s.kind)},
            {"text_in", s.text_in},
            {"text_out", s.text_out},
            {"command", s.command},
            {"observation", s.observation},
            {"reward_delta", s.reward_delta},
            {"score", s.score},
            {"rejected", s.rejected},
            {"fallback", s.fallback},
            {"degenerate", s.degenerate}};
}

AttemptOutcome parse_outcome(const std::string& text, std::size_t line) {
    for (auto o : {AttemptOutcome::Completed, AttemptOutcome::StepCapReached, AttemptOutcome::Failed}) {
        if (to_string(o) == text) return o;
    }
    throw LogSchemaError("line " + std::to_string(line) + ": unknown outcome '" + text + "'");
}

}  // namespace

TrajectoryLogger::TrajectoryLogger(std::ostream& out, const Header& h) : out_(out) {
    write({{"type", "header"},
           {"schema_version", kLogSchemaVersion},
           {"task", h.key.task_id},
           {"variation", h.key.variation},
           {"policy", h.key.policy},
           {"kind", h.kind},
           {"seed", h.key.seed},
           {"backend", h.backend},
           {"model", h.model},
           {"limits", {{"step_cap", h.limits.step_cap}, {"max_attempts", h.limits.max_attempts}, {"gamma", h.limits.gamma}}},
           {"goal", h.goal}});
}

void TrajectoryLogger::write(const json& record) {
    out_ << record.dump() << '\n';
    out_.flush();
    if (!out_) throw std::runtime_error("trajectory log write failed");
}

void TrajectoryLogger::on_attempt_start(int attempt, const std::string& initial_observation) {
    write({{"type", "attempt_start"}, {"attempt", attempt}, {"observation", initial_observation}});
}

void TrajectoryLogger::on_step(int attempt, const TrajectoryStep& step) { write(step_to_json(attempt, step)); }

void TrajectoryLogger::on_memory(int attempt, const MemoryEvent& event) {
    json j = {{"type", "memory"}, {"attempt", attempt}, {"event", to_string(event.type)}, {"step", event.step}};
    if (event.valence) j["valence"] = to_string(*event.valence);
    if (event.type == MemoryEvent::Type::Flush) {
        j["flushed"] = event.flushed;
    } else {
        j["text"] = event.text;
    }
    write(j);
}

void TrajectoryLogger::on_attempt_end(const AttemptResult& r) {
    write({{"type", "attempt_end"},
           {"attempt", r.attempt},
           {"score", r.score},
           {"outcome", to_string(r.outcome)},
           {"env_steps", r.env_steps},
           {"sweet_reflections", r.sweet_reflections},
           {"sour_reflections", r.sour_reflections},
           {"usage", {{"prompt_tokens", r.usage.prompt_tokens}, {"completion_tokens", r.usage.completion_tokens}}}});
}

void TrajectoryLogger::episode_end(const EpisodeResult& r) {
    TokenUsage total;
    for (const auto& a : r.attempts) {
        total.prompt_tokens += a.usage.prompt_tokens;
        total.completion_tokens += a.usage.completion_tokens;
    }
    write({{"type", "episode_end"},
           {"final_score", r.final_score},
           {"best_score", r.best_score},
           {"attempts", r.attempts.size()},
           {"usage", {{"prompt_tokens", total.prompt_tokens}, {"completion_tokens", total.completion_tokens}}}});
}

void TrajectoryLogger::error(const std::string& message) { write({{"type", "error"}, {"message", message}}); }

ReplayDivergence::ReplayDivergence(int attempt, int step, const std::string& field, const std::string& logged,
                                   const std::string& recomputed)
    : std::runtime_error("divergence at attempt " + std::to_string(attempt) + " step " + std::to_string(step) + " in " +
                         field + ": logged " + json(logged).dump() + ", engine produced " + json(recomputed).dump()),
      attempt_(attempt),
      step_(step),
      field_(field) {}

LoggedEpisode read_log(std::istream& in) {
    LoggedEpisode log;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error&) {
            throw LogSchemaError("line " + std::to_string(n) + ": not a JSON record");
        }
        if (!record.is_object() || !record.contains("type") || !record["type"].is_string()) {
            throw LogSchemaError("line " + std::to_string(n) + ": record without a type");
        }
        const std::string type = record["type"];
        if (n == 1) {
            if (type != "header") throw LogSchemaError("line 1: expected a header record");
            if (field<int>(record, "schema_version", n) != kLogSchemaVersion) {
                throw LogSchemaError("unsupported log schema version " + record["schema_version"].dump());
            }
            log.header = record;
            continue;
        }
        if (log.end || log.error) throw LogSchemaError("line " + std::to_string(n) + ": record after the end of the episode");
        if (type == "episode_end") {
            log.end = record;
        } else if (type == "error") {
            log.error = field<std::string>(record, "message", n);
        } else if (type == "attempt_start" || type == "step" || type == "memory" || type == "attempt_end") {
            log.records.push_back(record);
        } else {
            throw LogSchemaError("line " + std::to_string(n) + ": unknown record type '" + type + "'");
        }
    }
    if (n == 0 || log.header.is_null()) throw LogSchemaError("empty log");
    return log;
}

LoggedEpisode read_log_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LogSchemaError("cannot open log " + path.string());
    return read_log(in);
}

EpisodeResult replay_episode(const LoggedEpisode& log, const TaskCatalog& catalog, const TemplateSet& templates) {
    if (log.error) throw LogSchemaError("episode ended with an error: " + *log.error);
    if (!log.end) throw LogSchemaError("log is truncated: no episode_end record");

    EpisodeResult result;
    result.task_id = field<std::string>(log.header, "task", 1);
    result.variation = field<int>(log.header, "variation", 1);
    result.policy = field<std::string>(log.header, "policy", 1);
    result.seed = field<std::uint64_t>(log.header, "seed", 1);
    if (auto kind = parse_policy_kind(field<std::string>(log.header, "kind", 1))) result.kind = *kind;
    const TaskSpec& task = catalog.at(result.task_id);
    if (result.variation < 0 || result.variation >= task.variation_count()) {
        throw LogSchemaError("log names missing variation " + std::to_string(result.variation));
    }
    auto instance = task.instances.at(static_cast<std::size_t>(result.variation));

    std::optional<WorldState> state;
    AttemptResult current;
    bool in_attempt = false;
    std::size_t line = 1;
    for (const auto& rec : log.records) {
        ++line;
        const std::string type = rec["type"];
        if (type == "attempt_start") {
            if (in_attempt) throw LogSchemaError("line " + std::to_string(line) + ": attempt started twice");
            current = AttemptResult{};
            current.attempt = field<int>(rec, "attempt", line);
            if (current.attempt != static_cast<int>(result.attempts.size()) + 1) {
                throw LogSchemaError("line " + std::to_string(line) + ": attempts out of order");
            }
            auto [s, obs] = init_episode(instance, result.seed);
            current.initial_observation = field<std::string>(rec, "observation", line);
            if (obs.text != current.initial_observation) {
                throw ReplayDivergence(current.attempt, 0, "observation", current.initial_observation, obs.text);
            }
            state = std::move(s);
            in_attempt = true;
            continue;
        }
        if (!in_attempt) throw LogSchemaError("line " + std::to_string(line) + ": record outside an attempt");
        if (type == "step") {
            TrajectoryStep s;
            s.step = field<int>(rec, "step", line);
            const auto kind_text = field<std::string>(rec, "kind", line);
            auto kind = parse_step_kind(kind_text);
            if (!kind) throw LogSchemaError("line " + std::to_string(line) + ": unknown step kind '" + kind_text + "'");
            s.kind = *kind;
            s.text_in = field<std::string>(rec, "text_in", line);
            s.text_out = field<std::string>(rec, "text_out", line);
            s.command = field<std::string>(rec, "command", line);
            s.observation = field<std::string>(rec, "observation", line);
            s.reward_delta = field<int>(rec, "reward_delta", line);
            s.score = field<int>(rec, "score", line);
            s.rejected = field<std::vector<std::string>>(rec, "rejected", line);
            s.fallback = field<bool>(rec, "fallback", line);
            s.degenerate = field<bool>(rec, "degenerate", line);
            const bool acting = s.kind == StepKind::EnvAction || s.kind == StepKind::Think;
            const int expected_step = current.env_steps + (acting ? 1 : 0);
            if (s.step != expected_step) {
                throw ReplayDivergence(current.attempt, s.step, "step", std::to_string(s.step),
                                       std::to_string(expected_step));
            }
            if (s.kind == StepKind::EnvAction) {
                StepResult r = step_text(*state, s.command, templates);
                state = std::move(r.state);
                if (r.observation.text != s.observation) {
                    throw ReplayDivergence(current.attempt, s.step, "observation", s.observation, r.observation.text);
                }
                if (r.observation.reward_delta != s.reward_delta) {
                    throw ReplayDivergence(current.attempt, s.step, "reward_delta", std::to_string(s.reward_delta),
                                           std::to_string(r.observation.reward_delta));
                }
            } else if (s.kind == StepKind::Think && s.observation != kThinkObservation) {
                throw ReplayDivergence(current.attempt, s.step, "observation", s.observation,
                                       std::string(kThinkObservation));
            }
            if (score(*state) != s.score) {
                throw ReplayDivergence(current.attempt, s.step, "score", std::to_string(s.score),
                                       std::to_string(score(*state)));
            }
            if (acting) ++current.env_steps;
            if (s.kind == StepKind::ReflectionSweet) ++current.sweet_reflections;
            if (s.kind == StepKind::ReflectionSour) ++current.sour_reflections;
            current.steps.push_back(std::move(s));
        } else if (type == "attempt_end") {
            current.score = score(*state);
            current.outcome = state->done ? AttemptOutcome::Completed : AttemptOutcome::StepCapReached;
            const int logged_score = field<int>(rec, "score", line);
            if (logged_score != current.score) {
                throw ReplayDivergence(current.attempt, current.env_steps, "attempt score", std::to_string(logged_score),
                                       std::to_string(current.score));
            }
            const auto logged_outcome = parse_outcome(field<std::string>(rec, "outcome", line), line);
            if (logged_outcome != current.outcome) {
                throw ReplayDivergence(current.attempt, current.env_steps, "outcome",
                                       std::string(to_string(logged_outcome)), std::string(to_string(current.outcome)));
            }
            if (field<int>(rec, "env_steps", line) != current.env_steps) {
                throw ReplayDivergence(current.attempt, current.env_steps, "env_steps",
                                       std::to_string(field<int>(rec, "env_steps", line)),
                                       std::to_string(current.env_steps));
            }
            if (rec.contains("usage")) {
                current.usage.prompt_tokens = rec["usage"].value("prompt_tokens", 0);
                current.usage.completion_tokens = rec["usage"].value("completion_tokens", 0);
            }
            result.best_score = std::max(result.best_score, current.score);
            result.final_score = current.score;
            result.attempts.push_back(std::move(current));
            in_attempt = false;
        }
    }
    if (in_attempt) throw LogSchemaError("log is truncated: attempt without attempt_end");
    const auto& end = *log.end;
    if (field<std::size_t>(end, "attempts", line) != result.attempts.size() ||
        field<int>(end, "final_score", line) != result.final_score ||
        field<int>(end, "best_score", line) != result.best_score) {
        throw ReplayDivergence(static_cast<int>(result.attempts.size()), 0, "episode summary", end.dump(),
                               "final " + std::to_string(result.final_score) + ", best " +
                                   std::to_string(result.best_score));
    }
    return result;
}

}  // namespace tbg
