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
#include <fstream>
#include <set>

#include "tbg/harness.hpp"

namespace tbg {
namespace {

using json = nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (key == "api_key" || key == "apiKey" || key == "token") {
            throw ConfigError(where + ": credentials are read from " + std::string(kEnvApiKey) +
                              " only, never from the config file");
        }
        if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <typename T>
T get_as(const json& obj, const char* key, const std::string& where, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

PolicySpec policy_from_json(const json& j, const std::string& where) {
    check_keys(j,
               {"kind", "label", "prompt_set", "think_budget", "invalid_retry_limit", "memory_budget", "history_window",
                "sweet_window", "sour_trajectory_chars", "script", "model_id", "temperature", "max_output_tokens"},
               where);
    PolicySpec p;
    const auto kind_text = get_as<std::string>(j, "kind", where, "");
    auto kind = parse_policy_kind(kind_text);
    if (!kind) throw ConfigError(where + ".kind: unknown policy kind '" + kind_text + "'");
    p.kind = *kind;
    p.label = get_as<std::string>(j, "label", where, "");
    p.prompt_set = get_as<std::string>(j, "prompt_set", where, p.prompt_set);
    p.think_budget = get_as<int>(j, "think_budget", where, p.think_budget);
    p.invalid_retry_limit = get_as<int>(j, "invalid_retry_limit", where, p.invalid_retry_limit);
    p.memory_budget = get_as<std::size_t>(j, "memory_budget", where, p.memory_budget);
    p.history_window = get_as<std::size_t>(j, "history_window", where, p.history_window);
    p.sweet_window = get_as<std::size_t>(j, "sweet_window", where, p.sweet_window);
    p.sour_trajectory_chars = get_as<std::size_t>(j, "sour_trajectory_chars", where, p.sour_trajectory_chars);
    p.script = get_as<std::vector<std::string>>(j, "script", where, {});
    p.model_id = get_as<std::string>(j, "model_id", where, "");
    p.temperature = get_as<double>(j, "temperature", where, p.temperature);
    p.max_output_tokens = get_as<int>(j, "max_output_tokens", where, p.max_output_tokens);
    return p;
}

json policy_to_json(const PolicySpec& p) {
    json j = {{"kind", to_string(p.kind)},
              {"prompt_set", p.prompt_set},
              {"think_budget", p.think_budget},
              {"invalid_retry_limit", p.invalid_retry_limit},
              {"memory_budget", p.memory_budget},
              {"history_window", p.history_window},
              {"sweet_window", p.sweet_window},
              {"sour_trajectory_chars", p.sour_trajectory_chars},
              {"temperature", p.temperature},
              {"max_output_tokens", p.max_output_tokens}};
    if (!p.label.empty()) j["label"] = p.label;
    if (!p.script.empty()) j["script"] = p.script;
    if (!p.model_id.empty()) j["model_id"] = p.model_id;
    return j;
}

BackendSpec backend_from_json(const json& j) {
    const std::string where = "backend";
    check_keys(j, {"type", "queue", "rules", "transcript_dir", "model", "requests_per_minute", "timeout_ms", "max_retries"},
               where);
    BackendSpec b;
    const auto type = get_as<std::string>(j, "type", where, "scripted");
    if (type == "scripted") {
        b.type = BackendSpec::Type::Scripted;
    } else if (type == "replay") {
        b.type = BackendSpec::Type::Replay;
    } else if (type == "http") {
        b.type = BackendSpec::Type::Http;
    } else {
        throw ConfigError("backend.type: unknown backend '" + type + "'");
    }
    b.queue = get_as<std::vector<std::string>>(j, "queue", where, {});
    if (j.contains("rules")) {
        if (!j["rules"].is_array()) throw ConfigError("backend.rules: expected an array");
        for (std::size_t i = 0; i < j["rules"].size(); ++i) {
            const std::string rw = "backend.rules[" + std::to_string(i) + "]";
            check_keys(j["rules"][i], {"pattern", "replies"}, rw);
            b.rules.push_back({get_as<std::string>(j["rules"][i], "pattern", rw, ""),
                               get_as<std::vector<std::string>>(j["rules"][i], "replies", rw, {})});
        }
    }
    b.transcript_dir = get_as<std::string>(j, "transcript_dir", where, "");
    b.model = get_as<std::string>(j, "model", where, "");
    if (j.contains("requests_per_minute")) b.requests_per_minute = get_as<int>(j, "requests_per_minute", where, 0);
    if (j.contains("timeout_ms")) b.timeout_ms = get_as<int>(j, "timeout_ms", where, 0);
    if (j.contains("max_retries")) b.max_retries = get_as<int>(j, "max_retries", where, 0);
    return b;
}

}  // namespace

TaskCatalog::TaskCatalog() {
    for (const auto& task : bundled_suite()) tasks_.emplace(task.id, task);
}

void TaskCatalog::add(TaskSpec task) {
    const std::string id = task.id;
    tasks_.insert_or_assign(id, std::move(task));
}

void TaskCatalog::add_file(const std::filesystem::path& path) { add(load_task_file(path)); }

const TaskSpec& TaskCatalog::at(const std::string& id) const {
    auto it = tasks_.find(id);
    if (it == tasks_.end()) throw ConfigError("unknown task '" + id + "'");
    return it->second;
}

std::vector<std::string> TaskCatalog::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, task] : tasks_) out.push_back(id);
    return out;
}

std::string_view to_string(BackendSpec::Type type) {
    switch (type) {
    case BackendSpec::Type::Scripted: return "scripted";
    case BackendSpec::Type::Replay: return "replay";
    case BackendSpec::Type::Http: return "http";
    }
    return "scripted";
}

std::string BackendSpec::model_label() const {
    if (!model.empty()) return model;
    if (type == Type::Http) {
        if (const char* env = std::getenv(kEnvModel); env != nullptr && *env != '\0') return env;
        return "gpt-4o";
    }
    return std::string(to_string(type));
}

SuiteConfig SuiteConfig::from_json(const json& doc) {
    check_keys(doc,
               {"schema_version", "tasks", "task_files", "policies", "backend", "limits", "seeds", "output_dir",
                "parallelism", "record_transcripts"},
               "config");
    SuiteConfig c;
    c.schema_version = get_as<int>(doc, "schema_version", "config", 0);
    if (c.schema_version != kConfigSchemaVersion) {
        throw ConfigError("config.schema_version: expected " + std::to_string(kConfigSchemaVersion));
    }
    if (!doc.contains("tasks") || !doc["tasks"].is_array()) throw ConfigError("config.tasks: expected an array");
    for (std::size_t i = 0; i < doc["tasks"].size(); ++i) {
        const auto& t = doc["tasks"][i];
        const std::string where = "tasks[" + std::to_string(i) + "]";
        if (t.is_string()) {
            c.tasks.push_back({t.get<std::string>(), {}});
        } else {
            check_keys(t, {"id", "variations"}, where);
            c.tasks.push_back({get_as<std::string>(t, "id", where, ""), get_as<std::vector<int>>(t, "variations", where, {})});
        }
    }
    for (const auto& f : get_as<std::vector<std::string>>(doc, "task_files", "config", {})) c.task_files.emplace_back(f);
    if (!doc.contains("policies") || !doc["policies"].is_array()) throw ConfigError("config.policies: expected an array");
    for (std::size_t i = 0; i < doc["policies"].size(); ++i) {
        c.policies.push_back(policy_from_json(doc["policies"][i], "policies[" + std::to_string(i) + "]"));
    }
    if (doc.contains("backend")) c.backend = backend_from_json(doc["backend"]);
    if (doc.contains("limits")) {
        const auto& l = doc["limits"];
        check_keys(l, {"step_cap", "max_attempts", "gamma"}, "limits");
        c.limits.step_cap = get_as<int>(l, "step_cap", "limits", c.limits.step_cap);
        c.limits.max_attempts = get_as<int>(l, "max_attempts", "limits", c.limits.max_attempts);
        c.limits.gamma = get_as<double>(l, "gamma", "limits", c.limits.gamma);
    }
    c.seeds = get_as<std::vector<std::uint64_t>>(doc, "seeds", "config", c.seeds);
    c.output_dir = get_as<std::string>(doc, "output_dir", "config", c.output_dir.string());
    c.parallelism = get_as<int>(doc, "parallelism", "config", c.parallelism);
    c.record_transcripts = get_as<bool>(doc, "record_transcripts", "config", c.record_transcripts);
    return c;
}

SuiteConfig SuiteConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(doc);
}

json SuiteConfig::to_json() const {
    json tasks_json = json::array();
    for (const auto& t : tasks) {
        if (t.variations.empty()) {
            tasks_json.push_back(t.task_id);
        } else {
            tasks_json.push_back({{"id", t.task_id}, {"variations", t.variations}});
        }
    }
    json files = json::array();
    for (const auto& f : task_files) files.push_back(f.string());
    json policies_json = json::array();
    for (const auto& p : policies) policies_json.push_back(policy_to_json(p));
    json b = {{"type", to_string(backend.type)}};
    if (!backend.queue.empty()) b["queue"] = backend.queue;
    if (!backend.rules.empty()) {
        b["rules"] = json::array();
        for (const auto& r : backend.rules) b["rules"].push_back({{"pattern", r.pattern}, {"replies", r.replies}});
    }
    if (!backend.transcript_dir.empty()) b["transcript_dir"] = backend.transcript_dir.string();
    if (!backend.model.empty()) b["model"] = backend.model;
    if (backend.requests_per_minute) b["requests_per_minute"] = *backend.requests_per_minute;
    if (backend.timeout_ms) b["timeout_ms"] = *backend.timeout_ms;
    if (backend.max_retries) b["max_retries"] = *backend.max_retries;
    return {{"schema_version", schema_version},
            {"tasks", tasks_json},
            {"task_files", files},
            {"policies", policies_json},
            {"backend", b},
            {"limits", {{"step_cap", limits.step_cap}, {"max_attempts", limits.max_attempts}, {"gamma", limits.gamma}}},
            {"seeds", seeds},
            {"output_dir", output_dir.string()},
            {"parallelism", parallelism},
            {"record_transcripts", record_transcripts}};
}

void SuiteConfig::validate() const {
    if (tasks.empty()) throw ConfigError("config.tasks: at least one task is required");
    if (policies.empty()) throw ConfigError("config.policies: at least one policy is required");
    if (seeds.empty()) throw ConfigError("config.seeds: at least one seed is required");
    if (parallelism < 1) throw ConfigError("config.parallelism: must be >= 1");
    limits.validate();
    std::set<std::string> labels;
    for (const auto& p : policies) {
        p.validate();
        if (!labels.insert(p.display_name()).second) {
            throw ConfigError("config.policies: duplicate policy label '" + p.display_name() + "'");
        }
    }
    if (backend.type == BackendSpec::Type::Replay && backend.transcript_dir.empty()) {
        throw ConfigError("backend.transcript_dir: required for the replay backend");
    }
    for (const auto& t : tasks) {
        if (t.task_id.empty()) throw ConfigError("config.tasks: empty task id");
    }
    std::error_code ec;
    std::filesystem::create_directories(output_dir, ec);
    const auto probe = output_dir / ".write-probe";
    {
        std::ofstream out(probe);
        if (!out || !(out << "ok") || !out.flush()) {
            throw ConfigError("config.output_dir: cannot write to " + output_dir.string());
        }
    }
    std::filesystem::remove(probe, ec);
}

std::string EpisodeKey::stem() const {
    return task_id + "-" + std::to_string(variation) + "-" + policy + "-" + std::to_string(seed);
}

std::vector<PlannedEpisode> plan_episodes(const SuiteConfig& config, const TaskCatalog& catalog) {
    std::vector<PlannedEpisode> plan;
    std::set<EpisodeKey> seen;
    for (const auto& selector : config.tasks) {
        const TaskSpec& task = catalog.at(selector.task_id);
        std::vector<int> variations = selector.variations;
        if (variations.empty()) {
            for (int v = 0; v < task.variation_count(); ++v) variations.push_back(v);
        }
        for (int v : variations) {
            if (v < 0 || v >= task.variation_count()) {
                throw ConfigError("task " + task.id + ": no variation " + std::to_string(v));
            }
            for (std::size_t p = 0; p < config.policies.size(); ++p) {
                for (auto seed : config.seeds) {
                    EpisodeKey key{task.id, v, config.policies[p].display_name(), seed};
                    if (!seen.insert(key).second) continue;
                    plan.push_back({key, p, task.instances.at(static_cast<std::size_t>(v))});
                }
            }
        }
    }
    return plan;
}

std::filesystem::path log_path(const SuiteConfig& config, const EpisodeKey& key) {
    return config.output_dir / "logs" / (key.stem() + ".jsonl");
}

std::filesystem::path transcript_path(const std::filesystem::path& dir, const EpisodeKey& key) {
    return dir / (key.stem() + ".transcript.jsonl");
}

}  // namespace tbg
