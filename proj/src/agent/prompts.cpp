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
#include <regex>
#include <set>
#include <sstream>

#include "tbg/agent.hpp"
#include "tbg_bundled_data.hpp"

namespace tbg {
namespace {

struct PromptFile {
    const char* name;
    std::string PromptSet::*member;
    std::set<std::string> placeholders;
};

const std::vector<PromptFile>& prompt_files() {
    static const std::vector<PromptFile> files = {
        {"system.txt", &PromptSet::system, {"templates", "exemplars"}},
        {"act.txt", &PromptSet::act, {"goal", "memory", "attempt", "score", "trajectory"}},
        {"sweet.txt", &PromptSet::sweet, {"goal", "reward", "trajectory"}},
        {"sour.txt", &PromptSet::sour, {"goal", "attempt", "score", "memory", "trajectory"}},
        {"force_action.txt", &PromptSet::force_action, {}},
        {"invalid.txt", &PromptSet::invalid, {"output", "error"}},
        {"exemplars.txt", &PromptSet::exemplars, {}},
    };
    return files;
}

const std::regex& placeholder_pattern() {
    static const std::regex re(R"(\{([a-z_]+)\})");
    return re;
}

void check_placeholders(const std::string& origin, const std::string& text, const std::set<std::string>& allowed) {
    for (std::sregex_iterator it(text.begin(), text.end(), placeholder_pattern()), end; it != end; ++it) {
        const std::string key = (*it)[1];
        if (!allowed.contains(key)) {
            throw ConfigError("prompt file " + origin + ": unknown placeholder {" + key + "}");
        }
    }
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read prompt file " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// Prompt files end with a newline; the prompt itself should not.
std::string chomp(std::string text) {
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
}

}  // namespace

std::string fill_placeholders(std::string_view text, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '{') {
            const auto close = text.find('}', i + 1);
            if (close != std::string_view::npos) {
                auto it = values.find(std::string(text.substr(i + 1, close - i - 1)));
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += text[i++];
    }
    return out;
}

PromptSet PromptSet::load(const std::string& name_or_dir) {
    PromptSet set;
    const bool bundled = name_or_dir == "default";
    set.name = name_or_dir;
    for (const auto& file : prompt_files()) {
        std::string text;
        if (bundled) {
            text = bundled::file(std::string("prompts/default/") + file.name);
        } else {
            text = read_text(std::filesystem::path(name_or_dir) / file.name);
        }
        check_placeholders(file.name, text, file.placeholders);
        set.*file.member = chomp(std::move(text));
    }
    return set;
}

const PromptSet& PromptSet::bundled_default() {
    static const PromptSet set = load("default");
    return set;
}

std::string_view to_string(PolicyKind kind) {
    switch (kind) {
    case PolicyKind::React: return "react";
    case PolicyKind::Reflexion: return "reflexion";
    case PolicyKind::SweetSour: return "sweet_sour";
    case PolicyKind::SweetSourFailOnly: return "sweet_sour_fail_only";
    case PolicyKind::Scripted: return "scripted";
    }
    return "react";
}

std::optional<PolicyKind> parse_policy_kind(std::string_view text) {
    for (auto k : {PolicyKind::React, PolicyKind::Reflexion, PolicyKind::SweetSour, PolicyKind::SweetSourFailOnly,
                   PolicyKind::Scripted}) {
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

bool keeps_memory(PolicyKind kind) {
    return kind == PolicyKind::Reflexion || kind == PolicyKind::SweetSour || kind == PolicyKind::SweetSourFailOnly;
}

bool reflects_on_success(PolicyKind kind) { return kind == PolicyKind::SweetSour; }

std::string_view to_string(StepKind kind) {
    switch (kind) {
    case StepKind::EnvAction: return "env_action";
    case StepKind::Think: return "think";
    case StepKind::ReflectionSweet: return "reflection_sweet";
    case StepKind::ReflectionSour: return "reflection_sour";
    }
    return "env_action";
}

std::optional<StepKind> parse_step_kind(std::string_view text) {
    for (auto k : {StepKind::EnvAction, StepKind::Think, StepKind::ReflectionSweet, StepKind::ReflectionSour}) {
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

std::string_view to_string(MemoryEvent::Type type) {
    switch (type) {
    case MemoryEvent::Type::RecordSweet: return "record_sweet";
    case MemoryEvent::Type::RecordSour: return "record_sour";
    case MemoryEvent::Type::Flush: return "flush";
    }
    return "flush";
}

std::string PolicySpec::display_name() const { return label.empty() ? std::string(to_string(kind)) : label; }

void PolicySpec::validate() const {
    const std::string who = "policy " + display_name() + ": ";
    if (think_budget < 0) throw ConfigError(who + "think_budget must be >= 0");
    if (invalid_retry_limit < 1) throw ConfigError(who + "invalid_retry_limit must be >= 1");
    if (memory_budget < 1) throw ConfigError(who + "memory_budget must be >= 1");
    if (history_window < 1) throw ConfigError(who + "history_window must be >= 1");
    if (sweet_window < 1) throw ConfigError(who + "sweet_window must be >= 1");
    if (temperature < 0) throw ConfigError(who + "temperature must be >= 0");
    if (max_output_tokens < 1) throw ConfigError(who + "max_output_tokens must be >= 1");
    if (kind == PolicyKind::Scripted &&
        std::any_of(script.begin(), script.end(), [](const std::string& s) { return normalize_command(s).empty(); })) {
        throw ConfigError(who + "script contains an empty command");
    }
    const auto& label_chars = display_name();
    if (std::any_of(label_chars.begin(), label_chars.end(), [](char c) {
            return !(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.');
        })) {
        throw ConfigError(who + "label may only use letters, digits, '_' and '.'");
    }
}

void EpisodeLimits::validate() const {
    if (step_cap < 1) throw ConfigError("limits: step_cap must be >= 1");
    if (max_attempts < 1) throw ConfigError("limits: max_attempts must be >= 1");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("limits: gamma must be in [0, 1]");
}

}  // namespace tbg
