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
#ifndef TBG_PARSER_HPP
#define TBG_PARSER_HPP

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "tbg/types.hpp"
#include "tbg/world.hpp"

namespace tbg {

struct TemplateToken {
    bool is_slot = false;
    // Literal word (lower case) or slot name.
    std::string text;
    SlotType slot_type = SlotType::Entity;
};

struct ActionTemplate {
    std::string id;
    Verb verb = Verb::Wait;
    std::string pattern;
    std::vector<TemplateToken> tokens;

    std::size_t arity() const;
    std::size_t literal_count() const;
    std::vector<SlotType> slot_types() const;
};

// Compiles "move {entity} to {container}" style patterns. Slots are
// `{type}` or `{name:type}`; throws ConfigError on malformed patterns.
ActionTemplate make_template(std::string id, Verb verb, std::string pattern);

class TemplateSet {
public:
    TemplateSet() = default;
    explicit TemplateSet(std::vector<ActionTemplate> templates);

    const std::vector<ActionTemplate>& all() const { return templates_; }
    const ActionTemplate& at(const std::string& id) const;
    const ActionTemplate* find(const std::string& id) const;
    // One line per template, for prompts.
    std::string describe() const;

private:
    std::vector<ActionTemplate> templates_;
};

inline constexpr int kTemplateFormatVersion = 1;

TemplateSet load_templates(const nlohmann::json& document);
// The template set bundled with the task catalog.
const TemplateSet& default_templates();

struct Command {
    std::string template_id;
    std::vector<std::string> slot_texts;

    bool operator==(const Command&) const = default;
};

struct ParseError {
    enum class Kind { Unrecognized, Ambiguous };
    Kind kind = Kind::Unrecognized;
    std::string input;
    std::vector<std::string> candidates;

    std::string message() const;
};

struct GroundingError {
    enum class Kind { UnknownObject, AmbiguousObject, ArityMismatch };
    Kind kind = Kind::UnknownObject;
    std::string phrase;
    std::vector<std::string> candidates;

    std::string message() const;
};

using ParseResult = std::variant<Command, ParseError>;
using GroundResult = std::variant<GroundedAction, GroundingError>;

ParseResult parse(std::string_view text, const TemplateSet& templates);
GroundResult ground(const Command& command, const WorldState& state, const TemplateSet& templates);
std::string render(const GroundedAction& action, const WorldState& state, const TemplateSet& templates);

// Resolve a slot phrase against the visible scope.
std::variant<std::string, GroundingError> resolve_phrase(std::string_view phrase, SlotType type,
                                                         const WorldState& state);

// Parse and ground in one go; on failure returns the error text.
std::variant<GroundedAction, std::string> interpret(std::string_view text, const WorldState& state,
                                                    const TemplateSet& templates);

// Every grounding of every template over the visible scope, unfiltered.
std::vector<GroundedAction> enumerate_groundings(const WorldState& state, const TemplateSet& templates);

// Dry-run definition: actions whose step changes the state (ignoring the step
// counter), ordered by canonical text.
std::vector<GroundedAction> admissible_actions(const WorldState& state, const TemplateSet& templates);

// Per-template preconditions; must agree with the dry-run definition.
bool is_admissible_fast(const WorldState& state, const GroundedAction& action);
std::vector<GroundedAction> admissible_actions_fast(const WorldState& state, const TemplateSet& templates);

// Free-text step: parse and ground errors become an explanatory observation
// and still consume a step.
StepResult step_text(const WorldState& state, std::string_view text, const TemplateSet& templates);

// Lower-cases and collapses whitespace.
std::string normalize_command(std::string_view text);

}  // namespace tbg

#endif  // TBG_PARSER_HPP
