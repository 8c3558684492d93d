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
#include "tbg/parser.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "tbg_bundled_data.hpp"

namespace tbg {

namespace {

// Caps the number of slot splits tracked per template; beyond two the input
// is ambiguous anyway.
constexpr std::size_t kMaxSplits = 8;

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) words.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

std::string lower(std::string_view text) {
    std::string out(text);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string join(const std::vector<std::string>& words, std::size_t from, std::size_t to, const char* sep = " ") {
    std::string out;
    for (std::size_t i = from; i < to; ++i) {
        if (i > from) out += sep;
        out += words[i];
    }
    return out;
}

std::optional<SlotType> slot_type_named(std::string_view name) {
    if (name == "room") return SlotType::Room;
    if (name == "entity") return SlotType::Entity;
    if (name == "device") return SlotType::Device;
    if (name == "container") return SlotType::Container;
    return std::nullopt;
}

using Span = std::pair<std::size_t, std::size_t>;

void match_template(const ActionTemplate& tpl, const std::vector<std::string>& words, std::size_t pi, std::size_t wi,
                    std::vector<Span>& spans, std::vector<std::vector<Span>>& out) {
    if (out.size() >= kMaxSplits) return;
    if (pi == tpl.tokens.size()) {
        if (wi == words.size()) out.push_back(spans);
        return;
    }
    const TemplateToken& tok = tpl.tokens[pi];
    if (!tok.is_slot) {
        if (wi < words.size() && words[wi] == tok.text) match_template(tpl, words, pi + 1, wi + 1, spans, out);
        return;
    }
    // Each remaining literal needs at least one word.
    std::size_t reserve = 0;
    for (std::size_t k = pi + 1; k < tpl.tokens.size(); ++k) ++reserve;
    for (std::size_t end = wi + 1; end + reserve <= words.size(); ++end) {
        spans.emplace_back(wi, end);
        match_template(tpl, words, pi + 1, end, spans, out);
        spans.pop_back();
        if (out.size() >= kMaxSplits) return;
    }
}

bool contains_run(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > hay.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) return true;
    }
    return false;
}

struct Candidate {
    std::string id;
    std::string name;  // lower case
};

std::variant<std::string, GroundingError> pick(const std::string& phrase, const std::vector<Candidate>& pool) {
    std::vector<const Candidate*> exact;
    for (const auto& c : pool) {
        if (c.name == phrase) exact.push_back(&c);
    }
    auto ambiguous = [&](const std::vector<const Candidate*>& hits) {
        GroundingError err{GroundingError::Kind::AmbiguousObject, phrase, {}};
        for (const auto* h : hits) err.candidates.push_back(h->name);
        std::sort(err.candidates.begin(), err.candidates.end());
        return err;
    };
    if (exact.size() == 1) return exact.front()->id;
    if (exact.size() > 1) return ambiguous(exact);

    const auto needle = split_words(phrase);
    std::vector<const Candidate*> partial;
    for (const auto& c : pool) {
        if (contains_run(split_words(c.name), needle)) partial.push_back(&c);
    }
    if (partial.size() == 1) return partial.front()->id;
    if (partial.size() > 1) return ambiguous(partial);
    return GroundingError{GroundingError::Kind::UnknownObject, phrase, {}};
}

bool fits(const Entity& e, SlotType type) {
    switch (type) {
        case SlotType::Device:
            return e.kind == EntityKind::Device;
        case SlotType::Container:
            return e.can_hold();
        default:
            return true;
    }
}

std::vector<Candidate> entity_pool(const WorldState& state, SlotType type) {
    std::vector<Candidate> pool;
    for (const auto& id : visible_entities(state)) {
        const Entity& e = state.entity(id);
        if (fits(e, type)) pool.push_back({id, lower(e.name)});
    }
    return pool;
}

std::vector<std::string> slot_candidates(const WorldState& state, SlotType type) {
    std::vector<std::string> ids;
    if (type == SlotType::Room) {
        for (const auto& [room, _] : state.current_room().connections) ids.push_back(room);
        return ids;
    }
    for (const auto& c : entity_pool(state, type)) ids.push_back(c.id);
    return ids;
}

}  // namespace

std::string normalize_command(std::string_view text) {
    const auto words = split_words(text);
    return lower(join(words, 0, words.size()));
}

std::size_t ActionTemplate::arity() const {
    return static_cast<std::size_t>(std::count_if(tokens.begin(), tokens.end(), [](const auto& t) { return t.is_slot; }));
}

std::size_t ActionTemplate::literal_count() const { return tokens.size() - arity(); }

std::vector<SlotType> ActionTemplate::slot_types() const {
    std::vector<SlotType> types;
    for (const auto& t : tokens) {
        if (t.is_slot) types.push_back(t.slot_type);
    }
    return types;
}

ActionTemplate make_template(std::string id, Verb verb, std::string pattern) {
    ActionTemplate tpl;
    tpl.id = std::move(id);
    tpl.verb = verb;
    tpl.pattern = std::move(pattern);
    std::set<std::string> slot_names;
    for (const auto& word : split_words(tpl.pattern)) {
        TemplateToken tok;
        if (word.size() >= 2 && word.front() == '{' && word.back() == '}') {
            std::string inner = word.substr(1, word.size() - 2);
            auto colon = inner.find(':');
            std::string name = colon == std::string::npos ? inner : inner.substr(0, colon);
            std::string type = colon == std::string::npos ? inner : inner.substr(colon + 1);
            auto st = slot_type_named(type);
            if (!st) throw ConfigError("template " + tpl.id + ": unknown slot type '" + type + "'");
            if (!slot_names.insert(name).second) {
                throw ConfigError("template " + tpl.id + ": duplicate slot name '" + name + "'");
            }
            tok.is_slot = true;
            tok.text = name;
            tok.slot_type = *st;
        } else if (word.find('{') != std::string::npos || word.find('}') != std::string::npos) {
            throw ConfigError("template " + tpl.id + ": malformed token '" + word + "'");
        } else {
            tok.text = lower(word);
        }
        tpl.tokens.push_back(std::move(tok));
    }
    if (tpl.literal_count() == 0) throw ConfigError("template " + tpl.id + " has no literal token");
    return tpl;
}

TemplateSet::TemplateSet(std::vector<ActionTemplate> templates) : templates_(std::move(templates)) {
    std::set<std::string> ids;
    for (const auto& t : templates_) {
        if (!ids.insert(t.id).second) throw ConfigError("duplicate template id " + t.id);
    }
}

const ActionTemplate* TemplateSet::find(const std::string& id) const {
    for (const auto& t : templates_) {
        if (t.id == id) return &t;
    }
    return nullptr;
}

const ActionTemplate& TemplateSet::at(const std::string& id) const {
    if (const auto* t = find(id)) return *t;
    throw ConfigError("unknown template id " + id);
}

std::string TemplateSet::describe() const {
    std::string out;
    for (const auto& t : templates_) {
        if (!out.empty()) out += '\n';
        out += "- " + t.pattern;
    }
    return out;
}

TemplateSet load_templates(const nlohmann::json& doc) {
    if (!doc.is_object() || doc.value("format_version", 0) != kTemplateFormatVersion) {
        throw ConfigError("template file: expected format_version " + std::to_string(kTemplateFormatVersion));
    }
    if (!doc.contains("templates") || !doc["templates"].is_array()) throw ConfigError("template file: missing templates");
    std::vector<ActionTemplate> out;
    for (const auto& t : doc["templates"]) {
        if (!t.is_object() || !t.contains("id") || !t.contains("pattern")) {
            throw ConfigError("template file: each template needs an id and a pattern");
        }
        std::string id = t["id"].get<std::string>();
        auto verb = parse_verb(t.value("verb", id));
        if (!verb) throw ConfigError("template " + id + ": unknown verb");
        out.push_back(make_template(id, *verb, t["pattern"].get<std::string>()));
    }
    return TemplateSet(std::move(out));
}

const TemplateSet& default_templates() {
    static const TemplateSet set = load_templates(nlohmann::json::parse(bundled::file("templates.json")));
    return set;
}

std::string ParseError::message() const {
    if (kind == Kind::Unrecognized) return "No known action matches \"" + input + "\".";
    std::string out = "The command \"" + input + "\" is ambiguous between: ";
    return out + join(candidates, 0, candidates.size(), "; ") + ".";
}

std::string GroundingError::message() const {
    switch (kind) {
        case Kind::UnknownObject:
            return "There is no \"" + phrase + "\" here.";
        case Kind::AmbiguousObject:
            return "\"" + phrase + "\" could mean: " + join(candidates, 0, candidates.size(), ", ") + ".";
        default:
            return "The command has the wrong number of objects.";
    }
}

ParseResult parse(std::string_view text, const TemplateSet& templates) {
    const auto original = split_words(text);
    std::vector<std::string> words;
    words.reserve(original.size());
    for (const auto& w : original) words.push_back(lower(w));
    ParseError unrecognized{ParseError::Kind::Unrecognized, join(original, 0, original.size()), {}};
    if (words.empty()) return unrecognized;

    struct Hit {
        const ActionTemplate* tpl;
        std::vector<std::vector<Span>> splits;
    };
    std::vector<Hit> hits;
    std::size_t best = 0;
    for (const auto& tpl : templates.all()) {
        std::vector<Span> spans;
        std::vector<std::vector<Span>> splits;
        match_template(tpl, words, 0, 0, spans, splits);
        if (splits.empty()) continue;
        const std::size_t lits = tpl.literal_count();
        if (lits > best) {
            hits.clear();
            best = lits;
        }
        if (lits == best) hits.push_back({&tpl, std::move(splits)});
    }
    if (hits.empty()) return unrecognized;

    auto slot_texts = [&](const std::vector<Span>& split) {
        std::vector<std::string> out;
        for (const auto& [from, to] : split) out.push_back(join(original, from, to));
        return out;
    };
    if (hits.size() == 1 && hits.front().splits.size() == 1) {
        return Command{hits.front().tpl->id, slot_texts(hits.front().splits.front())};
    }
    ParseError err{ParseError::Kind::Ambiguous, unrecognized.input, {}};
    for (const auto& hit : hits) {
        for (const auto& split : hit.splits) {
            std::string rendering = hit.tpl->id;
            for (const auto& s : slot_texts(split)) rendering += " [" + s + "]";
            err.candidates.push_back(std::move(rendering));
        }
    }
    return err;
}

std::variant<std::string, GroundingError> resolve_phrase(std::string_view raw, SlotType type, const WorldState& state) {
    const std::string phrase = normalize_command(raw);
    if (type == SlotType::Room) {
        std::vector<Candidate> pool;
        for (const auto& [room, _] : state.current_room().connections) pool.push_back({room, lower(state.rooms.at(room).name)});
        return pick(phrase, pool);
    }
    const auto pool = entity_pool(state, type);
    for (const auto& c : pool) {
        if (c.name == phrase) return pick(phrase, pool);
    }

    // "<thing> in <holder>" narrows the search to one container or the inventory.
    const auto at = phrase.find(" in ");
    if (at != std::string::npos) {
        const std::string head = phrase.substr(0, at);
        const std::string holder = phrase.substr(at + 4);
        std::vector<std::string> inside;
        if (holder == kInventory) {
            inside = state.inventory;
        } else {
            auto resolved = resolve_phrase(holder, SlotType::Container, state);
            if (auto* err = std::get_if<GroundingError>(&resolved)) return *err;
            const Entity& box = state.entity(std::get<std::string>(resolved));
            if (box.is_open()) inside.assign(box.contents.begin(), box.contents.end());
        }
        std::vector<Candidate> narrowed;
        for (const auto& c : pool) {
            if (std::find(inside.begin(), inside.end(), c.id) == inside.end()) continue;
            if (head == "substance" && state.entity(c.id).kind == EntityKind::Substance) {
                narrowed.push_back({c.id, head});
            } else {
                narrowed.push_back(c);
            }
        }
        auto got = pick(head, narrowed);
        if (std::holds_alternative<std::string>(got)) return got;
        auto& err = std::get<GroundingError>(got);
        err.phrase = phrase;
        return err;
    }
    return pick(phrase, pool);
}

GroundResult ground(const Command& command, const WorldState& state, const TemplateSet& templates) {
    const ActionTemplate* tpl = templates.find(command.template_id);
    if (!tpl || tpl->arity() != command.slot_texts.size()) {
        return GroundingError{GroundingError::Kind::ArityMismatch, command.template_id, {}};
    }
    GroundedAction action{tpl->id, tpl->verb, {}, {}};
    const auto types = tpl->slot_types();
    for (std::size_t i = 0; i < types.size(); ++i) {
        auto got = resolve_phrase(command.slot_texts[i], types[i], state);
        if (auto* err = std::get_if<GroundingError>(&got)) return *err;
        action.bindings.push_back(std::get<std::string>(got));
    }
    action.canonical_text = render(action, state, templates);
    return action;
}

std::string render(const GroundedAction& action, const WorldState& state, const TemplateSet& templates) {
    const ActionTemplate& tpl = templates.at(action.template_id);
    std::vector<std::string> words;
    std::size_t slot = 0;
    for (const auto& tok : tpl.tokens) {
        if (!tok.is_slot) {
            words.push_back(tok.text);
            continue;
        }
        const std::string& id = action.bindings.at(slot++);
        if (tok.slot_type == SlotType::Room) {
            words.push_back(state.rooms.at(id).name);
        } else {
            words.push_back(state.entity(id).name);
        }
    }
    return join(words, 0, words.size());
}

std::variant<GroundedAction, std::string> interpret(std::string_view text, const WorldState& state,
                                                    const TemplateSet& templates) {
    auto parsed = parse(text, templates);
    if (auto* err = std::get_if<ParseError>(&parsed)) return err->message();
    auto grounded = ground(std::get<Command>(parsed), state, templates);
    if (auto* err = std::get_if<GroundingError>(&grounded)) return err->message();
    return std::get<GroundedAction>(std::move(grounded));
}

StepResult step_text(const WorldState& state, std::string_view text, const TemplateSet& templates) {
    auto resolved = interpret(text, state, templates);
    if (auto* action = std::get_if<GroundedAction>(&resolved)) return step(state, *action);
    return step(state, GroundedAction{"", Verb::Invalid, {}, std::get<std::string>(resolved)});
}

std::vector<GroundedAction> enumerate_groundings(const WorldState& state, const TemplateSet& templates) {
    std::vector<GroundedAction> out;
    for (const auto& tpl : templates.all()) {
        std::vector<std::vector<std::string>> choices;
        for (auto type : tpl.slot_types()) choices.push_back(slot_candidates(state, type));
        std::vector<std::size_t> idx(choices.size(), 0);
        if (std::any_of(choices.begin(), choices.end(), [](const auto& c) { return c.empty(); })) continue;
        while (true) {
            GroundedAction a{tpl.id, tpl.verb, {}, {}};
            for (std::size_t i = 0; i < choices.size(); ++i) a.bindings.push_back(choices[i][idx[i]]);
            a.canonical_text = render(a, state, templates);
            out.push_back(std::move(a));
            std::size_t k = 0;
            while (k < idx.size() && ++idx[k] == choices[k].size()) idx[k++] = 0;
            if (k == idx.size()) break;
        }
    }
    return out;
}

}  // namespace tbg
