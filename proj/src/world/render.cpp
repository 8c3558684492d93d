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
#include <sstream>

#include "tbg/world.hpp"

namespace tbg {

namespace {

std::string with_article(const Entity& e) {
    if (e.kind == EntityKind::Substance && e.article.empty()) return "a substance called " + e.name;
    if (e.article == "-") return e.name;
    if (!e.article.empty()) return e.article + " " + e.name;
    const char first = e.name.empty() ? 'x' : e.name[0];
    const bool vowel = first == 'a' || first == 'e' || first == 'i' || first == 'o' || first == 'u';
    return (vowel ? "an " : "a ") + e.name;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace

std::string describe_entity(const WorldState& state, const std::string& entity_id) {
    const Entity& e = state.entity(entity_id);
    std::vector<std::string> notes;
    if (e.kind == EntityKind::Device) notes.emplace_back(e.active.value_or(false) ? "turned on" : "turned off");
    if (e.can_hold()) {
        if (!e.is_open()) {
            notes.emplace_back("closed");
        } else if (e.contents.empty()) {
            notes.emplace_back("containing nothing");
        } else {
            std::vector<std::string> inner;
            for (const auto& c : e.contents) inner.push_back(describe_entity(state, c));
            notes.push_back("containing " + join(inner, ", "));
        }
    }
    std::string text = with_article(e);
    if (!notes.empty()) text += " (" + join(notes, ", ") + ")";
    return text;
}

Observation look_around(const WorldState& state) {
    const Room& room = state.current_room();
    std::ostringstream out;
    out << "This room is called the " << room.name << ". In it, you see:\n";
    for (const auto& id : room.entities) out << '\t' << describe_entity(state, id) << '\n';
    out << "You also see:";
    for (const auto& [other, door] : room.connections) {
        out << "\n\tA door to the " << state.rooms.at(other).name << (door.open ? " (open)" : " (closed)");
    }
    Observation obs;
    obs.text = out.str();
    return obs;
}

std::string render_inventory(const WorldState& state) {
    if (state.inventory.empty()) return "Your inventory is empty.";
    std::string text = "In your inventory, you see:";
    for (const auto& id : state.inventory) text += "\n\t" + describe_entity(state, id);
    return text;
}

}  // namespace tbg
