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

#include "../world/engine_internal.hpp"
#include "tbg/parser.hpp"

namespace tbg {

namespace {

bool by_text(const GroundedAction& a, const GroundedAction& b) { return a.canonical_text < b.canonical_text; }

// True when the tick alone would change the state, which makes every action
// (even a no-op) a state change.
bool tick_changes(const WorldState& state) { return !same_world(tick_dynamics(state), state); }

bool effect_changes(const WorldState& s, const GroundedAction& a) {
    using detail::is_adjacent;
    using detail::is_visible;
    switch (a.verb) {
        case Verb::LookAround:
        case Verb::Inventory:
        case Verb::Wait:
        case Verb::Invalid:
        case Verb::Use:
        case Verb::Examine:
            return false;
        case Verb::GoTo:
        case Verb::OpenDoor:
        case Verb::CloseDoor: {
            if (a.bindings.size() != 1 || !is_adjacent(s, a.bindings[0])) return false;
            const bool open = s.current_room().connections.at(a.bindings[0]).open;
            if (a.verb == Verb::CloseDoor) return open;
            return a.verb == Verb::GoTo ? open : !open;
        }
        default:
            break;
    }
    const std::size_t arity = a.verb == Verb::MoveTo || a.verb == Verb::Use ? 2 : 1;
    if (a.bindings.size() != arity) return false;
    for (const auto& id : a.bindings) {
        if (!s.entities.count(id) || !is_visible(s, id)) return false;
    }
    const Entity& e = s.entity(a.bindings[0]);
    switch (a.verb) {
        case Verb::Open:
            return e.open.has_value() && !*e.open;
        case Verb::Close:
            return e.open.value_or(false);
        case Verb::PickUp:
            return e.portable && locate(s, e.id).kind != Location::Kind::Inventory;
        case Verb::PutDown:
            return locate(s, e.id).kind == Location::Kind::Inventory;
        case Verb::MoveTo: {
            const Entity& dest = s.entity(a.bindings[1]);
            return e.portable && dest.can_hold() && dest.is_open() && e.id != dest.id &&
                   !detail::contains_transitively(s, e.id, dest.id) && !dest.contents.count(e.id);
        }
        case Verb::FocusOn:
            return s.focus != e.id;
        case Verb::Activate:
            return e.kind == EntityKind::Device && !e.active.value_or(false);
        case Verb::Deactivate:
            return e.kind == EntityKind::Device && e.active.value_or(false);
        default:
            return false;
    }
}

}  // namespace

std::vector<GroundedAction> admissible_actions(const WorldState& state, const TemplateSet& templates) {
    std::vector<GroundedAction> out;
    if (state.done) return out;
    for (auto& action : enumerate_groundings(state, templates)) {
        if (step(state, action).admissible) out.push_back(std::move(action));
    }
    std::stable_sort(out.begin(), out.end(), by_text);
    return out;
}

bool is_admissible_fast(const WorldState& state, const GroundedAction& action) {
    if (state.done) return false;
    return effect_changes(state, action) || tick_changes(state);
}

std::vector<GroundedAction> admissible_actions_fast(const WorldState& state, const TemplateSet& templates) {
    std::vector<GroundedAction> out;
    if (state.done) return out;
    const bool ticking = tick_changes(state);
    for (auto& action : enumerate_groundings(state, templates)) {
        if (ticking || effect_changes(state, action)) out.push_back(std::move(action));
    }
    std::stable_sort(out.begin(), out.end(), by_text);
    return out;
}

}  // namespace tbg
