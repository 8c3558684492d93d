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
#include "tbg/world.hpp"

#include <algorithm>
#include <random>

#include "engine_internal.hpp"

namespace tbg {

const Entity& WorldState::entity(const std::string& id) const {
    auto it = entities.find(id);
    if (it == entities.end()) throw std::out_of_range("unknown entity: " + id);
    return it->second;
}

Entity& WorldState::entity(const std::string& id) {
    auto it = entities.find(id);
    if (it == entities.end()) throw std::out_of_range("unknown entity: " + id);
    return it->second;
}

bool same_world(const WorldState& a, const WorldState& b) {
    return a.rooms == b.rooms && a.entities == b.entities && a.agent_room == b.agent_room &&
           a.inventory == b.inventory && a.focus == b.focus && a.reward_points == b.reward_points &&
           a.subgoal_status == b.subgoal_status && a.done == b.done && a.rng_seed == b.rng_seed;
}

bool operator==(const WorldState& a, const WorldState& b) { return a.step == b.step && same_world(a, b); }

Location locate(const WorldState& state, const std::string& entity_id) {
    if (std::find(state.inventory.begin(), state.inventory.end(), entity_id) != state.inventory.end()) {
        return {Location::Kind::Inventory, std::string(kInventory)};
    }
    for (const auto& [room_id, room] : state.rooms) {
        if (room.entities.count(entity_id)) return {Location::Kind::Room, room_id};
    }
    for (const auto& [id, e] : state.entities) {
        if (e.contents.count(entity_id)) return {Location::Kind::Container, id};
    }
    return {};
}

std::vector<std::string> enclosing_containers(const WorldState& state, const std::string& entity_id) {
    std::vector<std::string> chain;
    Location loc = locate(state, entity_id);
    while (loc.kind == Location::Kind::Container) {
        // Guard against malformed cyclic containment.
        if (std::find(chain.begin(), chain.end(), loc.id) != chain.end()) break;
        chain.push_back(loc.id);
        loc = locate(state, loc.id);
    }
    return chain;
}

Location outermost_location(const WorldState& state, const std::string& entity_id) {
    auto chain = enclosing_containers(state, entity_id);
    return locate(state, chain.empty() ? entity_id : chain.back());
}

std::vector<std::string> visible_entities(const WorldState& state) {
    std::set<std::string> seen;
    std::vector<std::string> frontier(state.inventory.begin(), state.inventory.end());
    auto room = state.rooms.find(state.agent_room);
    if (room != state.rooms.end()) frontier.insert(frontier.end(), room->second.entities.begin(), room->second.entities.end());
    while (!frontier.empty()) {
        std::string id = std::move(frontier.back());
        frontier.pop_back();
        if (!seen.insert(id).second) continue;
        auto it = state.entities.find(id);
        if (it == state.entities.end()) continue;
        const Entity& e = it->second;
        if (e.can_hold() && e.is_open()) frontier.insert(frontier.end(), e.contents.begin(), e.contents.end());
    }
    return {seen.begin(), seen.end()};
}

namespace detail {

bool is_visible(const WorldState& state, const std::string& entity_id) {
    auto visible = visible_entities(state);
    return std::binary_search(visible.begin(), visible.end(), entity_id);
}

bool is_adjacent(const WorldState& state, const std::string& room_id) {
    return state.current_room().connections.count(room_id) > 0;
}

bool contains_transitively(const WorldState& state, const std::string& outer, const std::string& inner) {
    auto chain = enclosing_containers(state, inner);
    return std::find(chain.begin(), chain.end(), outer) != chain.end();
}

void detach(WorldState& state, const std::string& entity_id) {
    auto& inv = state.inventory;
    inv.erase(std::remove(inv.begin(), inv.end(), entity_id), inv.end());
    for (auto& [_, room] : state.rooms) room.entities.erase(entity_id);
    for (auto& [_, e] : state.entities) e.contents.erase(entity_id);
}

std::string capitalize(std::string text) {
    if (!text.empty() && text[0] >= 'a' && text[0] <= 'z') text[0] = static_cast<char>(text[0] - 'a' + 'A');
    return text;
}

StepResult advance(const WorldState& state, const std::function<std::string(WorldState&)>& mutate) {
    if (state.done) throw EpisodeFinishedError("the episode is already finished");
    WorldState next = state;
    std::string message = mutate(next);
    next = tick_dynamics(std::move(next));
    next.step += 1;
    SubgoalUpdate update = check_subgoals(next);

    StepResult result;
    result.admissible = !same_world(state, next);
    result.observation.reward_delta = update.reward_delta;
    result.observation.completed_subgoals = std::move(update.newly_completed);
    result.observation.terminal = next.done;
    if (message.empty()) message = "Nothing happens.";
    if (next.done) message += "\nTask completed.";
    result.observation.text = std::move(message);
    result.state = std::move(next);
    return result;
}

}  // namespace detail

namespace {

using detail::capitalize;
using detail::is_adjacent;
using detail::is_visible;

const std::string& room_name(const WorldState& s, const std::string& id) { return s.rooms.at(id).name; }

std::string apply_room_action(WorldState& s, const GroundedAction& a) {
    if (a.bindings.size() != 1 || !s.rooms.count(a.bindings[0]) || !is_adjacent(s, a.bindings[0])) {
        return "You can't see a way there from here.";
    }
    const std::string& target = a.bindings[0];
    const std::string& name = room_name(s, target);
    DoorState& here = s.rooms.at(s.agent_room).connections.at(target);
    switch (a.verb) {
        case Verb::GoTo:
            if (!here.open) return "The door to the " + name + " is closed.";
            s.agent_room = target;
            return "You move to the " + name + ".";
        case Verb::OpenDoor: {
            if (here.open) return "The door is already open.";
            here.open = true;
            s.rooms.at(target).connections.at(s.agent_room).open = true;
            return "The door to the " + name + " is now open.";
        }
        case Verb::CloseDoor: {
            if (!here.open) return "The door is already closed.";
            here.open = false;
            s.rooms.at(target).connections.at(s.agent_room).open = false;
            return "The door to the " + name + " is now closed.";
        }
        default:
            return "Nothing happens.";
    }
}

std::string measure(const Entity& tool, const Entity& target) {
    if (tool.role != Role::Thermometer) return "Nothing happens.";
    if (!target.temperature) return "The " + tool.name + " can't measure the " + target.name + ".";
    return "The " + tool.name + " measures a temperature of " + std::to_string(*target.temperature) +
           " degrees Celsius.";
}

std::string move_into(WorldState& s, const std::string& item_id, const std::string& dest_id) {
    const Entity& item = s.entity(item_id);
    const Entity& dest = s.entity(dest_id);
    if (!item.portable) return "You can't move the " + item.name + ".";
    if (!dest.can_hold()) return "The " + dest.name + " can't hold things.";
    if (!dest.is_open()) return "The " + dest.name + " is closed.";
    if (item_id == dest_id || detail::contains_transitively(s, item_id, dest_id)) {
        return "You can't move the " + item.name + " into itself.";
    }
    if (dest.contents.count(item_id)) return "The " + item.name + " is already in the " + dest.name + ".";
    std::string message = "You move the " + item.name + " to the " + dest.name + ".";
    detail::detach(s, item_id);
    s.entity(dest_id).contents.insert(item_id);
    return message;
}

std::string apply_entity_action(WorldState& s, const GroundedAction& a) {
    for (const auto& id : a.bindings) {
        if (!s.entities.count(id) || !is_visible(s, id)) return "You don't see that here.";
    }
    auto arity_ok = [&](std::size_t n) { return a.bindings.size() == n; };
    if (!arity_ok(a.verb == Verb::MoveTo || a.verb == Verb::Use ? 2 : 1)) return "Nothing happens.";

    const std::string& id = a.bindings[0];
    Entity& e = s.entity(id);
    switch (a.verb) {
        case Verb::Open:
            if (!e.open) return "The " + e.name + " can't be opened.";
            if (*e.open) return "The " + e.name + " is already open.";
            e.open = true;
            return "The " + e.name + " is now open.";
        case Verb::Close:
            if (!e.open) return "The " + e.name + " can't be closed.";
            if (!*e.open) return "The " + e.name + " is already closed.";
            e.open = false;
            return "The " + e.name + " is now closed.";
        case Verb::PickUp: {
            if (!e.portable) return "You can't pick up the " + e.name + ".";
            if (locate(s, id).kind == Location::Kind::Inventory) return "The " + e.name + " is already in your inventory.";
            std::string message = "You move the " + e.name + " to the inventory.";
            detail::detach(s, id);
            s.inventory.push_back(id);
            return message;
        }
        case Verb::PutDown: {
            if (locate(s, id).kind != Location::Kind::Inventory) return "The " + e.name + " is not in your inventory.";
            std::string message = "You put down the " + e.name + ".";
            detail::detach(s, id);
            s.rooms.at(s.agent_room).entities.insert(id);
            return message;
        }
        case Verb::MoveTo:
            return move_into(s, id, a.bindings[1]);
        case Verb::FocusOn:
            if (s.focus == id) return "You are already focusing on the " + e.name + ".";
            s.focus = id;
            return "You focus on the " + e.name + ".";
        case Verb::Activate:
            if (e.kind != EntityKind::Device) return "The " + e.name + " can't be activated.";
            if (e.active.value_or(false)) return "The " + e.name + " is already activated.";
            e.active = true;
            return "The " + e.name + " is now activated.";
        case Verb::Deactivate:
            if (e.kind != EntityKind::Device) return "The " + e.name + " can't be deactivated.";
            if (!e.active.value_or(false)) return "The " + e.name + " is already deactivated.";
            e.active = false;
            return "The " + e.name + " is now deactivated.";
        case Verb::Use:
            return measure(e, s.entity(a.bindings[1]));
        case Verb::Examine:
            return capitalize(describe_entity(s, id)) + ".";
        default:
            return "Nothing happens.";
    }
}

std::string apply_action(WorldState& s, const GroundedAction& a) {
    switch (a.verb) {
        case Verb::LookAround:
            return look_around(s).text;
        case Verb::Inventory:
            return render_inventory(s);
        case Verb::Wait:
            return "You wait.";
        case Verb::GoTo:
        case Verb::OpenDoor:
        case Verb::CloseDoor:
            return apply_room_action(s, a);
        case Verb::Invalid:
            return a.canonical_text.empty() ? "That command is not recognized." : a.canonical_text;
        default:
            return apply_entity_action(s, a);
    }
}

}  // namespace

std::pair<WorldState, Observation> init_episode(const TaskSpec& task, int variation, std::uint64_t seed) {
    if (variation < 0 || variation >= task.variation_count()) {
        throw ConfigError("task " + task.id + " has no variation " + std::to_string(variation) + " (it has " +
                          std::to_string(task.variation_count()) + ")");
    }
    return init_episode(task.instances[static_cast<std::size_t>(variation)], seed);
}

std::pair<WorldState, Observation> init_episode(std::shared_ptr<const TaskInstance> instance, std::uint64_t seed) {
    if (!instance) throw ConfigError("no task instance");
    WorldState s;
    s.task = instance;
    s.rooms = instance->rooms;
    s.entities = instance->entities;
    s.inventory = instance->inventory;
    s.agent_room = instance->start_room;
    s.rng_seed = seed;
    if (!instance->decoys.entities.empty() && !instance->decoys.rooms.empty()) {
        std::mt19937_64 rng(seed);
        for (const auto& id : instance->decoys.entities) {
            const auto& room = instance->decoys.rooms[rng() % instance->decoys.rooms.size()];
            s.rooms.at(room).entities.insert(id);
        }
    }
    for (const auto& sg : instance->subgoals) s.subgoal_status[sg.id] = std::nullopt;
    settle_phases(s);

    Observation obs;
    obs.text = instance->goal_text + "\n\n" + look_around(s).text;
    return {std::move(s), std::move(obs)};
}

StepResult step(const WorldState& state, const GroundedAction& action) {
    return detail::advance(state, [&](WorldState& next) { return apply_action(next, action); });
}

void settle_phases(WorldState& state) {
    for (auto& [_, e] : state.entities) {
        if (!e.temperature || !e.phase_points) continue;
        const int t = *e.temperature;
        MatterState ms = t < e.phase_points->melt_c   ? MatterState::Solid
                         : t > e.phase_points->boil_c ? MatterState::Gas
                                                      : MatterState::Liquid;
        e.matter_state = ms;
        if (e.substance && state.task) {
            auto table = state.task->substances.find(*e.substance);
            if (table != state.task->substances.end()) {
                auto form = table->second.names.find(ms);
                if (form != table->second.names.end()) e.name = form->second;
            }
        }
    }
}

WorldState tick_dynamics(WorldState state) {
    std::vector<std::pair<std::string, int>> heat;
    std::vector<std::pair<std::string, std::string>> spawns;  // container, prototype
    for (const auto& [id, e] : state.entities) {
        if (e.kind != EntityKind::Device || !e.active.value_or(false)) continue;
        if (e.role == Role::Heater || e.role == Role::Cooler) {
            const int delta = e.role == Role::Heater ? kThermalStepC : -kThermalStepC;
            std::vector<std::string> frontier(e.contents.begin(), e.contents.end());
            std::set<std::string> seen;
            while (!frontier.empty()) {
                std::string cur = std::move(frontier.back());
                frontier.pop_back();
                if (!seen.insert(cur).second) continue;
                const Entity& inner = state.entity(cur);
                if (inner.temperature) heat.emplace_back(cur, delta);
                frontier.insert(frontier.end(), inner.contents.begin(), inner.contents.end());
            }
        } else if (e.role == Role::Faucet && e.supplies && !state.entities.count(*e.supplies) && state.task) {
            for (const auto& held : e.contents) {
                const Entity& vessel = state.entity(held);
                if (vessel.can_hold() && vessel.is_open()) {
                    spawns.emplace_back(held, *e.supplies);
                    break;
                }
            }
        }
    }
    for (const auto& [id, delta] : heat) *state.entity(id).temperature += delta;
    for (const auto& [vessel, proto_id] : spawns) {
        if (state.entities.count(proto_id)) continue;
        auto proto = state.task->prototypes.find(proto_id);
        if (proto == state.task->prototypes.end()) continue;
        state.entities.emplace(proto_id, proto->second);
        state.entity(vessel).contents.insert(proto_id);
    }
    settle_phases(state);
    return state;
}

bool evaluate(const Predicate& p, const WorldState& s) {
    using T = Predicate::Type;
    if (p.type == T::AllOf) {
        return std::all_of(p.all.begin(), p.all.end(), [&](const Predicate& c) { return evaluate(c, s); });
    }
    if (p.type == T::FocusIs) return s.focus && *s.focus == p.entity;
    auto it = s.entities.find(p.entity);
    if (it == s.entities.end()) return false;
    switch (p.type) {
        case T::EntityInContainer: {
            if (p.target == kInventory) {
                Location loc = p.transitive ? outermost_location(s, p.entity) : locate(s, p.entity);
                return loc.kind == Location::Kind::Inventory;
            }
            if (p.transitive) return detail::contains_transitively(s, p.target, p.entity);
            Location loc = locate(s, p.entity);
            return loc.kind == Location::Kind::Container && loc.id == p.target;
        }
        case T::EntityInRoom: {
            Location loc = outermost_location(s, p.entity);
            return loc.kind == Location::Kind::Room && loc.id == p.target;
        }
        case T::MatterStateIs:
            return it->second.matter_state == p.state;
        case T::DeviceActive:
            return it->second.active.value_or(false);
        default:
            return false;
    }
}

SubgoalUpdate check_subgoals(WorldState& state) {
    SubgoalUpdate update;
    if (!state.task) return update;
    bool progressed = true;
    while (progressed) {
        progressed = false;
        for (const auto& sg : state.task->subgoals) {
            auto& status = state.subgoal_status[sg.id];
            if (status) continue;
            if (sg.requires_id && !state.subgoal_status[*sg.requires_id]) continue;
            if (!evaluate(sg.predicate, state)) continue;
            status = state.step;
            update.newly_completed.insert(sg.id);
            update.reward_delta += sg.points;
            progressed = true;
        }
    }
    state.reward_points += update.reward_delta;
    state.done = !state.subgoal_status.empty() &&
                 std::all_of(state.subgoal_status.begin(), state.subgoal_status.end(),
                             [](const auto& kv) { return kv.second.has_value(); });
    return update;
}

int score(const WorldState& state) {
    if (!state.task) return 0;
    const int total = state.task->total_points();
    if (total <= 0) return 0;
    return 100 * state.reward_points / total;
}

std::vector<std::string> check_invariants(const WorldState& s) {
    std::vector<std::string> problems;
    std::map<std::string, int> placements;
    for (const auto& id : s.inventory) ++placements[id];
    for (const auto& [room_id, room] : s.rooms) {
        for (const auto& id : room.entities) ++placements[id];
        for (const auto& [other, door] : room.connections) {
            auto o = s.rooms.find(other);
            if (o == s.rooms.end() || !o->second.connections.count(room_id)) {
                problems.push_back("door " + room_id + "->" + other + " has no reverse");
            } else if (o->second.connections.at(room_id).open != door.open) {
                problems.push_back("door " + room_id + "<->" + other + " state mismatch");
            }
        }
    }
    for (const auto& [id, e] : s.entities) {
        for (const auto& c : e.contents) ++placements[c];
        if (!e.contents.empty() && !e.can_hold()) problems.push_back(id + " holds contents but is not a container");
        if (e.temperature && e.phase_points && e.matter_state) {
            const int t = *e.temperature;
            MatterState want = t < e.phase_points->melt_c   ? MatterState::Solid
                               : t > e.phase_points->boil_c ? MatterState::Gas
                                                            : MatterState::Liquid;
            if (want != *e.matter_state) problems.push_back(id + " matter state inconsistent with temperature");
        }
    }
    for (const auto& [id, count] : placements) {
        if (!s.entities.count(id)) problems.push_back("placed id " + id + " is not an entity");
        if (count != 1) problems.push_back(id + " has " + std::to_string(count) + " locations");
    }
    for (const auto& [id, _] : s.entities) {
        if (!placements.count(id)) problems.push_back(id + " has no location");
    }
    if (s.focus && !s.entities.count(*s.focus)) problems.push_back("focus references unknown entity");
    if (!s.rooms.count(s.agent_room)) problems.push_back("agent room unknown");
    if (s.done) {
        for (const auto& [sg, status] : s.subgoal_status) {
            if (!status) problems.push_back("done with pending subgoal " + sg);
        }
    }
    return problems;
}

int TaskInstance::total_points() const {
    int total = 0;
    for (const auto& sg : subgoals) total += sg.points;
    return total;
}

const Subgoal* TaskInstance::find_subgoal(const std::string& id) const {
    for (const auto& sg : subgoals) {
        if (sg.id == id) return &sg;
    }
    return nullptr;
}

const TaskInstance& TaskSpec::instance(int variation) const {
    if (variation < 0 || variation >= variation_count()) {
        throw ConfigError("task " + id + " has no variation " + std::to_string(variation));
    }
    return *instances[static_cast<std::size_t>(variation)];
}

}  // namespace tbg
