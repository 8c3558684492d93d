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
#ifndef TBG_WORLD_HPP
#define TBG_WORLD_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tbg/task.hpp"
#include "tbg/types.hpp"

namespace tbg {

// Heating and cooling rate applied per tick by active devices.
inline constexpr int kThermalStepC = 20;

// Full simulation state of one attempt. The task pointer is shared,
// read-only, and not part of state equality.
struct WorldState {
    std::shared_ptr<const TaskInstance> task;
    std::map<std::string, Room> rooms;
    std::map<std::string, Entity> entities;
    std::string agent_room;
    std::vector<std::string> inventory;
    std::optional<std::string> focus;
    int step = 0;
    int reward_points = 0;
    // Pending subgoals map to nullopt, completed ones to the step they completed at.
    std::map<std::string, std::optional<int>> subgoal_status;
    bool done = false;
    std::uint64_t rng_seed = 0;

    const Entity& entity(const std::string& id) const;
    Entity& entity(const std::string& id);
    const Room& current_room() const { return rooms.at(agent_room); }
};

// Equality over every field except the task pointer.
bool operator==(const WorldState& a, const WorldState& b);

// Equality ignoring the step counter; the admissibility comparison.
bool same_world(const WorldState& a, const WorldState& b);

struct Observation {
    std::string text;
    int reward_delta = 0;
    std::set<std::string> completed_subgoals;
    bool terminal = false;
};

struct StepResult {
    WorldState state;
    Observation observation;
    bool admissible = false;
};

struct SubgoalUpdate {
    std::set<std::string> newly_completed;
    int reward_delta = 0;
};

// Where an entity currently sits.
struct Location {
    enum class Kind { Room, Container, Inventory, Nowhere };
    Kind kind = Kind::Nowhere;
    std::string id;
};

Location locate(const WorldState& state, const std::string& entity_id);

// Chain of container ids enclosing an entity, innermost first.
std::vector<std::string> enclosing_containers(const WorldState& state, const std::string& entity_id);

// Top-level location after walking out of all containers.
Location outermost_location(const WorldState& state, const std::string& entity_id);

// Entities the agent can currently see or reach, sorted by id.
std::vector<std::string> visible_entities(const WorldState& state);

std::pair<WorldState, Observation> init_episode(const TaskSpec& task, int variation, std::uint64_t seed);
std::pair<WorldState, Observation> init_episode(std::shared_ptr<const TaskInstance> instance, std::uint64_t seed);

StepResult step(const WorldState& state, const GroundedAction& action);

Observation look_around(const WorldState& state);
std::string describe_entity(const WorldState& state, const std::string& entity_id);
std::string render_inventory(const WorldState& state);

WorldState tick_dynamics(WorldState state);
// Re-derives matter state and form names from temperatures without heating.
void settle_phases(WorldState& state);

bool evaluate(const Predicate& predicate, const WorldState& state);
SubgoalUpdate check_subgoals(WorldState& state);

int score(const WorldState& state);

// Checks the structural invariants; returns human-readable violations.
std::vector<std::string> check_invariants(const WorldState& state);

}  // namespace tbg

#endif  // TBG_WORLD_HPP
