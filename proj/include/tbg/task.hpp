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
#ifndef TBG_TASK_HPP
#define TBG_TASK_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tbg/types.hpp"

namespace tbg {

// Closed set of sub-goal conditions. AllOf holds the conjuncts in `all`.
struct Predicate {
    enum class Type { FocusIs, EntityInContainer, EntityInRoom, MatterStateIs, DeviceActive, AllOf };

    Type type = Type::FocusIs;
    std::string entity;
    // Container id (or "inventory") for EntityInContainer, room id for EntityInRoom.
    std::string target;
    MatterState state = MatterState::Solid;
    bool transitive = false;
    std::vector<Predicate> all;

    bool operator==(const Predicate&) const = default;
};

struct Subgoal {
    std::string id;
    std::string description;
    Predicate predicate;
    int points = 1;
    std::optional<std::string> requires_id;
};

struct SubstanceForms {
    PhasePoints points;
    std::map<MatterState, std::string> names;
};

struct DecoyPlacement {
    std::vector<std::string> entities;
    std::vector<std::string> rooms;
};

// One instantiated variation of a task: the concrete world template the
// engine starts from, plus the sub-goals scored against it.
struct TaskInstance {
    std::string task_id;
    int variation = 0;
    std::map<std::string, std::string> params;
    std::string goal_text;
    std::string start_room;
    std::map<std::string, Room> rooms;
    std::map<std::string, Entity> entities;
    std::vector<std::string> inventory;
    std::map<std::string, Entity> prototypes;
    std::map<std::string, SubstanceForms> substances;
    std::vector<Subgoal> subgoals;
    DecoyPlacement decoys;
    std::vector<std::string> solution;

    int total_points() const;
    const Subgoal* find_subgoal(const std::string& id) const;
};

struct TaskSpec {
    int format_version = 1;
    std::string id;
    // Goal text before parameter substitution.
    std::string goal_text;
    std::vector<std::shared_ptr<const TaskInstance>> instances;

    int variation_count() const { return static_cast<int>(instances.size()); }
    const TaskInstance& instance(int variation) const;
};

}  // namespace tbg

#endif  // TBG_TASK_HPP
