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
#ifndef TBG_TYPES_HPP
#define TBG_TYPES_HPP

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tbg {

// Special location / container id used for the agent's inventory.
inline constexpr std::string_view kInventory = "inventory";

enum class EntityKind { Object, Substance, Device, Container, PortalFixture };
enum class MatterState { Solid, Liquid, Gas };

// Behaviour attached to an entity beyond its kind.
enum class Role { None, Heater, Cooler, Faucet, Thermometer };

struct PhasePoints {
    int melt_c = 0;
    int boil_c = 100;

    bool operator==(const PhasePoints&) const = default;
};

struct Entity {
    std::string id;
    std::string name;
    EntityKind kind = EntityKind::Object;
    bool portable = false;
    // Empty means "pick a/an from the name"; "-" means no article.
    std::string article;
    std::optional<int> temperature;
    std::optional<MatterState> matter_state;
    std::optional<PhasePoints> phase_points;
    // Key into the task's substance table; drives form renaming.
    std::optional<std::string> substance;
    std::optional<bool> active;
    // Absent on receptacles that cannot be closed.
    std::optional<bool> open;
    // Devices that can hold things (stove, sink, freezer).
    bool receptacle = false;
    Role role = Role::None;
    // Prototype id a faucet spawns into a held container.
    std::optional<std::string> supplies;
    std::set<std::string> contents;
    std::set<std::string> tags;

    bool can_hold() const { return kind == EntityKind::Container || receptacle; }
    bool is_open() const { return !open.has_value() || *open; }
    bool operator==(const Entity&) const = default;
};

struct DoorState {
    bool open = true;
    bool operator==(const DoorState&) const = default;
};

struct Room {
    std::string id;
    std::string name;
    std::map<std::string, DoorState> connections;
    // Top-level entities lying in the room.
    std::set<std::string> entities;

    bool operator==(const Room&) const = default;
};

enum class Verb {
    LookAround,
    Inventory,
    Wait,
    GoTo,
    OpenDoor,
    CloseDoor,
    Open,
    Close,
    PickUp,
    PutDown,
    MoveTo,
    FocusOn,
    Activate,
    Deactivate,
    Use,
    Examine,
    // Internal: an unparseable or ungroundable command; carries its error text.
    Invalid,
};

enum class SlotType { Room, Entity, Device, Container };

// A fully resolved action: template plus entity/room bindings.
struct GroundedAction {
    std::string template_id;
    Verb verb = Verb::Wait;
    std::vector<std::string> bindings;
    std::string canonical_text;

    bool operator==(const GroundedAction&) const = default;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EpisodeFinishedError : std::logic_error {
    using std::logic_error::logic_error;
};

std::string_view to_string(EntityKind kind);
std::string_view to_string(MatterState state);
std::string_view to_string(Role role);
std::string_view to_string(Verb verb);
std::optional<EntityKind> parse_entity_kind(std::string_view text);
std::optional<MatterState> parse_matter_state(std::string_view text);
std::optional<Role> parse_role(std::string_view text);
std::optional<Verb> parse_verb(std::string_view text);

}  // namespace tbg

#endif  // TBG_TYPES_HPP
