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
#include "tbg/types.hpp"

#include <array>
#include <utility>

namespace tbg {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view text) {
    for (const auto& [value, name] : table) {
        if (name == text) return value;
    }
    return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E value) {
    for (const auto& [v, name] : table) {
        if (v == value) return name;
    }
    return "?";
}

constexpr std::array<std::pair<EntityKind, std::string_view>, 5> kKinds{{
    {EntityKind::Object, "object"},
    {EntityKind::Substance, "substance"},
    {EntityKind::Device, "device"},
    {EntityKind::Container, "container"},
    {EntityKind::PortalFixture, "portal-fixture"},
}};

constexpr std::array<std::pair<MatterState, std::string_view>, 3> kStates{{
    {MatterState::Solid, "solid"},
    {MatterState::Liquid, "liquid"},
    {MatterState::Gas, "gas"},
}};

constexpr std::array<std::pair<Role, std::string_view>, 5> kRoles{{
    {Role::None, "none"},
    {Role::Heater, "heater"},
    {Role::Cooler, "cooler"},
    {Role::Faucet, "faucet"},
    {Role::Thermometer, "thermometer"},
}};

constexpr std::array<std::pair<Verb, std::string_view>, 17> kVerbs{{
    {Verb::LookAround, "look_around"},
    {Verb::Inventory, "inventory"},
    {Verb::Wait, "wait"},
    {Verb::GoTo, "go_to"},
    {Verb::OpenDoor, "open_door"},
    {Verb::CloseDoor, "close_door"},
    {Verb::Open, "open"},
    {Verb::Close, "close"},
    {Verb::PickUp, "pick_up"},
    {Verb::PutDown, "put_down"},
    {Verb::MoveTo, "move_to"},
    {Verb::FocusOn, "focus_on"},
    {Verb::Activate, "activate"},
    {Verb::Deactivate, "deactivate"},
    {Verb::Use, "use"},
    {Verb::Examine, "examine"},
    {Verb::Invalid, "invalid"},
}};

}  // namespace

std::string_view to_string(EntityKind kind) { return name_of(kKinds, kind); }
std::string_view to_string(MatterState state) { return name_of(kStates, state); }
std::string_view to_string(Role role) { return name_of(kRoles, role); }
std::string_view to_string(Verb verb) { return name_of(kVerbs, verb); }

std::optional<EntityKind> parse_entity_kind(std::string_view text) { return lookup(kKinds, text); }
std::optional<MatterState> parse_matter_state(std::string_view text) { return lookup(kStates, text); }
std::optional<Role> parse_role(std::string_view text) { return lookup(kRoles, text); }

std::optional<Verb> parse_verb(std::string_view text) {
    auto verb = lookup(kVerbs, text);
    if (verb == Verb::Invalid) return std::nullopt;
    return verb;
}

}  // namespace tbg
