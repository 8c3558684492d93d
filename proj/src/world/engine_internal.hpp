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
#ifndef TBG_SRC_WORLD_ENGINE_INTERNAL_HPP
#define TBG_SRC_WORLD_ENGINE_INTERNAL_HPP

#include <functional>
#include <string>

#include "tbg/world.hpp"

namespace tbg::detail {

// Shared step pipeline: mutate, tick, count the step, settle sub-goals.
// `mutate` applies the action to the copy and returns the action's message.
StepResult advance(const WorldState& state, const std::function<std::string(WorldState&)>& mutate);

bool is_visible(const WorldState& state, const std::string& entity_id);
bool is_adjacent(const WorldState& state, const std::string& room_id);
bool contains_transitively(const WorldState& state, const std::string& outer, const std::string& inner);
void detach(WorldState& state, const std::string& entity_id);

std::string capitalize(std::string text);

}  // namespace tbg::detail

#endif  // TBG_SRC_WORLD_ENGINE_INTERNAL_HPP
