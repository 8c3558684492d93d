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
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "tbg/catalog.hpp"

namespace tbg {

using json = nlohmann::json;
using Code = ValidationError::Code;

std::string ValidationError::to_string() const {
    static const char* names[] = {"schema",  "dangling-reference",  "cyclic-requires", "zero-points",
                                  "duplicate-name", "reserved-word", "trivially-satisfied", "unsolvable"};
    return std::string(names[static_cast<int>(code)]) + " at " + (path.empty() ? "<root>" : path) + ": " + message;
}

namespace {

std::string summarize(const std::vector<ValidationError>& errors) {
    std::string out = "task validation failed with " + std::to_string(errors.size()) + " error(s)";
    for (const auto& e : errors) out += "\n  " + e.to_string();
    return out;
}

// Words the command grammar uses as separators; names containing them would
// make rendered commands ambiguous.
const std::set<std::string>& reserved_words() {
    static const std::set<std::string> words{"in", "to", "on"};
    return words;
}

std::vector<std::string> words_of(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

void substitute(json& node, const std::map<std::string, std::string>& params) {
    if (node.is_string()) {
        std::string s = node.get<std::string>();
        for (const auto& [key, value] : params) {
            const std::string needle = "${" + key + "}";
            for (auto at = s.find(needle); at != std::string::npos; at = s.find(needle, at + value.size())) {
                s.replace(at, needle.size(), value);
            }
        }
        node = s;
    } else if (node.is_array() || node.is_object()) {
        for (auto& child : node) substitute(child, params);
    }
}

void find_unbound(const json& node, const std::string& path, std::vector<ValidationError>& errors) {
    if (node.is_string()) {
        const auto& s = node.get_ref<const std::string&>();
        if (s.find("${") != std::string::npos) errors.push_back({Code::Schema, path, "unbound parameter in \"" + s + "\""});
    } else if (node.is_array()) {
        for (std::size_t i = 0; i < node.size(); ++i) find_unbound(node[i], path + "[" + std::to_string(i) + "]", errors);
    } else if (node.is_object()) {
        for (const auto& [k, v] : node.items()) find_unbound(v, path.empty() ? k : path + "." + k, errors);
    }
}

// Reads one instantiated task document into a TaskInstance, recording every
// problem instead of stopping at the first.
class InstanceBuilder {
public:
    InstanceBuilder(const json& doc, std::vector<ValidationError>& errors) : doc_(doc), errors_(errors) {}

    TaskInstance build() {
        inst_.task_id = text(doc_, "id", "id");
        inst_.goal_text = text(doc_, "goal", "goal");
        inst_.start_room = text(doc_, "start_room", "start_room");
        read_substances();
        read_rooms();
        read_entities("entities", inst_.entities, true);
        read_entities("prototypes", inst_.prototypes, false);
        read_decoys();
        place_entities();
        read_subgoals();
        read_solution();
        return std::move(inst_);
    }

private:
    void error(Code code, std::string path, std::string message) {
        errors_.push_back({code, std::move(path), std::move(message)});
    }

    std::string text(const json& node, const char* key, const std::string& path, bool required = true) {
        if (!node.contains(key)) {
            if (required) error(Code::Schema, path, std::string("missing required field '") + key + "'");
            return {};
        }
        if (!node[key].is_string()) {
            error(Code::Schema, path, std::string("field '") + key + "' must be a string");
            return {};
        }
        return node[key].get<std::string>();
    }

    std::optional<int> integer(const json& node, const char* key, const std::string& path) {
        if (!node.contains(key)) return std::nullopt;
        if (!node[key].is_number_integer()) {
            error(Code::Schema, path, std::string("field '") + key + "' must be an integer");
            return std::nullopt;
        }
        return node[key].get<int>();
    }

    std::optional<bool> boolean(const json& node, const char* key, const std::string& path) {
        if (!node.contains(key)) return std::nullopt;
        if (!node[key].is_boolean()) {
            error(Code::Schema, path, std::string("field '") + key + "' must be a boolean");
            return std::nullopt;
        }
        return node[key].get<bool>();
    }

    const json* array(const char* key, bool required) {
        if (!doc_.contains(key)) {
            if (required) error(Code::Schema, key, "missing required array");
            return nullptr;
        }
        if (!doc_[key].is_array()) {
            error(Code::Schema, key, "must be an array");
            return nullptr;
        }
        return &doc_[key];
    }

    void read_substances() {
        if (!doc_.contains("substances")) return;
        const json& table = doc_["substances"];
        if (!table.is_object()) return error(Code::Schema, "substances", "must be an object");
        for (const auto& [key, spec] : table.items()) {
            const std::string path = "substances." + key;
            SubstanceForms forms;
            forms.points.melt_c = integer(spec, "melt_c", path).value_or(0);
            forms.points.boil_c = integer(spec, "boil_c", path).value_or(100);
            if (forms.points.melt_c > forms.points.boil_c) error(Code::Schema, path, "melt_c exceeds boil_c");
            if (spec.contains("forms") && spec["forms"].is_object()) {
                for (const auto& [state, name] : spec["forms"].items()) {
                    auto ms = parse_matter_state(state);
                    if (!ms || !name.is_string()) {
                        error(Code::Schema, path + ".forms." + state, "expected solid/liquid/gas mapped to a name");
                        continue;
                    }
                    forms.names[*ms] = name.get<std::string>();
                }
            }
            inst_.substances[key] = std::move(forms);
        }
    }

    void read_rooms() {
        const json* rooms = array("rooms", true);
        if (!rooms) return;
        if (rooms->empty()) error(Code::Schema, "rooms", "at least one room is required");
        std::vector<std::tuple<std::string, std::string, bool, std::string>> doors;
        for (std::size_t i = 0; i < rooms->size(); ++i) {
            const json& r = (*rooms)[i];
            const std::string path = "rooms[" + std::to_string(i) + "]";
            Room room;
            room.id = text(r, "id", path);
            room.name = text(r, "name", path, false);
            if (room.name.empty()) room.name = room.id;
            if (room.id.empty()) continue;
            if (inst_.rooms.count(room.id)) error(Code::Schema, path + ".id", "duplicate room id " + room.id);
            if (r.contains("doors")) {
                for (std::size_t d = 0; d < r["doors"].size(); ++d) {
                    const json& door = r["doors"][d];
                    const std::string dpath = path + ".doors[" + std::to_string(d) + "]";
                    doors.emplace_back(room.id, text(door, "to", dpath), boolean(door, "open", dpath).value_or(true), dpath);
                }
            }
            inst_.rooms[room.id] = std::move(room);
        }
        for (const auto& [from, to, open, path] : doors) {
            if (!inst_.rooms.count(to)) {
                error(Code::DanglingReference, path + ".to", "door leads to undeclared room " + to);
                continue;
            }
            if (from == to) {
                error(Code::Schema, path, "a room cannot connect to itself");
                continue;
            }
            auto& a = inst_.rooms[from].connections;
            auto& b = inst_.rooms[to].connections;
            if ((a.count(to) && a[to].open != open) || (b.count(from) && b[from].open != open)) {
                error(Code::Schema, path, "door between " + from + " and " + to + " declared with conflicting states");
            }
            a[to].open = open;
            b[from].open = open;
        }
        if (!inst_.start_room.empty() && !inst_.rooms.count(inst_.start_room)) {
            error(Code::DanglingReference, "start_room", "undeclared room " + inst_.start_room);
        }
    }

    void read_entities(const char* key, std::map<std::string, Entity>& into, bool placed) {
        const json* list = array(key, placed);
        if (!list) return;
        for (std::size_t i = 0; i < list->size(); ++i) {
            const json& n = (*list)[i];
            const std::string path = std::string(key) + "[" + std::to_string(i) + "]";
            if (!n.is_object()) {
                error(Code::Schema, path, "must be an object");
                continue;
            }
            Entity e;
            e.id = text(n, "id", path);
            e.name = text(n, "name", path, false);
            if (e.name.empty()) e.name = e.id;
            auto kind = parse_entity_kind(text(n, "kind", path, false).empty() ? "object" : text(n, "kind", path));
            if (!kind) error(Code::Schema, path + ".kind", "unknown entity kind");
            e.kind = kind.value_or(EntityKind::Object);
            e.portable = boolean(n, "portable", path).value_or(false);
            e.article = text(n, "article", path, false);
            e.temperature = integer(n, "temperature", path);
            e.active = boolean(n, "active", path);
            e.open = boolean(n, "open", path);
            e.receptacle = boolean(n, "receptacle", path).value_or(false);
            if (e.kind == EntityKind::Device && !e.active) e.active = false;
            if (n.contains("role")) {
                auto role = parse_role(text(n, "role", path));
                if (!role) error(Code::Schema, path + ".role", "unknown role");
                e.role = role.value_or(Role::None);
            }
            if (n.contains("supplies")) e.supplies = text(n, "supplies", path);
            if (n.contains("tags") && n["tags"].is_array()) {
                for (const auto& t : n["tags"]) {
                    if (t.is_string()) e.tags.insert(t.get<std::string>());
                }
            }
            if (n.contains("substance")) {
                e.substance = text(n, "substance", path);
                auto table = inst_.substances.find(*e.substance);
                if (table == inst_.substances.end()) {
                    error(Code::DanglingReference, path + ".substance", "undeclared substance " + *e.substance);
                } else {
                    e.phase_points = table->second.points;
                }
            }
            if (n.contains("melt_c") || n.contains("boil_c")) {
                PhasePoints pp = e.phase_points.value_or(PhasePoints{});
                pp.melt_c = integer(n, "melt_c", path).value_or(pp.melt_c);
                pp.boil_c = integer(n, "boil_c", path).value_or(pp.boil_c);
                e.phase_points = pp;
            }
            if (e.phase_points && !e.temperature) error(Code::Schema, path, "phase points need a temperature");
            if (e.id.empty()) continue;
            if (inst_.entities.count(e.id) || inst_.prototypes.count(e.id)) {
                error(Code::Schema, path + ".id", "duplicate entity id " + e.id);
                continue;
            }
            if (inst_.rooms.count(e.id) || e.id == kInventory) {
                error(Code::Schema, path + ".id", "entity id " + e.id + " collides with a room or reserved id");
            }
            if (placed) {
                locations_[e.id] = {n.contains("location") ? text(n, "location", path) : std::string(), path};
            }
            into[e.id] = std::move(e);
        }
    }

    void read_decoys() {
        if (!doc_.contains("decoys")) return;
        const json& d = doc_["decoys"];
        for (const auto& id : d.value("entities", json::array())) inst_.decoys.entities.push_back(id.get<std::string>());
        for (const auto& id : d.value("rooms", json::array())) inst_.decoys.rooms.push_back(id.get<std::string>());
        for (const auto& id : inst_.decoys.entities) {
            if (!inst_.entities.count(id)) error(Code::DanglingReference, "decoys.entities", "undeclared entity " + id);
        }
        for (const auto& id : inst_.decoys.rooms) {
            if (!inst_.rooms.count(id)) error(Code::DanglingReference, "decoys.rooms", "undeclared room " + id);
        }
        if (!inst_.decoys.entities.empty() && inst_.decoys.rooms.empty()) {
            error(Code::Schema, "decoys.rooms", "decoys need at least one candidate room");
        }
    }

    void place_entities() {
        const std::set<std::string> decoys(inst_.decoys.entities.begin(), inst_.decoys.entities.end());
        // Document order, so inventory order is stable.
        const json* list = array("entities", false);
        if (!list) return;
        for (const auto& n : *list) {
            if (!n.is_object() || !n.contains("id") || !n["id"].is_string()) continue;
            const std::string id = n["id"].get<std::string>();
            auto found = locations_.find(id);
            if (found == locations_.end()) continue;
            const auto& [where, path] = found->second;
            if (decoys.count(id)) {
                if (!where.empty()) error(Code::Schema, path + ".location", "decoys are placed by seed and take no location");
                continue;
            }
            if (where.empty()) {
                error(Code::Schema, path, "missing required field 'location'");
            } else if (where == kInventory) {
                inst_.inventory.push_back(id);
            } else if (inst_.rooms.count(where)) {
                inst_.rooms[where].entities.insert(id);
            } else if (inst_.entities.count(where)) {
                Entity& holder = inst_.entities[where];
                if (!holder.can_hold()) {
                    error(Code::Schema, path + ".location", where + " is not a container");
                } else {
                    holder.contents.insert(id);
                }
            } else {
                error(Code::DanglingReference, path + ".location", "undeclared location " + where);
            }
        }
        // Containment cycles.
        for (const auto& [id, loc] : locations_) {
            std::set<std::string> seen{id};
            std::string cur = loc.first;
            while (inst_.entities.count(cur)) {
                if (!seen.insert(cur).second) {
                    error(Code::Schema, loc.second + ".location", "containment cycle through " + id);
                    break;
                }
                auto next = locations_.find(cur);
                if (next == locations_.end()) break;
                cur = next->second.first;
            }
        }
    }

    bool known_entity(const std::string& id) const { return inst_.entities.count(id) || inst_.prototypes.count(id); }

    std::optional<Predicate> read_predicate(const json& n, const std::string& path) {
        if (!n.is_object()) {
            error(Code::Schema, path, "predicate must be an object");
            return std::nullopt;
        }
        const std::string type = text(n, "type", path);
        Predicate p;
        auto need_entity = [&] {
            p.entity = text(n, "entity", path);
            if (!p.entity.empty() && !known_entity(p.entity)) {
                error(Code::DanglingReference, path + ".entity", "undeclared entity " + p.entity);
            }
        };
        if (type == "focus-is") {
            p.type = Predicate::Type::FocusIs;
            need_entity();
        } else if (type == "entity-in-container") {
            p.type = Predicate::Type::EntityInContainer;
            need_entity();
            p.target = text(n, "container", path);
            p.transitive = boolean(n, "transitive", path).value_or(false);
            if (!p.target.empty() && p.target != kInventory) {
                auto holder = inst_.entities.find(p.target);
                if (holder == inst_.entities.end()) {
                    error(Code::DanglingReference, path + ".container", "undeclared container " + p.target);
                } else if (!holder->second.can_hold()) {
                    error(Code::Schema, path + ".container", p.target + " is not a container");
                }
            }
        } else if (type == "entity-in-room") {
            p.type = Predicate::Type::EntityInRoom;
            need_entity();
            p.target = text(n, "room", path);
            if (!p.target.empty() && !inst_.rooms.count(p.target)) {
                error(Code::DanglingReference, path + ".room", "undeclared room " + p.target);
            }
        } else if (type == "matter-state-is") {
            p.type = Predicate::Type::MatterStateIs;
            need_entity();
            auto ms = parse_matter_state(text(n, "state", path));
            if (!ms) error(Code::Schema, path + ".state", "expected solid, liquid or gas");
            p.state = ms.value_or(MatterState::Solid);
        } else if (type == "device-active") {
            p.type = Predicate::Type::DeviceActive;
            need_entity();
            auto dev = inst_.entities.find(p.entity);
            if (dev != inst_.entities.end() && dev->second.kind != EntityKind::Device) {
                error(Code::Schema, path + ".entity", p.entity + " is not a device");
            }
        } else if (type == "all-of") {
            p.type = Predicate::Type::AllOf;
            if (!n.contains("predicates") || !n["predicates"].is_array() || n["predicates"].empty()) {
                error(Code::Schema, path + ".predicates", "all-of needs a non-empty predicate list");
                return std::nullopt;
            }
            for (std::size_t i = 0; i < n["predicates"].size(); ++i) {
                auto child = read_predicate(n["predicates"][i], path + ".predicates[" + std::to_string(i) + "]");
                if (child) p.all.push_back(std::move(*child));
            }
        } else {
            error(Code::Schema, path + ".type", "unknown predicate type '" + type + "'");
            return std::nullopt;
        }
        return p;
    }

    void read_subgoals() {
        const json* list = array("subgoals", true);
        if (!list) return;
        std::set<std::string> ids;
        for (std::size_t i = 0; i < list->size(); ++i) {
            const json& n = (*list)[i];
            const std::string path = "subgoals[" + std::to_string(i) + "]";
            Subgoal sg;
            sg.id = text(n, "id", path);
            sg.description = text(n, "description", path, false);
            sg.points = integer(n, "points", path).value_or(1);
            if (sg.points <= 0) error(Code::ZeroPoints, path + ".points", "points must be positive");
            if (n.contains("requires") && !n["requires"].is_null()) sg.requires_id = text(n, "requires", path);
            if (!ids.insert(sg.id).second) error(Code::Schema, path + ".id", "duplicate subgoal id " + sg.id);
            if (n.contains("predicate")) {
                auto p = read_predicate(n["predicate"], path + ".predicate");
                if (p) sg.predicate = std::move(*p);
            } else {
                error(Code::Schema, path, "missing required field 'predicate'");
            }
            inst_.subgoals.push_back(std::move(sg));
        }
        for (std::size_t i = 0; i < inst_.subgoals.size(); ++i) {
            const auto& req = inst_.subgoals[i].requires_id;
            if (req && !ids.count(*req)) {
                error(Code::DanglingReference, "subgoals[" + std::to_string(i) + "].requires", "undeclared subgoal " + *req);
            }
        }
        for (const auto& sg : inst_.subgoals) {
            std::set<std::string> chain{sg.id};
            const Subgoal* cur = &sg;
            while (cur && cur->requires_id) {
                if (!chain.insert(*cur->requires_id).second) {
                    error(Code::CyclicRequires, "subgoals", "requires cycle through " + sg.id);
                    break;
                }
                cur = inst_.find_subgoal(*cur->requires_id);
            }
        }
        if (inst_.total_points() <= 0) error(Code::ZeroPoints, "subgoals", "total points must be positive");
    }

    void read_solution() {
        if (!doc_.contains("solution")) return;
        if (!doc_["solution"].is_array()) return error(Code::Schema, "solution", "must be an array of commands");
        for (const auto& c : doc_["solution"]) {
            if (c.is_string()) inst_.solution.push_back(c.get<std::string>());
        }
    }

    const json& doc_;
    std::vector<ValidationError>& errors_;
    TaskInstance inst_;
    std::map<std::string, std::pair<std::string, std::string>> locations_;  // id -> (location, path)
};

// Every name an entity can show, including substance forms it may turn into.
std::set<std::string> possible_names(const TaskInstance& inst, const Entity& e) {
    std::set<std::string> names{lower(e.name)};
    if (e.substance) {
        auto table = inst.substances.find(*e.substance);
        if (table != inst.substances.end()) {
            for (const auto& [_, n] : table->second.names) names.insert(lower(n));
        }
    }
    return names;
}

void check_names(const TaskInstance& inst, std::vector<ValidationError>& errors) {
    auto reserved = [&](const std::string& name, const std::string& path) {
        for (const auto& w : words_of(lower(name))) {
            if (reserved_words().count(w)) errors.push_back({Code::ReservedWord, path, "name \"" + name + "\" uses the word '" + w + "'"});
        }
    };
    std::map<std::string, std::string> room_names;
    for (const auto& [id, room] : inst.rooms) {
        reserved(room.name, "rooms." + id + ".name");
        auto [it, fresh] = room_names.emplace(lower(room.name), id);
        if (!fresh) errors.push_back({Code::DuplicateName, "rooms." + id, "room name \"" + room.name + "\" also used by " + it->second});
    }

    // Entities that can travel between rooms: portable ones, anything inside
    // them, decoys, and spawned prototypes.
    std::set<std::string> mobile(inst.decoys.entities.begin(), inst.decoys.entities.end());
    std::map<std::string, std::string> parent;
    for (const auto& [id, e] : inst.entities) {
        for (const auto& c : e.contents) parent[c] = id;
    }
    for (const auto& [id, e] : inst.entities) {
        for (std::string cur = id;; cur = parent[cur]) {
            if (inst.entities.at(cur).portable) {
                mobile.insert(id);
                break;
            }
            if (!parent.count(cur)) break;
        }
    }
    auto room_of = [&](const std::string& id) {
        std::string cur = id;
        while (parent.count(cur)) cur = parent.at(cur);
        for (const auto& [rid, room] : inst.rooms) {
            if (room.entities.count(cur)) return rid;
        }
        return std::string(kInventory);
    };

    struct Owner {
        std::string id;
        std::string scope;  // room id, or "*" when mobile
    };
    std::map<std::string, std::vector<Owner>> by_name;
    auto add = [&](const Entity& e, const std::string& scope, const std::string& path) {
        reserved(e.name, path);
        for (const auto& n : possible_names(inst, e)) by_name[n].push_back({e.id, scope});
    };
    for (const auto& [id, e] : inst.entities) add(e, mobile.count(id) ? "*" : room_of(id), "entities." + id + ".name");
    for (const auto& [id, e] : inst.prototypes) add(e, "*", "prototypes." + id + ".name");

    for (const auto& [name, owners] : by_name) {
        for (std::size_t i = 0; i < owners.size(); ++i) {
            for (std::size_t j = i + 1; j < owners.size(); ++j) {
                const auto& a = owners[i];
                const auto& b = owners[j];
                if (a.id == b.id) continue;
                if (a.scope == "*" || b.scope == "*" || a.scope == b.scope) {
                    errors.push_back({Code::DuplicateName, "entities." + b.id,
                                      "name \"" + name + "\" can be visible together with " + a.id});
                }
            }
        }
    }
}

void check_dynamics(const std::shared_ptr<const TaskInstance>& inst, const TemplateSet& templates,
                    std::vector<ValidationError>& errors) {
    auto [state, obs] = init_episode(inst, 0);
    for (std::size_t i = 0; i < inst->subgoals.size(); ++i) {
        if (evaluate(inst->subgoals[i].predicate, state)) {
            errors.push_back({Code::TriviallySatisfied, "subgoals[" + std::to_string(i) + "]",
                              "subgoal " + inst->subgoals[i].id + " already holds in the initial state"});
        }
    }
    auto problems = check_invariants(state);
    for (const auto& p : problems) errors.push_back({Code::Schema, "entities", p});
    if (!problems.empty()) return;

    if (inst->solution.empty()) {
        errors.push_back({Code::Unsolvable, "solution", "no solution commands for this variation"});
        return;
    }
    SolutionRun run = run_solution(inst, templates);
    if (run.failed_command) {
        errors.push_back({Code::Unsolvable, "solution[" + std::to_string(*run.failed_command) + "]", run.failure});
    } else if (!run.completed) {
        errors.push_back({Code::Unsolvable, "solution",
                          "solution ends with score " + std::to_string(run.score) + " after " + std::to_string(run.steps) + " steps"});
    } else if (run.unused_commands > 0) {
        errors.push_back({Code::Unsolvable, "solution",
                          "task completes with " + std::to_string(run.unused_commands) + " command(s) left over"});
    }
}

}  // namespace

TaskValidationError::TaskValidationError(std::vector<ValidationError> errors)
    : std::runtime_error(summarize(errors)), errors_(std::move(errors)) {}

bool TaskValidationError::has(ValidationError::Code code) const {
    return std::any_of(errors_.begin(), errors_.end(), [&](const auto& e) { return e.code == code; });
}

SolutionRun run_solution(std::shared_ptr<const TaskInstance> instance, const TemplateSet& templates, std::uint64_t seed) {
    SolutionRun run;
    auto [state, obs] = init_episode(instance, seed);
    for (std::size_t i = 0; i < instance->solution.size(); ++i) {
        if (state.done) {
            run.unused_commands = instance->solution.size() - i;
            break;
        }
        if (run.steps >= kSolutionStepCap) break;
        auto resolved = interpret(instance->solution[i], state, templates);
        if (auto* err = std::get_if<std::string>(&resolved)) {
            run.failed_command = i;
            run.failure = "\"" + instance->solution[i] + "\": " + *err;
            break;
        }
        state = step(state, std::get<GroundedAction>(resolved)).state;
        ++run.steps;
    }
    run.completed = state.done;
    run.score = score(state);
    return run;
}

TaskSpec load_task(const json& document, const TemplateSet& templates) {
    std::vector<ValidationError> errors;
    if (!document.is_object()) throw TaskValidationError({{Code::Schema, "", "task document must be an object"}});
    if (!document.contains("format_version") || document["format_version"] != kTaskFormatVersion) {
        throw TaskValidationError(
            {{Code::Schema, "format_version", "expected format_version " + std::to_string(kTaskFormatVersion)}});
    }
    if (!document.contains("id") || !document["id"].is_string()) {
        throw TaskValidationError({{Code::Schema, "id", "missing task id"}});
    }

    TaskSpec spec;
    spec.id = document["id"].get<std::string>();
    spec.goal_text = document.value("goal", std::string());

    json base = document;
    json variations = json::array({json::object()});
    if (base.contains("variations")) {
        variations = base["variations"];
        base.erase("variations");
        if (!variations.is_array() || variations.empty()) {
            throw TaskValidationError({{Code::Schema, "variations", "must be a non-empty array"}});
        }
    }

    for (std::size_t v = 0; v < variations.size(); ++v) {
        const json& var = variations[v];
        const std::string tag = variations.size() > 1 ? "variations[" + std::to_string(v) + "] " : "";
        std::vector<ValidationError> local;
        std::map<std::string, std::string> params;
        if (var.contains("params")) {
            if (!var["params"].is_object()) {
                local.push_back({Code::Schema, "params", "must be an object of strings"});
            } else {
                for (const auto& [k, val] : var["params"].items()) {
                    if (val.is_string()) {
                        params[k] = val.get<std::string>();
                    } else {
                        local.push_back({Code::Schema, "params." + k, "parameter values must be strings"});
                    }
                }
            }
        }
        json doc = base;
        if (var.contains("entities")) {
            for (const auto& extra : var["entities"]) doc["entities"].push_back(extra);
        }
        if (var.contains("solution")) doc["solution"] = var["solution"];
        substitute(doc, params);
        find_unbound(doc, "", local);

        if (local.empty()) {
            TaskInstance inst = InstanceBuilder(doc, local).build();
            inst.variation = static_cast<int>(v);
            inst.params = params;
            if (local.empty()) check_names(inst, local);
            if (local.empty()) {
                auto shared = std::make_shared<const TaskInstance>(std::move(inst));
                check_dynamics(shared, templates, local);
                spec.instances.push_back(std::move(shared));
            }
        }
        for (auto& e : local) {
            e.path = tag + e.path;
            if (std::none_of(errors.begin(), errors.end(), [&](const auto& o) { return o.path == e.path && o.message == e.message; })) {
                errors.push_back(std::move(e));
            }
        }
    }
    if (!errors.empty()) throw TaskValidationError(std::move(errors));
    return spec;
}

TaskSpec load_task_file(const std::filesystem::path& path, const TemplateSet& templates) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open task file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw TaskValidationError({{Code::Schema, "", std::string("malformed JSON: ") + e.what()}});
    }
    return load_task(doc, templates);
}

std::vector<std::pair<int, std::map<std::string, std::string>>> enumerate_variations(const TaskSpec& task) {
    std::vector<std::pair<int, std::map<std::string, std::string>>> out;
    for (const auto& inst : task.instances) out.emplace_back(inst->variation, inst->params);
    return out;
}

}  // namespace tbg
