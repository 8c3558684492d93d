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

#include "tbg/catalog.hpp"
#include "tbg_bundled_data.hpp"

namespace tbg {

const std::map<std::string, std::string>& bundled_task_documents() {
    static const std::map<std::string, std::string> docs = [] {
        std::map<std::string, std::string> out;
        const std::string prefix = "tasks/";
        for (const auto& [path, text] : bundled::files()) {
            if (path.rfind(prefix, 0) != 0 || path.size() < 5 || path.substr(path.size() - 5) != ".json") continue;
            out[path.substr(prefix.size(), path.size() - prefix.size() - 5)] = text;
        }
        return out;
    }();
    return docs;
}

const std::vector<TaskSpec>& bundled_suite() {
    static const std::vector<TaskSpec> suite = [] {
        std::vector<TaskSpec> out;
        for (const auto& [stem, text] : bundled_task_documents()) out.push_back(load_task(nlohmann::json::parse(text)));
        std::sort(out.begin(), out.end(), [](const TaskSpec& a, const TaskSpec& b) { return a.id < b.id; });
        return out;
    }();
    return suite;
}

const TaskSpec& bundled_task(const std::string& id) {
    for (const auto& task : bundled_suite()) {
        if (task.id == id) return task;
    }
    throw ConfigError("unknown task id " + id);
}

}  // namespace tbg
