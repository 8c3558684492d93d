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
#ifndef TBG_CATALOG_HPP
#define TBG_CATALOG_HPP

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tbg/parser.hpp"
#include "tbg/task.hpp"

namespace tbg {

inline constexpr int kTaskFormatVersion = 1;
inline constexpr int kSolutionStepCap = 150;

struct ValidationError {
    enum class Code {
        Schema,
        DanglingReference,
        CyclicRequires,
        ZeroPoints,
        DuplicateName,
        ReservedWord,
        TriviallySatisfied,
        Unsolvable,
    };
    Code code = Code::Schema;
    // JSON-pointer-like path into the task document, e.g. "subgoals[1].predicate.entity".
    std::string path;
    std::string message;

    std::string to_string() const;
};

class TaskValidationError : public std::runtime_error {
public:
    explicit TaskValidationError(std::vector<ValidationError> errors);
    const std::vector<ValidationError>& errors() const { return errors_; }
    bool has(ValidationError::Code code) const;

private:
    std::vector<ValidationError> errors_;
};

// Validates and instantiates every variation. Throws TaskValidationError with
// all problems found.
TaskSpec load_task(const nlohmann::json& document, const TemplateSet& templates = default_templates());
TaskSpec load_task_file(const std::filesystem::path& path, const TemplateSet& templates = default_templates());

std::vector<std::pair<int, std::map<std::string, std::string>>> enumerate_variations(const TaskSpec& task);

// The bundled micro-task suite, sorted by id.
const std::vector<TaskSpec>& bundled_suite();
const TaskSpec& bundled_task(const std::string& id);

// Raw bundled documents, keyed by file stem.
const std::map<std::string, std::string>& bundled_task_documents();

struct SolutionRun {
    int steps = 0;
    int score = 0;
    bool completed = false;
    // Index of the first command that failed to parse or ground, if any.
    std::optional<std::size_t> failed_command;
    std::string failure;
    // Commands left over after the task completed.
    std::size_t unused_commands = 0;
};

// Plays the instance's stored solution through the engine (seed 0).
SolutionRun run_solution(std::shared_ptr<const TaskInstance> instance, const TemplateSet& templates = default_templates(),
                         std::uint64_t seed = 0);

}  // namespace tbg

#endif  // TBG_CATALOG_HPP
