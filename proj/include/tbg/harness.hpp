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
#ifndef TBG_HARNESS_HPP
#define TBG_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "tbg/agent.hpp"
#include "tbg/catalog.hpp"
#include "tbg/llm.hpp"

namespace tbg {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kLogSchemaVersion = 1;

enum ExitCode : int { kExitOk = 0, kExitPartialFailure = 1, kExitConfigError = 2 };

// Task ids from the bundled suite plus any extra task files.
class TaskCatalog {
public:
    TaskCatalog();
    void add(TaskSpec task);
    void add_file(const std::filesystem::path& path);
    const TaskSpec& at(const std::string& id) const;
    bool contains(const std::string& id) const { return tasks_.contains(id); }
    std::vector<std::string> ids() const;

private:
    std::map<std::string, TaskSpec> tasks_;
};

struct TaskSelector {
    std::string task_id;
    // Empty selects every variation.
    std::vector<int> variations;
};

struct BackendSpec {
    enum class Type { Scripted, Replay, Http };
    Type type = Type::Scripted;
    // Scripted: every episode gets its own backend built from these.
    std::vector<std::string> queue;
    std::vector<ScriptedBackend::Rule> rules;
    // Replay: directory of per-episode transcripts.
    std::filesystem::path transcript_dir;
    // Sent as the request model id; for http, overrides TBG_OPENAI_MODEL.
    std::string model;
    std::optional<int> requests_per_minute;
    std::optional<int> timeout_ms;
    std::optional<int> max_retries;

    // Report column label.
    std::string model_label() const;
};
std::string_view to_string(BackendSpec::Type type);

struct SuiteConfig {
    int schema_version = kConfigSchemaVersion;
    std::vector<TaskSelector> tasks;
    std::vector<std::filesystem::path> task_files;
    std::vector<PolicySpec> policies;
    BackendSpec backend;
    EpisodeLimits limits;
    std::vector<std::uint64_t> seeds = {0};
    std::filesystem::path output_dir = "runs";
    int parallelism = 1;
    bool record_transcripts = false;

    // Throws ConfigError on unknown keys, bad values or inline credentials.
    static SuiteConfig from_json(const nlohmann::json& document);
    static SuiteConfig from_file(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    // Checks values and that the output directory can be written.
    void validate() const;
};

struct EpisodeKey {
    std::string task_id;
    int variation = 0;
    std::string policy;
    std::uint64_t seed = 0;

    // {task}-{variation}-{policy}-{seed}
    std::string stem() const;
    auto operator<=>(const EpisodeKey&) const = default;
};

struct PlannedEpisode {
    EpisodeKey key;
    std::size_t policy_index = 0;
    std::shared_ptr<const TaskInstance> instance;
};

std::vector<PlannedEpisode> plan_episodes(const SuiteConfig& config, const TaskCatalog& catalog);
std::filesystem::path log_path(const SuiteConfig& config, const EpisodeKey& key);
std::filesystem::path transcript_path(const std::filesystem::path& dir, const EpisodeKey& key);

// Streams one episode as JSON lines. Single writer; flushes each record.
class TrajectoryLogger : public EpisodeObserver {
public:
    struct Header {
        EpisodeKey key;
        std::string kind;
        std::string backend;
        std::string model;
        EpisodeLimits limits;
        std::string goal;
    };

    TrajectoryLogger(std::ostream& out, const Header& header);

    void on_attempt_start(int attempt, const std::string& initial_observation) override;
    void on_step(int attempt, const TrajectoryStep& step) override;
    void on_memory(int attempt, const MemoryEvent& event) override;
    void on_attempt_end(const AttemptResult& result) override;
    void episode_end(const EpisodeResult& result);
    void error(const std::string& message);

private:
    void write(const nlohmann::json& record);
    std::ostream& out_;
};

class LogSchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ReplayDivergence : public std::runtime_error {
public:
    ReplayDivergence(int attempt, int step, const std::string& field, const std::string& logged,
                     const std::string& recomputed);
    int attempt() const { return attempt_; }
    int step() const { return step_; }
    const std::string& field() const { return field_; }

private:
    int attempt_;
    int step_;
    std::string field_;
};

struct LoggedEpisode {
    nlohmann::json header;
    std::vector<nlohmann::json> records;
    std::optional<nlohmann::json> end;
    std::optional<std::string> error;
};

// Throws LogSchemaError on malformed lines or a wrong schema version.
LoggedEpisode read_log(std::istream& in);
LoggedEpisode read_log_file(const std::filesystem::path& path);

// Re-runs the engine on the logged commands and compares every observation,
// reward and score. Throws ReplayDivergence or LogSchemaError.
EpisodeResult replay_episode(const LoggedEpisode& log, const TaskCatalog& catalog,
                             const TemplateSet& templates = default_templates());

struct ReportCell {
    std::optional<double> mean;
    int episodes = 0;
    int failures = 0;

    bool operator==(const ReportCell&) const = default;
};

struct ReportTable {
    std::vector<std::string> rows;
    std::vector<std::string> columns;
    std::map<std::pair<std::string, std::string>, ReportCell> cells;
    std::vector<std::string> failures;
    // Average row as written; columns missing here are computed from the cells.
    std::map<std::string, std::optional<double>> averages;

    const ReportCell* cell(const std::string& row, const std::string& column) const;
    // Unweighted mean of the non-empty task rows of a column.
    std::optional<double> column_average(const std::string& column) const;
};

enum class ReportFormat { Markdown, Csv };

std::string write_report(const ReportTable& table, ReportFormat format);
// Reads the csv form back, average row included.
ReportTable parse_csv_report(const std::string& csv);
std::string format_score(std::optional<double> value);

// Aggregates the logs of every planned episode.
ReportTable build_report(const SuiteConfig& config, const TaskCatalog& catalog);

// Builds the backend one episode talks to.
using BackendFactory = std::function<std::shared_ptr<LlmBackend>(const PlannedEpisode&)>;
BackendFactory make_backend_factory(const SuiteConfig& config);

struct SuiteOutcome {
    ReportTable table;
    int episodes_run = 0;
    int episodes_skipped = 0;
    int failures = 0;
    std::filesystem::path markdown_path;
    std::filesystem::path csv_path;

    int exit_code() const { return failures == 0 ? kExitOk : kExitPartialFailure; }
};

struct RunOptions {
    // Ignore finished logs and run everything again.
    bool fresh = false;
    // Replaces the configured backend, mainly for tests.
    BackendFactory backend_factory;
    std::function<void(const EpisodeKey&, const std::string&)> progress;
};

SuiteOutcome run_suite(const SuiteConfig& config, const TaskCatalog& catalog, const RunOptions& options = {});

// Runs one episode and writes its log; errors become an error record.
EpisodeResult run_logged_episode(const SuiteConfig& config, const PlannedEpisode& episode, LlmBackend* backend,
                                 const std::filesystem::path& log_file);

struct SuiteReplay {
    int verified = 0;
    std::vector<std::string> problems;
};
SuiteReplay replay_suite(const SuiteConfig& config, const TaskCatalog& catalog);

// A human at the keyboard; logged like any other episode.
class PlaySession {
public:
    PlaySession(std::shared_ptr<const TaskInstance> instance, std::uint64_t seed, std::ostream* log,
                const TemplateSet& templates = default_templates());

    const std::string& initial_observation() const { return initial_; }
    // Observation plus reward and score lines.
    std::string submit(const std::string& line);
    // Writes the closing records; called by the destructor if needed.
    void finish();
    // Task completed or step cap reached.
    bool done() const { return state_.done || state_.step >= limits_.step_cap; }
    int score() const;
    int steps() const { return state_.step; }

    ~PlaySession();

private:
    std::shared_ptr<const TaskInstance> instance_;
    const TemplateSet& templates_;
    WorldState state_;
    std::string initial_;
    EpisodeLimits limits_;
    std::unique_ptr<TrajectoryLogger> logger_;
    AttemptResult attempt_;
    bool finished_ = false;
};

}  // namespace tbg

#endif  // TBG_HARNESS_HPP
