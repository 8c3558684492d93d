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
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "tbg/harness.hpp"

namespace {

using namespace tbg;

TaskCatalog make_catalog(const std::vector<std::string>& files) {
    TaskCatalog catalog;
    for (const auto& f : files) catalog.add_file(f);
    return catalog;
}

SuiteConfig load_config(const std::string& path, const std::string& output_dir, int parallelism,
                        const std::vector<std::uint64_t>& seeds) {
    SuiteConfig config = SuiteConfig::from_file(path);
    if (!output_dir.empty()) config.output_dir = output_dir;
    if (parallelism > 0) config.parallelism = parallelism;
    if (!seeds.empty()) config.seeds = seeds;
    return config;
}

TaskCatalog catalog_for(const SuiteConfig& config) {
    TaskCatalog catalog;
    for (const auto& f : config.task_files) catalog.add_file(f);
    return catalog;
}

int cmd_run(const std::string& path, const std::string& output_dir, int parallelism,
            const std::vector<std::uint64_t>& seeds, bool fresh, bool record, bool quiet) {
    SuiteConfig config = load_config(path, output_dir, parallelism, seeds);
    if (record) config.record_transcripts = true;
    const TaskCatalog catalog = catalog_for(config);
    RunOptions options;
    options.fresh = fresh;
    if (!quiet) {
        options.progress = [](const EpisodeKey& key, const std::string& status) {
            std::cerr << key.stem() << ": " << status << '\n';
        };
    }
    const SuiteOutcome outcome = run_suite(config, catalog, options);
    std::cout << write_report(outcome.table, ReportFormat::Markdown);
    std::cerr << outcome.episodes_run << " run, " << outcome.episodes_skipped << " skipped, " << outcome.failures
              << " failed; report in " << outcome.markdown_path.string() << '\n';
    return outcome.exit_code();
}

int cmd_report(const std::string& path, const std::string& output_dir, const std::string& format) {
    SuiteConfig config = load_config(path, output_dir, 0, {});
    const ReportTable table = build_report(config, catalog_for(config));
    std::cout << write_report(table, format == "csv" ? ReportFormat::Csv : ReportFormat::Markdown);
    return table.failures.empty() ? kExitOk : kExitPartialFailure;
}

int cmd_replay(const std::vector<std::string>& logs, const std::string& config_path, const std::string& output_dir,
               const std::vector<std::string>& task_files) {
    int problems = 0;
    if (!config_path.empty()) {
        SuiteConfig config = load_config(config_path, output_dir, 0, {});
        TaskCatalog catalog = catalog_for(config);
        for (const auto& f : task_files) catalog.add_file(f);
        const SuiteReplay r = replay_suite(config, catalog);
        for (const auto& p : r.problems) std::cout << "FAIL " << p << '\n';
        std::cout << r.verified << " episodes replayed without divergence\n";
        problems += static_cast<int>(r.problems.size());
    }
    const TaskCatalog catalog = make_catalog(task_files);
    for (const auto& log : logs) {
        try {
            const EpisodeResult r = replay_episode(read_log_file(log), catalog);
            std::cout << "ok " << log << " (" << r.attempts.size() << " attempts, final " << r.final_score << ")\n";
        } catch (const std::exception& e) {
            std::cout << "FAIL " << log << ": " << e.what() << '\n';
            ++problems;
        }
    }
    return problems == 0 ? kExitOk : kExitPartialFailure;
}

int cmd_play(const std::string& task_id, int variation, std::uint64_t seed, const std::string& log_file,
             const std::vector<std::string>& task_files) {
    const TaskCatalog catalog = make_catalog(task_files);
    const TaskSpec& task = catalog.at(task_id);
    if (variation < 0 || variation >= task.variation_count()) {
        throw ConfigError("task " + task_id + " has no variation " + std::to_string(variation));
    }
    std::ofstream log;
    if (!log_file.empty()) {
        log.open(log_file, std::ios::trunc);
        if (!log) throw ConfigError("cannot write " + log_file);
    }
    PlaySession session(task.instances.at(static_cast<std::size_t>(variation)), seed, log_file.empty() ? nullptr : &log);
    std::cout << session.initial_observation() << "\n";
    std::string line;
    while (!session.done()) {
        std::cout << "> " << std::flush;
        if (!std::getline(std::cin, line)) break;
        if (line == "quit" || line == "exit") break;
        std::cout << session.submit(line) << "\n";
    }
    session.finish();
    std::cout << "Final score: " << session.score() << " after " << session.steps() << " steps\n";
    return kExitOk;
}

int cmd_validate(const std::vector<std::string>& files) {
    int bad = 0;
    for (const auto& f : files) {
        try {
            const TaskSpec task = load_task_file(f);
            std::cout << "ok " << f << ": " << task.id << ", " << task.variation_count() << " variations\n";
        } catch (const TaskValidationError& e) {
            ++bad;
            std::cout << "invalid " << f << ":\n";
            for (const auto& err : e.errors()) std::cout << "  " << err.to_string() << '\n';
        } catch (const std::exception& e) {
            ++bad;
            std::cout << "invalid " << f << ": " << e.what() << '\n';
        }
    }
    return bad == 0 ? kExitOk : kExitConfigError;
}

int cmd_list(const std::vector<std::string>& task_files) {
    const TaskCatalog catalog = make_catalog(task_files);
    for (const auto& id : catalog.ids()) {
        const TaskSpec& task = catalog.at(id);
        std::cout << id << "\t" << task.variation_count() << " variations\t" << task.instance(0).goal_text << '\n';
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Text-world agent benchmark: run, score and replay reflective agents"};
    app.require_subcommand(1);

    std::string config_path, output_dir, format = "md", task_id, log_file;
    int parallelism = 0, variation = 0;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> task_files, logs, files;
    bool fresh = false, record = false, quiet = false;

    auto* run = app.add_subcommand("run", "Run every episode of a suite config and write the report");
    run->add_option("config", config_path, "Suite config file")->required()->check(CLI::ExistingFile);
    run->add_option("--output-dir", output_dir, "Override output_dir");
    run->add_option("--parallelism", parallelism, "Override parallelism")->check(CLI::PositiveNumber);
    run->add_option("--seed", seeds, "Override seeds (repeatable)");
    run->add_flag("--fresh", fresh, "Rerun episodes that already have finished logs");
    run->add_flag("--record", record, "Record backend transcripts");
    run->add_flag("--quiet", quiet, "No per-episode progress");

    auto* report = app.add_subcommand("report", "Rebuild the report from existing logs");
    report->add_option("config", config_path, "Suite config file")->required()->check(CLI::ExistingFile);
    report->add_option("--output-dir", output_dir, "Override output_dir");
    report->add_option("--format", format, "md or csv")->check(CLI::IsMember({"md", "csv"}));

    auto* replay = app.add_subcommand("replay", "Re-run logged actions and check the engine agrees");
    replay->add_option("logs", logs, "Trajectory logs");
    replay->add_option("--config", config_path, "Replay every episode of a suite config");
    replay->add_option("--output-dir", output_dir, "Override output_dir");
    replay->add_option("--task-file", task_files, "Extra task files");

    auto* play = app.add_subcommand("play", "Play a task at the terminal");
    play->add_option("task", task_id, "Task id")->required();
    play->add_option("--variation", variation, "Variation index");
    play->add_option("--seed", seed, "Decoy placement seed");
    play->add_option("--log", log_file, "Write a trajectory log");
    play->add_option("--task-file", task_files, "Extra task files");

    auto* validate = app.add_subcommand("validate-task", "Check task files");
    validate->add_option("files", files, "Task files")->required();

    auto* list = app.add_subcommand("list-tasks", "List available tasks");
    list->add_option("--task-file", task_files, "Extra task files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (*run) return cmd_run(config_path, output_dir, parallelism, seeds, fresh, record, quiet);
        if (*report) return cmd_report(config_path, output_dir, format);
        if (*replay) {
            if (logs.empty() && config_path.empty()) {
                std::cerr << "replay: give log files or --config\n";
                return kExitConfigError;
            }
            return cmd_replay(logs, config_path, output_dir, task_files);
        }
        if (*play) return cmd_play(task_id, variation, seed, log_file, task_files);
        if (*validate) return cmd_validate(files);
        if (*list) return cmd_list(task_files);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const TaskValidationError& e) {
        std::cerr << "task error:\n";
        for (const auto& err : e.errors()) std::cerr << "  " << err.to_string() << '\n';
        return kExitConfigError;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << '\n';
        return e.kind() == BackendError::Kind::Config ? kExitConfigError : kExitPartialFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitPartialFailure;
    }
    return kExitOk;
}
