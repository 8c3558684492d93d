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
#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include "tbg/harness.hpp"

namespace tbg {
namespace {

TrajectoryLogger::Header header_for(const SuiteConfig& config, const PlannedEpisode& planned) {
    const PolicySpec& policy = config.policies.at(planned.policy_index);
    return {planned.key,
            std::string(to_string(policy.kind)),
            std::string(to_string(config.backend.type)),
            config.backend.model_label(),
            config.limits,
            planned.instance->goal_text};
}

std::ofstream open_log(const std::filesystem::path& path) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write trajectory log " + path.string());
    return out;
}

void write_error_log(const SuiteConfig& config, const PlannedEpisode& planned, const std::string& message) {
    auto out = open_log(log_path(config, planned.key));
    TrajectoryLogger logger(out, header_for(config, planned));
    logger.error(message);
}

bool finished(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return false;
    try {
        return read_log_file(path).end.has_value();
    } catch (const LogSchemaError&) {
        return false;
    }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out || !(out << text) || !out.flush()) throw std::runtime_error("cannot write " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

BackendFactory make_backend_factory(const SuiteConfig& config) {
    const BackendSpec spec = config.backend;
    const std::vector<PolicySpec> policies = config.policies;
    auto needs_backend = [policies](const PlannedEpisode& ep) {
        return policies.at(ep.policy_index).kind != PolicyKind::Scripted;
    };
    switch (spec.type) {
    case BackendSpec::Type::Scripted:
        return [spec, needs_backend](const PlannedEpisode& ep) -> std::shared_ptr<LlmBackend> {
            if (!needs_backend(ep)) return nullptr;
            return std::make_shared<ScriptedBackend>(spec.queue, spec.rules);
        };
    case BackendSpec::Type::Replay:
        return [spec, needs_backend](const PlannedEpisode& ep) -> std::shared_ptr<LlmBackend> {
            if (!needs_backend(ep)) return nullptr;
            return ReplayBackend::from_file(transcript_path(spec.transcript_dir, ep.key));
        };
    case BackendSpec::Type::Http: {
        HttpConfig http = HttpConfig::from_env();
        if (!spec.model.empty()) http.model = spec.model;
        if (spec.requests_per_minute) http.requests_per_minute = *spec.requests_per_minute;
        if (spec.timeout_ms) http.timeout = std::chrono::milliseconds(*spec.timeout_ms);
        if (spec.max_retries) http.max_retries = *spec.max_retries;
        auto shared = std::make_shared<HttpBackend>(http);
        return [shared, needs_backend](const PlannedEpisode& ep) -> std::shared_ptr<LlmBackend> {
            if (!needs_backend(ep)) return nullptr;
            return shared;
        };
    }
    }
    throw ConfigError("unknown backend type");
}

EpisodeResult run_logged_episode(const SuiteConfig& config, const PlannedEpisode& planned, LlmBackend* backend,
                                 const std::filesystem::path& log_file) {
    PolicySpec policy = config.policies.at(planned.policy_index);
    if (policy.model_id.empty()) {
        policy.model_id = config.backend.type == BackendSpec::Type::Http ? config.backend.model_label()
                                                                         : config.backend.model;
    }
    const PromptSet prompts = PromptSet::load(policy.prompt_set);
    auto out = open_log(log_file);
    TrajectoryLogger logger(out, header_for(config, planned));
    AttemptContext ctx;
    ctx.instance = planned.instance;
    ctx.seed = planned.key.seed;
    ctx.policy = &policy;
    ctx.prompts = &prompts;
    ctx.templates = &default_templates();
    ctx.backend = backend;
    ctx.limits = config.limits;
    ctx.observer = &logger;
    try {
        EpisodeResult result = run_episode(ctx);
        logger.episode_end(result);
        return result;
    } catch (const std::exception& e) {
        logger.error(e.what());
        throw;
    }
}

SuiteOutcome run_suite(const SuiteConfig& config, const TaskCatalog& catalog, const RunOptions& options) {
    config.validate();
    const auto plan = plan_episodes(config, catalog);
    for (const auto& p : config.policies) PromptSet::load(p.prompt_set);
    BackendFactory factory = options.backend_factory ? options.backend_factory : make_backend_factory(config);

    SuiteOutcome outcome;
    std::vector<const PlannedEpisode*> todo;
    for (const auto& ep : plan) {
        if (!options.fresh && finished(log_path(config, ep.key))) {
            ++outcome.episodes_skipped;
        } else {
            todo.push_back(&ep);
        }
    }

    if (config.record_transcripts) std::filesystem::create_directories(config.output_dir / "transcripts");
    std::mutex progress_mutex;
    auto report_progress = [&](const EpisodeKey& key, const std::string& status) {
        if (!options.progress) return;
        std::lock_guard lock(progress_mutex);
        options.progress(key, status);
    };
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < todo.size(); i = next++) {
            const PlannedEpisode& ep = *todo[i];
            try {
                std::shared_ptr<LlmBackend> backend;
                try {
                    backend = factory(ep);
                    if (backend && config.record_transcripts) {
                        backend = RecordingBackend::to_file(backend,
                                                            transcript_path(config.output_dir / "transcripts", ep.key));
                    }
                } catch (const std::exception& e) {
                    write_error_log(config, ep, e.what());
                    throw;
                }
                const EpisodeResult r = run_logged_episode(config, ep, backend.get(), log_path(config, ep.key));
                report_progress(ep.key, "score " + std::to_string(r.final_score));
            } catch (const std::exception& e) {
                report_progress(ep.key, std::string("failed: ") + e.what());
            }
        }
    };
    const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(config.parallelism), todo.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    outcome.episodes_run = static_cast<int>(todo.size());

    outcome.table = build_report(config, catalog);
    outcome.failures = static_cast<int>(outcome.table.failures.size());
    outcome.markdown_path = config.output_dir / "report.md";
    outcome.csv_path = config.output_dir / "report.csv";
    write_file(outcome.markdown_path, write_report(outcome.table, ReportFormat::Markdown));
    write_file(outcome.csv_path, write_report(outcome.table, ReportFormat::Csv));
    return outcome;
}

SuiteReplay replay_suite(const SuiteConfig& config, const TaskCatalog& catalog) {
    SuiteReplay out;
    for (const auto& ep : plan_episodes(config, catalog)) {
        try {
            replay_episode(read_log_file(log_path(config, ep.key)), catalog);
            ++out.verified;
        } catch (const std::exception& e) {
            out.problems.push_back(ep.key.stem() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace tbg
