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
#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "random_world.hpp"
#include "scripted.hpp"
#include "tbg/harness.hpp"

namespace tbg {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using testing::action_backend;
using testing::ScheduleRecorder;

constexpr int kStepCap = 150;
constexpr std::chrono::milliseconds kGoldenBudget{1000};

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("tbg-acceptance-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string without_header(const std::string& log) { return log.substr(log.find('\n') + 1); }

struct Golden {
    int steps = 0;
    int score = 0;
    bool completed = false;
    std::chrono::microseconds elapsed{};
};

Golden play(const std::shared_ptr<const TaskInstance>& inst, const std::vector<std::string>& commands) {
    const auto start = std::chrono::steady_clock::now();
    auto [s, obs] = init_episode(inst, 0);
    Golden g;
    for (const auto& c : commands) {
        StepResult r = step_text(s, c, default_templates());
        s = std::move(r.state);
        g.completed = r.observation.text.find("Task completed.") != std::string::npos;
        if (s.done) break;
    }
    g.steps = s.step;
    g.score = score(s);
    g.completed = g.completed && s.done;
    g.elapsed = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start);
    return g;
}

TEST(Acceptance, AC1_GoldenTrajectories) {
    // Boiling water with the thermometer check-ins, at 20 degrees per tick.
    const std::vector<std::string> boil = {"look around", "open door to kitchen", "go to kitchen", "look around",
                                           "pick up thermometer", "open cupboard", "pick up metal pot",
                                           "move metal pot to sink", "activate sink", "deactivate sink",
                                           "pick up metal pot", "focus on substance in metal pot",
                                           "move metal pot to stove", "activate stove",
                                           "use thermometer in inventory on substance in metal pot",
                                           "examine substance in metal pot",
                                           "use thermometer in inventory on substance in metal pot",
                                           "examine substance in metal pot"};
    const std::vector<std::string> animal = {"look around", "open door to greenhouse", "go to greenhouse",
                                             "open door to outside", "go to outside", "look around",
                                             "focus on dove egg", "pick up dove egg", "go to kitchen",
                                             "move dove egg to red box"};
    for (const auto& [task, commands] : {std::pair{"micro-1-1", boil}, std::pair{"micro-8-1", animal}}) {
        const Golden g = play(bundled_task(task).instances.at(0), commands);
        EXPECT_TRUE(g.completed) << task;
        EXPECT_EQ(g.score, 100) << task;
        EXPECT_LT(g.steps, kStepCap) << task;
        EXPECT_LT(g.elapsed, kGoldenBudget) << task;
    }
}

TEST(Acceptance, AC2_AdmissibilityOracle) {
    std::mt19937_64 rng(20260201);
    int states = 0, mismatches = 0;
    std::size_t checked = 0;
    for (; states < 250; ++states) {
        const WorldState s = testing::random_state(rng);
        std::vector<std::string> fast;
        // The library's dry-run set against the oracle's independent dry run.
        for (const auto& a : admissible_actions(s, default_templates())) fast.push_back(a.canonical_text);
        std::sort(fast.begin(), fast.end());
        if (fast != oracle::admissible_texts(s, default_templates())) ++mismatches;
        const std::set<std::string> admissible(fast.begin(), fast.end());
        if (s.done) {
            if (!admissible.empty()) ++mismatches;
            continue;
        }
        for (const auto& a : enumerate_groundings(s, default_templates())) {
            const bool changes = !oracle::unchanged_except_step(s, step(s, a).state);
            if (changes != admissible.contains(a.canonical_text)) ++mismatches;
            ++checked;
        }
    }
    EXPECT_GE(states, 200);
    EXPECT_GT(checked, 1000u);
    EXPECT_EQ(mismatches, 0);
}

TEST(Acceptance, AC3_MemorySemantics) {
    // (a) and (d) on a hand-made sequence.
    {
        MemoryStore m;
        m.record_sweet({"sweet-1", "obs", "act", 25}, {"t", 1, 3});
        const auto view = m.context_view("t");
        EXPECT_NE(std::find(view.begin(), view.end(), "sweet-1"), view.end());
        m.record_sour("sour-1", {"t", 1, 9});
        EXPECT_FALSE(m.collecting());
        ASSERT_EQ(m.long_term().size(), 1u);
        EXPECT_EQ(m.long_term().back().reflection, "sour-1");
        EXPECT_EQ(m.long_term().back().valence, Valence::Sour);
        EXPECT_THROW(m.record_sweet({"late", "o", "a", 1}, {"t", 1, 10}), MemoryStateError);
        m.end_attempt(AttemptOutcome::StepCapReached);
        EXPECT_TRUE(m.short_term().empty());
        EXPECT_EQ(m.long_term().size(), 2u);
    }
    // (b), (c) and (d) on random operation sequences.
    std::mt19937_64 rng(7);
    int violations = 0;
    for (int seq = 0; seq < 1000; ++seq) {
        MemoryStore m;
        std::vector<LongTermEntry> previous;
        std::multiset<std::string> sweet_recorded;
        int next = 0, attempt = 1;
        const int ops = 5 + static_cast<int>(rng() % 40);
        for (int op = 0; op < ops; ++op) {
            const auto kind = rng() % 10;
            if (kind < 5 && m.collecting()) {
                const std::string text = "s" + std::to_string(seq) + "-" + std::to_string(next++);
                m.record_sweet({text, "o", "a", 1 + static_cast<int>(rng() % 50)}, {"task", attempt, op});
                sweet_recorded.insert(text);
                const auto view = m.context_view("task", 1 + rng() % 8);
                if (std::find(view.begin(), view.end(), text) == view.end()) ++violations;
            } else if (kind < 7 && m.collecting()) {
                const std::string text = "f" + std::to_string(seq) + "-" + std::to_string(next++);
                m.record_sour(text, {"task", attempt, op});
                if (m.collecting() || m.long_term().empty() || m.long_term().back().reflection != text) ++violations;
            } else if (kind < 9) {
                m.end_attempt(rng() % 2 ? AttemptOutcome::Completed : AttemptOutcome::StepCapReached);
                ++attempt;
                if (!m.short_term().empty()) ++violations;
                std::multiset<std::string> in_long;
                for (const auto& e : m.long_term()) {
                    if (e.valence == Valence::Sweet) in_long.insert(e.reflection);
                }
                if (in_long != sweet_recorded) ++violations;
            } else {
                (void)m.context_view("task", rng() % 10);
            }
            const auto& now = m.long_term();
            if (now.size() < previous.size() || !std::equal(previous.begin(), previous.end(), now.begin())) ++violations;
            previous = now;
        }
    }
    EXPECT_EQ(violations, 0);
}

// An action stream where the first `failures` attempts make partial progress
// and then idle out the cap, followed by the full solution.
std::vector<std::string> mixed_stream(const TaskInstance& inst, int failures, int cap) {
    std::vector<std::string> out;
    for (int f = 0; f < failures; ++f) {
        const std::size_t prefix = (inst.solution.size() * static_cast<std::size_t>(f + 1)) / 5;
        out.insert(out.end(), inst.solution.begin(), inst.solution.begin() + static_cast<long>(prefix));
        out.resize(out.size() + static_cast<std::size_t>(cap) - prefix, "wait");
    }
    out.insert(out.end(), inst.solution.begin(), inst.solution.end());
    return out;
}

struct PolicyRun {
    EpisodeResult result;
    ScheduleRecorder recorder;
};

PolicyRun run_policy(const std::shared_ptr<const TaskInstance>& inst, PolicyKind kind,
                     const std::vector<std::string>& stream) {
    PolicySpec policy;
    policy.kind = kind;
    const PromptSet& prompts = PromptSet::bundled_default();
    auto backend = action_backend(stream, {"sweet lesson"}, {"sour lesson"});
    PolicyRun run;
    AttemptContext ctx;
    ctx.instance = inst;
    ctx.policy = &policy;
    ctx.prompts = &prompts;
    ctx.templates = &default_templates();
    ctx.backend = backend.get();
    ctx.observer = &run.recorder;
    run.result = run_episode(ctx);
    return run;
}

std::vector<std::pair<std::shared_ptr<const TaskInstance>, int>> twenty_episodes() {
    std::vector<std::pair<std::shared_ptr<const TaskInstance>, int>> out;
    int i = 0;
    while (out.size() < 20) {
        for (const auto& task : bundled_suite()) {
            for (const auto& inst : task.instances) {
                if (out.size() < 20) out.emplace_back(inst, i++ % 5);
            }
        }
    }
    return out;
}

TEST(Acceptance, AC4_TriggerScheduleEquivalence) {
    int perfect = 0, imperfect_attempts = 0;
    for (const auto& [inst, failures] : twenty_episodes()) {
        const auto stream = mixed_stream(*inst, failures, kStepCap);
        const PolicyRun react = run_policy(inst, PolicyKind::React, stream);
        const PolicyRun reflexion = run_policy(inst, PolicyKind::Reflexion, stream);
        const PolicyRun sweet = run_policy(inst, PolicyKind::SweetSour, stream);
        const PolicyRun fail_only = run_policy(inst, PolicyKind::SweetSourFailOnly, stream);
        const std::string who = inst->task_id + "/v" + std::to_string(inst->variation);

        EXPECT_TRUE(react.recorder.events.empty()) << who;
        EXPECT_LE(reflexion.result.attempts.size(), 4u) << who;
        EXPECT_EQ(reflexion.result.attempts.size(), static_cast<std::size_t>(std::min(failures + 1, 4))) << who;
        for (const auto& a : reflexion.result.attempts) {
            EXPECT_EQ(a.sour_reflections, a.score < 100 ? 1 : 0) << who;
            EXPECT_EQ(a.sweet_reflections, 0) << who;
            if (a.score < 100) ++imperfect_attempts;
        }
        for (const auto& a : sweet.result.attempts) {
            // Positive-reward steps counted straight from the trajectory.
            int rewards = 0;
            for (const auto& s : a.steps) {
                if (s.kind == StepKind::EnvAction && s.reward_delta > 0) ++rewards;
            }
            EXPECT_EQ(a.sweet_reflections, rewards) << who;
            EXPECT_EQ(a.sour_reflections, a.score < 100 ? 1 : 0) << who;
        }
        EXPECT_EQ(fail_only.recorder.events, reflexion.recorder.events) << who;
        EXPECT_EQ(fail_only.recorder.env_steps, reflexion.recorder.env_steps) << who;
        if (reflexion.result.final_score == 100) ++perfect;
    }
    // Mixed outcomes: some episodes end perfect, some never do.
    EXPECT_GT(perfect, 0);
    EXPECT_LT(perfect, 20);
    EXPECT_GT(imperfect_attempts, 0);
}

TEST(Acceptance, AC5_StepAccounting) {
    int attempts = 0;
    for (const auto& [inst, failures] : twenty_episodes()) {
        const PolicyRun run = run_policy(inst, PolicyKind::SweetSour, mixed_stream(*inst, failures, kStepCap));
        for (const auto& a : run.result.attempts) {
            ++attempts;
            EXPECT_LE(a.env_steps, kStepCap);
            int acting = 0;
            for (const auto& s : a.steps) {
                if (s.kind == StepKind::EnvAction || s.kind == StepKind::Think) {
                    EXPECT_EQ(s.step, ++acting);
                } else {
                    EXPECT_EQ(s.step, acting) << "reflection moved the step counter";
                }
            }
            EXPECT_EQ(acting, a.env_steps);
        }
    }
    EXPECT_GT(attempts, 20);

    PolicySpec waiter;
    waiter.kind = PolicyKind::Scripted;
    waiter.script = {"wait"};
    AttemptContext ctx;
    ctx.instance = bundled_task("micro-8-1").instances.at(0);
    ctx.policy = &waiter;
    ctx.prompts = &PromptSet::bundled_default();
    ctx.templates = &default_templates();
    const EpisodeResult e = run_episode(ctx);
    ASSERT_EQ(e.attempts.size(), 1u);
    EXPECT_EQ(e.attempts[0].env_steps, kStepCap);
    EXPECT_EQ(e.attempts[0].steps.back().step, kStepCap);
    EXPECT_EQ(e.attempts[0].outcome, AttemptOutcome::StepCapReached);
    EXPECT_EQ(e.final_score, 0);
}

json suite_doc(const fs::path& out, int parallelism) {
    return {{"schema_version", 1},
            {"tasks", {"micro-1-1", "micro-1-3", "micro-4-2", "micro-8-1"}},
            {"policies", {{{"kind", "react"}}, {{"kind", "reflexion"}}, {{"kind", "sweet_sour"}},
                          {{"kind", "sweet_sour_fail_only"}}, {{"kind", "scripted"}}}},
            {"limits", {{"step_cap", kStepCap}}},
            {"output_dir", out.string()},
            {"parallelism", parallelism},
            {"record_transcripts", true}};
}

RunOptions mixed_backends() {
    RunOptions options;
    options.backend_factory = [](const PlannedEpisode& ep) -> std::shared_ptr<LlmBackend> {
        if (ep.key.policy == "scripted") return nullptr;
        return action_backend(mixed_stream(*ep.instance, ep.instance->variation + 1, kStepCap), {"sweet lesson"},
                              {"sour lesson"});
    };
    return options;
}

TEST(Acceptance, AC6_DeterminismAndReplay) {
    const auto first = scratch("det-a"), second = scratch("det-b"), wide = scratch("det-c"), replayed = scratch("det-r");
    const SuiteConfig config = SuiteConfig::from_json(suite_doc(first, 1));
    const SuiteOutcome a = run_suite(config, TaskCatalog{}, mixed_backends());
    ASSERT_EQ(a.failures, 0);

    // Engine replay of every logged episode.
    const SuiteReplay check = replay_suite(config, TaskCatalog{});
    EXPECT_EQ(check.verified, 60);
    EXPECT_TRUE(check.problems.empty()) << (check.problems.empty() ? "" : check.problems.front());

    // Same config twice, and serial against eight workers.
    run_suite(SuiteConfig::from_json(suite_doc(second, 1)), TaskCatalog{}, mixed_backends());
    run_suite(SuiteConfig::from_json(suite_doc(wide, 8)), TaskCatalog{}, mixed_backends());
    for (const char* name : {"report.md", "report.csv"}) {
        EXPECT_EQ(slurp(first / name), slurp(second / name)) << name;
        EXPECT_EQ(slurp(first / name), slurp(wide / name)) << name;
    }

    // Backend replay from the recorded transcripts reproduces every trajectory.
    json doc = suite_doc(replayed, 4);
    doc["record_transcripts"] = false;
    doc["backend"] = {{"type", "replay"}, {"transcript_dir", (first / "transcripts").string()}};
    const SuiteConfig replay_config = SuiteConfig::from_json(doc);
    const SuiteOutcome r = run_suite(replay_config, TaskCatalog{});
    EXPECT_EQ(r.failures, 0);
    int identical = 0;
    for (const auto& ep : plan_episodes(config, TaskCatalog{})) {
        const auto original = slurp(log_path(config, ep.key));
        const auto again = slurp(log_path(replay_config, ep.key));
        if (without_header(original) == without_header(again)) ++identical;
    }
    EXPECT_EQ(identical, 60);
}

TEST(Acceptance, AC7_ParserRoundTrip) {
    std::mt19937_64 rng(424242);
    int failures = 0;
    std::size_t actions = 0;
    for (int i = 0; i < 500; ++i) {
        const WorldState s = testing::random_state(rng);
        for (const auto& a : admissible_actions(s, default_templates())) {
            ++actions;
            const std::string text = render(a, s, default_templates());
            const auto parsed = parse(text, default_templates());
            if (!std::holds_alternative<Command>(parsed)) {
                ++failures;
                continue;
            }
            const auto grounded = ground(std::get<Command>(parsed), s, default_templates());
            if (!std::holds_alternative<GroundedAction>(grounded) ||
                std::get<GroundedAction>(grounded).template_id != a.template_id ||
                std::get<GroundedAction>(grounded).bindings != a.bindings) {
                ++failures;
            }
        }
    }
    EXPECT_GT(actions, 1000u);
    EXPECT_EQ(failures, 0);
}

TEST(Acceptance, AC8_ScoreLaw) {
    int pairs = 0, checks = 0, mismatches = 0;
    std::mt19937_64 rng(99);
    for (const auto& task : bundled_suite()) {
        for (const auto& inst : task.instances) {
            ++pairs;
            const int total = oracle::total_points(*inst);
            auto law = [&](const WorldState& s) {
                ++checks;
                const int expected = static_cast<int>(std::floor(100.0 * oracle::earned_points(s) / total));
                if (score(s) != expected) ++mismatches;
            };
            // The stored solution, checked after every step.
            auto [s, obs] = init_episode(inst, 0);
            law(s);
            for (const auto& c : inst->solution) {
                s = step_text(s, c, default_templates()).state;
                law(s);
            }
            EXPECT_TRUE(s.done) << task.id << "/v" << inst->variation;
            EXPECT_EQ(score(s), 100) << task.id << "/v" << inst->variation;
            // Random admissible walks reach partial scores.
            for (int walk = 0; walk < 10; ++walk) {
                auto [w, first] = init_episode(inst, rng());
                for (int k = 0; k < 60 && !w.done; ++k) {
                    const auto options = admissible_actions_fast(w, default_templates());
                    if (options.empty()) break;
                    w = step(w, options[rng() % options.size()]).state;
                    law(w);
                }
                if (w.done) EXPECT_EQ(score(w), 100);
            }
        }
    }
    EXPECT_EQ(pairs, 12);
    EXPECT_GT(checks, 1000);
    EXPECT_EQ(mismatches, 0);
}

TEST(Acceptance, AC9_LiveApiSmoke) {
    if (!HttpConfig::env_available()) GTEST_SKIP() << "set " << kEnvApiKey << " to run against a live endpoint";
    const auto dir = scratch("live");
    json doc = {{"schema_version", 1},
                {"tasks", {{{"id", "micro-8-1"}, {"variations", {0}}}}},
                {"policies", {{{"kind", "react"}}}},
                {"backend", {{"type", "http"}}},
                {"limits", {{"step_cap", 30}}},
                {"output_dir", dir.string()}};
    const SuiteConfig config = SuiteConfig::from_json(doc);
    const SuiteOutcome out = run_suite(config, TaskCatalog{});
    EXPECT_EQ(out.failures, 0) << (out.table.failures.empty() ? "" : out.table.failures.front());
    const auto key = plan_episodes(config, TaskCatalog{}).at(0).key;
    const LoggedEpisode log = read_log_file(log_path(config, key));
    EXPECT_TRUE(log.end.has_value());
    EXPECT_NO_THROW(replay_episode(log, TaskCatalog{}));
}

// One line per criterion, after gtest's own output.
class CriterionPrinter : public ::testing::EmptyTestEventListener {
public:
    void OnTestEnd(const ::testing::TestInfo& info) override {
        const auto* r = info.result();
        const char* verdict = r->Skipped() ? "SKIP" : (r->Passed() ? "PASS" : "FAIL");
        std::string name = info.name();
        const auto underscore = name.find('_');
        lines_.push_back(std::string(verdict) + " " + name.substr(0, underscore) + " " + name.substr(underscore + 1) +
                         " (" + std::to_string(r->elapsed_time()) + " ms)");
    }
    void OnTestProgramEnd(const ::testing::UnitTest&) override {
        for (const auto& l : lines_) std::printf("%s\n", l.c_str());
        std::fflush(stdout);
    }

private:
    std::vector<std::string> lines_;
};

}  // namespace
}  // namespace tbg

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    ::testing::UnitTest::GetInstance()->listeners().Append(new tbg::CriterionPrinter);
    return RUN_ALL_TESTS();
}
