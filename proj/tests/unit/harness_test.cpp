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

#include <fstream>
#include <sstream>

#include "scripted.hpp"
#include "tbg/harness.hpp"

namespace tbg {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("tbg-harness-" + name);
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

json base_config(const fs::path& out) {
    return {{"schema_version", 1},
            {"tasks", {"micro-1-1", "micro-8-1"}},
            {"policies", {{{"kind", "scripted"}}}},
            {"output_dir", out.string()}};
}

ReportTable one_cell(double v) {
    ReportTable t;
    t.rows = {"micro-1-1"};
    t.columns = {"sweet_sour (gpt-4o)"};
    t.cells[{"micro-1-1", "sweet_sour (gpt-4o)"}] = {v, 3, 0};
    return t;
}

TEST(Config, ParsesAndRoundTrips) {
    auto dir = scratch("cfg");
    json doc = base_config(dir);
    doc["tasks"].push_back({{"id", "micro-4-2"}, {"variations", {0, 2}}});
    doc["policies"].push_back({{"kind", "sweet_sour"}, {"label", "ss"}, {"think_budget", 1}});
    doc["limits"] = {{"step_cap", 50}};
    doc["seeds"] = {0, 7};
    SuiteConfig c = SuiteConfig::from_json(doc);
    EXPECT_EQ(c.tasks.size(), 3u);
    EXPECT_EQ(c.tasks[2].variations, (std::vector<int>{0, 2}));
    EXPECT_EQ(c.policies[1].display_name(), "ss");
    EXPECT_EQ(c.limits.step_cap, 50);
    EXPECT_EQ(c.limits.max_attempts, 4);
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(SuiteConfig::from_json(c.to_json()).to_json(), c.to_json());
}

TEST(Config, RejectsBadDocuments) {
    auto dir = scratch("cfg-bad");
    auto with = [&](auto edit) {
        json d = base_config(dir);
        edit(d);
        return d;
    };
    EXPECT_THROW(SuiteConfig::from_json(with([](json& d) { d["schema_version"] = 2; })), ConfigError);
    EXPECT_THROW(SuiteConfig::from_json(with([](json& d) { d["typo"] = 1; })), ConfigError);
    EXPECT_THROW(SuiteConfig::from_json(with([](json& d) { d["policies"][0]["kind"] = "calm"; })), ConfigError);
    EXPECT_THROW(SuiteConfig::from_json(with([](json& d) { d["parallelism"] = "four"; })), ConfigError);
    try {
        SuiteConfig::from_json(with([](json& d) { d["backend"] = {{"type", "http"}, {"api_key", "sk-x"}}; }));
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(kEnvApiKey), std::string::npos);
        EXPECT_EQ(std::string(e.what()).find("sk-x"), std::string::npos);
    }
    auto invalid = [&](auto edit) { return SuiteConfig::from_json(with(edit)); };
    EXPECT_THROW(invalid([](json& d) { d["tasks"] = json::array(); }).validate(), ConfigError);
    EXPECT_THROW(invalid([](json& d) { d["policies"].push_back({{"kind", "scripted"}}); }).validate(), ConfigError);
    EXPECT_THROW(invalid([](json& d) { d["limits"] = {{"max_attempts", 0}}; }).validate(), ConfigError);
    EXPECT_THROW(invalid([](json& d) { d["output_dir"] = "/proc/forbidden/out"; }).validate(), ConfigError);
    EXPECT_THROW(invalid([](json& d) { d["backend"] = {{"type", "replay"}}; }).validate(), ConfigError);
    EXPECT_THROW(SuiteConfig::from_file(dir / "missing.json"), ConfigError);
}

TEST(Plan, OneEpisodePerTupleNamedByStem) {
    auto dir = scratch("plan");
    json doc = base_config(dir);
    doc["seeds"] = {3};
    SuiteConfig c = SuiteConfig::from_json(doc);
    TaskCatalog catalog;
    auto plan = plan_episodes(c, catalog);
    EXPECT_EQ(plan.size(), 6u);
    EXPECT_EQ(plan.front().key.stem(), "micro-1-1-0-scripted-3");
    EXPECT_EQ(log_path(c, plan.front().key), dir / "logs" / "micro-1-1-0-scripted-3.jsonl");
    doc["tasks"] = {{{"id", "micro-1-1"}, {"variations", {5}}}};
    EXPECT_THROW(plan_episodes(SuiteConfig::from_json(doc), catalog), ConfigError);
    doc["tasks"] = {"no-such-task"};
    EXPECT_THROW(plan_episodes(SuiteConfig::from_json(doc), catalog), ConfigError);
}

TEST(Report, SingleCellFormatsToOneDecimal) {
    const std::string md = write_report(one_cell(54.6), ReportFormat::Markdown);
    EXPECT_NE(md.find("| micro-1-1 | 54.6 |"), std::string::npos);
    EXPECT_NE(md.find("| Average | 54.6 |"), std::string::npos);
    EXPECT_EQ(md.find("Failures"), std::string::npos);
    const std::string csv = write_report(one_cell(54.6), ReportFormat::Csv);
    EXPECT_NE(csv.find("micro-1-1,sweet_sour (gpt-4o),54.6,3,0"), std::string::npos);
}

TEST(Report, FailuresAndMissingCells) {
    ReportTable t = one_cell(10);
    t.rows.push_back("micro-8-1");
    t.cells[{"micro-8-1", "sweet_sour (gpt-4o)"}] = {std::nullopt, 0, 2};
    t.failures = {"micro-8-1-0-x-0: boom"};
    const std::string md = write_report(t, ReportFormat::Markdown);
    EXPECT_NE(md.find("| micro-8-1 | n/a |"), std::string::npos);
    EXPECT_NE(md.find("## Failures\n\n- micro-8-1-0-x-0: boom"), std::string::npos);
    EXPECT_NE(md.find("0 (2 failed)"), std::string::npos);
    EXPECT_EQ(t.column_average("sweet_sour (gpt-4o)"), 10.0);
}

TEST(Report, AverageIsUnweightedMeanOfRows) {
    ReportTable t;
    t.columns = {"c"};
    t.rows = {"a", "b", "d"};
    t.cells[{"a", "c"}] = {100.0, 1, 0};
    t.cells[{"b", "c"}] = {50.0, 9, 0};
    t.cells[{"d", "c"}] = {std::nullopt, 0, 1};
    EXPECT_DOUBLE_EQ(*t.column_average("c"), 75.0);
    EXPECT_EQ(format_score(2.0 / 3.0 * 100), "66.7");
    EXPECT_EQ(format_score(std::nullopt), "n/a");
}

TEST(Report, CsvRoundTripsToSameMarkdown) {
    ReportTable t;
    t.columns = {"react (m)", "odd, \"name\" (m)"};
    t.rows = {"r1", "r2"};
    t.cells[{"r1", "react (m)"}] = {100.0 / 3.0, 3, 0};
    t.cells[{"r2", "react (m)"}] = {66.75, 4, 0};
    t.cells[{"r1", "odd, \"name\" (m)"}] = {std::nullopt, 0, 3};
    t.cells[{"r2", "odd, \"name\" (m)"}] = {0.0, 1, 0};
    const std::string csv = write_report(t, ReportFormat::Csv);
    EXPECT_NE(csv.find("\"odd, \"\"name\"\" (m)\""), std::string::npos);
    const ReportTable back = parse_csv_report(csv);
    EXPECT_EQ(back.columns, t.columns);
    EXPECT_EQ(back.rows, t.rows);
    EXPECT_EQ(write_report(back, ReportFormat::Markdown), write_report(t, ReportFormat::Markdown));
    EXPECT_EQ(write_report(back, ReportFormat::Csv), csv);
    EXPECT_THROW(parse_csv_report("nope\n"), ConfigError);
}

TEST(Suite, ScriptedSolutionsScoreFullAndWaitersZero) {
    auto dir = scratch("suite");
    json doc = base_config(dir);
    doc["policies"].push_back({{"kind", "scripted"}, {"label", "waiter"}, {"script", {"wait"}}});
    SuiteConfig c = SuiteConfig::from_json(doc);
    SuiteOutcome out = run_suite(c, TaskCatalog{});
    EXPECT_EQ(out.exit_code(), kExitOk);
    EXPECT_EQ(out.episodes_run, 12);
    ASSERT_EQ(out.table.rows, (std::vector<std::string>{"micro-1-1", "micro-8-1"}));
    for (const auto& row : out.table.rows) {
        EXPECT_EQ(out.table.cell(row, "scripted (scripted)")->mean, 100.0);
        EXPECT_EQ(out.table.cell(row, "waiter (scripted)")->mean, 0.0);
        EXPECT_EQ(out.table.cell(row, "scripted (scripted)")->episodes, 3);
    }
    const std::string md = slurp(out.markdown_path);
    EXPECT_NE(md.find("| Average | 100.0 | 0.0 |"), std::string::npos);
}

TEST(Suite, ResumeSkipsFinishedLogsAndGivesTheSameReport) {
    auto dir = scratch("resume");
    SuiteConfig c = SuiteConfig::from_json(base_config(dir));
    run_suite(c, TaskCatalog{});
    const std::string full = slurp(dir / "report.md");
    const auto victim = log_path(c, {"micro-8-1", 1, "scripted", 0});
    const std::string original_log = slurp(victim);
    {   // An interrupted episode: header and a couple of records only.
        std::ofstream out(victim, std::ios::trunc);
        std::istringstream in(original_log);
        std::string line;
        for (int i = 0; i < 3 && std::getline(in, line); ++i) out << line << '\n';
    }
    fs::remove(log_path(c, {"micro-1-1", 2, "scripted", 0}));
    SuiteOutcome again = run_suite(c, TaskCatalog{});
    EXPECT_EQ(again.episodes_run, 2);
    EXPECT_EQ(again.episodes_skipped, 4);
    EXPECT_EQ(slurp(dir / "report.md"), full);
    EXPECT_EQ(slurp(victim), original_log);
}

TEST(Suite, EpisodeFailuresBecomeAbsentCells) {
    auto dir = scratch("failures");
    json doc = base_config(dir);
    doc["tasks"] = {"micro-8-1"};
    doc["policies"] = {{{"kind", "react"}}};
    doc["backend"] = {{"type", "replay"}, {"transcript_dir", (dir / "none").string()}};
    SuiteConfig c = SuiteConfig::from_json(doc);
    SuiteOutcome out = run_suite(c, TaskCatalog{});
    EXPECT_EQ(out.exit_code(), kExitPartialFailure);
    EXPECT_EQ(out.failures, 3);
    EXPECT_FALSE(out.table.cell("micro-8-1", "react (replay)")->mean.has_value());
    const std::string md = slurp(out.markdown_path);
    EXPECT_NE(md.find("## Failures"), std::string::npos);
    EXPECT_NE(md.find("| micro-8-1 | n/a |"), std::string::npos);
    LoggedEpisode log = read_log_file(log_path(c, {"micro-8-1", 0, "react", 0}));
    EXPECT_TRUE(log.error.has_value());
}

TEST(Suite, ParallelMatchesSerial) {
    auto serial = scratch("serial"), parallel = scratch("parallel");
    auto doc = [](const fs::path& out, int n) {
        json d = base_config(out);
        d["tasks"] = {"micro-1-1", "micro-1-3", "micro-4-2", "micro-8-1"};
        d["policies"] = {{{"kind", "sweet_sour"}}, {{"kind", "reflexion"}}};
        d["backend"] = {{"type", "scripted"},
                        {"rules", {{{"pattern", "REFLECTION"}, {"replies", {"lesson"}}},
                                   {{"pattern", "."}, {"replies", {"look around", "wait", "inventory"}}}}}};
        d["limits"] = {{"step_cap", 12}};
        d["parallelism"] = n;
        d["output_dir"] = out.string();
        return SuiteConfig::from_json(d);
    };
    run_suite(doc(serial, 1), TaskCatalog{});
    run_suite(doc(parallel, 8), TaskCatalog{});
    EXPECT_EQ(slurp(serial / "report.md"), slurp(parallel / "report.md"));
    EXPECT_EQ(slurp(serial / "report.csv"), slurp(parallel / "report.csv"));
    for (const auto& entry : fs::directory_iterator(serial / "logs")) {
        EXPECT_EQ(slurp(entry.path()), slurp(parallel / "logs" / entry.path().filename())) << entry.path();
    }
}

TEST(Replay, ScriptedRunReplaysCleanly) {
    auto dir = scratch("replay-ok");
    SuiteConfig c = SuiteConfig::from_json(base_config(dir));
    run_suite(c, TaskCatalog{});
    SuiteReplay r = replay_suite(c, TaskCatalog{});
    EXPECT_EQ(r.verified, 6);
    EXPECT_TRUE(r.problems.empty());
}

class ReplayLogTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = scratch(std::string("replay-log-") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        config_ = SuiteConfig::from_json(base_config(dir_));
        config_.tasks = {{"micro-1-1", {0}}};
        run_suite(config_, TaskCatalog{});
        std::istringstream in(slurp(log_path(config_, {"micro-1-1", 0, "scripted", 0})));
        for (std::string line; std::getline(in, line);) lines_.push_back(line);
    }

    LoggedEpisode parse(const std::vector<std::string>& lines) {
        std::string text;
        for (const auto& l : lines) text += l + "\n";
        std::istringstream in(text);
        return read_log(in);
    }

    fs::path dir_;
    SuiteConfig config_;
    std::vector<std::string> lines_;
};

TEST_F(ReplayLogTest, CleanLogReplays) {
    EpisodeResult r = replay_episode(parse(lines_), TaskCatalog{});
    EXPECT_EQ(r.final_score, 100);
    EXPECT_EQ(r.attempts.at(0).env_steps, 18);
}

TEST_F(ReplayLogTest, TruncatedLogIsASchemaError) {
    auto cut = lines_;
    cut.resize(cut.size() / 2);
    EXPECT_THROW(replay_episode(parse(cut), TaskCatalog{}), LogSchemaError);
    auto broken = lines_;
    broken.back() = broken.back().substr(0, 10);
    EXPECT_THROW(parse(broken), LogSchemaError);
    auto versioned = lines_;
    json header = json::parse(versioned[0]);
    header["schema_version"] = 99;
    versioned[0] = header.dump();
    EXPECT_THROW(parse(versioned), LogSchemaError);
}

TEST_F(ReplayLogTest, ChangedObservationDivergesAtThatStep) {
    auto edited = lines_;
    for (auto& line : edited) {
        json r = json::parse(line);
        if (r["type"] == "step" && r["step"] == 7) {
            r["observation"] = "Something else happened.";
            line = r.dump();
        }
    }
    try {
        replay_episode(parse(edited), TaskCatalog{});
        FAIL();
    } catch (const ReplayDivergence& e) {
        EXPECT_EQ(e.step(), 7);
        EXPECT_EQ(e.field(), "observation");
        EXPECT_NE(std::string(e.what()).find("step 7"), std::string::npos);
    }
}

TEST_F(ReplayLogTest, ChangedCommandDiverges) {
    auto edited = lines_;
    for (auto& line : edited) {
        json r = json::parse(line);
        if (r["type"] == "step" && r["step"] == 3) {
            r["command"] = "wait";
            line = r.dump();
        }
    }
    EXPECT_THROW(replay_episode(parse(edited), TaskCatalog{}), ReplayDivergence);
}

TEST(Play, LookAroundListsTheHallway) {
    PlaySession s(bundled_task("micro-1-1").instances[0], 0, nullptr);
    const std::string out = s.submit("look around");
    EXPECT_TRUE(out.starts_with("This room is called the hallway."));
    EXPECT_NE(out.find("A door to the kitchen"), std::string::npos);
}

TEST(Play, UnknownCommandChargesAStep) {
    PlaySession s(bundled_task("micro-1-1").instances[0], 0, nullptr);
    const std::string out = s.submit("fly to the moon");
    EXPECT_EQ(s.steps(), 1);
    EXPECT_NE(out.find("Score: 0"), std::string::npos);
}

TEST(Play, ManualCompletionIsLoggedAndReplays) {
    const auto inst = bundled_task("micro-1-1").instances[0];
    std::stringstream log;
    {
        PlaySession s(inst, 0, &log);
        std::string last;
        for (const auto& cmd : inst->solution) last = s.submit(cmd);
        EXPECT_TRUE(s.done());
        EXPECT_EQ(s.score(), 100);
        EXPECT_NE(last.find("Task completed."), std::string::npos);
        EXPECT_THROW(s.submit("wait"), EpisodeFinishedError);
    }
    EpisodeResult r = replay_episode(read_log(log), TaskCatalog{});
    EXPECT_EQ(r.final_score, 100);
    EXPECT_EQ(r.policy, "human");
}

}  // namespace
}  // namespace tbg
