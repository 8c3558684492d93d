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
#include "tbg/harness.hpp"

namespace tbg {

PlaySession::PlaySession(std::shared_ptr<const TaskInstance> instance, std::uint64_t seed, std::ostream* log,
                         const TemplateSet& templates)
    : instance_(std::move(instance)), templates_(templates) {
    auto [state, first] = init_episode(instance_, seed);
    state_ = std::move(state);
    initial_ = first.text;
    attempt_.initial_observation = initial_;
    if (log != nullptr) {
        logger_ = std::make_unique<TrajectoryLogger>(
            *log, TrajectoryLogger::Header{{instance_->task_id, instance_->variation, "human", seed},
                                           "human",
                                           "keyboard",
                                           "human",
                                           limits_,
                                           instance_->goal_text});
        logger_->on_attempt_start(1, initial_);
    }
}

int PlaySession::score() const { return tbg::score(state_); }

std::string PlaySession::submit(const std::string& line) {
    if (done()) throw EpisodeFinishedError("the session is over");
    StepResult r = step_text(state_, line, templates_);
    state_ = std::move(r.state);
    TrajectoryStep s;
    s.step = state_.step;
    s.kind = StepKind::EnvAction;
    s.text_out = line;
    s.command = line;
    s.observation = r.observation.text;
    s.reward_delta = r.observation.reward_delta;
    s.score = score();
    attempt_.steps.push_back(s);
    attempt_.env_steps = state_.step;
    if (logger_) logger_->on_step(1, s);

    std::string out = r.observation.text;
    if (s.reward_delta > 0) out += "\nReward: +" + std::to_string(s.reward_delta);
    out += "\nScore: " + std::to_string(s.score);
    if (!state_.done && state_.step >= limits_.step_cap) out += "\nStep limit reached.";
    return out;
}

void PlaySession::finish() {
    if (finished_) return;
    finished_ = true;
    attempt_.score = score();
    attempt_.outcome = state_.done ? AttemptOutcome::Completed : AttemptOutcome::StepCapReached;
    if (!logger_) return;
    logger_->on_attempt_end(attempt_);
    EpisodeResult result;
    result.task_id = instance_->task_id;
    result.variation = instance_->variation;
    result.policy = "human";
    result.attempts = {attempt_};
    result.final_score = attempt_.score;
    result.best_score = attempt_.score;
    logger_->episode_end(result);
}

PlaySession::~PlaySession() {
    try {
        finish();
    } catch (...) {
    }
}

}  // namespace tbg
