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
#include "tbg/memory.hpp"


namespace tbg {

std::string_view to_string(Valence valence) { return valence == Valence::Sweet ? "sweet" : "sour"; }

std::string_view to_string(AttemptOutcome outcome) {
    switch (outcome) {
        case AttemptOutcome::Completed:
            return "completed";
        case AttemptOutcome::StepCapReached:
            return "step_cap_reached";
        default:
            return "failed";
    }
}

void MemoryStore::record_sweet(ShortTermEntry entry, const EntryMeta& meta) {
    if (!collecting_) throw MemoryStateError("short-term collection has ended for this attempt");
    if (entry.reward <= 0) throw std::invalid_argument("sweet entries need a positive reward");
    short_term_.push_back(std::move(entry));
    short_meta_.push_back(meta);
}

void MemoryStore::record_sour(std::string reflection, const EntryMeta& meta) {
    append(std::move(reflection), Valence::Sour, meta);
    collecting_ = false;
}

std::size_t MemoryStore::end_attempt(AttemptOutcome) {
    const std::size_t moved = short_term_.size();
    for (std::size_t i = 0; i < moved; ++i) append(std::move(short_term_[i].reflection), Valence::Sweet, short_meta_[i]);
    short_term_.clear();
    short_meta_.clear();
    collecting_ = true;
    return moved;
}

std::vector<std::string> MemoryStore::context_view(const std::string& task_id, std::size_t budget) const {
    std::vector<std::string> view;
    if (budget == 0) return view;
    std::vector<std::size_t> recent;
    for (std::size_t i = short_term_.size(); i-- > 0 && recent.size() < budget;) {
        if (short_meta_[i].task_id == task_id) recent.push_back(i);
    }
    for (auto it = recent.rbegin(); it != recent.rend(); ++it) view.push_back(short_term_[*it].reflection);
    for (auto it = long_term_.rbegin(); it != long_term_.rend() && view.size() < budget; ++it) {
        if (it->task_id == task_id) view.push_back(it->reflection);
    }
    return view;
}

void MemoryStore::append(std::string reflection, Valence valence, const EntryMeta& meta) {
    long_term_.push_back(LongTermEntry{std::move(reflection), valence, meta.task_id, meta.attempt_index, meta.step_index, next_sequence_++});
}

}  // namespace tbg
