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
#ifndef TBG_MEMORY_HPP
#define TBG_MEMORY_HPP

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tbg {

inline constexpr std::size_t kDefaultMemoryBudget = 8;

enum class Valence { Sweet, Sour };
enum class AttemptOutcome { Completed, StepCapReached, Failed };

std::string_view to_string(Valence valence);
std::string_view to_string(AttemptOutcome outcome);

// A reflection made right after a rewarded step, with the step it explains.
struct ShortTermEntry {
    std::string reflection;
    std::string observation;
    std::string action;
    int reward = 0;

    bool operator==(const ShortTermEntry&) const = default;
};

struct EntryMeta {
    std::string task_id;
    int attempt_index = 0;
    int step_index = 0;
};

struct LongTermEntry {
    std::string reflection;
    Valence valence = Valence::Sweet;
    std::string task_id;
    int attempt_index = 0;
    int step_index = 0;
    std::uint64_t sequence = 0;

    bool operator==(const LongTermEntry&) const = default;
};

struct MemoryStateError : std::logic_error {
    using std::logic_error::logic_error;
};

// Two buffers: sweet reflections of the running attempt, and an append-only
// log of everything kept across attempts. One store per episode.
class MemoryStore {
public:
    // Throws MemoryStateError when collection has ended for this attempt and
    // std::invalid_argument when the reward is not positive.
    void record_sweet(ShortTermEntry entry, const EntryMeta& meta);

    // Goes straight to long-term memory and ends collection for the attempt.
    // Entries already collected stay in the short-term buffer until end_attempt.
    void record_sour(std::string reflection, const EntryMeta& meta);

    // Moves short-term entries to long-term in recording order and reopens
    // collection. Returns how many entries moved.
    std::size_t end_attempt(AttemptOutcome outcome);

    // Short-term reflections (oldest first) then long-term reflections of
    // `task_id` (newest first). When over budget, the newest entries win.
    std::vector<std::string> context_view(const std::string& task_id, std::size_t budget = kDefaultMemoryBudget) const;

    const std::vector<ShortTermEntry>& short_term() const { return short_term_; }
    const std::vector<LongTermEntry>& long_term() const { return long_term_; }
    bool collecting() const { return collecting_; }

private:
    void append(std::string reflection, Valence valence, const EntryMeta& meta);

    std::vector<ShortTermEntry> short_term_;
    std::vector<EntryMeta> short_meta_;
    std::vector<LongTermEntry> long_term_;
    std::uint64_t next_sequence_ = 1;
    bool collecting_ = true;
};

}  // namespace tbg

#endif  // TBG_MEMORY_HPP
