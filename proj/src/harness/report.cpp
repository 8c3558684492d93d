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
#include <cstdio>
#include <numeric>
#include <sstream>

#include "tbg/harness.hpp"

namespace tbg {
namespace {

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(cell));
            cell.clear();
            any = true;
        } else if (c == '\n') {
            row.push_back(std::move(cell));
            cell.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else if (c != '\r') {
            cell += c;
            any = true;
        }
    }
    if (quoted) throw ConfigError("csv report: unterminated quoted field");
    if (any) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::optional<double> parse_score(const std::string& text) {
    if (text == "n/a") return std::nullopt;
    try {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (used != text.size()) throw ConfigError("csv report: bad score '" + text + "'");
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError("csv report: bad score '" + text + "'");
    }
}

int parse_count(const std::string& text) {
    try {
        return std::stoi(text);
    } catch (const std::logic_error&) {
        throw ConfigError("csv report: bad count '" + text + "'");
    }
}

std::string md_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '|') out += '\\';
        out += c == '\n' ? ' ' : c;
    }
    return out;
}

std::optional<double> average_for(const ReportTable& t, const std::string& column) {
    auto it = t.averages.find(column);
    return it != t.averages.end() ? it->second : t.column_average(column);
}

}  // namespace

const ReportCell* ReportTable::cell(const std::string& row, const std::string& column) const {
    auto it = cells.find({row, column});
    return it == cells.end() ? nullptr : &it->second;
}

std::optional<double> ReportTable::column_average(const std::string& column) const {
    double sum = 0;
    int n = 0;
    for (const auto& row : rows) {
        const ReportCell* c = cell(row, column);
        if (c != nullptr && c->mean) {
            sum += *c->mean;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

std::string format_score(std::optional<double> value) {
    if (!value) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", *value);
    return buf;
}

std::string write_report(const ReportTable& t, ReportFormat format) {
    std::ostringstream out;
    if (format == ReportFormat::Csv) {
        out << "task,column,mean,episodes,failures\n";
        for (const auto& row : t.rows) {
            for (const auto& col : t.columns) {
                const ReportCell* c = t.cell(row, col);
                const ReportCell empty;
                if (c == nullptr) c = &empty;
                out << csv_field(row) << ',' << csv_field(col) << ',' << format_score(c->mean) << ',' << c->episodes
                    << ',' << c->failures << '\n';
            }
        }
        for (const auto& col : t.columns) {
            out << "Average," << csv_field(col) << ',' << format_score(average_for(t, col)) << ",,\n";
        }
        return out.str();
    }

    auto header = [&] {
        out << "| Task |";
        for (const auto& col : t.columns) out << ' ' << md_escape(col) << " |";
        out << "\n|:---|";
        for (std::size_t i = 0; i < t.columns.size(); ++i) out << "---:|";
        out << '\n';
    };
    out << "# Scores\n\nMean final score per task over the selected variations (0 to 100).\n\n";
    header();
    for (const auto& row : t.rows) {
        out << "| " << md_escape(row) << " |";
        for (const auto& col : t.columns) {
            const ReportCell* c = t.cell(row, col);
            out << ' ' << format_score(c ? c->mean : std::nullopt) << " |";
        }
        out << '\n';
    }
    out << "| Average |";
    for (const auto& col : t.columns) out << ' ' << format_score(average_for(t, col)) << " |";
    out << "\n\n## Episodes per cell\n\nScored episodes; failed ones in parentheses.\n\n";
    header();
    for (const auto& row : t.rows) {
        out << "| " << md_escape(row) << " |";
        for (const auto& col : t.columns) {
            const ReportCell* c = t.cell(row, col);
            const int episodes = c ? c->episodes : 0;
            const int failures = c ? c->failures : 0;
            out << ' ' << episodes;
            if (failures > 0) out << " (" << failures << " failed)";
            out << " |";
        }
        out << '\n';
    }
    if (!t.failures.empty()) {
        out << "\n## Failures\n\n";
        for (const auto& f : t.failures) out << "- " << md_escape(f) << '\n';
    }
    return out.str();
}

ReportTable parse_csv_report(const std::string& csv) {
    auto rows = parse_csv(csv);
    if (rows.empty() || rows[0] != std::vector<std::string>{"task", "column", "mean", "episodes", "failures"}) {
        throw ConfigError("csv report: unexpected header");
    }
    ReportTable t;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 5) throw ConfigError("csv report: row " + std::to_string(i) + " has " + std::to_string(r.size()) + " fields");
        if (std::find(t.columns.begin(), t.columns.end(), r[1]) == t.columns.end()) t.columns.push_back(r[1]);
        if (r[0] == "Average") {
            t.averages[r[1]] = parse_score(r[2]);
            continue;
        }
        if (std::find(t.rows.begin(), t.rows.end(), r[0]) == t.rows.end()) t.rows.push_back(r[0]);
        t.cells[{r[0], r[1]}] = {parse_score(r[2]), parse_count(r[3]), parse_count(r[4])};
    }
    return t;
}

ReportTable build_report(const SuiteConfig& config, const TaskCatalog& catalog) {
    ReportTable t;
    const std::string model = config.backend.model_label();
    for (const auto& p : config.policies) t.columns.push_back(p.display_name() + " (" + model + ")");

    std::map<std::pair<std::string, std::string>, std::vector<int>> scores;
    for (const auto& planned : plan_episodes(config, catalog)) {
        const std::string& row = planned.key.task_id;
        const std::string& col = t.columns[planned.policy_index];
        if (std::find(t.rows.begin(), t.rows.end(), row) == t.rows.end()) t.rows.push_back(row);
        ReportCell& cell = t.cells[{row, col}];
        const auto path = log_path(config, planned.key);
        std::string problem;
        try {
            LoggedEpisode log = read_log_file(path);
            if (log.end) {
                scores[{row, col}].push_back(log.end->at("final_score").get<int>());
                ++cell.episodes;
                continue;
            }
            problem = log.error ? *log.error : "log has no episode_end record";
        } catch (const std::exception& e) {
            problem = e.what();
        }
        ++cell.failures;
        t.failures.push_back(planned.key.stem() + ": " + problem);
    }
    std::sort(t.rows.begin(), t.rows.end());
    std::sort(t.failures.begin(), t.failures.end());
    for (auto& [key, values] : scores) {
        t.cells[key].mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    }
    for (const auto& col : t.columns) t.averages[col] = t.column_average(col);
    return t;
}

}  // namespace tbg
