#pragma once

// CSV readers and writers for the dataset files.
//
//   episodes.csv  level_id,episode_id,cleared_goals_frac,moves_used,
//                 moves_budget_human,passed_with_human_budget,moves_left_on_pass
//   levels.csv    level_id,human_pass_rate,human_churn_rate
//
// UTF-8, header row required, '.' decimal separator, no quoting. Reals are
// written with 17 significant digits so files round-trip exactly.

#include <churnsim/difficulty.hpp>
#include <churnsim/series.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace churnsim::io {

/// Input file does not exist or cannot be opened.
class FileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input file parsed but violates its schema.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string format_real(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes via a temporary file and rename, so readers never see partial output.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content)
{
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep = ',')
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                        : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

/// A parsed table with its source name, for row/column error messages.
class Table {
public:
    Table(std::string name, std::string_view text, const std::vector<std::string>& columns)
        : name_(std::move(name))
    {
        std::size_t row = 0;
        std::size_t start = 0;
        bool header_seen = false;
        while (start <= text.size()) {
            std::size_t end = text.find('\n', start);
            if (end == std::string_view::npos) end = text.size();
            std::string_view line = text.substr(start, end - start);
            start = end + 1;
            ++row;
            if (row == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
            if (trim(line).empty()) {
                if (end == text.size()) break;
                continue;
            }
            auto cells = split(line);
            for (auto& c : cells) c = trim(c);
            if (!header_seen) {
                header_seen = true;
                if (cells.size() != columns.size())
                    throw SchemaError(name_ + ": row 1: expected " + std::to_string(columns.size()) +
                                      " columns, found " + std::to_string(cells.size()));
                for (std::size_t i = 0; i < columns.size(); ++i)
                    if (cells[i] != columns[i])
                        throw SchemaError(name_ + ": row 1, column " + std::to_string(i + 1) +
                                          ": expected header '" + columns[i] + "', found '" +
                                          std::string(cells[i]) + "'");
                columns_ = columns;
                continue;
            }
            if (cells.size() != columns.size())
                throw SchemaError(name_ + ": row " + std::to_string(row) + ": expected " +
                                  std::to_string(columns.size()) + " fields, found " +
                                  std::to_string(cells.size()));
            std::vector<std::string> owned(cells.begin(), cells.end());
            rows_.push_back({row, std::move(owned)});
            if (end == text.size()) break;
        }
        if (!header_seen) throw SchemaError(name_ + ": missing header row");
    }

    std::size_t size() const { return rows_.size(); }
    std::size_t line(std::size_t r) const { return rows_[r].line; }
    const std::string& cell(std::size_t r, std::size_t c) const { return rows_[r].cells[c]; }

    [[noreturn]] void fail(std::size_t r, std::size_t c, const std::string& what) const
    {
        throw SchemaError(name_ + ": row " + std::to_string(rows_[r].line) + ", column " +
                          columns_[c] + ": " + what);
    }

    double real(std::size_t r, std::size_t c) const
    {
        const std::string& s = cell(r, c);
        double v = 0.0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v))
            fail(r, c, "'" + s + "' is not a finite number");
        return v;
    }

    long integer(std::size_t r, std::size_t c) const
    {
        const std::string& s = cell(r, c);
        long v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size()) fail(r, c, "'" + s + "' is not an integer");
        return v;
    }

    double rate(std::size_t r, std::size_t c) const
    {
        const double v = real(r, c);
        if (v < 0.0 || v > 1.0) fail(r, c, "value " + cell(r, c) + " outside [0,1]");
        return v;
    }

private:
    struct Row {
        std::size_t line;
        std::vector<std::string> cells;
    };
    std::string name_;
    std::vector<std::string> columns_;
    std::vector<Row> rows_;
};

} // namespace detail

inline const std::vector<std::string>& episode_columns()
{
    static const std::vector<std::string> c = {
        "level_id",           "episode_id",         "cleared_goals_frac",
        "moves_used",         "moves_budget_human", "passed_with_human_budget",
        "moves_left_on_pass"};
    return c;
}

inline const std::vector<std::string>& level_columns()
{
    static const std::vector<std::string> c = {"level_id", "human_pass_rate", "human_churn_rate"};
    return c;
}

inline std::vector<EpisodeLog> parse_episodes(std::string_view text, const std::string& name = "episodes.csv")
{
    detail::Table t(name, text, episode_columns());
    std::vector<EpisodeLog> out;
    out.reserve(t.size());
    for (std::size_t r = 0; r < t.size(); ++r) {
        EpisodeLog e;
        const long level = t.integer(r, 0);
        if (level < 1) t.fail(r, 0, "level_id must be >= 1");
        e.level_id = static_cast<int>(level);
        e.episode_id = static_cast<int>(t.integer(r, 1));
        e.cleared_goals_frac = t.rate(r, 2);
        e.moves_used = static_cast<int>(t.integer(r, 3));
        e.moves_budget_human = static_cast<int>(t.integer(r, 4));
        if (e.moves_used < 0) t.fail(r, 3, "moves_used must be >= 0");
        if (e.moves_budget_human < 0) t.fail(r, 4, "moves_budget_human must be >= 0");
        const long passed = t.integer(r, 5);
        if (passed != 0 && passed != 1) t.fail(r, 5, "must be 0 or 1");
        e.passed_with_human_budget = passed == 1;
        if (t.cell(r, 6).empty()) {
            if (e.passed_with_human_budget) t.fail(r, 6, "required when the episode passed");
        } else {
            if (!e.passed_with_human_budget) t.fail(r, 6, "must be empty when the episode failed");
            const long left = t.integer(r, 6);
            if (left < 0) t.fail(r, 6, "must be >= 0");
            e.moves_left_on_pass = static_cast<int>(left);
        }
        out.push_back(e);
    }
    return out;
}

inline LevelSeries parse_levels(std::string_view text, const std::string& name = "levels.csv")
{
    detail::Table t(name, text, level_columns());
    LevelSeries s;
    s.role = SeriesRole::truth;
    for (std::size_t r = 0; r < t.size(); ++r) {
        LevelRecord l;
        const long level = t.integer(r, 0);
        if (level < 1) t.fail(r, 0, "level_id must be >= 1");
        if (!s.levels.empty() && level <= s.levels.back().level_id)
            t.fail(r, 0, "level ids must be strictly increasing");
        l.level_id = static_cast<int>(level);
        l.pass_rate = t.rate(r, 1);
        l.churn_rate = t.rate(r, 2);
        s.levels.push_back(l);
    }
    return s;
}

/// level_id,difficulty
inline std::vector<double> parse_difficulties(std::string_view text, std::vector<int>* ids = nullptr,
                                              const std::string& name = "difficulties.csv")
{
    detail::Table t(name, text, {"level_id", "difficulty"});
    std::vector<double> out;
    if (ids) ids->clear();
    for (std::size_t r = 0; r < t.size(); ++r) {
        const long level = t.integer(r, 0);
        if (ids) {
            if (!ids->empty() && level <= ids->back()) t.fail(r, 0, "level ids must be strictly increasing");
            ids->push_back(static_cast<int>(level));
        }
        out.push_back(t.rate(r, 1));
    }
    return out;
}

inline std::string format_episodes(const std::vector<EpisodeLog>& episodes)
{
    std::string s;
    for (std::size_t i = 0; i < episode_columns().size(); ++i)
        s += (i ? "," : "") + episode_columns()[i];
    s += '\n';
    for (const EpisodeLog& e : episodes) {
        s += std::to_string(e.level_id) + ',' + std::to_string(e.episode_id) + ',' +
             format_real(e.cleared_goals_frac) + ',' + std::to_string(e.moves_used) + ',' +
             std::to_string(e.moves_budget_human) + ',' +
             (e.passed_with_human_budget ? "1" : "0") + ',' +
             (e.moves_left_on_pass ? std::to_string(*e.moves_left_on_pass) : std::string()) + '\n';
    }
    return s;
}

inline std::string format_levels(const LevelSeries& s)
{
    std::string out = "level_id,human_pass_rate,human_churn_rate\n";
    for (const LevelRecord& l : s.levels)
        out += std::to_string(l.level_id) + ',' + format_real(l.pass_rate) + ',' +
               format_real(l.churn_rate) + '\n';
    return out;
}

inline std::string format_difficulties(const std::vector<int>& ids, const std::vector<double>& d)
{
    std::string out = "level_id,difficulty\n";
    for (std::size_t i = 0; i < d.size(); ++i)
        out += std::to_string(ids[i]) + ',' + format_real(d[i]) + '\n';
    return out;
}

struct Datasets {
    std::vector<int> level_ids;
    std::vector<LevelFeatures> features; ///< aligned with truth levels
    LevelSeries truth;
    std::size_t episode_count = 0;
};

inline std::string load_text(const std::filesystem::path& p)
{
    if (!std::filesystem::exists(p)) throw FileError("file not found: " + p.string());
    return read_file(p);
}

/// Loads both files, aggregates features per level and checks that the
/// episode levels and truth levels are the same set.
inline Datasets load_datasets(const std::filesystem::path& episodes_path,
                              const std::filesystem::path& levels_path)
{
    const std::string ep_text = load_text(episodes_path);
    const std::string lv_text = load_text(levels_path);
    const auto episodes = parse_episodes(ep_text, episodes_path.filename().string());
    Datasets d;
    d.truth = parse_levels(lv_text, levels_path.filename().string());
    d.episode_count = episodes.size();

    std::map<int, std::vector<EpisodeLog>> by_level;
    for (const EpisodeLog& e : episodes) by_level[e.level_id].push_back(e);

    std::set<int> truth_ids;
    for (const LevelRecord& l : d.truth.levels) truth_ids.insert(l.level_id);
    std::vector<int> missing, extra;
    for (int id : truth_ids)
        if (!by_level.count(id)) missing.push_back(id);
    for (const auto& [id, _] : by_level)
        if (!truth_ids.count(id)) extra.push_back(id);
    if (!missing.empty() || !extra.empty()) {
        std::string msg = "level sets differ between " + episodes_path.filename().string() +
                          " and " + levels_path.filename().string();
        if (!missing.empty()) msg += "; no episodes for level " + std::to_string(missing.front());
        if (!extra.empty()) msg += "; episodes for unknown level " + std::to_string(extra.front());
        throw SchemaError(msg);
    }
    for (const LevelRecord& l : d.truth.levels) {
        d.level_ids.push_back(l.level_id);
        d.features.push_back(aggregate_features(by_level[l.level_id]));
    }
    return d;
}

} // namespace churnsim::io
