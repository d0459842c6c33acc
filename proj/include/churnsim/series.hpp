#pragma once

#include <churnsim/error.hpp>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace churnsim {

enum class SeriesRole { truth, predicted };

inline const char* to_string(SeriesRole r) { return r == SeriesRole::truth ? "truth" : "predicted"; }

struct LevelRecord {
    int level_id = 1;
    double pass_rate = 0.0;
    double churn_rate = 0.0;

    friend bool operator==(const LevelRecord&, const LevelRecord&) = default;
};

/// Per-level pass and churn rates, in level order.
struct LevelSeries {
    SeriesRole role = SeriesRole::truth;
    std::vector<LevelRecord> levels;

    std::size_t size() const { return levels.size(); }

    std::vector<double> pass_rates() const
    {
        std::vector<double> v;
        v.reserve(levels.size());
        for (const auto& l : levels) v.push_back(l.pass_rate);
        return v;
    }

    std::vector<double> churn_rates() const
    {
        std::vector<double> v;
        v.reserve(levels.size());
        for (const auto& l : levels) v.push_back(l.churn_rate);
        return v;
    }

    std::vector<int> level_ids() const
    {
        std::vector<int> v;
        v.reserve(levels.size());
        for (const auto& l : levels) v.push_back(l.level_id);
        return v;
    }

    friend bool operator==(const LevelSeries&, const LevelSeries&) = default;
};

/// Rates in [0,1], level ids strictly increasing.
inline void validate(const LevelSeries& s)
{
    for (std::size_t i = 0; i < s.levels.size(); ++i) {
        const LevelRecord& l = s.levels[i];
        const std::string where = "level " + std::to_string(l.level_id);
        detail::require(std::isfinite(l.pass_rate) && l.pass_rate >= 0.0 && l.pass_rate <= 1.0,
                        where + ": pass_rate outside [0,1]");
        detail::require(std::isfinite(l.churn_rate) && l.churn_rate >= 0.0 && l.churn_rate <= 1.0,
                        where + ": churn_rate outside [0,1]");
        if (i > 0)
            detail::require(l.level_id > s.levels[i - 1].level_id,
                            where + ": level ids must be strictly increasing");
    }
}

/// Level ids 1..n for rates given in order.
inline LevelSeries make_series(SeriesRole role, const std::vector<double>& pass,
                               const std::vector<double>& churn)
{
    detail::require(pass.size() == churn.size(), "make_series: length mismatch");
    LevelSeries s;
    s.role = role;
    s.levels.reserve(pass.size());
    for (std::size_t i = 0; i < pass.size(); ++i)
        s.levels.push_back({static_cast<int>(i + 1), pass[i], churn[i]});
    return s;
}

} // namespace churnsim
