#pragma once

// Synthetic ground truth with known hidden parameters, and a stand-in for AI
// gameplay logs whose statistics carry a recoverable difficulty signal.
//
// Episode generator (version 1). For a level with difficulty d and human move
// budget B = 20 + (7 * level_id) mod 11, each episode draws u ~ N(0,1) and
//     q = 1.15 - 1.3 d + 0.35 d u
//     passed            = q >= 1
//     cleared_goals     = clamp(q, 0, 1)
//     moves_left        = min(B - 1, floor(B (q - 1) / q))   if passed
//     moves_used        = B - moves_left if passed, else B
// At d = 0 every episode passes with all goals cleared. Mean cleared fraction,
// pass probability and moves left all decrease with d.

#include <churnsim/difficulty.hpp>
#include <churnsim/error.hpp>
#include <churnsim/population.hpp>
#include <churnsim/rng.hpp>
#include <churnsim/series.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace churnsim {

inline constexpr int kEpisodeGeneratorVersion = 1;

struct TruthSpec {
    SimParams true_params;
    std::size_t n_players = 2000;
    std::vector<double> level_difficulties;
    AblationFlags flags;
    std::uint64_t seed = 0;
};

/// Moderate hidden parameters used by the shipped fixtures and tests.
inline SimParams default_true_params()
{
    SimParams p;
    p.population = {.mean_skill = 0.55,
                    .std_skill = 0.15,
                    .mean_persistence = 4.0,
                    .std_persistence = 2.5,
                    .mean_boredom = -2.2,
                    .std_boredom = 0.5};
    p.alpha = 0.12;
    p.beta = 1.5;
    p.theta = 1.0;
    p.gamma = 0.06;
    return p;
}

/// A chaptered difficulty curve: slow upward trend, a ramp inside each block
/// of ten levels, and per-level jitter. Values stay inside [0.02, 0.98].
inline std::vector<double> default_difficulty_curve(std::size_t n_levels, std::uint64_t seed)
{
    SplitMix64 eng(domain_seed(seed, SeedDomain::truth_simulation, 0xD1FF));
    std::uniform_real_distribution<double> jitter(-0.2, 0.2);
    std::vector<double> d(n_levels);
    for (std::size_t i = 0; i < n_levels; ++i) {
        const double trend = 0.25 + 0.2 * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(n_levels, 1));
        const double ramp = 0.3 * (static_cast<double>(i % 10) / 9.0 - 0.5);
        d[i] = std::clamp(trend + ramp + jitter(eng), 0.02, 0.98);
    }
    return d;
}

struct TruthRun {
    LevelSeries series;
    std::vector<PopulationStats> stats; ///< population entering each level
};

inline TruthRun generate_truth_run(const TruthSpec& spec)
{
    detail::require(spec.n_players >= 1, "TruthSpec: n_players must be >= 1");
    for (double d : spec.level_difficulties)
        detail::require(std::isfinite(d) && d >= 0.0 && d <= 1.0,
                        "TruthSpec: difficulties must lie in [0,1]");

    Population pop = init_population(spec.true_params.population, spec.n_players,
                                     domain_seed(spec.seed, SeedDomain::truth_population));
    ProgressionResult r =
        simulate_progression(spec.level_difficulties, std::move(pop), spec.true_params, spec.flags,
                             domain_seed(spec.seed, SeedDomain::truth_simulation));
    if (r.depleted)
        throw DegenerateData("synthetic truth depleted the population at level " +
                             std::to_string(*r.depleted_at + 1) + "; choose a gentler spec");
    TruthRun out;
    out.series = make_series(SeriesRole::truth, r.pass_rate, r.churn_rate);
    out.stats = std::move(r.stats);
    return out;
}

inline LevelSeries generate_truth(const TruthSpec& spec) { return generate_truth_run(spec).series; }

inline int human_move_budget(int level_id) { return 20 + (7 * level_id) % 11; }

inline EpisodeLog generate_episode(double difficulty, int level_id, int episode_id,
                                   std::uint64_t seed)
{
    NormalStream normal(domain_seed(seed, SeedDomain::episodes,
                                    static_cast<std::uint64_t>(level_id),
                                    static_cast<std::uint64_t>(episode_id)));
    const int budget = human_move_budget(level_id);
    const double q = 1.15 - 1.3 * difficulty + 0.35 * difficulty * normal(0.0, 1.0);

    EpisodeLog e;
    e.level_id = level_id;
    e.episode_id = episode_id;
    e.moves_budget_human = budget;
    e.cleared_goals_frac = std::clamp(q, 0.0, 1.0);
    e.passed_with_human_budget = q >= 1.0;
    if (e.passed_with_human_budget) {
        const int left = std::min(budget - 1,
                                  static_cast<int>(std::floor(budget * (q - 1.0) / q)));
        e.moves_left_on_pass = left;
        e.moves_used = budget - left;
    } else {
        e.moves_used = budget;
    }
    return e;
}

/// Episodes for levels 1..n in level order, `episodes_per_level` each.
inline std::vector<EpisodeLog> generate_episode_logs(std::span<const double> level_difficulties,
                                                     int episodes_per_level, std::uint64_t seed)
{
    detail::require(episodes_per_level >= 1, "episodes_per_level must be >= 1");
    std::vector<EpisodeLog> out;
    out.reserve(level_difficulties.size() * static_cast<std::size_t>(episodes_per_level));
    for (std::size_t i = 0; i < level_difficulties.size(); ++i) {
        const double d = level_difficulties[i];
        detail::require(std::isfinite(d) && d >= 0.0 && d <= 1.0,
                        "episode generator: difficulties must lie in [0,1]");
        for (int e = 0; e < episodes_per_level; ++e)
            out.push_back(generate_episode(d, static_cast<int>(i + 1), e + 1, seed));
    }
    return out;
}

/// Features per level, levels ordered by id. Episodes may arrive in any order.
inline std::vector<LevelFeatures> features_by_level(std::span<const EpisodeLog> episodes,
                                                    std::vector<int>* level_ids = nullptr)
{
    std::vector<EpisodeLog> sorted(episodes.begin(), episodes.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const EpisodeLog& a, const EpisodeLog& b) { return a.level_id < b.level_id; });
    std::vector<LevelFeatures> out;
    if (level_ids) level_ids->clear();
    std::size_t begin = 0;
    while (begin < sorted.size()) {
        std::size_t end = begin;
        while (end < sorted.size() && sorted[end].level_id == sorted[begin].level_id) ++end;
        out.push_back(aggregate_features(std::span<const EpisodeLog>(sorted).subspan(begin, end - begin)));
        if (level_ids) level_ids->push_back(sorted[begin].level_id);
        begin = end;
    }
    return out;
}

} // namespace churnsim
