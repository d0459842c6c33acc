#pragma once

// Player population model and the per-level pass/churn Monte Carlo.

#include <churnsim/error.hpp>
#include <churnsim/rng.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace churnsim {

struct Player {
    double skill = 0.0;
    double persistence = 0.0;
    double boredom = 0.0;

    friend bool operator==(const Player&, const Player&) = default;
};

using Population = std::vector<Player>;

/// Initial-population attribute distributions (independent normals).
struct PopulationParams {
    double mean_skill = 0.0;
    double std_skill = 0.0;
    double mean_persistence = 0.0;
    double std_persistence = 0.0;
    double mean_boredom = 0.0;
    double std_boredom = 0.0;

    friend bool operator==(const PopulationParams&, const PopulationParams&) = default;
};

/// The ten fitted simulation parameters.
struct SimParams {
    PopulationParams population;
    double alpha = 0.0; ///< std of the per-level skill draw
    double beta = 0.0;  ///< std of the per-level persistence draw
    double theta = 0.0; ///< std of the boredom draw after a pass
    double gamma = 0.0; ///< skill gained per failed attempt

    friend bool operator==(const SimParams&, const SimParams&) = default;
};

struct AblationFlags {
    bool disable_boredom = false;
    bool disable_persistence = false;
    bool disable_learning = false;
    bool disable_draw_noise = false;

    friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct LevelOutcome {
    double pass_rate = 0.0;
    double churn_rate = 0.0;
    std::size_t entered = 0;  ///< M
    std::size_t passed = 0;   ///< players that passed, including those who then got bored
    std::size_t churned = 0;
    Population survivors;     ///< after churn removal, before resampling
    Population evolved;       ///< survivors resampled back to size M (empty when depleted)
    bool depleted = false;
};

struct PopulationStats {
    double mean_skill = 0.0;
    double std_skill = 0.0;
    double mean_persistence = 0.0;
    double std_persistence = 0.0;
    double mean_boredom = 0.0;
    double std_boredom = 0.0;

    friend bool operator==(const PopulationStats&, const PopulationStats&) = default;
};

inline constexpr std::uint64_t kMaxAttempts = 1'000'000;

namespace detail {

inline bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

inline void validate(const PopulationParams& p)
{
    require(std::isfinite(p.mean_skill) && std::isfinite(p.mean_persistence) &&
                std::isfinite(p.mean_boredom),
            "population means must be finite");
    require(finite_nonneg(p.std_skill) && finite_nonneg(p.std_persistence) &&
                finite_nonneg(p.std_boredom),
            "population stds must be finite and >= 0");
}

inline void validate(const SimParams& p)
{
    validate(p.population);
    require(finite_nonneg(p.alpha) && finite_nonneg(p.beta) && finite_nonneg(p.theta) &&
                finite_nonneg(p.gamma),
            "alpha, beta, theta, gamma must be finite and >= 0");
}

inline constexpr std::uint64_t kInitTag = 0xC0FFEE;
inline constexpr std::uint64_t kResampleTag = std::numeric_limits<std::uint64_t>::max();

} // namespace detail

inline Population init_population(const PopulationParams& params, std::size_t size,
                                  std::uint64_t seed)
{
    detail::require(size >= 1, "population size must be >= 1");
    detail::validate(params);

    NormalStream normal(derive_seed(seed, {detail::kInitTag}));
    Population pop(size);
    for (Player& p : pop) {
        p.skill = normal(params.mean_skill, params.std_skill);
        p.persistence = normal(params.mean_persistence, params.std_persistence);
        p.boredom = normal(params.mean_boredom, params.std_boredom);
    }
    return pop;
}

inline PopulationStats population_stats(std::span<const Player> pop)
{
    detail::require(!pop.empty(), "population_stats on an empty population");
    const double n = static_cast<double>(pop.size());
    PopulationStats st;
    for (const Player& p : pop) {
        st.mean_skill += p.skill;
        st.mean_persistence += p.persistence;
        st.mean_boredom += p.boredom;
    }
    st.mean_skill /= n;
    st.mean_persistence /= n;
    st.mean_boredom /= n;
    for (const Player& p : pop) {
        st.std_skill += (p.skill - st.mean_skill) * (p.skill - st.mean_skill);
        st.std_persistence += (p.persistence - st.mean_persistence) *
                              (p.persistence - st.mean_persistence);
        st.std_boredom += (p.boredom - st.mean_boredom) * (p.boredom - st.mean_boredom);
    }
    st.std_skill = std::sqrt(st.std_skill / n);
    st.std_persistence = std::sqrt(st.std_persistence / n);
    st.std_boredom = std::sqrt(st.std_boredom / n);
    return st;
}

/// One level of the pass/churn simulation.
///
/// Each player draws a level-local skill s ~ N(skill, alpha) and a failure
/// tolerance t ~ N(persistence, beta), then attempts the level until passing
/// (s >= difficulty) or churning. A failed attempt adds gamma to s and churns
/// the player once the attempt count exceeds t. A pass scores 1/attempts and
/// draws b ~ N(0, theta); the player churns if b < boredom. Churned players
/// are removed and the survivors are topped back up to the entry size by
/// replicating uniformly chosen survivors.
///
/// Player i uses the stream child_seed(seed, i); resampling uses a
/// separate stream. Throws AttemptCapExceeded after kMaxAttempts attempts.
inline LevelOutcome simulate_level(double difficulty, std::span<const Player> population,
                                   const SimParams& params, const AblationFlags& flags,
                                   std::uint64_t seed)
{
    detail::require(!population.empty(), "simulate_level on an empty population");
    detail::require(std::isfinite(difficulty), "difficulty must be finite");
    detail::validate(params);

    const double alpha = flags.disable_draw_noise ? 0.0 : params.alpha;
    const double beta = flags.disable_draw_noise ? 0.0 : params.beta;
    const double gamma = flags.disable_learning ? 0.0 : params.gamma;
    const double theta = params.theta;

    LevelOutcome out;
    out.entered = population.size();
    out.survivors.reserve(population.size());

    double pass_sum = 0.0;
    for (std::size_t i = 0; i < population.size(); ++i) {
        const Player& p = population[i];
        NormalStream normal(child_seed(seed, i));

        double s = normal(p.skill, alpha);
        const double t = flags.disable_persistence
                             ? std::numeric_limits<double>::infinity()
                             : normal(p.persistence, beta);

        bool churned = false;
        std::uint64_t attempts = 0;
        for (;;) {
            if (++attempts > kMaxAttempts)
                throw AttemptCapExceeded("player exceeded the attempt cap; difficulty " +
                                         std::to_string(difficulty) + ", gamma " +
                                         std::to_string(gamma));
            if (s >= difficulty) {
                ++out.passed;
                pass_sum += 1.0 / static_cast<double>(attempts);
                if (!flags.disable_boredom) {
                    const double b = normal(0.0, theta);
                    churned = b < p.boredom;
                }
                break;
            }
            s += gamma;
            if (static_cast<double>(attempts) > t) {
                churned = true;
                break;
            }
        }

        if (churned)
            ++out.churned;
        else
            out.survivors.push_back(p);
    }

    const double m = static_cast<double>(out.entered);
    out.pass_rate = pass_sum / m;
    out.churn_rate = static_cast<double>(out.churned) / m;

    if (out.survivors.empty()) {
        out.depleted = true;
        return out;
    }

    out.evolved.reserve(out.entered);
    out.evolved = out.survivors;
    SplitMix64 eng(derive_seed(seed, {detail::kResampleTag}));
    std::uniform_int_distribution<std::size_t> pick(0, out.survivors.size() - 1);
    while (out.evolved.size() < out.entered)
        out.evolved.push_back(out.survivors[pick(eng)]);
    return out;
}

struct ProgressionResult {
    std::vector<double> pass_rate;       ///< one entry per simulated level
    std::vector<double> churn_rate;
    std::vector<PopulationStats> stats;  ///< population entering each simulated level
    Population final_population;
    bool depleted = false;
    std::optional<std::size_t> depleted_at; ///< index of the level that emptied the population

    std::size_t levels_simulated() const { return pass_rate.size(); }
};

/// Runs simulate_level over the difficulty sequence, feeding each evolved
/// population into the next level. Level k uses seed derive_seed(seed, {k}).
/// On depletion the series stops after the depleting level.
inline ProgressionResult simulate_progression(std::span<const double> difficulties,
                                              Population initial, const SimParams& params,
                                              const AblationFlags& flags, std::uint64_t seed,
                                              bool record_stats = true)
{
    detail::require(!initial.empty(), "simulate_progression on an empty population");
    for (double d : difficulties)
        detail::require(std::isfinite(d), "difficulties must be finite");

    ProgressionResult res;
    res.pass_rate.reserve(difficulties.size());
    res.churn_rate.reserve(difficulties.size());
    if (record_stats) res.stats.reserve(difficulties.size());

    Population pop = std::move(initial);
    for (std::size_t k = 0; k < difficulties.size(); ++k) {
        if (record_stats) res.stats.push_back(population_stats(pop));
        LevelOutcome lvl = simulate_level(difficulties[k], pop, params, flags,
                                          derive_seed(seed, {k}));
        res.pass_rate.push_back(lvl.pass_rate);
        res.churn_rate.push_back(lvl.churn_rate);
        if (lvl.depleted) {
            res.depleted = true;
            res.depleted_at = k;
            pop.clear();
            break;
        }
        pop = std::move(lvl.evolved);
    }
    res.final_population = std::move(pop);
    return res;
}

} // namespace churnsim
