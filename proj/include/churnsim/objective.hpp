#pragma once

// Parameter encoding and the fitting objective
//   f = MSE(pass) + w_churn * MSE(churn)
// over the training levels of a full-progression simulation.

#include <churnsim/cmaes.hpp>
#include <churnsim/difficulty.hpp>
#include <churnsim/error.hpp>
#include <churnsim/population.hpp>
#include <churnsim/series.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace churnsim {

inline constexpr std::size_t kNumParams = 10;
inline constexpr double kDepletionPenalty = 1e6;

using RawParams = std::array<double, kNumParams>;

/// Raw layout: mean_skill, ln std_skill, mean_persistence, ln std_persistence,
/// mean_boredom, ln std_boredom, ln alpha, ln beta, ln theta, ln gamma.
inline SimParams decode_params(std::span<const double> raw)
{
    detail::require(raw.size() == kNumParams, "decode_params expects 10 values");
    for (double v : raw) detail::require(std::isfinite(v), "decode_params: non-finite raw value");
    SimParams p;
    p.population.mean_skill = raw[0];
    p.population.std_skill = std::exp(raw[1]);
    p.population.mean_persistence = raw[2];
    p.population.std_persistence = std::exp(raw[3]);
    p.population.mean_boredom = raw[4];
    p.population.std_boredom = std::exp(raw[5]);
    p.alpha = std::exp(raw[6]);
    p.beta = std::exp(raw[7]);
    p.theta = std::exp(raw[8]);
    p.gamma = std::exp(raw[9]);
    return p;
}

/// Inverse of decode_params. Every scale must be strictly positive.
inline RawParams encode_params(const SimParams& p)
{
    const std::array<double, 7> scales = {p.population.std_skill, p.population.std_persistence,
                                          p.population.std_boredom, p.alpha, p.beta, p.theta,
                                          p.gamma};
    for (double s : scales)
        detail::require(std::isfinite(s) && s > 0.0, "encode_params: scales must be finite and > 0");
    return {p.population.mean_skill,      std::log(p.population.std_skill),
            p.population.mean_persistence, std::log(p.population.std_persistence),
            p.population.mean_boredom,     std::log(p.population.std_boredom),
            std::log(p.alpha),             std::log(p.beta),
            std::log(p.theta),             std::log(p.gamma)};
}

/// Default CMA-ES start: skill 0.5, persistence 3, boredom 0, every scale 0.3.
inline RawParams default_start()
{
    const double s = std::log(0.3);
    return {0.5, s, 3.0, s, 0.0, s, s, s, s, s};
}

/// var(pass) / var(churn), population variances.
inline double compute_w_churn(std::span<const double> pass, std::span<const double> churn)
{
    detail::require(pass.size() == churn.size(), "compute_w_churn: length mismatch");
    detail::require(pass.size() >= 2, "compute_w_churn needs at least two levels");
    const double vc = stats::variance(churn);
    if (!(vc > 0.0)) throw DegenerateData("compute_w_churn: churn rates have zero variance");
    return stats::variance(pass) / vc;
}

struct SimulationSettings {
    AblationFlags flags;
    std::size_t population_size = 2000;
    /// Every evaluation reuses this seed (common random numbers across candidates).
    std::uint64_t seed = 0;
};

struct SimulatedRates {
    std::vector<double> pass;
    std::vector<double> churn;
    bool depleted = false;
    bool attempt_cap_hit = false;
};

using Simulator = std::function<SimulatedRates(const SimParams&)>;

/// Fresh population plus a full progression. Levels after a depletion are
/// reported as zero pass and zero churn (no players left) with depleted set.
inline SimulatedRates run_simulation(const SimParams& params, std::span<const double> difficulties,
                                     const SimulationSettings& settings)
{
    SimulatedRates out;
    try {
        Population pop = init_population(params.population, settings.population_size, settings.seed);
        ProgressionResult r =
            simulate_progression(difficulties, std::move(pop), params, settings.flags,
                                 settings.seed, /*record_stats=*/false);
        out.pass = std::move(r.pass_rate);
        out.churn = std::move(r.churn_rate);
        out.depleted = r.depleted;
    } catch (const AttemptCapExceeded&) {
        out.pass.clear();
        out.churn.clear();
        out.attempt_cap_hit = true;
    }
    out.pass.resize(difficulties.size(), 0.0);
    out.churn.resize(difficulties.size(), 0.0);
    return out;
}

inline Simulator make_simulator(std::vector<double> difficulties, SimulationSettings settings)
{
    auto d = std::make_shared<const std::vector<double>>(std::move(difficulties));
    return [d, settings](const SimParams& p) { return run_simulation(p, *d, settings); };
}

/// Weighted pass/churn loss over the levels selected by `mask`.
inline double masked_loss(std::span<const double> pred_pass, std::span<const double> pred_churn,
                          std::span<const double> truth_pass, std::span<const double> truth_churn,
                          const std::vector<bool>& mask, double w_churn)
{
    double sp = 0.0;
    double sc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        sp += (pred_pass[i] - truth_pass[i]) * (pred_pass[i] - truth_pass[i]);
        sc += (pred_churn[i] - truth_churn[i]) * (pred_churn[i] - truth_churn[i]);
        ++n;
    }
    const double nd = static_cast<double>(n);
    return sp / nd + w_churn * sc / nd;
}

/// Objective over raw parameter vectors. Depleted simulations and simulations
/// that hit the attempt cap score kDepletionPenalty.
inline Objective build_objective(const LevelSeries& truth, std::vector<bool> training_mask,
                                 double w_churn, Simulator simulate)
{
    detail::require(training_mask.size() == truth.size(),
                    "build_objective: mask length must match the number of levels");
    std::size_t selected = 0;
    for (bool b : training_mask) selected += b ? 1 : 0;
    detail::require(selected > 0, "build_objective: mask selects no levels");
    detail::require(std::isfinite(w_churn) && w_churn >= 0.0, "build_objective: bad w_churn");

    struct State {
        std::vector<double> pass;
        std::vector<double> churn;
        std::vector<bool> mask;
        double w_churn;
        Simulator simulate;
    };
    auto st = std::make_shared<const State>(
        State{truth.pass_rates(), truth.churn_rates(), std::move(training_mask), w_churn,
              std::move(simulate)});

    return [st](std::span<const double> raw) -> double {
        const SimParams params = decode_params(raw);
        const SimulatedRates r = st->simulate(params);
        if (r.depleted || r.attempt_cap_hit) return kDepletionPenalty;
        detail::require(r.pass.size() == st->pass.size() && r.churn.size() == st->churn.size(),
                        "simulator returned the wrong number of levels");
        return masked_loss(r.pass, r.churn, st->pass, st->churn, st->mask, st->w_churn);
    };
}

inline Objective build_objective(const LevelSeries& truth, std::span<const double> difficulties,
                                 std::vector<bool> training_mask, double w_churn,
                                 const SimulationSettings& settings)
{
    detail::require(difficulties.size() == truth.size(),
                    "build_objective: one difficulty per level required");
    return build_objective(truth, std::move(training_mask), w_churn,
                           make_simulator({difficulties.begin(), difficulties.end()}, settings));
}

} // namespace churnsim
