#pragma once

// Validation harness: metrics, fold plans, k-fold cross-validation of the
// population model against the regression-only baseline, the ablation table,
// and the ground-truth-difficulty experiment.

#include <churnsim/cmaes.hpp>
#include <churnsim/difficulty.hpp>
#include <churnsim/error.hpp>
#include <churnsim/objective.hpp>
#include <churnsim/population.hpp>
#include <churnsim/rng.hpp>
#include <churnsim/series.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace churnsim {

struct ErrorMetrics {
    double mse = 0.0;
    double mae = 0.0;
};

inline ErrorMetrics compute_metrics(std::span<const double> pred, std::span<const double> truth)
{
    detail::require(!pred.empty(), "compute_metrics: empty input");
    detail::require(pred.size() == truth.size(), "compute_metrics: length mismatch");
    ErrorMetrics m;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - truth[i];
        m.mse += e * e;
        m.mae += std::abs(e);
    }
    m.mse /= static_cast<double>(pred.size());
    m.mae /= static_cast<double>(pred.size());
    return m;
}

struct RateMetrics {
    ErrorMetrics pass;
    ErrorMetrics churn;
};

enum class FoldScheme { contiguous, interleaved };

inline const char* to_string(FoldScheme s)
{
    return s == FoldScheme::contiguous ? "contiguous" : "interleaved";
}

struct FoldPlan {
    std::size_t k = 0;
    FoldScheme scheme = FoldScheme::contiguous;
    std::vector<std::size_t> assignment; ///< fold index per level position

    std::vector<std::size_t> fold_sizes() const
    {
        std::vector<std::size_t> s(k, 0);
        for (std::size_t f : assignment) ++s[f];
        return s;
    }

    std::vector<bool> training_mask(std::size_t fold) const
    {
        std::vector<bool> m(assignment.size());
        for (std::size_t i = 0; i < assignment.size(); ++i) m[i] = assignment[i] != fold;
        return m;
    }

    std::vector<std::size_t> held_out(std::size_t fold) const
    {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < assignment.size(); ++i)
            if (assignment[i] == fold) idx.push_back(i);
        return idx;
    }
};

/// Contiguous: k consecutive blocks, the first n mod k one level longer.
/// Interleaved: level i goes to fold i mod k.
inline FoldPlan kfold_split(std::size_t n_levels, std::size_t k, FoldScheme scheme)
{
    detail::require(k >= 2, "kfold_split: k must be >= 2");
    detail::require(k <= n_levels, "kfold_split: k must not exceed the number of levels");
    FoldPlan plan{k, scheme, std::vector<std::size_t>(n_levels)};
    if (scheme == FoldScheme::interleaved) {
        for (std::size_t i = 0; i < n_levels; ++i) plan.assignment[i] = i % k;
        return plan;
    }
    const std::size_t base = n_levels / k;
    const std::size_t extra = n_levels % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        for (std::size_t j = 0; j < len; ++j) plan.assignment[pos++] = f;
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Fitting one fold

struct FitTask {
    const LevelSeries* truth = nullptr;
    std::vector<double> difficulties; ///< all levels
    std::vector<bool> training_mask;
    double w_churn = 1.0;
    SimulationSettings simulation;
    OptimizerConfig optimizer;
    RawParams x0 = default_start();
};

struct FitOutcome {
    RawParams raw{};
    SimParams params;
    OptResult opt;
    SimulatedRates predictions; ///< full-progression rates at the fitted params
};

using Fitter = std::function<FitOutcome(const FitTask&)>;

/// CMA-ES on the masked objective, then one simulation at the best point with
/// the same simulation seed.
inline FitOutcome fit_simulation_params(const FitTask& task)
{
    detail::require(task.truth != nullptr, "FitTask without truth");
    Objective f = build_objective(*task.truth, task.difficulties, task.training_mask, task.w_churn,
                                  task.simulation);
    FitOutcome out;
    out.opt = minimize(f, task.x0, task.optimizer);
    std::copy(out.opt.best_x.begin(), out.opt.best_x.end(), out.raw.begin());
    out.params = decode_params(out.raw);
    out.predictions = run_simulation(out.params, task.difficulties, task.simulation);
    return out;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CVConfig {
    std::size_t k = 5;
    FoldScheme scheme = FoldScheme::contiguous;
    std::size_t repeats = 5;
    std::uint64_t master_seed = 0;
    OptimizerConfig optimizer;      ///< seed is replaced per fold and repeat
    SimulationSettings simulation;  ///< seed is replaced per fold and repeat
    RegressionOptions regression;
    RawParams x0 = default_start();
};

/// Where per-level difficulties come from. If `difficulties` is set it is used
/// as-is; otherwise a pass-rate regression on `features` is fitted on the
/// training levels of each fold and normalized over all levels. The
/// regression-only baseline is reported whenever features are present.
struct DifficultySource {
    std::optional<std::vector<LevelFeatures>> features;
    std::optional<std::vector<double>> difficulties;
};

struct FoldRun {
    std::size_t fold = 0;
    std::size_t repeat = 0;
    std::vector<int> held_out_levels;
    RateMetrics extended;
    RawParams raw{};
    SimParams params;
    double w_churn = 0.0;
    double objective = 0.0;
    std::size_t evaluations = 0;
    std::size_t generations = 0;
    Termination termination = Termination::budget;
    bool depleted = false;
    std::uint64_t optimizer_seed = 0;
    std::uint64_t simulation_seed = 0;
};

struct Summary {
    double mean = 0.0;
    double std = 0.0; ///< population std (divisor N)
};

inline Summary summarize(std::span<const double> v)
{
    if (v.empty()) return {};
    return {stats::mean(v), stats::stddev(v)};
}

struct MetricSummary {
    Summary pass_mse, churn_mse, pass_mae, churn_mae;
};

inline MetricSummary summarize(std::span<const RateMetrics> runs)
{
    std::vector<double> a, b, c, d;
    for (const RateMetrics& m : runs) {
        a.push_back(m.pass.mse);
        b.push_back(m.churn.mse);
        c.push_back(m.pass.mae);
        d.push_back(m.churn.mae);
    }
    return {summarize(a), summarize(b), summarize(c), summarize(d)};
}

struct CVReport {
    std::size_t k = 0;
    FoldScheme scheme = FoldScheme::contiguous;
    std::size_t repeats = 0;
    std::uint64_t master_seed = 0;
    AblationFlags flags;
    std::vector<std::size_t> fold_sizes;

    std::vector<FoldRun> runs;                    ///< fold-major, then repeat
    std::vector<RateMetrics> baseline;            ///< per fold; empty without features
    MetricSummary extended_runs;                  ///< over all fold x repeat runs
    MetricSummary extended_folds;                 ///< over folds, metrics averaged across repeats
    MetricSummary baseline_folds;
    std::vector<LevelSeries> held_out_predictions; ///< per repeat, each level predicted by its own fold
    std::vector<RateMetrics> pooled;               ///< per repeat, over the concatenated predictions
    std::optional<LevelSeries> baseline_predictions;
    std::optional<RateMetrics> baseline_pooled;
};

namespace detail {

inline std::vector<double> pick(std::span<const double> v, std::span<const std::size_t> idx)
{
    std::vector<double> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(v[i]);
    return out;
}

inline std::vector<std::size_t> masked_indices(const std::vector<bool>& mask)
{
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) idx.push_back(i);
    return idx;
}

inline RegressionModel fit_on(std::span<const LevelFeatures> features, std::span<const double> targets,
                              std::span<const std::size_t> idx, const RegressionOptions& opt)
{
    std::vector<LevelFeatures> x;
    x.reserve(idx.size());
    for (std::size_t i : idx) x.push_back(features[i]);
    return fit_regression(x, pick(targets, idx), opt);
}

inline RateMetrics rate_metrics(std::span<const double> pred_pass, std::span<const double> pred_churn,
                                std::span<const double> truth_pass,
                                std::span<const double> truth_churn,
                                std::span<const std::size_t> idx)
{
    return {compute_metrics(pick(pred_pass, idx), pick(truth_pass, idx)),
            compute_metrics(pick(pred_churn, idx), pick(truth_churn, idx))};
}

} // namespace detail

/// Difficulties for one fold: baseline fitted on the training levels,
/// predictions over all levels, min-max normalized over all levels.
inline std::vector<double> fold_difficulties(const LevelSeries& truth, const DifficultySource& src,
                                             const std::vector<bool>& training_mask,
                                             const RegressionOptions& opt)
{
    if (src.difficulties) return *src.difficulties;
    const auto train = detail::masked_indices(training_mask);
    const RegressionModel m = detail::fit_on(*src.features, truth.pass_rates(), train, opt);
    return normalize_difficulty(predict_level_pass_rates(m, *src.features));
}

inline void validate_source(const LevelSeries& truth, const DifficultySource& src)
{
    detail::require(src.features || src.difficulties,
                    "difficulty source needs features or explicit difficulties");
    if (src.features)
        detail::require(src.features->size() == truth.size(),
                        "one feature vector per truth level required");
    if (src.difficulties)
        detail::require(src.difficulties->size() == truth.size(),
                        "one difficulty per truth level required");
}

/// Runs one fold (all repeats). Appends to `report`. Shared by cross_validate
/// and tail_holdout.
inline void run_fold(const LevelSeries& truth, const DifficultySource& src, const FoldPlan& plan,
                     std::size_t fold, const CVConfig& cfg, const Fitter& fitter, CVReport& report)
{
    const std::vector<double> tp = truth.pass_rates();
    const std::vector<double> tc = truth.churn_rates();
    const std::vector<int> ids = truth.level_ids();
    const std::vector<bool> mask = plan.training_mask(fold);
    const std::vector<std::size_t> test = plan.held_out(fold);
    const std::vector<std::size_t> train = detail::masked_indices(mask);

    if (src.features) {
        const RegressionModel mp = detail::fit_on(*src.features, tp, train, cfg.regression);
        const RegressionModel mc = detail::fit_on(*src.features, tc, train, cfg.regression);
        const auto bp = pass_rate_estimates(predict_level_pass_rates(mp, *src.features));
        const auto bc = pass_rate_estimates(predict_level_pass_rates(mc, *src.features));
        report.baseline.push_back(detail::rate_metrics(bp, bc, tp, tc, test));
        if (!report.baseline_predictions) {
            report.baseline_predictions = truth;
            report.baseline_predictions->role = SeriesRole::predicted;
        }
        for (std::size_t i : test) {
            report.baseline_predictions->levels[i].pass_rate = bp[i];
            report.baseline_predictions->levels[i].churn_rate = bc[i];
        }
    }

    const std::vector<double> difficulties = fold_difficulties(truth, src, mask, cfg.regression);
    const double w_churn = compute_w_churn(detail::pick(tp, train), detail::pick(tc, train));

    for (std::size_t r = 0; r < cfg.repeats; ++r) {
        FitTask task;
        task.truth = &truth;
        task.difficulties = difficulties;
        task.training_mask = mask;
        task.w_churn = w_churn;
        task.simulation = cfg.simulation;
        task.simulation.seed = domain_seed(cfg.master_seed, SeedDomain::fit_simulation, fold, r);
        task.optimizer = cfg.optimizer;
        task.optimizer.seed = domain_seed(cfg.master_seed, SeedDomain::optimizer, fold, r);
        task.x0 = cfg.x0;

        const FitOutcome fit = fitter(task);

        FoldRun run;
        run.fold = fold;
        run.repeat = r;
        for (std::size_t i : test) run.held_out_levels.push_back(ids[i]);
        run.extended = detail::rate_metrics(fit.predictions.pass, fit.predictions.churn, tp, tc, test);
        run.raw = fit.raw;
        run.params = fit.params;
        run.w_churn = w_churn;
        run.objective = fit.opt.best_value;
        run.evaluations = fit.opt.evaluations;
        run.generations = fit.opt.generations;
        run.termination = fit.opt.reason;
        run.depleted = fit.predictions.depleted || fit.predictions.attempt_cap_hit;
        run.optimizer_seed = task.optimizer.seed;
        run.simulation_seed = task.simulation.seed;
        report.runs.push_back(run);

        if (report.held_out_predictions.size() <= r) {
            LevelSeries s = truth;
            s.role = SeriesRole::predicted;
            report.held_out_predictions.push_back(std::move(s));
        }
        for (std::size_t i : test) {
            report.held_out_predictions[r].levels[i].pass_rate = fit.predictions.pass[i];
            report.held_out_predictions[r].levels[i].churn_rate = fit.predictions.churn[i];
        }
    }
}

namespace detail {

inline void finalize(const LevelSeries& truth, const std::vector<std::size_t>& covered,
                     CVReport& report)
{
    std::vector<RateMetrics> all;
    for (const FoldRun& r : report.runs) all.push_back(r.extended);
    report.extended_runs = summarize(all);

    std::vector<RateMetrics> per_fold;
    for (std::size_t f = 0; f * report.repeats < report.runs.size(); ++f) {
        RateMetrics avg{};
        for (std::size_t r = 0; r < report.repeats; ++r) {
            const RateMetrics& m = report.runs[f * report.repeats + r].extended;
            avg.pass.mse += m.pass.mse;
            avg.pass.mae += m.pass.mae;
            avg.churn.mse += m.churn.mse;
            avg.churn.mae += m.churn.mae;
        }
        const double n = static_cast<double>(report.repeats);
        avg.pass.mse /= n;
        avg.pass.mae /= n;
        avg.churn.mse /= n;
        avg.churn.mae /= n;
        per_fold.push_back(avg);
    }
    report.extended_folds = summarize(per_fold);
    report.baseline_folds = summarize(report.baseline);

    const auto tp = truth.pass_rates();
    const auto tc = truth.churn_rates();
    for (const LevelSeries& s : report.held_out_predictions)
        report.pooled.push_back(rate_metrics(s.pass_rates(), s.churn_rates(), tp, tc, covered));
    if (report.baseline_predictions)
        report.baseline_pooled = rate_metrics(report.baseline_predictions->pass_rates(),
                                              report.baseline_predictions->churn_rates(), tp, tc,
                                              covered);
}

} // namespace detail

inline CVReport cross_validate(const LevelSeries& truth, const DifficultySource& src,
                               const CVConfig& cfg, const Fitter& fitter = fit_simulation_params)
{
    validate(truth);
    validate_source(truth, src);
    detail::require(cfg.repeats >= 1, "cross_validate: repeats must be >= 1");
    const FoldPlan plan = kfold_split(truth.size(), cfg.k, cfg.scheme);

    CVReport report;
    report.k = cfg.k;
    report.scheme = cfg.scheme;
    report.repeats = cfg.repeats;
    report.master_seed = cfg.master_seed;
    report.flags = cfg.simulation.flags;
    report.fold_sizes = plan.fold_sizes();
    for (std::size_t f = 0; f < cfg.k; ++f) run_fold(truth, src, plan, f, cfg, fitter, report);

    std::vector<std::size_t> all(truth.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    detail::finalize(truth, all, report);
    return report;
}

/// Generalization to levels appended at the end: fit on the first four fifths,
/// validate on the last fifth (the final contiguous fold of a 5-fold plan).
inline CVReport tail_holdout(const LevelSeries& truth, const DifficultySource& src, CVConfig cfg,
                             const Fitter& fitter = fit_simulation_params)
{
    validate(truth);
    validate_source(truth, src);
    cfg.k = 5;
    cfg.scheme = FoldScheme::contiguous;
    const FoldPlan plan = kfold_split(truth.size(), cfg.k, cfg.scheme);

    CVReport report;
    report.k = cfg.k;
    report.scheme = cfg.scheme;
    report.repeats = cfg.repeats;
    report.master_seed = cfg.master_seed;
    report.flags = cfg.simulation.flags;
    report.fold_sizes = plan.fold_sizes();
    run_fold(truth, src, plan, cfg.k - 1, cfg, fitter, report);
    detail::finalize(truth, plan.held_out(cfg.k - 1), report);
    return report;
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationVariant {
    const char* name;
    AblationFlags flags;
};

inline const std::vector<AblationVariant>& ablation_variants()
{
    static const std::vector<AblationVariant> v = {
        {"All features", {}},
        {"No boredom", {.disable_boredom = true}},
        {"No persistence", {.disable_persistence = true}},
        {"No learning", {.disable_learning = true}},
        {"No random noise in skill and persistence", {.disable_draw_noise = true}},
    };
    return v;
}

struct AblationRow {
    std::string name;
    AblationFlags flags;
    double pass_mse = 0.0;  ///< mean over fold x repeat runs
    double churn_mse = 0.0;
    CVReport report;
};

/// Cross-validates every variant; each refits its parameters with its flag
/// applied during fitting and prediction. Seeds are shared across variants.
inline std::vector<AblationRow> ablation_suite(const LevelSeries& truth, const DifficultySource& src,
                                               const CVConfig& cfg,
                                               const Fitter& fitter = fit_simulation_params)
{
    std::vector<AblationRow> rows;
    for (const AblationVariant& v : ablation_variants()) {
        CVConfig c = cfg;
        c.simulation.flags = v.flags;
        AblationRow row{v.name, v.flags, 0.0, 0.0, cross_validate(truth, src, c, fitter)};
        row.pass_mse = row.report.extended_runs.pass_mse.mean;
        row.churn_mse = row.report.extended_runs.churn_mse.mean;
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Ground-truth difficulty experiment

/// d = 1 - observed pass rate, no normalization.
inline std::vector<double> oracle_difficulties(const LevelSeries& truth)
{
    validate(truth);
    std::vector<double> d;
    d.reserve(truth.size());
    for (const LevelRecord& l : truth.levels) d.push_back(1.0 - l.pass_rate);
    return d;
}

struct OracleExperiment {
    CVReport model;   ///< difficulties from the regression on gameplay features
    CVReport oracle;  ///< difficulties from observed pass rates
    double churn_mse_ratio = 0.0;     ///< oracle / model, mean over runs
    double churn_mse_reduction = 0.0; ///< 1 - ratio
};

inline OracleExperiment oracle_difficulty_experiment(const LevelSeries& truth,
                                                     const std::vector<LevelFeatures>& features,
                                                     const CVConfig& cfg,
                                                     const Fitter& fitter = fit_simulation_params)
{
    OracleExperiment out;
    out.model = cross_validate(truth, DifficultySource{features, std::nullopt}, cfg, fitter);
    out.oracle =
        cross_validate(truth, DifficultySource{std::nullopt, oracle_difficulties(truth)}, cfg, fitter);
    const double m = out.model.extended_runs.churn_mse.mean;
    out.churn_mse_ratio = m > 0.0 ? out.oracle.extended_runs.churn_mse.mean / m : 0.0;
    out.churn_mse_reduction = 1.0 - out.churn_mse_ratio;
    return out;
}

} // namespace churnsim
