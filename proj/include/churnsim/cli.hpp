#pragma once

// Command-line front end. `run_command` is the whole program; tools/churnsim.cpp
// only forwards argv to it.
//
// Exit codes: 0 ok, 2 missing input file, 3 invalid input (schema, range,
// config), 64 usage error, 70 internal error.

#include <churnsim/difficulty.hpp>
#include <churnsim/evaluation.hpp>
#include <churnsim/io/config.hpp>
#include <churnsim/io/csv.hpp>
#include <churnsim/io/report.hpp>
#include <churnsim/objective.hpp>
#include <churnsim/synthetic.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace churnsim::cli {

enum ExitCode : int {
    kOk = 0,
    kMissingFile = 2,
    kBadInput = 3,
    kUsage = 64,
    kInternal = 70,
};

struct Options {
    std::string command;
    std::filesystem::path config_path;
    std::uint64_t seed = 0;
    std::filesystem::path out;
    std::filesystem::path episodes;
    std::filesystem::path levels;
    std::filesystem::path difficulties;
    std::filesystem::path predictions;
};

namespace fs = std::filesystem;
using io::Json;

struct Context {
    Options opt;
    io::RunConfig cfg;
    std::string hash;
    std::ostream* log = &std::cout;

    fs::path out(const std::string& name) const { return cfg.output_dir / name; }

    Json header() const { return io::report_header(opt.command, hash, opt.seed); }

    void write(const std::string& name, const std::string& content) const
    {
        io::write_file_atomic(out(name), content);
        *log << "wrote " << out(name).generic_string() << "\n";
    }

    io::Datasets datasets() const
    {
        if (cfg.episodes.empty() || cfg.levels.empty())
            throw io::FileError("this command needs data.episodes and data.levels (config or --episodes/--levels)");
        return io::load_datasets(cfg.episodes, cfg.levels);
    }
};

namespace detail {

inline Json series_json(const std::vector<int>& ids, const std::vector<double>& pass,
                        const std::vector<double>& churn)
{
    Json levels = Json::array();
    for (std::size_t i = 0; i < ids.size(); ++i)
        levels.push_back(Json{{"level_id", ids[i]}, {"pass_rate", pass[i]}, {"churn_rate", churn[i]}});
    return levels;
}

inline LevelSeries with_ids(const std::vector<int>& ids, const std::vector<double>& pass,
                            const std::vector<double>& churn, SeriesRole role)
{
    LevelSeries s;
    s.role = role;
    for (std::size_t i = 0; i < ids.size(); ++i) s.levels.push_back({ids[i], pass[i], churn[i]});
    return s;
}

inline std::vector<double> difficulties_for(const Context& ctx, const io::Datasets* data,
                                            const std::vector<int>& ids)
{
    if (!ctx.cfg.difficulties.empty()) {
        std::vector<int> dids;
        auto d = io::parse_difficulties(io::load_text(ctx.cfg.difficulties), &dids,
                                        ctx.cfg.difficulties.filename().string());
        if (!ids.empty() && dids != ids)
            throw io::SchemaError("difficulty file levels do not match the dataset levels");
        return d;
    }
    if (!data) throw io::FileError("no difficulties: set data.difficulties or --difficulties");
    const RegressionModel m =
        fit_regression(data->features, data->truth.pass_rates(), {ctx.cfg.ridge});
    return normalize_difficulty(predict_level_pass_rates(m, data->features));
}

} // namespace detail

inline int cmd_synth(const Context& ctx)
{
    const io::RunConfig& c = ctx.cfg;
    TruthSpec spec;
    spec.true_params = c.params;
    spec.n_players = c.population_size;
    spec.flags = c.flags;
    spec.seed = ctx.opt.seed;
    spec.level_difficulties = default_difficulty_curve(c.synth_levels, ctx.opt.seed);
    const TruthRun truth = generate_truth_run(spec);
    const auto episodes =
        generate_episode_logs(spec.level_difficulties, c.synth_episodes_per_level, ctx.opt.seed);

    ctx.write("episodes.csv", io::format_episodes(episodes));
    ctx.write("levels.csv", io::format_levels(truth.series));
    ctx.write("true_difficulties.csv",
              io::format_difficulties(truth.series.level_ids(), spec.level_difficulties));

    Json stats = Json::array();
    for (const auto& s : truth.stats) stats.push_back(io::to_json(s));
    Json j = ctx.header();
    j["episode_generator_version"] = kEpisodeGeneratorVersion;
    j["levels"] = c.synth_levels;
    j["episodes_per_level"] = c.synth_episodes_per_level;
    j["players"] = c.population_size;
    j["true_params"] = io::to_json(c.params);
    j["true_difficulties"] = spec.level_difficulties;
    j["population_stats"] = stats;
    ctx.write("synth.json", io::dump(j));
    return kOk;
}

inline int cmd_fit_baseline(const Context& ctx)
{
    const io::Datasets data = ctx.datasets();
    const auto tp = data.truth.pass_rates();
    const auto tc = data.truth.churn_rates();
    const RegressionModel mp = fit_regression(data.features, tp, {ctx.cfg.ridge});
    const RegressionModel mc = fit_regression(data.features, tc, {ctx.cfg.ridge});
    const auto raw = predict_level_pass_rates(mp, data.features);
    const auto est = pass_rate_estimates(raw);
    const auto churn = pass_rate_estimates(predict_level_pass_rates(mc, data.features));
    const auto d = normalize_difficulty(raw);

    auto model_json = [](const RegressionModel& m) {
        Json w = Json::object();
        for (std::size_t i = 0; i < kNumFeatures; ++i) w[feature_names()[i]] = m.weights[i];
        return Json{{"weights", w}, {"bias", m.bias}};
    };
    Json j = ctx.header();
    j["levels"] = data.level_ids.size();
    j["episodes"] = data.episode_count;
    j["pass_model"] = model_json(mp);
    j["churn_model"] = model_json(mc);
    j["in_sample"] = io::to_json(RateMetrics{compute_metrics(est, tp), compute_metrics(churn, tc)});
    ctx.write("baseline.json", io::dump(j));

    std::string csv = "level_id,baseline_prediction,pass_rate_estimate,churn_estimate,difficulty\n";
    for (std::size_t i = 0; i < d.size(); ++i)
        csv += std::to_string(data.level_ids[i]) + ',' + io::format_real(raw[i]) + ',' +
               io::format_real(est[i]) + ',' + io::format_real(churn[i]) + ',' +
               io::format_real(d[i]) + '\n';
    ctx.write("baseline_difficulties.csv", csv);
    ctx.write("difficulties.csv", io::format_difficulties(data.level_ids, d));
    *ctx.log << "baseline in-sample pass MSE " << compute_metrics(est, tp).mse << "\n";
    return kOk;
}

inline int cmd_simulate(const Context& ctx)
{
    std::optional<io::Datasets> data;
    if (ctx.cfg.difficulties.empty()) data = ctx.datasets();
    const auto d = detail::difficulties_for(ctx, data ? &*data : nullptr,
                                            data ? data->level_ids : std::vector<int>{});
    std::vector<int> ids;
    if (data) ids = data->level_ids;
    else io::parse_difficulties(io::load_text(ctx.cfg.difficulties), &ids);

    const std::uint64_t seed = domain_seed(ctx.opt.seed, SeedDomain::fit_simulation);
    Population pop = init_population(ctx.cfg.params.population, ctx.cfg.population_size, seed);
    const ProgressionResult r = simulate_progression(d, std::move(pop), ctx.cfg.params, ctx.cfg.flags, seed);

    const std::vector<int> done(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(r.levels_simulated()));
    Json stats = Json::array();
    for (const auto& s : r.stats) stats.push_back(io::to_json(s));
    Json missing = Json::array();
    for (std::size_t i = r.levels_simulated(); i < ids.size(); ++i) missing.push_back(ids[i]);

    Json j = ctx.header();
    j["params"] = io::to_json(ctx.cfg.params);
    j["flags"] = io::to_json(ctx.cfg.flags);
    j["population_size"] = ctx.cfg.population_size;
    j["depleted"] = r.depleted;
    j["missing_levels"] = missing;
    j["levels"] = detail::series_json(done, r.pass_rate, r.churn_rate);
    j["population_stats"] = stats;
    ctx.write("simulate.json", io::dump(j));
    ctx.write("simulated_levels.csv",
              io::format_levels(detail::with_ids(done, r.pass_rate, r.churn_rate, SeriesRole::predicted)));
    if (r.depleted) *ctx.log << "population depleted at level " << ids[*r.depleted_at] << "\n";
    return kOk;
}

inline int cmd_fit(const Context& ctx)
{
    const io::Datasets data = ctx.datasets();
    FitTask task;
    task.truth = &data.truth;
    task.difficulties = detail::difficulties_for(ctx, &data, data.level_ids);
    task.training_mask.assign(data.truth.size(), true);
    task.w_churn = compute_w_churn(data.truth.pass_rates(), data.truth.churn_rates());
    task.simulation.flags = ctx.cfg.flags;
    task.simulation.population_size = ctx.cfg.population_size;
    task.simulation.seed = domain_seed(ctx.opt.seed, SeedDomain::fit_simulation);
    task.optimizer = ctx.cfg.optimizer(domain_seed(ctx.opt.seed, SeedDomain::optimizer));
    task.x0 = ctx.cfg.start();
    const FitOutcome fit = fit_simulation_params(task);

    Json raw = Json::array();
    for (double v : fit.raw) raw.push_back(v);
    Json j = ctx.header();
    j["params"] = io::to_json(fit.params);
    j["raw_params"] = raw;
    j["objective"] = fit.opt.best_value;
    j["w_churn"] = task.w_churn;
    j["evaluations"] = fit.opt.evaluations;
    j["generations"] = fit.opt.generations;
    j["termination"] = to_string(fit.opt.reason);
    j["depleted"] = fit.predictions.depleted || fit.predictions.attempt_cap_hit;
    j["in_sample"] = io::to_json(RateMetrics{
        compute_metrics(fit.predictions.pass, data.truth.pass_rates()),
        compute_metrics(fit.predictions.churn, data.truth.churn_rates())});
    j["levels"] = detail::series_json(data.level_ids, fit.predictions.pass, fit.predictions.churn);
    ctx.write("fit.json", io::dump(j));
    ctx.write("fit_predictions.csv",
              io::format_levels(detail::with_ids(data.level_ids, fit.predictions.pass,
                                                 fit.predictions.churn, SeriesRole::predicted)));
    *ctx.log << "fit objective " << fit.opt.best_value << " after " << fit.opt.evaluations
             << " evaluations (" << to_string(fit.opt.reason) << ")\n";
    return kOk;
}

inline DifficultySource source_for(const Context& ctx, const io::Datasets& data)
{
    DifficultySource src;
    src.features = data.features;
    if (!ctx.cfg.difficulties.empty())
        src.difficulties = detail::difficulties_for(ctx, &data, data.level_ids);
    return src;
}

inline std::string predictions_csv(const LevelSeries& truth, const CVReport& r)
{
    std::string csv = "level_id,fold,truth_pass,truth_churn,pred_pass,pred_churn,baseline_pass,baseline_churn\n";
    const FoldPlan plan = kfold_split(truth.size(), r.k, r.scheme);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const LevelRecord& t = truth.levels[i];
        const LevelRecord& p = r.held_out_predictions.front().levels[i];
        csv += std::to_string(t.level_id) + ',' + std::to_string(plan.assignment[i]) + ',' +
               io::format_real(t.pass_rate) + ',' + io::format_real(t.churn_rate) + ',' +
               io::format_real(p.pass_rate) + ',' + io::format_real(p.churn_rate) + ',';
        if (r.baseline_predictions) {
            const LevelRecord& b = r.baseline_predictions->levels[i];
            csv += io::format_real(b.pass_rate) + ',' + io::format_real(b.churn_rate);
        } else {
            csv += ',';
        }
        csv += '\n';
    }
    return csv;
}

inline int cmd_crossval(const Context& ctx)
{
    const io::Datasets data = ctx.datasets();
    const CVReport r = cross_validate(data.truth, source_for(ctx, data), ctx.cfg.cv(ctx.opt.seed));
    Json j = ctx.header();
    j["report"] = io::to_json(r);
    ctx.write("crossval.json", io::dump(j));
    ctx.write("crossval_predictions.csv", predictions_csv(data.truth, r));
    *ctx.log << "held-out pass MSE " << r.extended_runs.pass_mse.mean << ", churn MSE "
             << r.extended_runs.churn_mse.mean << " (baseline " << r.baseline_folds.pass_mse.mean
             << ", " << r.baseline_folds.churn_mse.mean << ")\n";
    return kOk;
}

inline int cmd_ablate(const Context& ctx)
{
    const io::Datasets data = ctx.datasets();
    const auto rows = ablation_suite(data.truth, source_for(ctx, data), ctx.cfg.cv(ctx.opt.seed));
    Json table = Json::array();
    std::string csv = "variant,pass_mse,churn_mse\n";
    for (const AblationRow& row : rows) {
        table.push_back(Json{{"variant", row.name},
                             {"flags", io::to_json(row.flags)},
                             {"pass_mse", row.pass_mse},
                             {"churn_mse", row.churn_mse},
                             {"report", io::to_json(row.report)}});
        csv += row.name + ',' + io::format_real(row.pass_mse) + ',' + io::format_real(row.churn_mse) + '\n';
        *ctx.log << row.name << ": pass MSE " << row.pass_mse << ", churn MSE " << row.churn_mse << "\n";
    }
    Json j = ctx.header();
    j["variants"] = table;
    ctx.write("ablation.json", io::dump(j));
    ctx.write("ablation.csv", csv);
    return kOk;
}

inline int cmd_oracle_diff(const Context& ctx)
{
    const io::Datasets data = ctx.datasets();
    const OracleExperiment e = oracle_difficulty_experiment(data.truth, data.features, ctx.cfg.cv(ctx.opt.seed));
    Json j = ctx.header();
    j["model_difficulty"] = io::to_json(e.model);
    j["oracle_difficulty"] = io::to_json(e.oracle);
    j["churn_mse_ratio"] = e.churn_mse_ratio;
    j["churn_mse_reduction"] = e.churn_mse_reduction;
    ctx.write("oracle_diff.json", io::dump(j));
    *ctx.log << "churn MSE with observed-pass-rate difficulty is " << e.churn_mse_ratio
             << "x the model-difficulty churn MSE\n";
    return kOk;
}

/// Scatter data for pass vs churn plots, coloured by relative level index.
inline int cmd_report(const Context& ctx)
{
    if (ctx.cfg.levels.empty()) throw io::FileError("report needs data.levels or --levels");
    const LevelSeries truth = io::parse_levels(io::load_text(ctx.cfg.levels), ctx.cfg.levels.filename().string());
    std::string csv = "series,level_id,level_index,level_fraction,pass_rate,churn_rate\n";
    auto emit = [&csv](const char* name, const LevelSeries& s) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double frac = s.size() > 1 ? static_cast<double>(i) / static_cast<double>(s.size() - 1) : 0.0;
            csv += std::string(name) + ',' + std::to_string(s.levels[i].level_id) + ',' +
                   std::to_string(i) + ',' + io::format_real(frac) + ',' +
                   io::format_real(s.levels[i].pass_rate) + ',' +
                   io::format_real(s.levels[i].churn_rate) + '\n';
        }
    };
    emit("truth", truth);
    Json j = ctx.header();
    j["truth_levels"] = truth.size();
    if (!ctx.opt.predictions.empty()) {
        const LevelSeries pred = io::parse_levels(io::load_text(ctx.opt.predictions),
                                                  ctx.opt.predictions.filename().string());
        emit("predicted", pred);
        j["predicted_levels"] = pred.size();
        if (pred.level_ids() == truth.level_ids())
            j["metrics"] = io::to_json(RateMetrics{
                compute_metrics(pred.pass_rates(), truth.pass_rates()),
                compute_metrics(pred.churn_rates(), truth.churn_rates())});
    }
    ctx.write("scatter.csv", csv);
    ctx.write("report.json", io::dump(j));
    return kOk;
}

inline int dispatch(const Context& ctx)
{
    const std::string& c = ctx.opt.command;
    if (c == "synth") return cmd_synth(ctx);
    if (c == "fit-baseline") return cmd_fit_baseline(ctx);
    if (c == "simulate") return cmd_simulate(ctx);
    if (c == "fit") return cmd_fit(ctx);
    if (c == "crossval") return cmd_crossval(ctx);
    if (c == "ablate") return cmd_ablate(ctx);
    if (c == "oracle-diff") return cmd_oracle_diff(ctx);
    if (c == "report") return cmd_report(ctx);
    return kUsage;
}

inline int run_command(int argc, const char* const* argv, std::ostream& log = std::cout,
                       std::ostream& err = std::cerr)
{
    CLI::App app{"Player population simulation and churn model fitting"};
    app.require_subcommand(1, 1);
    Options opt;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"synth", "generate a synthetic dataset with known parameters"},
        {"fit-baseline", "fit the regression baseline and write level difficulties"},
        {"simulate", "run the population simulation with [params]"},
        {"fit", "fit simulation parameters with CMA-ES on all levels"},
        {"crossval", "k-fold cross-validation against the regression baseline"},
        {"ablate", "cross-validate each simulation ablation"},
        {"oracle-diff", "compare model difficulty with difficulty from observed pass rates"},
        {"report", "write pass/churn scatter data"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config_path, "configuration file");
        sub->add_option("--seed", opt.seed, "master seed");
        sub->add_option("--out", opt.out, "output directory (overrides output.dir)");
        sub->add_option("--episodes", opt.episodes, "episodes CSV (overrides data.episodes)");
        sub->add_option("--levels", opt.levels, "levels CSV (overrides data.levels)");
        sub->add_option("--difficulties", opt.difficulties, "difficulty CSV (overrides data.difficulties)");
        if (name == "report") sub->add_option("--predictions", opt.predictions, "predicted levels CSV");
        sub->callback([&opt, n = name] { opt.command = n; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, log, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, log, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, log, err);
        return kUsage;
    }

    try {
        Context ctx;
        ctx.opt = opt;
        ctx.log = &log;
        if (!opt.config_path.empty()) ctx.cfg = io::load_config(opt.config_path);
        if (!opt.out.empty()) ctx.cfg.output_dir = opt.out;
        if (!opt.episodes.empty()) ctx.cfg.episodes = opt.episodes;
        if (!opt.levels.empty()) ctx.cfg.levels = opt.levels;
        if (!opt.difficulties.empty()) ctx.cfg.difficulties = opt.difficulties;
        ctx.hash = io::config_hash(ctx.cfg);
        return dispatch(ctx);
    } catch (const io::FileError& e) {
        err << "error: " << e.what() << "\n";
        return kMissingFile;
    } catch (const io::SchemaError& e) {
        err << "error: " << e.what() << "\n";
        return kBadInput;
    } catch (const DegenerateData& e) {
        err << "error: " << e.what() << "\n";
        return kBadInput;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kInternal;
    }
}

} // namespace churnsim::cli
