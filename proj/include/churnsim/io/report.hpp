#pragma once

// JSON report assembly. Reals are printed with 17 significant digits; key
// order is insertion order, so a report is byte-stable for fixed inputs.

#include <churnsim/evaluation.hpp>
#include <churnsim/io/csv.hpp>
#include <churnsim/population.hpp>

#include <json.hpp>

#include <cmath>
#include <string>

namespace churnsim::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kArtifactName = "churnsim";
inline constexpr const char* kArtifactVersion = "0.1.0";

namespace detail {

inline void escape_into(std::string& out, const std::string& s)
{
    out += Json(s).dump();
}

inline void dump_into(std::string& out, const Json& j, int indent, int depth)
{
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
    switch (j.type()) {
    case Json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out += ",\n";
            first = false;
            out += pad;
            escape_into(out, it.key());
            out += ": ";
            dump_into(out, it.value(), indent, depth + 1);
        }
        out += "\n" + close_pad + "}";
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        // Arrays of scalars stay on one line.
        bool scalars = true;
        for (const auto& v : j) scalars = scalars && !v.is_structured();
        out += scalars ? "[" : "[\n";
        bool first = true;
        for (const auto& v : j) {
            if (!first) out += scalars ? ", " : ",\n";
            first = false;
            if (!scalars) out += pad;
            dump_into(out, v, indent, depth + 1);
        }
        out += scalars ? "]" : "\n" + close_pad + "]";
        return;
    }
    case Json::value_t::number_float: {
        const double v = j.get<double>();
        out += std::isfinite(v) ? format_real(v) : "null";
        return;
    }
    default:
        out += j.dump();
    }
}

} // namespace detail

inline std::string dump(const Json& j)
{
    std::string out;
    detail::dump_into(out, j, 2, 0);
    out += '\n';
    return out;
}

inline Json to_json(const SimParams& p)
{
    return Json{{"mean_skill", p.population.mean_skill},
                {"std_skill", p.population.std_skill},
                {"mean_persistence", p.population.mean_persistence},
                {"std_persistence", p.population.std_persistence},
                {"mean_boredom", p.population.mean_boredom},
                {"std_boredom", p.population.std_boredom},
                {"alpha", p.alpha},
                {"beta", p.beta},
                {"theta", p.theta},
                {"gamma", p.gamma}};
}

inline Json to_json(const AblationFlags& f)
{
    return Json{{"disable_boredom", f.disable_boredom},
                {"disable_persistence", f.disable_persistence},
                {"disable_learning", f.disable_learning},
                {"disable_draw_noise", f.disable_draw_noise}};
}

inline Json to_json(const PopulationStats& s)
{
    return Json{{"mean_skill", s.mean_skill},
                {"std_skill", s.std_skill},
                {"mean_persistence", s.mean_persistence},
                {"std_persistence", s.std_persistence},
                {"mean_boredom", s.mean_boredom},
                {"std_boredom", s.std_boredom}};
}

inline Json to_json(const RateMetrics& m)
{
    return Json{{"pass_mse", m.pass.mse},
                {"pass_mae", m.pass.mae},
                {"churn_mse", m.churn.mse},
                {"churn_mae", m.churn.mae}};
}

inline Json to_json(const Summary& s) { return Json{{"mean", s.mean}, {"std", s.std}}; }

inline Json to_json(const MetricSummary& m)
{
    return Json{{"pass_mse", to_json(m.pass_mse)},
                {"pass_mae", to_json(m.pass_mae)},
                {"churn_mse", to_json(m.churn_mse)},
                {"churn_mae", to_json(m.churn_mae)}};
}

inline Json to_json(const LevelSeries& s)
{
    Json levels = Json::array();
    for (const LevelRecord& l : s.levels)
        levels.push_back(Json{{"level_id", l.level_id}, {"pass_rate", l.pass_rate},
                              {"churn_rate", l.churn_rate}});
    return Json{{"role", to_string(s.role)}, {"levels", levels}};
}

inline Json seed_json(std::uint64_t s) { return Json(std::to_string(s)); }

inline Json to_json(const CVReport& r)
{
    Json runs = Json::array();
    for (const FoldRun& f : r.runs) {
        Json raw = Json::array();
        for (double v : f.raw) raw.push_back(v);
        runs.push_back(Json{{"fold", f.fold},
                            {"repeat", f.repeat},
                            {"held_out_levels", f.held_out_levels},
                            {"metrics", to_json(f.extended)},
                            {"params", to_json(f.params)},
                            {"raw_params", raw},
                            {"w_churn", f.w_churn},
                            {"objective", f.objective},
                            {"evaluations", f.evaluations},
                            {"generations", f.generations},
                            {"termination", to_string(f.termination)},
                            {"depleted", f.depleted},
                            {"optimizer_seed", seed_json(f.optimizer_seed)},
                            {"simulation_seed", seed_json(f.simulation_seed)}});
    }
    Json baseline = Json::array();
    for (const RateMetrics& m : r.baseline) baseline.push_back(to_json(m));
    Json pooled = Json::array();
    for (const RateMetrics& m : r.pooled) pooled.push_back(to_json(m));

    Json j{{"k", r.k},
           {"scheme", to_string(r.scheme)},
           {"repeats", r.repeats},
           {"flags", to_json(r.flags)},
           {"fold_sizes", r.fold_sizes},
           {"extended", Json{{"over_runs", to_json(r.extended_runs)},
                             {"over_folds", to_json(r.extended_folds)},
                             {"pooled_per_repeat", pooled}}},
           {"baseline", Json{{"over_folds", to_json(r.baseline_folds)},
                             {"per_fold", baseline},
                             {"pooled", r.baseline_pooled ? to_json(*r.baseline_pooled) : Json()}}},
           {"runs", runs}};
    return j;
}

/// Common header carried by every report.
inline Json report_header(const std::string& command, const std::string& config_hash,
                          std::uint64_t seed)
{
    return Json{{"artifact", kArtifactName},
                {"version", kArtifactVersion},
                {"command", command},
                {"config_hash", config_hash},
                {"seed", seed_json(seed)}};
}

} // namespace churnsim::io
