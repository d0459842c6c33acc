#pragma once

// Run configuration: a flat key = value file with [sections].
//
//   # comment
//   [cv]
//   folds = 5
//
// Every key has a default; unknown sections or keys are rejected.

#include <churnsim/evaluation.hpp>
#include <churnsim/io/csv.hpp>
#include <churnsim/population.hpp>
#include <churnsim/synthetic.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace churnsim::io {

struct RunConfig {
    // [data]
    std::filesystem::path episodes;
    std::filesystem::path levels;
    std::filesystem::path difficulties;

    // [output]
    std::filesystem::path output_dir = "out";

    // [simulation]
    std::size_t population_size = 2000;
    AblationFlags flags;

    // [params] simulation parameters for `simulate` and `synth`
    SimParams params = default_true_params();

    // [start] CMA-ES initial mean, one shared initial scale
    double start_skill = 0.5;
    double start_persistence = 3.0;
    double start_boredom = 0.0;
    double start_scale = 0.3;

    // [optimizer]
    std::size_t cma_population = 120;
    std::size_t patience = 100;
    std::size_t max_evaluations = 1'000'000;
    double step_size = 0.3;
    double tol_x = 1e-12;
    unsigned threads = 0; ///< 0 = hardware concurrency

    // [cv]
    std::size_t folds = 5;
    std::size_t repeats = 5;
    FoldScheme scheme = FoldScheme::contiguous;

    // [regression]
    double ridge = 1e-8;

    // [synth]
    std::size_t synth_levels = 168;
    int synth_episodes_per_level = 30;

    RawParams start() const
    {
        const double s = std::log(start_scale);
        return {start_skill, s, start_persistence, s, start_boredom, s, s, s, s, s};
    }

    OptimizerConfig optimizer(std::uint64_t seed) const
    {
        OptimizerConfig c;
        c.population_size = cma_population;
        c.no_improvement_generations = patience;
        c.max_evaluations = max_evaluations;
        c.initial_step_size = step_size;
        c.tol_x = tol_x;
        c.seed = seed;
        c.threads = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
        return c;
    }

    CVConfig cv(std::uint64_t master_seed) const
    {
        CVConfig c;
        c.k = folds;
        c.scheme = scheme;
        c.repeats = repeats;
        c.master_seed = master_seed;
        c.optimizer = optimizer(0);
        c.simulation.flags = flags;
        c.simulation.population_size = population_size;
        c.regression.ridge = ridge;
        c.x0 = start();
        return c;
    }
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& v)
{
    T out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw SchemaError("config key '" + key + "': '" + v + "' is not a valid number");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw SchemaError("config key '" + key + "': '" + v + "' is not a boolean");
}

struct Field {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field number_field(T RunConfig::*m)
{
    return {[m](RunConfig& c, const std::string& v) { c.*m = parse_number<T>("", v); },
            [m](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<T>) return format_real(c.*m);
                else return std::to_string(c.*m);
            }};
}

inline Field real_ref(std::function<double&(RunConfig&)> ref)
{
    return {[ref](RunConfig& c, const std::string& v) { ref(c) = parse_number<double>("", v); },
            [ref](const RunConfig& c) { return format_real(ref(const_cast<RunConfig&>(c))); }};
}

inline Field bool_ref(std::function<bool&(RunConfig&)> ref)
{
    return {[ref](RunConfig& c, const std::string& v) { ref(c) = parse_bool("", v); },
            [ref](const RunConfig& c) {
                return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false");
            }};
}

inline Field path_field(std::filesystem::path RunConfig::*m)
{
    return {[m](RunConfig& c, const std::string& v) { c.*m = v; },
            [m](const RunConfig& c) { return (c.*m).generic_string(); }};
}

inline const std::map<std::string, Field>& fields()
{
    static const std::map<std::string, Field> f = {
        {"data.episodes", path_field(&RunConfig::episodes)},
        {"data.levels", path_field(&RunConfig::levels)},
        {"data.difficulties", path_field(&RunConfig::difficulties)},
        {"output.dir", path_field(&RunConfig::output_dir)},
        {"simulation.population_size", number_field(&RunConfig::population_size)},
        {"simulation.disable_boredom", bool_ref([](RunConfig& c) -> bool& { return c.flags.disable_boredom; })},
        {"simulation.disable_persistence", bool_ref([](RunConfig& c) -> bool& { return c.flags.disable_persistence; })},
        {"simulation.disable_learning", bool_ref([](RunConfig& c) -> bool& { return c.flags.disable_learning; })},
        {"simulation.disable_draw_noise", bool_ref([](RunConfig& c) -> bool& { return c.flags.disable_draw_noise; })},
        {"params.mean_skill", real_ref([](RunConfig& c) -> double& { return c.params.population.mean_skill; })},
        {"params.std_skill", real_ref([](RunConfig& c) -> double& { return c.params.population.std_skill; })},
        {"params.mean_persistence", real_ref([](RunConfig& c) -> double& { return c.params.population.mean_persistence; })},
        {"params.std_persistence", real_ref([](RunConfig& c) -> double& { return c.params.population.std_persistence; })},
        {"params.mean_boredom", real_ref([](RunConfig& c) -> double& { return c.params.population.mean_boredom; })},
        {"params.std_boredom", real_ref([](RunConfig& c) -> double& { return c.params.population.std_boredom; })},
        {"params.alpha", real_ref([](RunConfig& c) -> double& { return c.params.alpha; })},
        {"params.beta", real_ref([](RunConfig& c) -> double& { return c.params.beta; })},
        {"params.theta", real_ref([](RunConfig& c) -> double& { return c.params.theta; })},
        {"params.gamma", real_ref([](RunConfig& c) -> double& { return c.params.gamma; })},
        {"start.mean_skill", number_field(&RunConfig::start_skill)},
        {"start.mean_persistence", number_field(&RunConfig::start_persistence)},
        {"start.mean_boredom", number_field(&RunConfig::start_boredom)},
        {"start.scale", number_field(&RunConfig::start_scale)},
        {"optimizer.population_size", number_field(&RunConfig::cma_population)},
        {"optimizer.patience", number_field(&RunConfig::patience)},
        {"optimizer.max_evaluations", number_field(&RunConfig::max_evaluations)},
        {"optimizer.step_size", number_field(&RunConfig::step_size)},
        {"optimizer.tol_x", number_field(&RunConfig::tol_x)},
        {"optimizer.threads", number_field(&RunConfig::threads)},
        {"cv.folds", number_field(&RunConfig::folds)},
        {"cv.repeats", number_field(&RunConfig::repeats)},
        {"cv.scheme",
         {[](RunConfig& c, const std::string& v) {
              if (v == "contiguous") c.scheme = FoldScheme::contiguous;
              else if (v == "interleaved") c.scheme = FoldScheme::interleaved;
              else throw SchemaError("config key 'cv.scheme': expected contiguous or interleaved");
          },
          [](const RunConfig& c) { return std::string(to_string(c.scheme)); }}},
        {"regression.ridge", number_field(&RunConfig::ridge)},
        {"synth.levels", number_field(&RunConfig::synth_levels)},
        {"synth.episodes_per_level", number_field(&RunConfig::synth_episodes_per_level)},
    };
    return f;
}

} // namespace detail

inline void validate(const RunConfig& c)
{
    auto fail = [](const std::string& m) { throw SchemaError("config: " + m); };
    if (c.population_size < 1) fail("simulation.population_size must be >= 1");
    if (c.cma_population < 4) fail("optimizer.population_size must be >= 4");
    if (c.patience < 1 || c.max_evaluations < 1) fail("optimizer budgets must be positive");
    if (!(c.step_size > 0.0)) fail("optimizer.step_size must be > 0");
    if (!(c.start_scale > 0.0)) fail("start.scale must be > 0");
    if (c.folds < 2) fail("cv.folds must be >= 2");
    if (c.repeats < 1) fail("cv.repeats must be >= 1");
    if (!(c.ridge >= 0.0)) fail("regression.ridge must be >= 0");
    if (c.synth_levels < 1 || c.synth_episodes_per_level < 1) fail("synth sizes must be >= 1");
    try {
        churnsim::detail::validate(c.params);
    } catch (const InvalidArgument& e) {
        fail(std::string("params: ") + e.what());
    }
}

/// Parses config text on top of the defaults. Relative data paths are
/// resolved against `base_dir`.
inline RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {},
                              const std::string& name = "config")
{
    RunConfig cfg;
    std::string section;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = detail::trim(text.substr(start, end - start));
        start = end + 1;
        ++line_no;
        const std::string where = name + ":" + std::to_string(line_no) + ": ";
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = detail::trim(line.substr(0, hash));
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') throw SchemaError(where + "malformed section header");
            section = std::string(detail::trim(line.substr(1, line.size() - 2)));
        } else {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) throw SchemaError(where + "expected key = value");
            const std::string key = section + "." + std::string(detail::trim(line.substr(0, eq)));
            const std::string value(detail::trim(line.substr(eq + 1)));
            const auto it = detail::fields().find(key);
            if (it == detail::fields().end()) throw SchemaError(where + "unknown key '" + key + "'");
            try {
                it->second.set(cfg, value);
            } catch (const SchemaError& e) {
                throw SchemaError(where + "key '" + key + "': invalid value '" + value + "'");
            }
        }
        if (end == text.size()) break;
    }
    for (auto* p : {&cfg.episodes, &cfg.levels, &cfg.difficulties})
        if (!p->empty() && p->is_relative() && !base_dir.empty()) *p = base_dir / *p;
    validate(cfg);
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path)
{
    const std::string text = load_text(path);
    return parse_config(text, path.parent_path(), path.filename().string());
}

/// Canonical `section.key = value` listing of every setting that can affect
/// results, sorted by key. Data paths are reduced to file names and the output
/// directory is left out, so the text does not depend on where the run happens.
inline std::string canonical_config(const RunConfig& c)
{
    std::string out;
    for (const auto& [key, field] : detail::fields()) {
        if (key == "output.dir") continue;
        std::string v = field.get(c);
        if (key.starts_with("data."))
            v = std::filesystem::path(v).filename().generic_string();
        out += key + " = " + v + "\n";
    }
    return out;
}

/// FNV-1a 64 of the canonical listing, as 16 hex digits.
inline std::string config_hash(const RunConfig& c)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical_config(c)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace churnsim::io
