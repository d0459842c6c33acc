#pragma once

// Baseline difficulty model: per-level AI gameplay statistics, a least-squares
// pass-rate regressor on them, and the min-max difficulty normalization.

#include <churnsim/error.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace churnsim {

struct EpisodeLog {
    int level_id = 1;
    int episode_id = 0;
    double cleared_goals_frac = 0.0; ///< fraction of goals cleared within the human move budget
    int moves_used = 0;
    int moves_budget_human = 0;
    bool passed_with_human_budget = false;
    std::optional<int> moves_left_on_pass; ///< present iff passed_with_human_budget

    friend bool operator==(const EpisodeLog&, const EpisodeLog&) = default;
};

inline constexpr std::size_t kNumFeatures = 16;

/// Feature order:
///  0-8   cleared goals: mean, std, min, max, p5, p10, p25, p50, p75
///  9-13  moves left on pass: mean, std, p5, p10, p20 (all 0 if nothing passed)
///  14-15 AI pass rate at human budget: mean, std
using LevelFeatures = std::array<double, kNumFeatures>;

inline const std::array<const char*, kNumFeatures>& feature_names()
{
    static const std::array<const char*, kNumFeatures> names = {
        "cleared_mean", "cleared_std", "cleared_min", "cleared_max", "cleared_p5",
        "cleared_p10", "cleared_p25", "cleared_p50", "cleared_p75", "moves_left_mean",
        "moves_left_std", "moves_left_p5", "moves_left_p10", "moves_left_p20",
        "ai_pass_mean", "ai_pass_std"};
    return names;
}

struct RegressionModel {
    std::array<double, kNumFeatures> weights{};
    double bias = 0.0;
};

struct RegressionOptions {
    double ridge = 1e-8; ///< added to the weight block only, never the bias
};

namespace stats {

inline double mean(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Population variance (divisor N).
inline double variance(std::span<const double> v)
{
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

inline double stddev(std::span<const double> v) { return std::sqrt(variance(v)); }

/// Linear interpolation at fractional rank p/100 * (n-1). `sorted` must be ascending.
inline double percentile(std::span<const double> sorted, double p)
{
    const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

} // namespace stats

inline void validate_episode(const EpisodeLog& e)
{
    using detail::require;
    require(e.level_id >= 1, "episode level_id must be >= 1");
    require(std::isfinite(e.cleared_goals_frac) && e.cleared_goals_frac >= 0.0 &&
                e.cleared_goals_frac <= 1.0,
            "cleared_goals_frac must be in [0,1]");
    require(e.moves_left_on_pass.has_value() == e.passed_with_human_budget,
            "moves_left_on_pass must be present exactly when the episode passed");
    require(!e.moves_left_on_pass || *e.moves_left_on_pass >= 0,
            "moves_left_on_pass must be >= 0");
}

inline LevelFeatures aggregate_features(std::span<const EpisodeLog> episodes)
{
    detail::require(!episodes.empty(), "aggregate_features needs at least one episode");
    const int level = episodes.front().level_id;

    std::vector<double> cleared;
    std::vector<double> moves_left;
    std::vector<double> passed;
    cleared.reserve(episodes.size());
    passed.reserve(episodes.size());
    for (const EpisodeLog& e : episodes) {
        detail::require(e.level_id == level, "aggregate_features got mixed level ids");
        validate_episode(e);
        cleared.push_back(e.cleared_goals_frac);
        passed.push_back(e.passed_with_human_budget ? 1.0 : 0.0);
        if (e.moves_left_on_pass) moves_left.push_back(static_cast<double>(*e.moves_left_on_pass));
    }
    std::sort(cleared.begin(), cleared.end());
    std::sort(moves_left.begin(), moves_left.end());

    LevelFeatures f{};
    f[0] = stats::mean(cleared);
    f[1] = stats::stddev(cleared);
    f[2] = cleared.front();
    f[3] = cleared.back();
    f[4] = stats::percentile(cleared, 5);
    f[5] = stats::percentile(cleared, 10);
    f[6] = stats::percentile(cleared, 25);
    f[7] = stats::percentile(cleared, 50);
    f[8] = stats::percentile(cleared, 75);
    if (!moves_left.empty()) {
        f[9] = stats::mean(moves_left);
        f[10] = stats::stddev(moves_left);
        f[11] = stats::percentile(moves_left, 5);
        f[12] = stats::percentile(moves_left, 10);
        f[13] = stats::percentile(moves_left, 20);
    }
    f[14] = stats::mean(passed);
    f[15] = stats::stddev(passed);
    return f;
}

/// Least squares with intercept. Columns are centred so the bias is never
/// shrunk; the weights are solved from the ridge-augmented system
/// [Xc; sqrt(ridge) I] w = [yc; 0] by column-pivoted QR.
inline RegressionModel fit_regression(std::span<const LevelFeatures> features,
                                      std::span<const double> targets,
                                      const RegressionOptions& opt = {})
{
    using detail::require;
    require(!features.empty(), "fit_regression needs at least one row");
    require(features.size() == targets.size(), "fit_regression: features/targets length mismatch");
    require(std::isfinite(opt.ridge) && opt.ridge >= 0.0, "ridge must be finite and >= 0");

    const auto n = static_cast<Eigen::Index>(features.size());
    constexpr auto p = static_cast<Eigen::Index>(kNumFeatures);

    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const double v = features[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            require(std::isfinite(v), "fit_regression: non-finite feature");
            x(i, j) = v;
        }
        y(i) = targets[static_cast<std::size_t>(i)];
        require(std::isfinite(y(i)), "fit_regression: non-finite target");
    }

    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    const double y_mean = y.mean();
    Eigen::MatrixXd a(n + p, p);
    a.topRows(n) = x.rowwise() - x_mean;
    a.bottomRows(p) = std::sqrt(opt.ridge) * Eigen::MatrixXd::Identity(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + p);
    rhs.head(n) = y.array() - y_mean;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::VectorXd w;
    if (qr.rank() == p) {
        w = qr.solve(rhs);
    } else {
        // Without ridge a rank-deficient design has no unique solution; take the minimum-norm one.
        w = a.completeOrthogonalDecomposition().solve(rhs);
    }

    RegressionModel m;
    for (Eigen::Index j = 0; j < p; ++j) m.weights[static_cast<std::size_t>(j)] = w(j);
    m.bias = y_mean - x_mean.dot(w);
    return m;
}

inline double predict_one(const RegressionModel& model, const LevelFeatures& f)
{
    double acc = model.bias;
    for (std::size_t j = 0; j < kNumFeatures; ++j) acc += model.weights[j] * f[j];
    return acc;
}

/// Raw affine predictions, not clamped.
inline std::vector<double> predict_level_pass_rates(const RegressionModel& model,
                                                    std::span<const LevelFeatures> features)
{
    std::vector<double> out;
    out.reserve(features.size());
    for (const LevelFeatures& f : features) out.push_back(predict_one(model, f));
    return out;
}

/// Overload for callers holding dynamically sized rows (e.g. parsed input).
inline std::vector<double> predict_level_pass_rates(const RegressionModel& model,
                                                    std::span<const std::vector<double>> rows)
{
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        detail::require(r.size() == kNumFeatures,
                        "feature row has " + std::to_string(r.size()) + " entries, expected 16");
        LevelFeatures f{};
        std::copy(r.begin(), r.end(), f.begin());
        out.push_back(predict_one(model, f));
    }
    return out;
}

/// Clamped to [0,1] for reporting as a pass-rate estimate.
inline std::vector<double> pass_rate_estimates(std::span<const double> raw)
{
    std::vector<double> out(raw.begin(), raw.end());
    for (double& v : out) v = std::clamp(v, 0.0, 1.0);
    return out;
}

/// Difficulty from baseline predictions: min-max of the negated values over
/// all supplied levels. A constant input maps every level to 0.5.
inline std::vector<double> normalize_difficulty(std::span<const double> predictions)
{
    detail::require(!predictions.empty(), "normalize_difficulty needs at least one level");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double v : predictions) {
        detail::require(std::isfinite(v), "normalize_difficulty: non-finite prediction");
        lo = std::min(lo, -v);
        hi = std::max(hi, -v);
    }
    std::vector<double> out;
    out.reserve(predictions.size());
    const double span = hi - lo;
    for (double v : predictions)
        out.push_back(span > 0.0 ? std::clamp((-v - lo) / span, 0.0, 1.0) : 0.5);
    return out;
}

} // namespace churnsim
