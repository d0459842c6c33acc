#include <churnsim/difficulty.hpp>
#include <churnsim/rng.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace churnsim;

namespace {

EpisodeLog episode(double cleared, std::optional<int> moves_left)
{
    EpisodeLog e;
    e.level_id = 3;
    e.cleared_goals_frac = cleared;
    e.moves_budget_human = 20;
    e.moves_used = moves_left ? 20 - *moves_left : 20;
    e.passed_with_human_budget = moves_left.has_value();
    e.moves_left_on_pass = moves_left;
    return e;
}

// Normal equations of [1 X] solved by Gauss-Jordan with partial pivoting in
// long double. Returns {bias, w0..w15}.
std::vector<long double> normal_equation_oracle(const std::vector<LevelFeatures>& x,
                                                const std::vector<double>& y)
{
    constexpr std::size_t p = kNumFeatures + 1;
    std::vector<std::vector<long double>> a(p, std::vector<long double>(p + 1, 0.0L));
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::array<long double, p> row{};
        row[0] = 1.0L;
        for (std::size_t j = 0; j < kNumFeatures; ++j) row[j + 1] = x[i][j];
        for (std::size_t r = 0; r < p; ++r) {
            for (std::size_t c = 0; c < p; ++c) a[r][c] += row[r] * row[c];
            a[r][p] += row[r] * y[i];
        }
    }
    for (std::size_t c = 0; c < p; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < p; ++r)
            if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == c) continue;
            const long double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k <= p; ++k) a[r][k] -= f * a[c][k];
        }
    }
    std::vector<long double> sol(p);
    for (std::size_t r = 0; r < p; ++r) sol[r] = a[r][p] / a[r][r];
    return sol;
}

std::vector<LevelFeatures> random_design(std::size_t n, std::uint64_t seed)
{
    SplitMix64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<LevelFeatures> x(n);
    for (auto& row : x)
        for (double& v : row) v = u(gen);
    return x;
}

} // namespace

TEST(Percentile, LinearInterpolation)
{
    const std::vector<double> v = {1.0, 2.0, 3.0, 4.0, 5.0};
    EXPECT_DOUBLE_EQ(stats::percentile(v, 0), 1.0);
    EXPECT_DOUBLE_EQ(stats::percentile(v, 50), 3.0);
    EXPECT_DOUBLE_EQ(stats::percentile(v, 100), 5.0);
    EXPECT_DOUBLE_EQ(stats::percentile(v, 10), 1.4);
    EXPECT_DOUBLE_EQ(stats::percentile(v, 75), 4.0);
    const std::vector<double> one = {7.0};
    EXPECT_DOUBLE_EQ(stats::percentile(one, 20), 7.0);
}

TEST(AggregateFeatures, HandComputedExample)
{
    const std::vector<EpisodeLog> eps = {episode(0.2, std::nullopt), episode(0.4, std::nullopt),
                                         episode(1.0, 3), episode(1.0, 7)};
    const LevelFeatures f = aggregate_features(eps);
    // cleared = {0.2, 0.4, 1.0, 1.0}
    EXPECT_DOUBLE_EQ(f[0], 0.65);
    EXPECT_NEAR(f[1], std::sqrt(0.1275), 1e-15);
    EXPECT_DOUBLE_EQ(f[2], 0.2);
    EXPECT_DOUBLE_EQ(f[3], 1.0);
    EXPECT_NEAR(f[4], 0.23, 1e-15);
    EXPECT_NEAR(f[5], 0.26, 1e-15);
    EXPECT_NEAR(f[6], 0.35, 1e-15);
    EXPECT_NEAR(f[7], 0.7, 1e-15);
    EXPECT_NEAR(f[8], 1.0, 1e-15);
    // moves left = {3, 7}
    EXPECT_DOUBLE_EQ(f[9], 5.0);
    EXPECT_DOUBLE_EQ(f[10], 2.0);
    EXPECT_NEAR(f[11], 3.2, 1e-14);
    EXPECT_NEAR(f[12], 3.4, 1e-14);
    EXPECT_NEAR(f[13], 3.8, 1e-14);
    EXPECT_DOUBLE_EQ(f[14], 0.5);
    EXPECT_DOUBLE_EQ(f[15], 0.5);
}

TEST(AggregateFeatures, NoPassesImputesZeroMovesLeft)
{
    const std::vector<EpisodeLog> eps = {episode(0.3, std::nullopt), episode(0.5, std::nullopt)};
    const LevelFeatures f = aggregate_features(eps);
    for (std::size_t j = 9; j <= 15; ++j) EXPECT_EQ(f[j], 0.0) << feature_names()[j];
    EXPECT_DOUBLE_EQ(f[0], 0.4);
}

TEST(AggregateFeatures, PermutationInvariant)
{
    SplitMix64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<EpisodeLog> eps;
    for (int i = 0; i < 40; ++i) {
        const bool pass = u(gen) < 0.6;
        eps.push_back(episode(pass ? 1.0 : u(gen), pass ? std::optional<int>(static_cast<int>(10 * u(gen)))
                                                        : std::nullopt));
    }
    const LevelFeatures ref = aggregate_features(eps);
    for (int t = 0; t < 10; ++t) {
        std::shuffle(eps.begin(), eps.end(), gen);
        const LevelFeatures f = aggregate_features(eps);
        for (std::size_t j = 0; j < kNumFeatures; ++j) EXPECT_NEAR(f[j], ref[j], 1e-12);
    }
}

TEST(AggregateFeatures, RejectsBadInput)
{
    EXPECT_THROW(aggregate_features(std::vector<EpisodeLog>{}), InvalidArgument);
    EpisodeLog bad = episode(1.2, std::nullopt);
    EXPECT_THROW(aggregate_features(std::vector<EpisodeLog>{bad}), InvalidArgument);
    EpisodeLog inconsistent = episode(1.0, 3);
    inconsistent.moves_left_on_pass.reset();
    EXPECT_THROW(aggregate_features(std::vector<EpisodeLog>{inconsistent}), InvalidArgument);
    EpisodeLog other = episode(0.5, std::nullopt);
    other.level_id = 4;
    EXPECT_THROW(aggregate_features(std::vector<EpisodeLog>{episode(0.5, std::nullopt), other}),
                 InvalidArgument);
}

TEST(FitRegression, MatchesNormalEquationOracle)
{
    const auto x = random_design(120, 11);
    SplitMix64 gen(12);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<double> y;
    for (const auto& row : x) {
        double v = 0.3;
        for (std::size_t j = 0; j < kNumFeatures; ++j) v += 0.05 * static_cast<double>(j) * row[j];
        y.push_back(v + noise(gen));
    }
    const RegressionModel m = fit_regression(x, y, {.ridge = 0.0});
    const auto ref = normal_equation_oracle(x, y);
    EXPECT_NEAR(m.bias, static_cast<double>(ref[0]), 1e-10);
    for (std::size_t j = 0; j < kNumFeatures; ++j)
        EXPECT_NEAR(m.weights[j], static_cast<double>(ref[j + 1]), 1e-10);

    // The default ridge barely moves a well-conditioned fit.
    const RegressionModel r = fit_regression(x, y);
    for (std::size_t j = 0; j < kNumFeatures; ++j)
        EXPECT_NEAR(r.weights[j], static_cast<double>(ref[j + 1]), 1e-7);
}

TEST(FitRegression, ExactRecoveryAndZeroTrainingError)
{
    const auto x = random_design(60, 5);
    std::vector<double> y;
    for (const auto& row : x) {
        double v = -0.7;
        for (std::size_t j = 0; j < kNumFeatures; ++j) v += (j % 2 ? 1.0 : -0.5) * row[j];
        y.push_back(v);
    }
    const RegressionModel m = fit_regression(x, y, {.ridge = 0.0});
    EXPECT_NEAR(m.bias, -0.7, 1e-10);
    for (std::size_t j = 0; j < kNumFeatures; ++j) EXPECT_NEAR(m.weights[j], j % 2 ? 1.0 : -0.5, 1e-10);
    const auto pred = predict_level_pass_rates(m, x);
    double mse = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) mse += (pred[i] - y[i]) * (pred[i] - y[i]);
    EXPECT_LT(mse / static_cast<double>(y.size()), 1e-20);
}

TEST(FitRegression, ResidualsOrthogonalToDesign)
{
    const auto x = random_design(80, 21);
    SplitMix64 gen(22);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> y(x.size());
    for (double& v : y) v = u(gen);
    const RegressionModel m = fit_regression(x, y, {.ridge = 0.0});
    const auto pred = predict_level_pass_rates(m, x);
    double sum_r = 0.0;
    std::array<double, kNumFeatures> dot{};
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - pred[i];
        sum_r += r;
        for (std::size_t j = 0; j < kNumFeatures; ++j) dot[j] += r * x[i][j];
    }
    EXPECT_NEAR(sum_r, 0.0, 1e-10);
    for (double d : dot) EXPECT_NEAR(d, 0.0, 1e-10);
}

TEST(FitRegression, ConstantTargetGivesZeroWeights)
{
    const auto x = random_design(40, 8);
    const std::vector<double> y(x.size(), 0.42);
    const RegressionModel m = fit_regression(x, y);
    EXPECT_NEAR(m.bias, 0.42, 1e-12);
    for (double w : m.weights) EXPECT_NEAR(w, 0.0, 1e-12);
}

TEST(FitRegression, RankDeficientDesignStillFits)
{
    // Constant columns (e.g. moves-left features when nothing passes) and a
    // duplicated column.
    auto x = random_design(30, 9);
    for (auto& row : x) {
        for (std::size_t j = 9; j < 14; ++j) row[j] = 0.0;
        row[1] = row[0];
    }
    std::vector<double> y;
    for (const auto& row : x) y.push_back(0.1 + row[0] + 0.5 * row[2]);
    for (double ridge : {0.0, 1e-8}) {
        const RegressionModel m = fit_regression(x, y, {.ridge = ridge});
        const auto pred = predict_level_pass_rates(m, x);
        for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(pred[i], y[i], 1e-6);
        EXPECT_NEAR(m.weights[0], m.weights[1], 1e-6);
    }
}

TEST(FitRegression, Errors)
{
    const auto x = random_design(5, 1);
    EXPECT_THROW(fit_regression(x, std::vector<double>(4, 0.0)), InvalidArgument);
    EXPECT_THROW(fit_regression(std::vector<LevelFeatures>{}, std::vector<double>{}), InvalidArgument);
    EXPECT_THROW(fit_regression(x, std::vector<double>(5, 0.0), {.ridge = -1.0}), InvalidArgument);
    std::vector<double> y(5, 0.0);
    y[2] = std::nan("");
    EXPECT_THROW(fit_regression(x, y), InvalidArgument);
}

TEST(Predict, AgreesWithDotProduct)
{
    RegressionModel m;
    m.bias = 0.25;
    for (std::size_t j = 0; j < kNumFeatures; ++j) m.weights[j] = 0.01 * static_cast<double>(j + 1);
    const auto x = random_design(10, 4);
    const auto pred = predict_level_pass_rates(m, x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        long double ref = 0.25L;
        for (std::size_t j = 0; j < kNumFeatures; ++j)
            ref += static_cast<long double>(m.weights[j]) * x[i][j];
        EXPECT_NEAR(pred[i], static_cast<double>(ref), 1e-14);
    }

    std::vector<std::vector<double>> rows;
    for (const auto& r : x) rows.emplace_back(r.begin(), r.end());
    EXPECT_EQ(predict_level_pass_rates(m, std::span<const std::vector<double>>(rows)), pred);
    rows[3].pop_back();
    EXPECT_THROW(predict_level_pass_rates(m, std::span<const std::vector<double>>(rows)),
                 InvalidArgument);
}

TEST(Predict, EstimatesAreClamped)
{
    const std::vector<double> raw = {-0.2, 0.5, 1.3};
    EXPECT_EQ(pass_rate_estimates(raw), (std::vector<double>{0.0, 0.5, 1.0}));
}

TEST(NormalizeDifficulty, Examples)
{
    const std::vector<double> p = {0.9, 0.5, 0.1};
    const auto d = normalize_difficulty(p);
    EXPECT_DOUBLE_EQ(d[0], 0.0);
    EXPECT_DOUBLE_EQ(d[1], 0.5);
    EXPECT_DOUBLE_EQ(d[2], 1.0);
    EXPECT_EQ(normalize_difficulty(std::vector<double>{0.3, 0.3}), (std::vector<double>{0.5, 0.5}));
    EXPECT_THROW(normalize_difficulty(std::vector<double>{}), InvalidArgument);
}

TEST(NormalizeDifficulty, RangeAndOrderReversal)
{
    SplitMix64 gen(31);
    std::uniform_real_distribution<double> u(-0.5, 1.5);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> p(2 + t);
        for (double& v : p) v = u(gen);
        const auto d = normalize_difficulty(p);
        EXPECT_DOUBLE_EQ(*std::min_element(d.begin(), d.end()), 0.0);
        EXPECT_DOUBLE_EQ(*std::max_element(d.begin(), d.end()), 1.0);
        for (std::size_t i = 0; i + 1 < p.size(); ++i)
            if (p[i] < p[i + 1]) {
                EXPECT_GE(d[i], d[i + 1]);
            }
    }
}
