#include <churnsim/synthetic.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace churnsim;

namespace {

std::vector<double> ranks(const std::vector<double>& v)
{
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j);
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b)
{
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double ma = stats::mean(ra);
    const double mb = stats::mean(rb);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

TruthSpec default_spec(std::uint64_t seed, std::size_t levels = 168)
{
    TruthSpec s;
    s.true_params = default_true_params();
    s.level_difficulties = default_difficulty_curve(levels, seed);
    s.seed = seed;
    return s;
}

} // namespace

TEST(Truth, DefaultSpecIsUsable)
{
    const TruthRun run = generate_truth_run(default_spec(1));
    ASSERT_EQ(run.series.size(), 168u);
    EXPECT_NO_THROW(validate(run.series));
    EXPECT_EQ(run.series.role, SeriesRole::truth);
    EXPECT_EQ(run.series.levels.front().level_id, 1);
    EXPECT_EQ(run.series.levels.back().level_id, 168);
    EXPECT_GT(stats::variance(run.series.churn_rates()), 0.0);
    EXPECT_GT(stats::variance(run.series.pass_rates()), 0.0);
    EXPECT_EQ(run.stats.size(), 168u);
}

TEST(Truth, DeterministicPerSeed)
{
    const LevelSeries a = generate_truth(default_spec(5, 40));
    const LevelSeries b = generate_truth(default_spec(5, 40));
    EXPECT_EQ(a.pass_rates(), b.pass_rates());
    EXPECT_EQ(a.churn_rates(), b.churn_rates());

    TruthSpec other = default_spec(5, 40);
    other.seed = 6;
    EXPECT_NE(generate_truth(other).pass_rates(), a.pass_rates());
}

TEST(Truth, DepletingSpecIsRejected)
{
    TruthSpec s = default_spec(1, 10);
    s.true_params.population.mean_boredom = 5.0;
    s.true_params.population.std_boredom = 0.1;
    EXPECT_THROW(generate_truth(s), DegenerateData);
}

TEST(Truth, InvalidSpecIsRejected)
{
    TruthSpec s = default_spec(1, 10);
    s.level_difficulties[3] = 1.5;
    EXPECT_THROW(generate_truth(s), InvalidArgument);
    TruthSpec empty = default_spec(1, 10);
    empty.n_players = 0;
    EXPECT_THROW(generate_truth(empty), InvalidArgument);
}

TEST(Truth, SingleLevelMatchesClosedForm)
{
    // Churn on the first failure, never bored, no learning: the first level
    // passes with probability P(s >= d), s ~ N(mean, sqrt(std^2 + alpha^2)).
    TruthSpec s;
    s.true_params.population = {0.5, 0.15, -1.0, 0.0, -5.0, 0.0};
    s.true_params.alpha = 0.1;
    s.n_players = 2000;
    for (double d : {0.3, 0.5, 0.65}) {
        s.level_difficulties = {d};
        const double sd = std::sqrt(0.15 * 0.15 + 0.1 * 0.1);
        const double p = 0.5 * std::erfc((d - 0.5) / sd / std::sqrt(2.0));
        const double tol = 4.0 * std::sqrt(p * (1.0 - p) / 2000.0);
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            s.seed = seed;
            const LevelSeries t = generate_truth(s);
            EXPECT_NEAR(t.levels[0].pass_rate, p, tol) << "d=" << d;
            EXPECT_NEAR(t.levels[0].churn_rate, 1.0 - t.levels[0].pass_rate, 1e-12);
        }
    }
}

TEST(Truth, DifficultyCurveStaysInRange)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto d = default_difficulty_curve(168, seed);
        ASSERT_EQ(d.size(), 168u);
        for (double v : d) {
            EXPECT_GE(v, 0.02);
            EXPECT_LE(v, 0.98);
        }
    }
    EXPECT_EQ(default_difficulty_curve(50, 3), default_difficulty_curve(50, 3));
}

TEST(Episodes, CountsAndIds)
{
    const std::vector<double> d = {0.1, 0.5, 0.9};
    const auto eps = generate_episode_logs(d, 7, 2);
    ASSERT_EQ(eps.size(), 21u);
    for (std::size_t i = 0; i < eps.size(); ++i) {
        EXPECT_EQ(eps[i].level_id, static_cast<int>(i / 7 + 1));
        EXPECT_EQ(eps[i].episode_id, static_cast<int>(i % 7 + 1));
        EXPECT_NO_THROW(validate_episode(eps[i]));
    }
    std::vector<int> ids;
    const auto f = features_by_level(eps, &ids);
    EXPECT_EQ(f.size(), 3u);
    EXPECT_EQ(ids, (std::vector<int>{1, 2, 3}));
    EXPECT_THROW(generate_episode_logs(d, 0, 2), InvalidArgument);
}

TEST(Episodes, BudgetExamples)
{
    EXPECT_EQ(human_move_budget(1), 27);
    EXPECT_EQ(human_move_budget(2), 23);
    EXPECT_EQ(human_move_budget(11), 20);
}

TEST(Episodes, ZeroDifficultyAlwaysPasses)
{
    for (int e = 1; e <= 20; ++e) {
        const EpisodeLog log = generate_episode(0.0, 4, e, 9);
        const int b = human_move_budget(4);
        EXPECT_TRUE(log.passed_with_human_budget);
        EXPECT_EQ(log.cleared_goals_frac, 1.0);
        ASSERT_TRUE(log.moves_left_on_pass.has_value());
        EXPECT_EQ(*log.moves_left_on_pass, static_cast<int>(std::floor(b * 0.15 / 1.15)));
        EXPECT_EQ(log.moves_used + *log.moves_left_on_pass, b);
    }
}

TEST(Episodes, InternalConsistency)
{
    const auto d = default_difficulty_curve(60, 4);
    for (const EpisodeLog& e : generate_episode_logs(d, 25, 4)) {
        EXPECT_GE(e.cleared_goals_frac, 0.0);
        EXPECT_LE(e.cleared_goals_frac, 1.0);
        EXPECT_EQ(e.moves_budget_human, human_move_budget(e.level_id));
        if (e.passed_with_human_budget) {
            EXPECT_EQ(e.cleared_goals_frac, 1.0);
            EXPECT_GE(*e.moves_left_on_pass, 0);
            EXPECT_LE(*e.moves_left_on_pass, e.moves_budget_human - 1);
            EXPECT_GE(e.moves_used, 1);
        } else {
            EXPECT_LT(e.cleared_goals_frac, 1.0);
            EXPECT_EQ(e.moves_used, e.moves_budget_human);
        }
    }
}

TEST(Episodes, FeaturesTrackDifficulty)
{
    const auto d = default_difficulty_curve(168, 1);
    const auto f = features_by_level(generate_episode_logs(d, 30, 1));
    std::vector<double> cleared;
    for (const auto& row : f) cleared.push_back(row[0]);
    EXPECT_LE(spearman(d, cleared), -0.9);
}

TEST(Episodes, FeaturesByLevelIgnoresOrder)
{
    const std::vector<double> d = {0.2, 0.4};
    auto eps = generate_episode_logs(d, 10, 3);
    const auto ref = features_by_level(eps);
    std::reverse(eps.begin(), eps.end());
    const auto f = features_by_level(eps);
    for (std::size_t l = 0; l < 2; ++l)
        for (std::size_t j = 0; j < kNumFeatures; ++j) EXPECT_NEAR(f[l][j], ref[l][j], 1e-12);
}
