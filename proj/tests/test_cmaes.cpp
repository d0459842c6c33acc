#include <churnsim/cmaes.hpp>

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

using namespace churnsim;

namespace {

double sphere(std::span<const double> x)
{
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

double rosenbrock(std::span<const double> x)
{
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
        s += 100.0 * std::pow(x[i + 1] - x[i] * x[i], 2) + std::pow(1.0 - x[i], 2);
    return s;
}

OptimizerConfig config(std::size_t lambda, std::size_t max_evals, std::uint64_t seed = 1)
{
    OptimizerConfig c;
    c.population_size = lambda;
    c.max_evaluations = max_evals;
    c.no_improvement_generations = 1000;
    c.seed = seed;
    c.tol_x = 0.0;
    return c;
}

} // namespace

TEST(Minimize, Sphere10D)
{
    const std::vector<double> x0(10, 1.0);
    const OptResult r = minimize(sphere, x0, config(10, 20000));
    EXPECT_LT(r.best_value, 1e-10);
    EXPECT_LE(r.evaluations, 20000u);
}

TEST(Minimize, Rosenbrock5D)
{
    const std::vector<double> x0(5, 0.0);
    const OptResult r = minimize(rosenbrock, x0, config(8, 50000));
    EXPECT_LT(r.best_value, 1e-8);
    for (double v : r.best_x) EXPECT_NEAR(v, 1.0, 1e-3);
}

TEST(Minimize, OneDimensionalAgreesWithGridSearch)
{
    auto f = [](std::span<const double> x) { return (x[0] - 3.0) * (x[0] - 3.0) + 0.5; };
    double grid_best = std::numeric_limits<double>::infinity();
    double grid_x = 0.0;
    for (int i = -10000; i <= 10000; ++i) {
        const double x = i * 1e-3;
        const double v = f(std::span<const double>(&x, 1));
        if (v < grid_best) {
            grid_best = v;
            grid_x = x;
        }
    }
    const std::vector<double> x0 = {-4.0};
    const OptResult r = minimize(f, x0, config(6, 3000));
    EXPECT_NEAR(r.best_x[0], grid_x, 1e-3);
    EXPECT_LE(r.best_value, grid_best + 1e-9);
}

TEST(Minimize, DeterministicAndThreadIndependent)
{
    const std::vector<double> x0(4, 0.5);
    OptimizerConfig c = config(12, 2000, 42);
    const OptResult a = minimize(rosenbrock, x0, c);
    const OptResult b = minimize(rosenbrock, x0, c);
    c.threads = 4;
    const OptResult t = minimize(rosenbrock, x0, c);
    EXPECT_EQ(a.best_x, b.best_x);
    EXPECT_EQ(a.best_history, b.best_history);
    EXPECT_EQ(a.best_x, t.best_x);
    EXPECT_EQ(a.best_history, t.best_history);

    c.threads = 1;
    c.seed = 43;
    EXPECT_NE(minimize(rosenbrock, x0, c).best_history, a.best_history);
}

TEST(Minimize, BestHistoryIsMonotoneAndNeverWorseThanStart)
{
    const std::vector<double> x0(3, 2.0);
    const OptResult r = minimize(rosenbrock, x0, config(8, 800));
    EXPECT_LE(r.best_value, rosenbrock(x0));
    ASSERT_EQ(r.best_history.size(), r.generations);
    for (std::size_t i = 1; i < r.best_history.size(); ++i)
        EXPECT_LE(r.best_history[i], r.best_history[i - 1]);
    EXPECT_EQ(r.best_history.back(), r.best_value);
    EXPECT_EQ(rosenbrock(r.best_x), r.best_value);
}

TEST(Minimize, StartPointWinsWhenNothingBeatsIt)
{
    // Every point other than the start is worse.
    const std::vector<double> x0 = {0.25, -0.5};
    auto f = [&](std::span<const double> x) {
        return (x[0] == x0[0] && x[1] == x0[1]) ? 0.0 : 1.0 + sphere(x);
    };
    OptimizerConfig c = config(6, 10000);
    c.no_improvement_generations = 5;
    const OptResult r = minimize(f, x0, c);
    EXPECT_EQ(r.best_x, x0);
    EXPECT_EQ(r.best_value, 0.0);
    EXPECT_EQ(r.reason, Termination::no_improvement);
    EXPECT_EQ(r.generations, 5u);
}

TEST(Minimize, BudgetTermination)
{
    const std::vector<double> x0(3, 1.0);
    const OptResult r = minimize(sphere, x0, config(10, 1 + 3 * 10 + 5));
    EXPECT_EQ(r.reason, Termination::budget);
    EXPECT_EQ(r.generations, 3u);
    EXPECT_EQ(r.evaluations, 31u);
}

TEST(Minimize, ToleranceTermination)
{
    const std::vector<double> x0(3, 1.0);
    OptimizerConfig c = config(10, 100000);
    c.tol_x = 1e-6;
    const OptResult r = minimize(sphere, x0, c);
    EXPECT_EQ(r.reason, Termination::tolerance);
    EXPECT_LT(r.best_value, 1e-9);
}

TEST(Minimize, ConstantObjectiveStopsOnPatience)
{
    const std::vector<double> x0(2, 0.0);
    OptimizerConfig c = config(8, 100000);
    c.no_improvement_generations = 7;
    const OptResult r = minimize([](std::span<const double>) { return 1.0; }, x0, c);
    EXPECT_EQ(r.reason, Termination::no_improvement);
    EXPECT_EQ(r.generations, 7u);
    EXPECT_EQ(r.best_x, x0);
}

TEST(Minimize, InvalidArguments)
{
    const OptimizerConfig c = config(8, 100);
    EXPECT_THROW(minimize(sphere, std::vector<double>{}, c), InvalidArgument);
    EXPECT_THROW(minimize(sphere, std::vector<double>{std::nan("")}, c), InvalidArgument);
    OptimizerConfig small = c;
    small.population_size = 3;
    EXPECT_THROW(minimize(sphere, std::vector<double>{1.0}, small), InvalidArgument);
    OptimizerConfig bad_step = c;
    bad_step.initial_step_size = 0.0;
    EXPECT_THROW(minimize(sphere, std::vector<double>{1.0}, bad_step), InvalidArgument);
}

TEST(Minimize, ObjectiveFailuresAbortWithContext)
{
    const std::vector<double> x0(2, 0.0);
    std::atomic<int> calls{0};
    auto throws = [&](std::span<const double>) -> double {
        if (++calls > 3) throw std::runtime_error("boom");
        return 1.0;
    };
    try {
        minimize(throws, x0, config(8, 1000));
        FAIL() << "expected OptimizationAborted";
    } catch (const OptimizationAborted& e) {
        EXPECT_NE(std::string(e.what()).find("generation 1"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
    }
    auto nan = [](std::span<const double> x) { return x[0] > 0.0 ? std::nan("") : 0.0; };
    EXPECT_THROW(minimize(nan, x0, config(8, 1000)), OptimizationAborted);
}

TEST(Termination, Names)
{
    EXPECT_STREQ(to_string(Termination::no_improvement), "no-improvement");
    EXPECT_STREQ(to_string(Termination::budget), "budget");
    EXPECT_STREQ(to_string(Termination::tolerance), "tolerance");
}
