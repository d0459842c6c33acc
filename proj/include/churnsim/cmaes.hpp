#pragma once

// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation, rank-one and
// rank-mu covariance updates. Parameter settings follow Hansen's tutorial
// ("The CMA Evolution Strategy: A Tutorial", 2016), positive weights only.

#include <churnsim/error.hpp>
#include <churnsim/rng.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace churnsim {

struct OptimizerConfig {
    std::size_t population_size = 120;          ///< lambda
    std::size_t no_improvement_generations = 100;
    std::size_t max_evaluations = 1'000'000;
    double initial_step_size = 0.3;
    std::uint64_t seed = 1;
    /// Stop once sigma * max_i sqrt(C_ii) falls below this. 0 disables.
    double tol_x = 1e-12;
    /// Worker threads for candidate evaluation; results are reduced in index order.
    unsigned threads = 1;
};

enum class Termination { no_improvement, budget, tolerance };

inline const char* to_string(Termination t)
{
    switch (t) {
    case Termination::no_improvement: return "no-improvement";
    case Termination::budget: return "budget";
    case Termination::tolerance: return "tolerance";
    }
    return "?";
}

struct OptResult {
    std::vector<double> best_x;
    double best_value = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
    std::size_t generations = 0;
    Termination reason = Termination::budget;
    std::vector<double> best_history; ///< best-ever value after each generation
};

using Objective = std::function<double(std::span<const double>)>;

/// Raised when the objective throws or returns a non-finite value.
class OptimizationAborted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void evaluate_batch(const Objective& f, const std::vector<Eigen::VectorXd>& xs,
                           std::vector<double>& out, unsigned threads, std::size_t generation)
{
    const std::size_t n = xs.size();
    out.assign(n, 0.0);
    std::vector<std::exception_ptr> errors(n);

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                out[i] = f(std::span<const double>(xs[i].data(), static_cast<std::size_t>(xs[i].size())));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(threads, 1, n);
    if (workers == 1) {
        work(0, n);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t b = w * chunk;
            const std::size_t e = std::min(n, b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        const std::string where =
            "objective failed at generation " + std::to_string(generation) + ", candidate " +
            std::to_string(i);
        if (errors[i]) {
            try {
                std::rethrow_exception(errors[i]);
            } catch (const std::exception& e) {
                throw OptimizationAborted(where + ": " + e.what());
            } catch (...) {
                throw OptimizationAborted(where + ": unknown exception");
            }
        }
        if (!std::isfinite(out[i])) throw OptimizationAborted(where + ": non-finite value");
    }
}

} // namespace detail

/// Minimizes `objective` starting from `x0`. x0 itself is evaluated first, so
/// the result is never worse than f(x0). Returns the best point ever evaluated.
inline OptResult minimize(const Objective& objective, std::span<const double> x0,
                          const OptimizerConfig& cfg)
{
    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    detail::require(!x0.empty(), "minimize: x0 must be non-empty");
    for (double v : x0) detail::require(std::isfinite(v), "minimize: x0 must be finite");
    detail::require(cfg.population_size >= 4, "minimize: population_size must be >= 4");
    detail::require(cfg.no_improvement_generations >= 1 && cfg.max_evaluations >= 1,
                    "minimize: budgets must be positive");
    detail::require(std::isfinite(cfg.initial_step_size) && cfg.initial_step_size > 0.0,
                    "minimize: initial_step_size must be > 0");

    const auto n = static_cast<Eigen::Index>(x0.size());
    const double nd = static_cast<double>(n);
    const std::size_t lambda = cfg.population_size;
    const std::size_t mu = lambda / 2;

    VectorXd weights(static_cast<Eigen::Index>(mu));
    for (std::size_t i = 0; i < mu; ++i)
        weights(static_cast<Eigen::Index>(i)) =
            std::log(static_cast<double>(mu) + 0.5) - std::log(static_cast<double>(i + 1));
    weights /= weights.sum();
    const double mu_eff = 1.0 / weights.squaredNorm();

    const double c_sigma = (mu_eff + 2.0) / (nd + mu_eff + 5.0);
    const double d_sigma =
        1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (nd + 1.0)) - 1.0) + c_sigma;
    const double c_c = (4.0 + mu_eff / nd) / (nd + 4.0 + 2.0 * mu_eff / nd);
    const double c_1 = 2.0 / ((nd + 1.3) * (nd + 1.3) + mu_eff);
    const double c_mu = std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) /
                                                ((nd + 2.0) * (nd + 2.0) + mu_eff));
    const double chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));

    VectorXd mean = Eigen::Map<const VectorXd>(x0.data(), n);
    double sigma = cfg.initial_step_size;
    VectorXd p_sigma = VectorXd::Zero(n);
    VectorXd p_c = VectorXd::Zero(n);
    MatrixXd cov = MatrixXd::Identity(n, n);
    MatrixXd basis = MatrixXd::Identity(n, n); // B
    VectorXd scale = VectorXd::Ones(n);        // D (sqrt of eigenvalues)

    NormalStream normal(derive_seed(cfg.seed, {static_cast<std::uint64_t>(SeedDomain::optimizer)}));

    OptResult res;
    {
        std::vector<double> v;
        detail::evaluate_batch(objective, {mean}, v, 1, 0);
        res.best_x.assign(x0.begin(), x0.end());
        res.best_value = v[0];
        res.evaluations = 1;
    }

    std::vector<Eigen::VectorXd> xs(lambda);
    std::vector<Eigen::VectorXd> ys(lambda);
    std::vector<double> values;
    std::vector<std::size_t> order(lambda);
    std::size_t stale = 0;

    for (;;) {
        if (res.evaluations + lambda > cfg.max_evaluations) {
            res.reason = Termination::budget;
            break;
        }

        for (std::size_t k = 0; k < lambda; ++k) {
            VectorXd z(n);
            for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(0.0, 1.0);
            ys[k] = basis * scale.cwiseProduct(z);
            xs[k] = mean + sigma * ys[k];
        }
        detail::evaluate_batch(objective, xs, values, cfg.threads, res.generations + 1);
        res.evaluations += lambda;
        ++res.generations;

        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

        if (values[order[0]] < res.best_value) {
            res.best_value = values[order[0]];
            const VectorXd& bx = xs[order[0]];
            res.best_x.assign(bx.data(), bx.data() + bx.size());
            stale = 0;
        } else {
            ++stale;
        }
        res.best_history.push_back(res.best_value);

        // Recombination.
        VectorXd y_w = VectorXd::Zero(n);
        for (std::size_t i = 0; i < mu; ++i)
            y_w += weights(static_cast<Eigen::Index>(i)) * ys[order[i]];
        mean += sigma * y_w;

        // Step-size path uses C^{-1/2} y_w = B D^{-1} B^T y_w.
        const VectorXd c_inv_sqrt_yw = basis * (basis.transpose() * y_w).cwiseQuotient(scale);
        p_sigma = (1.0 - c_sigma) * p_sigma +
                  std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * c_inv_sqrt_yw;
        const double gen = static_cast<double>(res.generations);
        const double ps_norm = p_sigma.norm();
        const bool h_sigma =
            ps_norm / std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * gen)) <
            (1.4 + 2.0 / (nd + 1.0)) * chi_n;
        p_c = (1.0 - c_c) * p_c +
              (h_sigma ? std::sqrt(c_c * (2.0 - c_c) * mu_eff) : 0.0) * y_w;

        MatrixXd rank_mu = MatrixXd::Zero(n, n);
        for (std::size_t i = 0; i < mu; ++i) {
            const VectorXd& y = ys[order[i]];
            rank_mu.noalias() += weights(static_cast<Eigen::Index>(i)) * y * y.transpose();
        }
        const double delta_h = h_sigma ? 0.0 : c_c * (2.0 - c_c);
        cov = (1.0 + c_1 * delta_h - c_1 - c_mu) * cov + c_1 * p_c * p_c.transpose() +
              c_mu * rank_mu;
        cov = 0.5 * (cov + cov.transpose());

        sigma *= std::exp(c_sigma / d_sigma * (ps_norm / chi_n - 1.0));
        // Flat fitness: widen the search instead of collapsing onto a plateau.
        if (values[order[0]] == values[order[std::min(lambda - 1, (7 * lambda + 9) / 10)]])
            sigma *= std::exp(0.2 + c_sigma / d_sigma);

        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
        if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0 ||
            !std::isfinite(sigma))
            throw InternalError("CMA-ES covariance lost positive definiteness at generation " +
                                std::to_string(res.generations));
        basis = eig.eigenvectors();
        scale = eig.eigenvalues().cwiseSqrt();

        if (stale >= cfg.no_improvement_generations) {
            res.reason = Termination::no_improvement;
            break;
        }
        if (cfg.tol_x > 0.0 && sigma * cov.diagonal().cwiseSqrt().maxCoeff() < cfg.tol_x) {
            res.reason = Termination::tolerance;
            break;
        }
    }
    return res;
}

} // namespace churnsim
