#pragma once

// Seeded Monte Carlo studies: θ̂/ĝ correlation decay, interval coverage, LRT power and size,
// and the Bahadur remainder.

#include "splinth/fitter.hpp"
#include "splinth/lrt.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace splinth {

enum class SimModel { Example1CaseI, Example1CaseII, Gamma, Logistic };

std::string to_string(SimModel model);
SimModel sim_model_from_string(const std::string& text);

struct SimDesign {
    SimModel model = SimModel::Example1CaseI;
    Eigen::Index n = 1000;
    Eigen::VectorXd theta0 = Eigen::VectorXd::Constant(1, 4.0);
    /// beta-mixture | sin-pi | sin-2.8pi | sin-2pi | logistic | logistic-alt | zero
    std::string g0 = "beta-mixture";
    /// correlated: X_k = (U_k + 0.2Z)/1.2; independent: X_k ~ Unif[0, 1]
    std::string covariates = "correlated";
    double sigma = 1.0;
    double alpha = 2.0;
    int replications = 500;
    std::uint64_t seed = 1;
    LambdaChoice lambda;
    int m = 2;
    /// 0 selects default_basis_size.
    int n_basis = 0;

    void validate() const;
    Family family() const;
    double g0_value(double z) const;
    /// E{B X | Z = z}/B(z) for the covariate generator.
    Eigen::VectorXd G(double z) const;
    /// Ω = E{B (X - G(Z))(X - G(Z))ᵀ}.
    Eigen::MatrixXd omega() const;
    EigenSystem basis() const;
};

/// β_{a,b} density via log-gamma.
double beta_density(double a, double b, double z);

/// Deterministic in (design.seed, rep).
Dataset generate(const SimDesign& design, std::uint64_t rep);

struct SimCell {
    std::map<std::string, double> params;
    std::map<std::string, double> stats;
};

struct SimReport {
    std::string study;
    SimDesign design;
    std::vector<SimCell> cells;
    std::map<std::string, double> summary;
    int replications = 0;
    int failures = 0;
    std::vector<std::string> failure_messages;
    std::vector<std::uint64_t> seeds;
    std::optional<double> wall_clock;
};

struct RunOptions {
    /// 0: SPLINTH_THREADS, else hardware concurrency.
    int threads = 0;
    bool timing = false;
};

int resolve_threads(int requested);

/// fn(rep) for rep = 0..count-1 on a thread pool; results in index order. Failed indices are
/// empty and their messages are appended to `errors` in index order.
template <class T>
std::vector<std::optional<T>> parallel_map(int count, int threads, const std::function<T(int)>& fn,
                                           std::vector<std::string>& errors) {
    std::vector<std::optional<T>> out(static_cast<std::size_t>(count));
    std::vector<std::string> err(static_cast<std::size_t>(count));
    std::atomic<int> next{0};
    const auto worker = [&]() {
        for (int i = next++; i < count; i = next++) {
            try {
                out[static_cast<std::size_t>(i)] = fn(i);
            } catch (const std::exception& e) {
                err[static_cast<std::size_t>(i)] = "replication " + std::to_string(i) + ": " + e.what();
            }
        }
    };
    const int t = std::max(1, std::min(threads, count));
    if (t == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(t));
        for (int k = 0; k < t; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : err)
        if (!e.empty()) errors.push_back(std::move(e));
    return out;
}

/// |corr(θ̂_k, ĝ(z))| across replications at each grid point.
SimReport run_correlation_study(const SimDesign& design, const std::vector<double>& z_grid,
                                const RunOptions& options = {});

struct CoverageTarget {
    Eigen::VectorXd x0;
    double z0 = 0.5;
};

/// 95% prediction intervals (Gaussian) or conditional-mean intervals (logistic).
SimReport run_coverage_study(const SimDesign& design, const std::vector<CoverageTarget>& targets,
                             double level = 0.95, const RunOptions& options = {});

/// Case-III tests x₀ᵀθ + g(z₀) = alpha at 5% significance.
struct PowerCell {
    Eigen::VectorXd x0;
    double z0 = 0.5;
    double alpha = 0.0;
};

SimReport run_power_study(const SimDesign& design, const std::vector<PowerCell>& cells, double level = 0.95,
                          const RunOptions& options = {});

/// LRT statistics under a true hypothesis; reports the Kolmogorov–Smirnov distance to the null law.
SimReport run_null_study(const SimDesign& design, const Hypothesis& hyp, const RunOptions& options = {},
                         std::vector<double>* statistics = nullptr);

/// Median Bahadur remainder per sample size (λ per the design's policy).
SimReport run_bahadur_study(const SimDesign& design, const std::vector<Eigen::Index>& sizes,
                            const RunOptions& options = {});

/// Evenly spaced interior points (j - 1/2)/count.
std::vector<double> interior_grid(int count);

}  // namespace splinth
