#pragma once

// Joint local likelihood ratio test of Mθ + Q·g(z₀) = α.

#include "splinth/eigensys.hpp"
#include "splinth/fitter.hpp"
#include "splinth/hypothesis.hpp"
#include "splinth/inference.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace splinth {

enum class NullLawKind { Mixture, Quadratic };

/// Null distribution of -2n·LRT.
///   mixture:   χ²_r + c₀χ²₁ (independent), cdf by convolution on a 2^14-cell grid;
///   quadratic: υᵀΦ₀υ with υ ~ N((0, c_{z₀}), diag(I_p, c₀)), cdf from sorted Monte Carlo draws.
class NullLaw {
public:
    static constexpr int kGridCells = 1 << 14;
    static constexpr std::size_t kDefaultDraws = 1'000'000;
    static constexpr std::uint64_t kDefaultSeed = 0x5eed'0f'1a'77ULL;

    static NullLaw mixture(int r, double c0);
    static NullLaw quadratic(const Eigen::MatrixXd& phi0, double c0, double cz0 = 0.0,
                             std::size_t draws = kDefaultDraws, std::uint64_t seed = kDefaultSeed);

    NullLawKind kind() const { return kind_; }
    int dof() const { return r_; }
    double c0() const { return c0_; }
    double cz0() const { return cz0_; }
    const Eigen::MatrixXd& phi0() const { return phi0_; }
    std::size_t draws() const { return samples_.size(); }
    std::string describe() const;

    double cdf(double t) const;
    double sf(double t) const { return 1.0 - cdf(t); }
    double quantile(double prob) const;

private:
    NullLawKind kind_ = NullLawKind::Mixture;
    int r_ = 0;
    double c0_ = 1.0;
    double cz0_ = 0.0;
    Eigen::MatrixXd phi0_;
    // mixture grid: cdf at t_i = i·step
    double step_ = 0.0;
    std::vector<double> grid_cdf_;
    // quadratic: sorted draws
    std::vector<double> samples_;
};

/// Ingredients of Φ_λ in the metric of the criterion.
struct PhiInputs {
    Eigen::MatrixXd omega;  // Ω
    Eigen::MatrixXd sigma;  // Σ_λ
    Eigen::VectorXd A0;     // A(z₀)
    double K00 = 1.0;       // K(z₀, z₀)
};

PhiInputs phi_inputs(const PlugIn& plugin, double z0);

/// Φ_λ = Λ Nᵀ M_K^{-1} N Λᵀ, symmetrized.
Eigen::MatrixXd phi_lambda(const PhiInputs& in, const Hypothesis& hyp);
Eigen::MatrixXd phi_lambda(const FitResult& fit, const PlugIn& plugin, const Hypothesis& hyp);

enum class LambdaPolicy { Gcv, Fixed, Rate };

struct LambdaChoice {
    LambdaPolicy policy = LambdaPolicy::Gcv;
    double value = 0.0;         // Fixed
    std::vector<double> grid;   // Gcv; default grid when empty
};

double resolve_lambda(const Dataset& data, const Family& family, const EigenSystem& system,
                      const LambdaChoice& choice);

/// -2n(ℓ_{n,λ}(constrained) - ℓ_{n,λ}(unconstrained)); Gaussian statistics are divided by the
/// unconstrained σ̂². Values in [-1e-8, 0) are clamped to 0; lower values raise NumericError.
double lrt_statistic(const FitResult& unconstrained, const FitResult& constrained);
double lrt_statistic(const Dataset& data, const Family& family, const EigenSystem& system, double lambda,
                     const Hypothesis& hyp);

struct TestOptions {
    /// Simulation-only override of c_{z₀}.
    std::optional<double> cz0;
    /// Plug-ins for general hypotheses (estimated from the data when absent).
    const PlugIn* plugin = nullptr;
    std::size_t mc_draws = NullLaw::kDefaultDraws;
    std::uint64_t mc_seed = NullLaw::kDefaultSeed;
    FitOptions fit;
};

struct LrtResult {
    LrtResult(FitResult u, FitResult c, NullLaw l)
        : unconstrained(std::move(u)), constrained(std::move(c)), law(std::move(l)) {}
    double statistic = 0.0;
    double p_value = 1.0;
    bool reject = false;
    double level = 0.95;
    double c0 = 1.0;
    double lambda = 0.0;
    FitResult unconstrained;
    FitResult constrained;
    NullLaw law;
    std::vector<std::string> warnings;
};

/// c₀ for the system: 1 - 1/(2m) for trig, ladder extrapolation otherwise.
double c0_for(const EigenSystem& system, double lambda, double z0);

/// Fits both models at a common λ, reports p = 1 - cdf(statistic); rejects iff p < 1 - level.
LrtResult test(const Dataset& data, const Family& family, const EigenSystem& system, const Hypothesis& hyp,
               double level, const LambdaChoice& choice, const TestOptions& options = {});

}  // namespace splinth
