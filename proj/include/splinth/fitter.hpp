#pragma once

// Penalized likelihood fitting of E(Y|U) = F(Xᵀθ + g(Z)) with g expanded in an eigenbasis:
//   maximize (1/n) Σ ℓ(y_i; x_iᵀθ + φ(z_i)ᵀc) - (λ/2) Σ_ν γ_ν c_ν².

#include "splinth/eigensys.hpp"
#include "splinth/family.hpp"
#include "splinth/hypothesis.hpp"

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace splinth {

struct Dataset {
    Eigen::VectorXd y;
    Eigen::MatrixXd X;  // n × p
    Eigen::VectorXd z;

    Eigen::Index n() const { return y.size(); }
    Eigen::Index p() const { return X.cols(); }

    /// Shapes, finiteness, z ∈ [0, 1], n > p + null_dim, and responses in the family's support.
    /// Throws DataError.
    void validate(const Family& family, int null_dim) const;
};

struct FitOptions {
    int max_iter = 200;
    double grad_tol = 1e-9;
    double step_tol = 1e-12;
    int max_halvings = 50;
};

struct FitResult {
    FitResult(Family fam, EigenSystem sys) : family(fam), system(std::move(sys)) {}

    Eigen::VectorXd theta;
    Eigen::VectorXd coef;
    double lambda = 0.0;
    double h = 0.0;
    Eigen::Index n = 0;
    Family family;
    EigenSystem system;
    int iterations = 0;
    double grad_norm = 0.0;
    /// ℓ_{n,λ} at the optimum (criterion value including the penalty).
    double objective = 0.0;
    /// Trace of the smoothing matrix (working problem for non-Gaussian families).
    double trace = std::numeric_limits<double>::quiet_NaN();
    /// RSS/(n - trace), Gaussian only.
    double sigma2 = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> warnings;

    double g(double z) const { return system.eval_series(coef, z); }
    double linear_predictor(const Eigen::VectorXd& x, double z) const { return x.dot(theta) + g(z); }
};

/// The penalized criterion on a fixed design D = [X Φ].
class PenalizedProblem {
public:
    PenalizedProblem(const Dataset& data, const Family& family, const EigenSystem& system, double lambda);

    const Eigen::MatrixXd& design() const { return design_; }
    /// Diagonal of the penalty matrix P = blockdiag(0_p, diag γ).
    const Eigen::VectorXd& penalty() const { return penalty_; }
    double lambda() const { return lambda_; }
    Eigen::Index dim() const { return design_.cols(); }

    double value(const Eigen::VectorXd& beta) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& beta) const;

    const Dataset& data() const { return *data_; }
    const Family& family() const { return family_; }

private:
    const Dataset* data_;
    Family family_;
    double lambda_;
    Eigen::MatrixXd design_;
    Eigen::VectorXd penalty_;
};

FitResult fit(const Dataset& data, const Family& family, const EigenSystem& system, double lambda,
              const FitOptions& options = {});

/// Solves the problem subject to Mθ + Q·φ(z₀)ᵀc = α in null-space coordinates.
FitResult fit_constrained(const Dataset& data, const Family& family, const EigenSystem& system,
                          double lambda, const Hypothesis& hyp, const FitOptions& options = {});

struct GcvTable {
    std::vector<double> lambdas;
    std::vector<double> scores;  // NaN where skipped
    std::vector<double> traces;
    std::vector<std::string> warnings;
    double best = 0.0;
};

GcvTable select_lambda(const Dataset& data, const Family& family, const EigenSystem& system,
                       std::span<const double> grid, const FitOptions& options = {});

/// `count` log-spaced points over [1e-10, 1e2]·n^{-2m/(2m+1)}.
std::vector<double> default_lambda_grid(Eigen::Index n, int m, int count = 40);

/// n^{-2m/(2m+1)}.
double rate_lambda(Eigen::Index n, int m);

/// Default trig truncation: odd N ≤ min(2000, n) reaching λγ_N ≥ 1e4 at λ = 1e-4·n^{-2m/(2m+1)}.
int default_basis_size(Eigen::Index n, int m, double sigma = 1.0);

/// RSS/(n - trace A(λ)) for a Gaussian fit.
double sigma2_hat(const FitResult& fit, const Dataset& data);

/// Hutchinson estimate of trace A(λ) for a Gaussian fit with Rademacher probes.
double trace_hutchinson(const FitResult& fit, const Dataset& data, int probes, std::uint64_t seed);

/// Known truth for the Bahadur remainder. The fit's eigensystem weight must equal B·π of the design.
struct BahadurTruth {
    Eigen::VectorXd theta0;
    std::function<double(double)> g0;
    /// G(z) = E{B X | Z = z}/B(z), p-valued.
    std::function<Eigen::VectorXd(double)> G;
    /// Ω = E{B (X - G(Z))(X - G(Z))ᵀ}.
    Eigen::MatrixXd omega;
};

struct BahadurResult {
    double remainder = 0.0;
    /// ‖P_λ f₀‖.
    double penalty_norm = 0.0;
};

/// ‖f̂ - f₀ - S_{n,λ}(f₀)‖ with S_{n,λ}(f₀) = (1/n)Σ ε_i R_{U_i} - P_λ f₀.
BahadurResult bahadur_diagnostic(const FitResult& fit, const Dataset& data, const BahadurTruth& truth);

}  // namespace splinth
