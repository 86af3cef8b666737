#pragma once

#include <Eigen/Dense>

#include <string>

namespace splinth {

enum class HypothesisCase { I, II, III, General };

std::string to_string(HypothesisCase c);
HypothesisCase hypothesis_case_from_string(const std::string& text);

/// Joint linear constraint Mθ + Q·g(z₀) = α with k rows.
struct Hypothesis {
    Eigen::MatrixXd M;      // k × p
    Eigen::VectorXd Q;      // k
    Eigen::VectorXd alpha;  // k
    double z0 = 0.5;
    HypothesisCase kind = HypothesisCase::General;

    Eigen::Index k() const { return M.rows(); }
    /// N = (M | Q), k × (p + 1).
    Eigen::MatrixXd N() const;
    /// Degrees of freedom of the χ² part of the mixture law: p (I), rows of D (II), 0 (III).
    int mixture_dof() const;

    /// Shape, rank and case-structure checks; throws ArgumentError.
    void validate(Eigen::Index p) const;

    /// θ = θ₀ and g(z₀) = w₀.
    static Hypothesis case_I(const Eigen::VectorXd& theta0, double w0, double z0);
    /// Dθ = d and g(z₀) = w₀.
    static Hypothesis case_II(const Eigen::MatrixXd& D, const Eigen::VectorXd& d, double w0, double z0);
    /// x₀ᵀθ + g(z₀) = a.
    static Hypothesis case_III(const Eigen::VectorXd& x0, double a, double z0);
};

}  // namespace splinth
