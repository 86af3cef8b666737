#pragma once

// Plug-in asymptotics for θ̂ and ĝ(z₀): Ω̂, σ²_{z₀}, joint confidence rectangles and intervals
// for a new response or a conditional mean.

#include "splinth/eigensys.hpp"
#include "splinth/fitter.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

namespace splinth {

/// Gaussian kernel density on [0, 1] with Silverman's bandwidth and reflection at both ends.
class KernelDensity {
public:
    explicit KernelDensity(const Eigen::VectorXd& z);
    double operator()(double z) const;
    double bandwidth() const { return bw_; }

private:
    std::vector<double> z_;
    double bw_;
};

/// Nuisance estimates shared by intervals and Φ_λ. Everything is expressed in the metric of the
/// original criterion: for the Gaussian family B = 1/σ̂² and the inference λ is λ_fit/σ̂².
struct PlugIn {
    Eigen::Index n = 0;
    /// Ω̂ (p × p).
    Eigen::MatrixXd omega;
    /// B̂(z)·π̂(z), tabulated.
    WeightTable weight;
    /// Ĝ(z), p-valued.
    std::function<Eigen::VectorXd(double)> G;
    /// Eigensystem diagonalizing V (weight B̂π̂) and J, with the matching λ.
    std::optional<EigenSystem> system;
    double lambda = 0.0;
    /// Gaussian trigonometric fits use σ̂²I₂/π for σ²_{z₀}.
    bool closed_form = false;
    /// Ĝ as series on the fit basis: Ĝ_k = (Σ_ν num(k, ν) h_ν) / B̂; B̂ is the constant `b_const`
    /// when `b_coef` is empty.
    Eigen::MatrixXd g_num_coef;
    Eigen::VectorXd b_coef;
    double b_const = 1.0;
};

struct InferenceOptions {
    /// Known design density of Z (simulation mode); a kernel estimate is used otherwise.
    std::function<double(double)> design_density;
    int table_knots = 201;
};

/// Ĝ, B̂ smoothing, Ω̂ and the inference eigensystem.
PlugIn estimate_plugins(const FitResult& fit, const Dataset& data, const InferenceOptions& options = {});

/// Sets plugin.G from g_num_coef and b_coef/b_const on the fit basis.
void attach_G(PlugIn& plugin, const EigenSystem& fit_system);

/// Rebuilds the inference eigensystem of a plug-in whose numeric fields are set.
void attach_inference_system(PlugIn& plugin, const FitResult& fit);

Eigen::MatrixXd omega_hat(const FitResult& fit, const Dataset& data);

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
    double center() const { return 0.5 * (lower + upper); }
    double length() const { return upper - lower; }
    bool contains(double v) const { return lower <= v && v <= upper; }
};

/// σ²_{z₀} and the bandwidth it pairs with: Var ĝ(z₀) ≈ σ²_{z₀}/(n h).
struct GVariance {
    double sigma_z0_sq = 0.0;
    double h = 0.0;
};

GVariance g_variance(const FitResult& fit, const PlugIn& plugin, double z0);

struct JointCI {
    std::vector<Interval> theta;
    Interval g;
    double level = 0.95;
    double z0 = 0.5;
    Eigen::MatrixXd omega;
    double sigma_z0_sq = 0.0;
    double h = 0.0;
};

JointCI joint_ci(const FitResult& fit, const PlugIn& plugin, double z0, double level);

/// Ŷ ± z·√(σ̂²I₂/(πnh) + σ̂²) for the Gaussian family.
Interval prediction_interval(const FitResult& fit, const PlugIn& plugin, const Eigen::VectorXd& x0, double z0,
                             double level);
/// Same interval from the fit alone for Gaussian trigonometric fits.
Interval prediction_interval(const FitResult& fit, const Eigen::VectorXd& x0, double z0, double level);

/// Delta-method interval for F(x₀ᵀθ + g(z₀)), logistic family, clipped to [0, 1].
Interval conditional_mean_ci(const FitResult& fit, const PlugIn& plugin, const Eigen::VectorXd& x0, double z0,
                             double level);

/// Standard normal quantile at (1 + level)/2.
double two_sided_quantile(double level);

}  // namespace splinth
