#pragma once

// Eigensystems (h_ν, γ_ν) that simultaneously diagonalize the weighted L2 form
//   V(g, g~) = ∫₀¹ w(z) g(z) g~(z) dz
// and the roughness penalty J(g, g~) = ∫₀¹ g^(m) g~^(m), together with the reproducing
// kernel, the smoothing operator W_λ and the asymptotic constants built on them.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace splinth {

enum class BasisKind { Trig, Bvp };

std::string to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& text);

/// Piecewise-linear positive function given by (z, w) knots; constant beyond the ends.
class WeightTable {
public:
    WeightTable() = default;
    explicit WeightTable(std::vector<std::pair<double, double>> knots);

    static WeightTable constant(double value);

    double operator()(double z) const;
    const std::vector<std::pair<double, double>>& knots() const { return knots_; }

private:
    std::vector<std::pair<double, double>> knots_;
};

class EigenSystem {
public:
    /// Periodic trigonometric system: h_0 = σ, h_{2k-1} = √2σ sin(2πkz), h_{2k} = √2σ cos(2πkz),
    /// γ_0 = 0, γ_{2k-1} = γ_{2k} = σ²(2πk)^{2m}, weight σ^{-2}.
    static EigenSystem trig(int m, double sigma, int n_basis);

    /// Natural-boundary system of (-1)^m h^(2m) = γ w h, h^(j)(0) = h^(j)(1) = 0 for
    /// j = m..2m-1. `grid` is the number of quadrature nodes used for V.
    static EigenSystem bvp(int m, const WeightTable& weight, int n_basis, int grid = 2048);

    BasisKind kind() const;
    int order() const;
    int size() const;
    /// σ of the trigonometric system (1 for BVP systems).
    double sigma() const;
    int grid() const;
    /// Dimension of the penalty null space among the retained functions.
    int null_dim() const;
    const WeightTable& weight_table() const;
    double weight(double z) const;

    const Eigen::VectorXd& eigenvalues() const;
    double eigenvalue(int nu) const { return eigenvalues()[nu]; }

    double eval(int nu, double z) const;
    /// All retained basis functions at z; `out` must have size() entries.
    void eval_all(double z, Eigen::Ref<Eigen::VectorXd> out) const;
    Eigen::VectorXd eval_all(double z) const;
    /// Row i = (h_0(z_i), ..., h_{N-1}(z_i)).
    Eigen::MatrixXd design(std::span<const double> z) const;
    /// d^order/dz^order h_ν(z).
    double derivative(int nu, double z, int order) const;

    /// Σ_ν c_ν h_ν(z).
    double eval_series(const Eigen::VectorXd& coef, double z) const;

    /// Coefficients V(f, h_ν) computed by quadrature.
    Eigen::VectorXd project(const std::function<double(double)>& f) const;

    /// Same construction with a different truncation (trig only; BVP systems are rebuilt).
    EigenSystem resized(int n_basis) const;

private:
    struct Impl;
    explicit EigenSystem(std::shared_ptr<const Impl> impl);
    std::shared_ptr<const Impl> impl_;
};

/// Smallest odd N such that λ·γ_N ≥ threshold for the trigonometric system, capped at `cap`.
int trig_truncation(int m, double sigma, double lambda, double threshold = 1e4, int cap = 2000);

/// Reproducing kernel of ⟨g, g~⟩₁ = V(g, g~) + λJ(g, g~) on a fixed eigensystem.
class KernelHandle {
public:
    KernelHandle(EigenSystem system, double lambda);

    const EigenSystem& system() const { return system_; }
    double lambda() const { return lambda_; }
    /// h = λ^{1/(2m)}.
    double bandwidth() const;

    /// K(z, z') = Σ_ν h_ν(z)h_ν(z') / (1 + λγ_ν).
    double eval(double z, double zp) const;

    /// Componentwise multiplication by λγ_ν / (1 + λγ_ν).
    Eigen::VectorXd w_lambda(const Eigen::VectorXd& coef) const;

    /// h · Σ_ν h_ν(z₀)² / (1 + λγ_ν)².
    double sigma_z0_sq(double z0) const;

    /// A(z) = Σ_ν V(G, h_ν)/(1 + λγ_ν) h_ν(z), one entry per row of `g_coef` (p × N).
    Eigen::VectorXd riesz_A(const Eigen::MatrixXd& g_coef, double z) const;
    /// (W_λ A)(z) = Σ_ν V(G, h_ν) λγ_ν/(1 + λγ_ν)² h_ν(z).
    Eigen::VectorXd w_lambda_A(const Eigen::MatrixXd& g_coef, double z) const;

    /// Coefficients of K_z in the eigenbasis: h_ν(z)/(1 + λγ_ν).
    Eigen::VectorXd kernel_coef(double z) const;

private:
    EigenSystem system_;
    double lambda_;
};

KernelHandle kernel(const EigenSystem& system, double lambda);

/// Q_l(λ, z) = Σ_ν h_ν(z)² / (1 + λγ_ν)^l.
double q_sum(const EigenSystem& system, double lambda, double z, int l);

struct C0Estimate {
    double value = 0.0;
    bool converged = true;
    /// False when the retained basis is too short for the smallest λ of the ladder.
    bool truncation_ok = true;
    std::vector<double> lambdas;
    std::vector<double> ratios;
};

/// c₀ = lim_{λ→0} Q₂/Q₁ from the ladder λ_j = λ₀·4^{-j}, j = 0..6, extrapolated from the last
/// three ratios. λ₀ defaults to the handle's λ. Trigonometric systems are extended as needed.
C0Estimate c0(const KernelHandle& handle, double z0);
C0Estimate c0(const KernelHandle& handle, double z0, double lambda0);

/// 1 - 1/(2m): the trigonometric-system value, equal to I₂/I₁.
double c0_trig(int m);

}  // namespace splinth
