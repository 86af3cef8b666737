#pragma once

#include <functional>
#include <vector>

namespace splinth {

/// Gauss–Legendre nodes and weights on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

GaussRule gauss_legendre(int order);

/// Composite Gauss–Legendre rule on [a, b]: `panels` equal subintervals, `order` nodes each.
struct CompositeRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }
};

CompositeRule composite_gauss_legendre(double a, double b, int panels, int order = 64);

/// The default rule used for every ∫₀¹ w·h·h integral: 32 panels × 64 nodes.
const CompositeRule& unit_interval_rule();

/// Adaptive Gauss–Legendre on [a, b]: bisects until a 20-point panel agrees with its two
/// halves to `tol` (absolute, scaled by the running estimate).
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double tol = 1e-10, int max_depth = 40);

/// I_l(m) = ∫₀^∞ (1 + x^{2m})^{-l} dx via x = t/(1-t).
double quadrature_Il(int m, int l);

}  // namespace splinth
