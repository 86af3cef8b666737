#include "splinth/quadrature.hpp"

#include "splinth/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace splinth {

GaussRule gauss_legendre(int order) {
    if (order < 1) throw ArgumentError("gauss_legendre: order must be >= 1");
    GaussRule rule;
    if (order == 1) {
        rule.nodes = {0.0};
        rule.weights = {2.0};
        return rule;
    }
    rule.nodes.resize(order);
    rule.weights.resize(order);
    // P_order(x) and P_{order-1}(x) by the three-term recurrence.
    const auto legendre = [order](double x, double& p_prev) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= order; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        p_prev = p0;
        return p1;
    };
    const int half = (order + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
        for (int iter = 0; iter < 100; ++iter) {
            double p_prev = 0.0;
            const double p = legendre(x, p_prev);
            const double dp = order * (x * p - p_prev) / (x * x - 1.0);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double p_prev = 0.0;
        const double p = legendre(x, p_prev);
        const double dp = order * (x * p - p_prev) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[order - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[order - 1 - i] = w;
    }
    if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
    return rule;
}

CompositeRule composite_gauss_legendre(double a, double b, int panels, int order) {
    if (panels < 1) throw ArgumentError("composite_gauss_legendre: panels must be >= 1");
    if (!(b > a)) throw ArgumentError("composite_gauss_legendre: empty interval");
    const GaussRule base = gauss_legendre(order);
    CompositeRule rule;
    rule.nodes.reserve(static_cast<std::size_t>(panels) * order);
    rule.weights.reserve(static_cast<std::size_t>(panels) * order);
    const double width = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double left = a + p * width;
        for (int i = 0; i < order; ++i) {
            rule.nodes.push_back(left + 0.5 * width * (base.nodes[i] + 1.0));
            rule.weights.push_back(0.5 * width * base.weights[i]);
        }
    }
    return rule;
}

const CompositeRule& unit_interval_rule() {
    static const CompositeRule rule = composite_gauss_legendre(0.0, 1.0, 32, 64);
    return rule;
}

namespace {

const GaussRule& panel_rule() {
    static const GaussRule rule = gauss_legendre(20);
    return rule;
}

double panel(const std::function<double(double)>& f, double a, double b) {
    const GaussRule& r = panel_rule();
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * f(mid + half * r.nodes[i]);
    return s * half;
}

double refine(const std::function<double(double)>& f, double a, double b, double whole, double tol,
              int depth) {
    const double mid = 0.5 * (a + b);
    const double left = panel(f, a, mid);
    const double right = panel(f, mid, b);
    const double both = left + right;
    if (depth <= 0 || std::abs(both - whole) <= tol) return both;
    return refine(f, a, mid, left, 0.5 * tol, depth - 1) +
           refine(f, mid, b, right, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double tol,
                          int max_depth) {
    const double whole = panel(f, a, b);
    const double scale = std::max(1.0, std::abs(whole));
    return refine(f, a, b, whole, tol * scale, max_depth);
}

double quadrature_Il(int m, int l) {
    if (m < 1) throw ArgumentError("quadrature_Il: m must be >= 1");
    if (l < 1) throw ArgumentError("quadrature_Il: l must be >= 1");
    const auto integrand = [m, l](double t) {
        if (t >= 1.0) return 0.0;
        const double x = t / (1.0 - t);
        const double jac = 1.0 / ((1.0 - t) * (1.0 - t));
        return std::pow(1.0 + std::pow(x, 2 * m), -l) * jac;
    };
    return integrate_adaptive(integrand, 0.0, 1.0, 1e-12);
}

}  // namespace splinth
