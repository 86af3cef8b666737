#include "splinth/legendre.hpp"

namespace splinth::legendre {

void evaluate_all(double z, int degree, Eigen::VectorXd& out) {
    out.resize(degree + 1);
    const double x = 2.0 * z - 1.0;
    out[0] = 1.0;
    if (degree >= 1) out[1] = x;
    for (int k = 2; k <= degree; ++k)
        out[k] = ((2.0 * k - 1.0) * x * out[k - 1] - (k - 1.0) * out[k - 2]) / k;
}

double evaluate(const Eigen::VectorXd& coef, double z) {
    const double x = 2.0 * z - 1.0;
    double b1 = 0.0, b2 = 0.0;
    for (Eigen::Index k = coef.size() - 1; k >= 1; --k) {
        // P_{k+1} = (2k+1)/(k+1) x P_k - k/(k+1) P_{k-1}
        const double alpha = (2.0 * k + 1.0) / (k + 1.0) * x;
        const double beta = -(k + 1.0) / (k + 2.0);
        const double b0 = coef[k] + alpha * b1 + beta * b2;
        b2 = b1;
        b1 = b0;
    }
    if (coef.size() == 0) return 0.0;
    return coef[0] + x * b1 - 0.5 * b2;
}

Eigen::VectorXd integrate(const Eigen::VectorXd& coef) {
    // ∫ P_j dx = (P_{j+1} - P_{j-1}) / (2j+1), and dz = dx / 2.
    Eigen::VectorXd out = Eigen::VectorXd::Zero(coef.size() + 1);
    for (Eigen::Index j = 0; j < coef.size(); ++j) {
        const double c = 0.5 * coef[j] / (2.0 * j + 1.0);
        out[j + 1] += c;
        if (j >= 1) out[j - 1] -= c;
        else out[0] += 0.5 * coef[0];  // ∫P_0 dx = x = P_1; the P_0 shift is a constant anyway
    }
    return out;
}

Eigen::VectorXd differentiate(const Eigen::VectorXd& coef) {
    const Eigen::Index n = coef.size();
    if (n <= 1) return Eigen::VectorXd::Zero(1);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n - 1);
    // P_j' = Σ_{k<j, j-k odd} (2k+1) P_k, times 2 for d/dz.
    for (Eigen::Index j = 1; j < n; ++j) {
        if (coef[j] == 0.0) continue;
        for (Eigen::Index k = j - 1; k >= 0; k -= 2) out[k] += 2.0 * (2.0 * k + 1.0) * coef[j];
    }
    return out;
}

}  // namespace splinth::legendre
