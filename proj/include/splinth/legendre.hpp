#pragma once

#include <Eigen/Dense>

namespace splinth::legendre {

// Series Σ_j a_j P_j(2z - 1) on [0, 1] in the standard (unnormalized) Legendre basis.

/// P_0..P_degree at 2z - 1, written into `out` (resized to degree + 1).
void evaluate_all(double z, int degree, Eigen::VectorXd& out);

/// Value of the series at z (Clenshaw).
double evaluate(const Eigen::VectorXd& coef, double z);

/// An antiderivative in z (integration constant unspecified). Degree grows by one.
Eigen::VectorXd integrate(const Eigen::VectorXd& coef);

/// d/dz of the series. Degree drops by one.
Eigen::VectorXd differentiate(const Eigen::VectorXd& coef);

/// Scale factor turning P_j(2z-1) into an L2[0,1]-orthonormal function: √(2j+1).
inline double orthonormal_scale(int j) { return std::sqrt(2.0 * j + 1.0); }

}  // namespace splinth::legendre
