#pragma once

#include <string>

namespace splinth {

enum class FamilyKind { Gaussian, Gamma, Logistic };

/// Criterion ℓ(y; a) with derivatives in the linear predictor a, up to y-only constants.
///   gaussian: -(y - a)²/2          (unit-variance convention)
///   gamma(α): αa - y·e^a           (Y ~ Gamma(shape α, rate e^a))
///   logistic: ya - log(1 + e^a)
class Family {
public:
    static Family gaussian();
    static Family gamma(double alpha);
    static Family logistic();

    /// Parses "gaussian", "gamma:<alpha>" or "logistic".
    static Family parse(const std::string& text);

    FamilyKind kind() const { return kind_; }
    double alpha() const { return alpha_; }
    std::string name() const;

    double value(double y, double a) const;
    double grad(double y, double a) const;
    double hess(double y, double a) const;
    double third(double y, double a) const;

    /// I = -E[ℓ̈ | a].
    double fisher_weight(double a) const;

    /// E[Y | a].
    double mean(double a) const;

    /// Throws ArgumentError when y is outside the support.
    void check_response(double y) const;
    bool in_support(double y) const;

private:
    Family(FamilyKind kind, double alpha) : kind_(kind), alpha_(alpha) {}
    FamilyKind kind_;
    double alpha_;
};

/// Logistic cdf 1/(1 + e^{-a}) without overflow.
double logistic_cdf(double a);

}  // namespace splinth
