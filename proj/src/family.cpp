#include "splinth/family.hpp"

#include "splinth/error.hpp"

#include <cmath>
#include <cstdio>
#include <string>

namespace splinth {

namespace {

// log(1 + e^a) without overflow.
double softplus(double a) { return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a)); }

// e^a / (1 + e^a)², symmetric in a.
double logistic_density(double a) {
    const double e = std::exp(-std::abs(a));
    return e / ((1.0 + e) * (1.0 + e));
}

}  // namespace

double logistic_cdf(double a) {
    if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
    const double e = std::exp(a);
    return e / (1.0 + e);
}

Family Family::gaussian() { return Family(FamilyKind::Gaussian, 0.0); }

Family Family::gamma(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ArgumentError("gamma family: shape must be positive");
    return Family(FamilyKind::Gamma, alpha);
}

Family Family::logistic() { return Family(FamilyKind::Logistic, 0.0); }

Family Family::parse(const std::string& text) {
    if (text == "gaussian") return gaussian();
    if (text == "logistic") return logistic();
    if (text.rfind("gamma", 0) == 0) {
        if (text.size() <= 6 || text[5] != ':')
            throw UsageError("--family gamma requires a shape: gamma:<alpha>");
        const std::string rest = text.substr(6);
        std::size_t used = 0;
        double alpha = 0.0;
        try {
            alpha = std::stod(rest, &used);
        } catch (const std::exception&) {
            throw UsageError("--family gamma:<alpha>: cannot parse shape '" + rest + "'");
        }
        if (used != rest.size() || !(alpha > 0.0) || !std::isfinite(alpha))
            throw UsageError("--family gamma:<alpha>: shape must be a positive number");
        return gamma(alpha);
    }
    throw UsageError("--family: unknown family '" + text + "' (expected gaussian|gamma:<alpha>|logistic)");
}

std::string Family::name() const {
    switch (kind_) {
        case FamilyKind::Gaussian: return "gaussian";
        case FamilyKind::Logistic: return "logistic";
        case FamilyKind::Gamma: {
            char buf[64];
            std::snprintf(buf, sizeof buf, "gamma:%.17g", alpha_);
            return buf;
        }
    }
    return "unknown";
}

bool Family::in_support(double y) const {
    if (!std::isfinite(y)) return false;
    switch (kind_) {
        case FamilyKind::Gaussian: return true;
        case FamilyKind::Gamma: return y > 0.0;
        case FamilyKind::Logistic: return y == 0.0 || y == 1.0;
    }
    return false;
}

void Family::check_response(double y) const {
    if (!in_support(y))
        throw ArgumentError(name() + " family: response " + std::to_string(y) + " outside support");
}

double Family::value(double y, double a) const {
    check_response(y);
    switch (kind_) {
        case FamilyKind::Gaussian: return -0.5 * (y - a) * (y - a);
        case FamilyKind::Gamma: return alpha_ * a - y * std::exp(a);
        case FamilyKind::Logistic: return y * a - softplus(a);
    }
    return 0.0;
}

double Family::grad(double y, double a) const {
    check_response(y);
    switch (kind_) {
        case FamilyKind::Gaussian: return y - a;
        case FamilyKind::Gamma: return alpha_ - y * std::exp(a);
        case FamilyKind::Logistic: return y - logistic_cdf(a);
    }
    return 0.0;
}

double Family::hess(double y, double a) const {
    check_response(y);
    switch (kind_) {
        case FamilyKind::Gaussian: return -1.0;
        case FamilyKind::Gamma: return -y * std::exp(a);
        case FamilyKind::Logistic: return -logistic_density(a);
    }
    return 0.0;
}

double Family::third(double y, double a) const {
    check_response(y);
    switch (kind_) {
        case FamilyKind::Gaussian: return 0.0;
        case FamilyKind::Gamma: return -y * std::exp(a);
        case FamilyKind::Logistic: {
            // d/da of -F(1-F) = -F(1-F)(1-2F)
            const double f = logistic_cdf(a);
            return -logistic_density(a) * (1.0 - 2.0 * f);
        }
    }
    return 0.0;
}

double Family::fisher_weight(double a) const {
    switch (kind_) {
        case FamilyKind::Gaussian: return 1.0;
        case FamilyKind::Gamma: return alpha_;
        case FamilyKind::Logistic: return logistic_density(a);
    }
    return 0.0;
}

double Family::mean(double a) const {
    switch (kind_) {
        case FamilyKind::Gaussian: return a;
        case FamilyKind::Gamma: return alpha_ * std::exp(-a);
        case FamilyKind::Logistic: return logistic_cdf(a);
    }
    return 0.0;
}

}  // namespace splinth
