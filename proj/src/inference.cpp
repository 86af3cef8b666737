#include "splinth/inference.hpp"

#include "splinth/error.hpp"
#include "splinth/quadrature.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

namespace splinth {

namespace {

double cached_I2(int m) {
    static std::mutex mu;
    static std::vector<double> cache;
    std::lock_guard<std::mutex> lock(mu);
    if (static_cast<int>(cache.size()) <= m) cache.resize(static_cast<std::size_t>(m) + 1, -1.0);
    if (cache[static_cast<std::size_t>(m)] < 0.0) cache[static_cast<std::size_t>(m)] = quadrature_Il(m, 2);
    return cache[static_cast<std::size_t>(m)];
}

/// Penalized smoothing of v on z with the fit's basis, λ by GCV.
Eigen::VectorXd smooth(const Eigen::VectorXd& v, const Dataset& data, const EigenSystem& system) {
    Dataset d;
    d.y = v;
    d.X = Eigen::MatrixXd(data.n(), 0);
    d.z = data.z;
    const Family gauss = Family::gaussian();
    const std::vector<double> grid = default_lambda_grid(data.n(), system.order());
    const GcvTable table = select_lambda(d, gauss, system, grid);
    return fit(d, gauss, system, table.best).coef;
}

double fisher_at(const FitResult& fit, double a) {
    if (fit.family.kind() == FamilyKind::Gaussian) return 1.0 / fit.sigma2;
    return fit.family.fisher_weight(a);
}

}  // namespace

KernelDensity::KernelDensity(const Eigen::VectorXd& z) : z_(z.data(), z.data() + z.size()) {
    const auto n = static_cast<double>(z_.size());
    if (z_.size() < 2) throw ArgumentError("kernel density: need at least two points");
    const double mean = z.mean();
    const double sd = std::sqrt((z.array() - mean).square().sum() / (n - 1.0));
    std::vector<double> sorted = z_;
    std::sort(sorted.begin(), sorted.end());
    const auto quant = [&](double q) {
        const double pos = q * (n - 1.0);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
    };
    const double iqr = quant(0.75) - quant(0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0)) spread = sd > 0.0 ? sd : 1.0;
    bw_ = 0.9 * spread * std::pow(n, -0.2);
}

double KernelDensity::operator()(double z) const {
    const double c = 1.0 / (bw_ * std::sqrt(2.0 * std::numbers::pi) * static_cast<double>(z_.size()));
    double s = 0.0;
    for (const double zi : z_) {
        for (const double t : {z - zi, z + zi, z - (2.0 - zi)}) {
            const double u = t / bw_;
            if (std::abs(u) < 40.0) s += std::exp(-0.5 * u * u);
        }
    }
    return c * s;
}

void attach_G(PlugIn& plugin, const EigenSystem& fit_system) {
    const EigenSystem sys = fit_system;
    const Eigen::MatrixXd num = plugin.g_num_coef;
    const Eigen::VectorXd bc = plugin.b_coef;
    const double bconst = plugin.b_const;
    plugin.G = [sys, num, bc, bconst](double z) -> Eigen::VectorXd {
        const Eigen::VectorXd h = sys.eval_all(z);
        double b = bconst;
        if (bc.size() > 0) b = std::max(h.dot(bc), 1e-12);
        return num * h / b;
    };
}

void attach_inference_system(PlugIn& plugin, const FitResult& fit) {
    const EigenSystem& fs = fit.system;
    const int m = fs.order();
    const bool gaussian = fit.family.kind() == FamilyKind::Gaussian;
    if (gaussian && !(fit.sigma2 > 0.0)) throw NumericError("inference: sigma2 estimate must be positive");
    plugin.lambda = gaussian ? fit.lambda / fit.sigma2 : fit.lambda;
    plugin.closed_form = false;
    if (fs.kind() == BasisKind::Trig && plugin.b_coef.size() == 0) {
        // Uniform design: w = B, the trigonometric system with σ = B^{-1/2}.
        const double sigma = 1.0 / std::sqrt(plugin.b_const);
        const int N = std::max(fs.size(), trig_truncation(m, sigma, plugin.lambda));
        plugin.system = EigenSystem::trig(m, sigma, N % 2 == 1 ? N : N + 1);
        plugin.weight = WeightTable::constant(plugin.b_const);
        plugin.closed_form = gaussian;
        return;
    }
    plugin.system = EigenSystem::bvp(m, plugin.weight, fs.size());
}

PlugIn estimate_plugins(const FitResult& fit, const Dataset& data, const InferenceOptions& options) {
    const Eigen::Index n = data.n(), p = data.p();
    if (fit.theta.size() != p) throw ArgumentError("estimate_plugins: fit and data disagree on p");
    if (fit.family.kind() == FamilyKind::Gaussian && !(fit.sigma2 > 0.0))
        throw NumericError("estimate_plugins: sigma2 estimate must be positive");
    const EigenSystem& sys = fit.system;

    const Eigen::MatrixXd Phi = sys.design(std::span<const double>(data.z.data(), static_cast<std::size_t>(n)));
    const Eigen::VectorXd a = data.X * fit.theta + Phi * fit.coef;
    Eigen::VectorXd I(n);
    for (Eigen::Index i = 0; i < n; ++i) I[i] = fisher_at(fit, a[i]);

    PlugIn pl;
    pl.n = n;
    const bool constant_b = (I.array() == I[0]).all();
    if (constant_b) {
        pl.b_const = I[0];
    } else {
        pl.b_coef = smooth(I, data, sys);
    }
    pl.g_num_coef.resize(p, sys.size());
    for (Eigen::Index k = 0; k < p; ++k)
        pl.g_num_coef.row(k) = smooth((I.array() * data.X.col(k).array()).matrix(), data, sys).transpose();

    attach_G(pl, sys);

    Eigen::MatrixXd R(n, p);
    for (Eigen::Index i = 0; i < n; ++i) R.row(i) = data.X.row(i) - pl.G(data.z[i]).transpose();
    Eigen::MatrixXd omega = R.transpose() * I.asDiagonal() * R / static_cast<double>(n);
    omega = 0.5 * (omega + omega.transpose());
    if (p > 0) {
        const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(omega).eigenvalues().minCoeff();
        if (min_eig < 1e-10)
            throw NumericError("omega_hat: near-singular (X nearly a function of Z; min eigenvalue " +
                               std::to_string(min_eig) + ")");
    }
    pl.omega = omega;

    // w = B̂·π̂ tabulated on equally spaced knots.
    std::function<double(double)> density = options.design_density;
    std::optional<KernelDensity> kde;
    if (!density) {
        kde.emplace(data.z);
        density = [&kde](double z) { return (*kde)(z); };
    }
    const int K = std::max(options.table_knots, 2);
    std::vector<std::pair<double, double>> knots;
    knots.reserve(static_cast<std::size_t>(K));
    double wmax = 0.0;
    for (int j = 0; j < K; ++j) {
        const double z = static_cast<double>(j) / (K - 1);
        double b = pl.b_const;
        if (pl.b_coef.size() > 0) b = sys.eval_series(pl.b_coef, z);
        const double w = b * density(z);
        knots.emplace_back(z, w);
        wmax = std::max(wmax, w);
    }
    for (auto& kv : knots) kv.second = std::max(kv.second, 1e-8 * wmax);
    pl.weight = WeightTable(std::move(knots));
    attach_inference_system(pl, fit);
    return pl;
}

Eigen::MatrixXd omega_hat(const FitResult& fit, const Dataset& data) { return estimate_plugins(fit, data).omega; }

double two_sided_quantile(double level) {
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("level must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal(), 0.5 * (1.0 + level));
}

GVariance g_variance(const FitResult& fit, const PlugIn& plugin, double z0) {
    if (!(z0 > 0.0 && z0 < 1.0)) throw ArgumentError("z0 must lie in (0, 1)");
    GVariance gv;
    if (plugin.closed_form) {
        gv.sigma_z0_sq = fit.sigma2 * cached_I2(fit.system.order()) / std::numbers::pi;
        gv.h = fit.h;
        return gv;
    }
    if (!plugin.system) throw ArgumentError("g_variance: plug-in has no inference eigensystem");
    const KernelHandle K(*plugin.system, plugin.lambda);
    gv.sigma_z0_sq = K.sigma_z0_sq(z0);
    gv.h = K.bandwidth();
    return gv;
}

JointCI joint_ci(const FitResult& fit, const PlugIn& plugin, double z0, double level) {
    const double q = two_sided_quantile(level);
    const double n = static_cast<double>(plugin.n);
    JointCI ci;
    ci.level = level;
    ci.z0 = z0;
    ci.omega = plugin.omega;
    const Eigen::MatrixXd inv = plugin.omega.ldlt().solve(Eigen::MatrixXd::Identity(plugin.omega.rows(), plugin.omega.cols()));
    for (Eigen::Index k = 0; k < fit.theta.size(); ++k) {
        const double half = q * std::sqrt(inv(k, k) / n);
        ci.theta.push_back({fit.theta[k] - half, fit.theta[k] + half});
    }
    const GVariance gv = g_variance(fit, plugin, z0);
    ci.sigma_z0_sq = gv.sigma_z0_sq;
    ci.h = gv.h;
    const double gh = fit.g(z0);
    const double half = q * std::sqrt(gv.sigma_z0_sq / (n * gv.h));
    ci.g = {gh - half, gh + half};
    return ci;
}

Interval prediction_interval(const FitResult& fit, const Eigen::VectorXd& x0, double z0, double level) {
    if (fit.family.kind() != FamilyKind::Gaussian)
        throw UnsupportedError("prediction_interval: Gaussian family only");
    if (!(z0 > 0.0 && z0 < 1.0)) throw ArgumentError("z0 must lie in (0, 1)");
    if (x0.size() != fit.theta.size()) throw ArgumentError("prediction_interval: x0 has the wrong length");
    const double q = two_sided_quantile(level);
    const double s2 = fit.sigma2;
    const double n = static_cast<double>(fit.n);
    const double var = s2 * cached_I2(fit.system.order()) / (std::numbers::pi * n * fit.h) + s2;
    const double yhat = fit.linear_predictor(x0, z0);
    const double half = q * std::sqrt(std::max(var, 0.0));
    return {yhat - half, yhat + half};
}

Interval prediction_interval(const FitResult& fit, const PlugIn& plugin, const Eigen::VectorXd& x0, double z0,
                             double level) {
    if (fit.family.kind() != FamilyKind::Gaussian)
        throw UnsupportedError("prediction_interval: Gaussian family only");
    if (plugin.closed_form) return prediction_interval(fit, x0, z0, level);
    if (x0.size() != fit.theta.size()) throw ArgumentError("prediction_interval: x0 has the wrong length");
    const double q = two_sided_quantile(level);
    const GVariance gv = g_variance(fit, plugin, z0);
    const double n = static_cast<double>(plugin.n);
    const double var = gv.sigma_z0_sq / (n * gv.h) + fit.sigma2;
    const double yhat = fit.linear_predictor(x0, z0);
    const double half = q * std::sqrt(std::max(var, 0.0));
    return {yhat - half, yhat + half};
}

Interval conditional_mean_ci(const FitResult& fit, const PlugIn& plugin, const Eigen::VectorXd& x0, double z0,
                             double level) {
    if (fit.family.kind() != FamilyKind::Logistic)
        throw UnsupportedError("conditional_mean_ci: logistic family only");
    if (x0.size() != fit.theta.size()) throw ArgumentError("conditional_mean_ci: x0 has the wrong length");
    const double q = two_sided_quantile(level);
    const double n = static_cast<double>(plugin.n);
    const double eta = fit.linear_predictor(x0, z0);
    const double F = logistic_cdf(eta);
    const double dF = F * (1.0 - F);
    double var_theta = 0.0;
    if (x0.size() > 0) var_theta = x0.dot(plugin.omega.ldlt().solve(x0)) / n;
    const GVariance gv = g_variance(fit, plugin, z0);
    const double var = dF * dF * (var_theta + gv.sigma_z0_sq / (n * gv.h));
    const double half = q * std::sqrt(var);
    return {std::max(0.0, F - half), std::min(1.0, F + half)};
}

}  // namespace splinth
