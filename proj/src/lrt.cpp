#include "splinth/lrt.hpp"

#include "splinth/error.hpp"
#include "splinth/quadrature.hpp"
#include "splinth/rng.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace splinth {

namespace {

double chi2_cdf(double k, double x) {
    if (x <= 0.0) return 0.0;
    return boost::math::cdf(boost::math::chi_squared(k), x);
}

double chi2_pdf(double k, double x) {
    if (x <= 0.0) return 0.0;
    return boost::math::pdf(boost::math::chi_squared(k), x);
}

double chi2_quantile(double k, double p) { return boost::math::quantile(boost::math::chi_squared(k), p); }

Eigen::MatrixXd inv_sqrt_spd(const Eigen::MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
    if (es.eigenvalues().minCoeff() <= 0.0) throw NumericError("phi_lambda: Omega + Sigma is not positive definite");
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

}  // namespace

NullLaw NullLaw::mixture(int r, double c0) {
    if (r < 0) throw ArgumentError("null_law: degrees of freedom must be >= 0");
    if (!(c0 > 0.0 && c0 <= 1.0)) throw ArgumentError("null_law: c0 must lie in (0, 1]");
    NullLaw law;
    law.kind_ = NullLawKind::Mixture;
    law.r_ = r;
    law.c0_ = c0;
    if (r == 0) return law;

    constexpr double tail = 1e-12;
    const double tmax = chi2_quantile(r, 1.0 - tail) + c0 * chi2_quantile(1.0, 1.0 - tail);
    const int G = kGridCells;
    const double d = tmax / G;
    law.step_ = d;

    // Masses and conditional means of c₀χ²₁ per cell [jd, (j+1)d); y f₁(y) = f₃(y) gives the means.
    std::vector<double> mass(G), offset(G);
    double prev1 = 0.0, prev3 = 0.0;
    for (int j = 0; j < G; ++j) {
        const double b = (j + 1) * d / c0;
        const double c1 = chi2_cdf(1.0, b), c3 = chi2_cdf(3.0, b);
        mass[j] = c1 - prev1;
        const double mean = mass[j] > 0.0 ? c0 * (c3 - prev3) / mass[j] : (j + 0.5) * d;
        offset[j] = mean - (j + 0.5) * d;
        prev1 = c1;
        prev3 = c3;
    }
    // F_r and f_r at half-grid points (i + 1/2)d.
    std::vector<double> Fr(G), fr(G);
    for (int i = 0; i < G; ++i) {
        Fr[i] = chi2_cdf(r, (i + 0.5) * d);
        fr[i] = chi2_pdf(r, (i + 0.5) * d);
    }
    // F(t_i) = Σ_{j<i} mass_j [F_r(t_i - mid_j) - offset_j f_r(t_i - mid_j)]; t_i - mid_j = (i-j-1/2)d.
    law.grid_cdf_.assign(static_cast<std::size_t>(G) + 1, 0.0);
    for (int i = 1; i <= G; ++i) {
        double s = 0.0;
        for (int j = 0; j < i; ++j) {
            const int h = i - j - 1;
            s += mass[j] * (Fr[h] - offset[j] * fr[h]);
        }
        law.grid_cdf_[i] = std::clamp(s, 0.0, 1.0);
    }
    for (int i = 1; i <= G; ++i) law.grid_cdf_[i] = std::max(law.grid_cdf_[i], law.grid_cdf_[i - 1]);
    return law;
}

NullLaw NullLaw::quadratic(const Eigen::MatrixXd& phi0, double c0, double cz0, std::size_t draws,
                           std::uint64_t seed) {
    if (phi0.rows() != phi0.cols() || phi0.rows() < 1) throw ArgumentError("null_law: Phi0 must be square");
    if (!(c0 > 0.0 && c0 <= 1.0)) throw ArgumentError("null_law: c0 must lie in (0, 1]");
    if (draws < 2) throw ArgumentError("null_law: need at least two Monte Carlo draws");
    const Eigen::MatrixXd sym = 0.5 * (phi0 + phi0.transpose());
    if ((sym - phi0).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, phi0.cwiseAbs().maxCoeff()))
        throw ArgumentError("null_law: Phi0 is not symmetric");
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym).eigenvalues().minCoeff();
    if (min_eig < -1e-8 * std::max(1.0, sym.cwiseAbs().maxCoeff()))
        throw ArgumentError("null_law: Phi0 is not positive semidefinite");

    NullLaw law;
    law.kind_ = NullLawKind::Quadratic;
    law.c0_ = c0;
    law.cz0_ = cz0;
    law.phi0_ = sym;
    const Eigen::Index q = sym.rows();
    const double sc = std::sqrt(c0);
    Rng rng(seed, 0);
    law.samples_.resize(draws);
    Eigen::VectorXd u(q);
    for (std::size_t t = 0; t < draws; ++t) {
        for (Eigen::Index i = 0; i + 1 < q; ++i) u[i] = rng.normal();
        u[q - 1] = cz0 + sc * rng.normal();
        law.samples_[t] = u.dot(sym * u);
    }
    std::sort(law.samples_.begin(), law.samples_.end());
    return law;
}

std::string NullLaw::describe() const {
    std::ostringstream os;
    os.precision(6);
    if (kind_ == NullLawKind::Mixture) {
        if (r_ == 0) {
            os << c0_ << " chi2_1";
        } else {
            os << "chi2_" << r_ << " + " << c0_ << " chi2_1";
        }
    } else {
        os << "quadratic form v'Phi0 v, v ~ N((0, " << cz0_ << "), diag(I, " << c0_ << ")), " << samples_.size()
           << " draws";
    }
    return os.str();
}

double NullLaw::cdf(double t) const {
    if (!(t > 0.0)) {
        if (kind_ == NullLawKind::Quadratic) {
            const auto it = std::upper_bound(samples_.begin(), samples_.end(), t);
            return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
        }
        return 0.0;
    }
    if (kind_ == NullLawKind::Mixture) {
        if (r_ == 0) return chi2_cdf(1.0, t / c0_);
        const double pos = t / step_;
        const auto G = static_cast<double>(grid_cdf_.size() - 1);
        if (pos >= G) return 1.0;
        const auto i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return grid_cdf_[i] + frac * (grid_cdf_[i + 1] - grid_cdf_[i]);
    }
    // Empirical cdf, linearly interpolated between order statistics.
    const auto n = samples_.size();
    const auto it = std::upper_bound(samples_.begin(), samples_.end(), t);
    const auto k = static_cast<std::size_t>(it - samples_.begin());
    if (k == 0) return 0.0;
    if (k == n) return 1.0;
    const double lo = samples_[k - 1], hi = samples_[k];
    const double frac = hi > lo ? (t - lo) / (hi - lo) : 1.0;
    return (static_cast<double>(k) - 0.5 + frac) / static_cast<double>(n);
}

double NullLaw::quantile(double prob) const {
    if (!(prob >= 0.0 && prob < 1.0)) throw ArgumentError("quantile: probability must lie in [0, 1)");
    if (kind_ == NullLawKind::Mixture) {
        if (r_ == 0) return prob == 0.0 ? 0.0 : c0_ * chi2_quantile(1.0, prob);
        const auto it = std::lower_bound(grid_cdf_.begin(), grid_cdf_.end(), prob);
        if (it == grid_cdf_.end()) return step_ * static_cast<double>(grid_cdf_.size() - 1);
        const auto i = static_cast<std::size_t>(it - grid_cdf_.begin());
        if (i == 0) return 0.0;
        const double lo = grid_cdf_[i - 1], hi = grid_cdf_[i];
        const double frac = hi > lo ? (prob - lo) / (hi - lo) : 0.0;
        return step_ * (static_cast<double>(i - 1) + frac);
    }
    const auto n = static_cast<double>(samples_.size());
    const double pos = std::clamp(prob * n - 0.5, 0.0, n - 1.0);
    const auto k = static_cast<std::size_t>(pos);
    if (k + 1 >= samples_.size()) return samples_.back();
    const double frac = pos - static_cast<double>(k);
    return samples_[k] + frac * (samples_[k + 1] - samples_[k]);
}

PhiInputs phi_inputs(const PlugIn& plugin, double z0) {
    if (!plugin.system) throw ArgumentError("phi_inputs: plug-in has no inference eigensystem");
    if (!plugin.G) throw ArgumentError("phi_inputs: plug-in has no G estimate");
    const EigenSystem& sys = *plugin.system;
    const Eigen::Index p = plugin.omega.rows(), N = sys.size();
    const CompositeRule& rule = unit_interval_rule();
    Eigen::MatrixXd Gc = Eigen::MatrixXd::Zero(p, N);
    Eigen::MatrixXd VGG = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd hz(N);
    for (std::size_t i = 0; i < rule.size(); ++i) {
        const double z = rule.nodes[i];
        const double w = rule.weights[i] * sys.weight(z);
        sys.eval_all(z, hz);
        const Eigen::VectorXd Gz = plugin.G(z);
        Gc += w * Gz * hz.transpose();
        VGG += w * Gz * Gz.transpose();
    }
    const KernelHandle K(sys, plugin.lambda);
    const Eigen::ArrayXd damp = 1.0 + plugin.lambda * sys.eigenvalues().array();
    PhiInputs in;
    in.omega = plugin.omega;
    in.sigma = VGG - Gc * (1.0 / damp).matrix().asDiagonal() * Gc.transpose();
    in.A0 = K.riesz_A(Gc, z0);
    in.K00 = K.eval(z0, z0);
    return in;
}

Eigen::MatrixXd phi_lambda(const PhiInputs& in, const Hypothesis& hyp) {
    const Eigen::Index p = in.omega.rows();
    hyp.validate(p);
    if (in.sigma.rows() != p || in.A0.size() != p) throw ArgumentError("phi_lambda: plug-in dimensions differ");
    if (!(in.K00 > 0.0)) throw ArgumentError("phi_lambda: K(z0, z0) must be positive");
    const Eigen::MatrixXd S = in.omega + in.sigma;
    const Eigen::LDLT<Eigen::MatrixXd> Ssolve(S);
    const Eigen::Index k = hyp.k();

    // Lemma: H_{q,u} = (Ω+Σ)^{-1}(x - qA(z₀)), T_{q,u}(z₀) = qK(z₀,z₀) - A(z₀)ᵀH_{q,u}, u = (M_j, z₀).
    Eigen::MatrixXd H(p, k);
    Eigen::RowVectorXd T(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const Eigen::VectorXd x = hyp.M.row(j).transpose();
        H.col(j) = Ssolve.solve(x - hyp.Q[j] * in.A0);
        T[j] = hyp.Q[j] * in.K00 - in.A0.dot(H.col(j));
    }
    const Eigen::MatrixXd MK = hyp.M * H + hyp.Q * T;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(MK);
    if (lu.rank() < k) throw NumericError("phi_lambda: M_K is singular for this hypothesis");

    Eigen::MatrixXd upper = Eigen::MatrixXd::Identity(p + 1, p + 1);
    upper.topRightCorner(p, 1) = -in.A0;
    Eigen::MatrixXd scale = Eigen::MatrixXd::Zero(p + 1, p + 1);
    scale.topLeftCorner(p, p) = inv_sqrt_spd(S);
    scale(p, p) = std::sqrt(in.K00);
    const Eigen::MatrixXd Lambda = scale * upper;
    const Eigen::MatrixXd Nm = hyp.N();
    const Eigen::MatrixXd phi = Lambda * Nm.transpose() * lu.solve(Nm * Lambda.transpose());
    return 0.5 * (phi + phi.transpose());
}

Eigen::MatrixXd phi_lambda(const FitResult&, const PlugIn& plugin, const Hypothesis& hyp) {
    return phi_lambda(phi_inputs(plugin, hyp.z0), hyp);
}

double resolve_lambda(const Dataset& data, const Family& family, const EigenSystem& system,
                      const LambdaChoice& choice) {
    switch (choice.policy) {
        case LambdaPolicy::Fixed:
            if (!(choice.value > 0.0)) throw ArgumentError("lambda must be positive");
            return choice.value;
        case LambdaPolicy::Rate: return rate_lambda(data.n(), system.order());
        case LambdaPolicy::Gcv: {
            const std::vector<double> grid =
                choice.grid.empty() ? default_lambda_grid(data.n(), system.order()) : choice.grid;
            return select_lambda(data, family, system, grid).best;
        }
    }
    return 0.0;
}

double lrt_statistic(const FitResult& unconstrained, const FitResult& constrained) {
    const double n = static_cast<double>(unconstrained.n);
    double stat = -2.0 * n * (constrained.objective - unconstrained.objective);
    if (unconstrained.family.kind() == FamilyKind::Gaussian) {
        if (!(unconstrained.sigma2 > 0.0)) throw NumericError("lrt_statistic: sigma2 estimate must be positive");
        stat /= unconstrained.sigma2;
    }
    if (stat < -1e-8) {
        std::ostringstream msg;
        msg << "lrt_statistic: nesting violated (statistic " << stat << ")";
        throw NumericError(msg.str());
    }
    return std::max(stat, 0.0);
}

double lrt_statistic(const Dataset& data, const Family& family, const EigenSystem& system, double lambda,
                     const Hypothesis& hyp) {
    const FitResult u = fit(data, family, system, lambda);
    const FitResult c = fit_constrained(data, family, system, lambda, hyp);
    return lrt_statistic(u, c);
}

double c0_for(const EigenSystem& system, double lambda, double z0) {
    if (system.kind() == BasisKind::Trig) return c0_trig(system.order());
    return c0(KernelHandle(system, lambda), z0).value;
}

LrtResult test(const Dataset& data, const Family& family, const EigenSystem& system, const Hypothesis& hyp,
               double level, const LambdaChoice& choice, const TestOptions& options) {
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("test: level must lie in (0, 1)");
    hyp.validate(data.p());
    std::vector<std::string> warnings;
    const double lambda = resolve_lambda(data, family, system, choice);
    const double rate = rate_lambda(data.n(), system.order());
    if (lambda > 100.0 * rate || lambda < 0.01 * rate)
        warnings.push_back("lambda deviates from n^(-2m/(2m+1)) by more than two orders of magnitude");

    FitResult u = fit(data, family, system, lambda, options.fit);
    FitResult c = fit_constrained(data, family, system, lambda, hyp, options.fit);
    const double stat = lrt_statistic(u, c);
    const double c0v = c0_for(system, lambda, hyp.z0);

    std::optional<NullLaw> law;
    if (hyp.kind == HypothesisCase::General) {
        std::optional<PlugIn> own;
        const PlugIn* pl = options.plugin;
        if (!pl) {
            own = estimate_plugins(u, data);
            pl = &*own;
        }
        const Eigen::MatrixXd phi = phi_lambda(u, *pl, hyp);
        law = NullLaw::quadratic(phi, c0v, options.cz0.value_or(0.0), options.mc_draws, options.mc_seed);
    } else if (options.cz0 && *options.cz0 != 0.0) {
        // Non-central override: use the quadratic form with the case's Φ₀.
        Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(data.p() + 1, data.p() + 1);
        phi(data.p(), data.p()) = 1.0;
        if (hyp.kind == HypothesisCase::I) phi.setIdentity();
        if (hyp.kind == HypothesisCase::II) {
            if (!options.plugin) throw ArgumentError("test: case II with c_z0 override needs plug-ins");
            const Eigen::MatrixXd D = hyp.M.topRows(hyp.k() - 1);
            const Eigen::MatrixXd om = options.plugin->omega;
            const Eigen::MatrixXd om_is = inv_sqrt_spd(om);
            const Eigen::MatrixXd om_inv = om.ldlt().solve(Eigen::MatrixXd::Identity(om.rows(), om.cols()));
            phi.topLeftCorner(data.p(), data.p()) =
                om_is * D.transpose() * (D * om_inv * D.transpose()).ldlt().solve(D * om_is);
        }
        law = NullLaw::quadratic(phi, c0v, *options.cz0, options.mc_draws, options.mc_seed);
    } else {
        law = NullLaw::mixture(hyp.mixture_dof(), c0v);
    }

    LrtResult res(std::move(u), std::move(c), std::move(*law));
    res.statistic = stat;
    res.p_value = std::clamp(res.law.sf(stat), 0.0, 1.0);
    res.level = level;
    res.reject = res.p_value < 1.0 - level;
    res.c0 = c0v;
    res.lambda = lambda;
    res.warnings = std::move(warnings);
    for (const auto& w : res.unconstrained.warnings) res.warnings.push_back("unconstrained fit: " + w);
    for (const auto& w : res.constrained.warnings) res.warnings.push_back("constrained fit: " + w);
    return res;
}

}  // namespace splinth
