#include "splinth/eigensys.hpp"

#include "splinth/error.hpp"
#include "splinth/legendre.hpp"
#include "splinth/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace splinth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_unit(double z, const char* what) {
    if (!(z >= 0.0 && z <= 1.0)) throw ArgumentError(std::string(what) + ": z outside [0, 1]");
}

}  // namespace

std::string to_string(BasisKind kind) { return kind == BasisKind::Trig ? "trig" : "bvp"; }

BasisKind basis_kind_from_string(const std::string& text) {
    if (text == "trig") return BasisKind::Trig;
    if (text == "bvp") return BasisKind::Bvp;
    throw ArgumentError("unknown basis kind '" + text + "' (expected trig|bvp)");
}

WeightTable::WeightTable(std::vector<std::pair<double, double>> knots) : knots_(std::move(knots)) {
    if (knots_.empty()) throw ArgumentError("WeightTable: no knots");
    std::sort(knots_.begin(), knots_.end());
    for (const auto& [z, w] : knots_) {
        if (!std::isfinite(z) || !std::isfinite(w)) throw ArgumentError("WeightTable: non-finite knot");
        if (!(w > 0.0)) throw ArgumentError("WeightTable: weight must be positive");
    }
    for (std::size_t i = 1; i < knots_.size(); ++i)
        if (knots_[i].first == knots_[i - 1].first)
            throw ArgumentError("WeightTable: duplicate z knot");
}

WeightTable WeightTable::constant(double value) { return WeightTable({{0.0, value}, {1.0, value}}); }

double WeightTable::operator()(double z) const {
    if (z <= knots_.front().first) return knots_.front().second;
    if (z >= knots_.back().first) return knots_.back().second;
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), std::make_pair(z, -1.0),
                                     [](const auto& a, const auto& b) { return a.first < b.first; });
    const auto& [z1, w1] = *it;
    const auto& [z0, w0] = *(it - 1);
    const double t = (z - z0) / (z1 - z0);
    return w0 + t * (w1 - w0);
}

struct EigenSystem::Impl {
    BasisKind kind = BasisKind::Trig;
    int m = 2;
    int n = 1;
    double sigma = 1.0;
    int grid = 0;
    int null_dim = 1;
    WeightTable weight;
    Eigen::VectorXd gamma;
    // BVP: h_ν(z) = Σ_j coef(ν, j) P_j(2z - 1)
    Eigen::MatrixXd coef;
    int degree = 0;
};

EigenSystem::EigenSystem(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

EigenSystem EigenSystem::trig(int m, double sigma, int n_basis) {
    if (m < 1) throw ArgumentError("build_trig: m must be >= 1");
    if (n_basis < 1) throw ArgumentError("build_trig: N must be >= 1");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ArgumentError("build_trig: sigma must be positive");
    auto impl = std::make_shared<Impl>();
    impl->kind = BasisKind::Trig;
    impl->m = m;
    impl->n = n_basis;
    impl->sigma = sigma;
    impl->grid = static_cast<int>(unit_interval_rule().size());
    impl->null_dim = 1;
    impl->weight = WeightTable::constant(1.0 / (sigma * sigma));
    impl->gamma.resize(n_basis);
    impl->gamma[0] = 0.0;
    for (int nu = 1; nu < n_basis; ++nu) {
        const int k = (nu + 1) / 2;
        impl->gamma[nu] = sigma * sigma * std::pow(kTwoPi * k, 2 * m);
    }
    return EigenSystem(std::move(impl));
}

EigenSystem EigenSystem::bvp(int m, const WeightTable& weight, int n_basis, int grid) {
    if (m < 1) throw ArgumentError("build_bvp: m must be >= 1");
    if (n_basis < 1) throw ArgumentError("build_bvp: N must be >= 1");
    if (grid < 512) throw ArgumentError("build_bvp: grid must be >= 512");

    // Rayleigh–Ritz on h = p + I^m u with p a polynomial of degree < m and u a Legendre series:
    // J(h, h) = ‖u‖² in the orthonormal Legendre basis, so the penalty is the identity and the
    // eigenvalues of the projected V-Gram matrix are 1/γ_ν for the non-null eigenfunctions.
    const int panels = (grid + 63) / 64;
    const CompositeRule rule = composite_gauss_legendre(0.0, 1.0, panels, 64);
    const auto q = static_cast<Eigen::Index>(rule.size());

    const int n_free = std::max(0, n_basis - m);
    const int n_u = std::max(2 * n_free + 32, 48);
    const int degree = n_u - 1 + m;

    Eigen::VectorXd wq(q);
    for (Eigen::Index i = 0; i < q; ++i) {
        const double w = weight(rule.nodes[i]);
        if (!(w > 0.0)) throw ArgumentError("build_bvp: weight must be positive on [0, 1]");
        wq[i] = rule.weights[i] * w;
    }

    Eigen::MatrixXd leg(q, degree + 1);
    {
        Eigen::VectorXd row;
        for (Eigen::Index i = 0; i < q; ++i) {
            legendre::evaluate_all(rule.nodes[i], degree, row);
            leg.row(i) = row.transpose();
        }
    }

    // V-orthonormal basis of the null space {polynomials of degree < m}.
    Eigen::MatrixXd null_coef = Eigen::MatrixXd::Zero(degree + 1, m);
    for (int j = 0; j < m; ++j) null_coef(j, j) = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
        for (int j = 0; j < m; ++j) {
            for (int i = 0; i < j; ++i) {
                const Eigen::VectorXd vi = leg * null_coef.col(i);
                const Eigen::VectorXd vj = leg * null_coef.col(j);
                const double proj = (vi.array() * vj.array() * wq.array()).sum();
                null_coef.col(j) -= proj * null_coef.col(i);
            }
            const Eigen::VectorXd vj = leg * null_coef.col(j);
            const double norm = std::sqrt((vj.array().square() * wq.array()).sum());
            null_coef.col(j) /= norm;
        }
    }
    const Eigen::MatrixXd null_vals = leg * null_coef;

    // Coefficients of I^m L̃_j for the orthonormal Legendre functions L̃_j.
    Eigen::MatrixXd int_coef = Eigen::MatrixXd::Zero(degree + 1, n_u);
    for (int j = 0; j < n_u; ++j) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(j + 1);
        c[j] = legendre::orthonormal_scale(j);
        for (int r = 0; r < m; ++r) c = legendre::integrate(c);
        int_coef.col(j).head(c.size()) = c;
    }
    Eigen::MatrixXd vals = leg * int_coef;
    // Remove the V-projection onto the null space (coefficients and values alike).
    const Eigen::MatrixXd proj = null_vals.transpose() * wq.asDiagonal() * vals;
    int_coef -= null_coef * proj;
    vals -= null_vals * proj;

    const Eigen::MatrixXd gram = vals.transpose() * wq.asDiagonal() * vals;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (gram + gram.transpose()));
    if (solver.info() != Eigen::Success) throw NumericError("build_bvp: eigensolver failed");
    const Eigen::VectorXd& mu = solver.eigenvalues();
    const double mu_max = mu.maxCoeff();

    auto impl = std::make_shared<Impl>();
    impl->kind = BasisKind::Bvp;
    impl->m = m;
    impl->n = n_basis;
    impl->sigma = 1.0;
    impl->grid = static_cast<int>(q);
    impl->null_dim = std::min(m, n_basis);
    impl->weight = weight;
    impl->degree = degree;
    impl->gamma.resize(n_basis);
    impl->coef.resize(n_basis, degree + 1);

    for (int nu = 0; nu < impl->null_dim; ++nu) {
        impl->gamma[nu] = 0.0;
        impl->coef.row(nu) = null_coef.col(nu).transpose();
    }
    for (int r = 0; r < n_free; ++r) {
        const Eigen::Index idx = n_u - 1 - r;  // descending μ
        const double mu_r = mu[idx];
        if (!(mu_r > 1e-14 * mu_max))
            throw NumericError("build_bvp: non-positive eigenvalue at index " + std::to_string(m + r));
        impl->gamma[m + r] = 1.0 / mu_r;
        impl->coef.row(m + r) = (int_coef * solver.eigenvectors().col(idx)).transpose() / std::sqrt(mu_r);
    }

    // Sign convention: h_ν(0) > 0, or h_ν'(0) > 0 when h_ν vanishes at 0.
    for (int nu = 0; nu < n_basis; ++nu) {
        const Eigen::VectorXd c = impl->coef.row(nu).transpose();
        double s = legendre::evaluate(c, 0.0);
        const double scale = c.cwiseAbs().sum();
        if (std::abs(s) < 1e-8 * scale) s = legendre::evaluate(legendre::differentiate(c), 0.0);
        if (s < 0.0) impl->coef.row(nu) *= -1.0;
    }
    return EigenSystem(std::move(impl));
}

BasisKind EigenSystem::kind() const { return impl_->kind; }
int EigenSystem::order() const { return impl_->m; }
int EigenSystem::size() const { return impl_->n; }
double EigenSystem::sigma() const { return impl_->sigma; }
int EigenSystem::grid() const { return impl_->grid; }
int EigenSystem::null_dim() const { return impl_->null_dim; }
const WeightTable& EigenSystem::weight_table() const { return impl_->weight; }
double EigenSystem::weight(double z) const { return impl_->weight(z); }
const Eigen::VectorXd& EigenSystem::eigenvalues() const { return impl_->gamma; }

double EigenSystem::eval(int nu, double z) const {
    if (nu < 0 || nu >= impl_->n) throw ArgumentError("eval: basis index out of range");
    if (impl_->kind == BasisKind::Trig) {
        const double s = impl_->sigma;
        if (nu == 0) return s;
        const int k = (nu + 1) / 2;
        const double arg = kTwoPi * k * z;
        return std::numbers::sqrt2 * s * (nu % 2 == 1 ? std::sin(arg) : std::cos(arg));
    }
    return legendre::evaluate(impl_->coef.row(nu).transpose(), z);
}

void EigenSystem::eval_all(double z, Eigen::Ref<Eigen::VectorXd> out) const {
    const int n = impl_->n;
    if (out.size() != n) throw ArgumentError("eval_all: output size mismatch");
    if (impl_->kind == BasisKind::Trig) {
        const double s = impl_->sigma;
        const double amp = std::numbers::sqrt2 * s;
        out[0] = s;
        const double c1 = std::cos(kTwoPi * z), s1 = std::sin(kTwoPi * z);
        double ck = c1, sk = s1;
        for (int k = 1; 2 * k - 1 < n; ++k) {
            if (k > 1 && k % 64 == 0) {
                // re-anchor the rotation recurrence
                ck = std::cos(kTwoPi * k * z);
                sk = std::sin(kTwoPi * k * z);
            }
            out[2 * k - 1] = amp * sk;
            if (2 * k < n) out[2 * k] = amp * ck;
            const double cn = ck * c1 - sk * s1;
            const double sn = sk * c1 + ck * s1;
            ck = cn;
            sk = sn;
        }
        return;
    }
    thread_local Eigen::VectorXd leg;
    legendre::evaluate_all(z, impl_->degree, leg);
    out.noalias() = impl_->coef * leg;
}

Eigen::VectorXd EigenSystem::eval_all(double z) const {
    Eigen::VectorXd out(impl_->n);
    eval_all(z, out);
    return out;
}

Eigen::MatrixXd EigenSystem::design(std::span<const double> z) const {
    const auto n = static_cast<Eigen::Index>(z.size());
    Eigen::MatrixXd phi(n, impl_->n);
    Eigen::VectorXd row(impl_->n);
    for (Eigen::Index i = 0; i < n; ++i) {
        eval_all(z[i], row);
        phi.row(i) = row.transpose();
    }
    return phi;
}

double EigenSystem::derivative(int nu, double z, int order) const {
    if (nu < 0 || nu >= impl_->n) throw ArgumentError("derivative: basis index out of range");
    if (order < 0) throw ArgumentError("derivative: negative order");
    if (order == 0) return eval(nu, z);
    if (impl_->kind == BasisKind::Trig) {
        if (nu == 0) return 0.0;
        const int k = (nu + 1) / 2;
        const double omega = kTwoPi * k;
        const double arg = omega * z;
        // d^r/dz^r of sin/cos advances the phase by rπ/2.
        const double phase = order * std::numbers::pi / 2.0;
        const double base = nu % 2 == 1 ? std::sin(arg + phase) : std::cos(arg + phase);
        return std::numbers::sqrt2 * impl_->sigma * std::pow(omega, order) * base;
    }
    Eigen::VectorXd c = impl_->coef.row(nu).transpose();
    for (int r = 0; r < order; ++r) c = legendre::differentiate(c);
    return legendre::evaluate(c, z);
}

double EigenSystem::eval_series(const Eigen::VectorXd& coef, double z) const {
    if (coef.size() != impl_->n) throw ArgumentError("eval_series: coefficient length mismatch");
    return eval_all(z).dot(coef);
}

Eigen::VectorXd EigenSystem::project(const std::function<double(double)>& f) const {
    const CompositeRule& rule = unit_interval_rule();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(impl_->n);
    Eigen::VectorXd row(impl_->n);
    for (std::size_t i = 0; i < rule.size(); ++i) {
        const double z = rule.nodes[i];
        eval_all(z, row);
        out += rule.weights[i] * weight(z) * f(z) * row;
    }
    return out;
}

EigenSystem EigenSystem::resized(int n_basis) const {
    if (impl_->kind == BasisKind::Trig) return trig(impl_->m, impl_->sigma, n_basis);
    return bvp(impl_->m, impl_->weight, n_basis, impl_->grid);
}

int trig_truncation(int m, double sigma, double lambda, double threshold, int cap) {
    if (!(lambda > 0.0)) throw ArgumentError("trig_truncation: lambda must be positive");
    // λσ²(2πK)^{2m} ≥ threshold
    const double k = std::pow(threshold / (lambda * sigma * sigma), 1.0 / (2.0 * m)) / kTwoPi;
    const double n = 2.0 * std::ceil(k) + 1.0;
    if (n >= cap) return cap % 2 == 1 ? cap : cap - 1;
    return static_cast<int>(n);
}

KernelHandle::KernelHandle(EigenSystem system, double lambda) : system_(std::move(system)), lambda_(lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ArgumentError("kernel: lambda must be positive");
}

KernelHandle kernel(const EigenSystem& system, double lambda) { return KernelHandle(system, lambda); }

double KernelHandle::bandwidth() const { return std::pow(lambda_, 1.0 / (2.0 * system_.order())); }

Eigen::VectorXd KernelHandle::kernel_coef(double z) const {
    check_unit(z, "kernel");
    const Eigen::VectorXd& g = system_.eigenvalues();
    return system_.eval_all(z).cwiseQuotient((1.0 + lambda_ * g.array()).matrix());
}

double KernelHandle::eval(double z, double zp) const {
    check_unit(z, "kernel eval");
    check_unit(zp, "kernel eval");
    const Eigen::VectorXd& g = system_.eigenvalues();
    const Eigen::VectorXd a = system_.eval_all(z);
    const Eigen::VectorXd b = system_.eval_all(zp);
    return (a.array() * b.array() / (1.0 + lambda_ * g.array())).sum();
}

Eigen::VectorXd KernelHandle::w_lambda(const Eigen::VectorXd& coef) const {
    const Eigen::VectorXd& g = system_.eigenvalues();
    if (coef.size() != g.size()) throw ArgumentError("w_lambda: coefficient length mismatch");
    const Eigen::ArrayXd lg = lambda_ * g.array();
    return (coef.array() * lg / (1.0 + lg)).matrix();
}

double KernelHandle::sigma_z0_sq(double z0) const {
    check_unit(z0, "sigma_z0_sq");
    const Eigen::VectorXd& g = system_.eigenvalues();
    const Eigen::ArrayXd h = system_.eval_all(z0).array();
    const Eigen::ArrayXd d = 1.0 + lambda_ * g.array();
    return bandwidth() * (h.square() / d.square()).sum();
}

Eigen::VectorXd KernelHandle::riesz_A(const Eigen::MatrixXd& g_coef, double z) const {
    check_unit(z, "riesz_A");
    if (g_coef.cols() != system_.size()) throw ArgumentError("riesz_A: coefficient matrix must be p x N");
    return g_coef * kernel_coef(z);
}

Eigen::VectorXd KernelHandle::w_lambda_A(const Eigen::MatrixXd& g_coef, double z) const {
    check_unit(z, "w_lambda_A");
    if (g_coef.cols() != system_.size()) throw ArgumentError("w_lambda_A: coefficient matrix must be p x N");
    const Eigen::ArrayXd lg = lambda_ * system_.eigenvalues().array();
    const Eigen::ArrayXd factor = lg / (1.0 + lg).square();
    return g_coef * (system_.eval_all(z).array() * factor).matrix();
}

double q_sum(const EigenSystem& system, double lambda, double z, int l) {
    check_unit(z, "q_sum");
    const Eigen::ArrayXd h = system.eval_all(z).array();
    const Eigen::ArrayXd d = 1.0 + lambda * system.eigenvalues().array();
    return (h.square() / d.pow(l)).sum();
}

C0Estimate c0(const KernelHandle& handle, double z0) { return c0(handle, z0, handle.lambda()); }

C0Estimate c0(const KernelHandle& handle, double z0, double lambda0) {
    check_unit(z0, "c0");
    if (!(lambda0 > 0.0)) throw ArgumentError("c0: lambda0 must be positive");
    constexpr int kSteps = 7;
    const EigenSystem& base = handle.system();
    {
        // Start low enough that the finest bandwidth resolves the oscillation of the lattice sum;
        // a BVP ladder must also stay within the retained spectrum.
        const int m = base.order();
        const double h_min = std::min(0.02, 0.1 * std::sin(std::numbers::pi / (4.0 * m)));
        const double span = std::pow(4.0, kSteps - 1);
        lambda0 = std::min(lambda0, std::pow(h_min, 2.0 * m) * span / (base.sigma() * base.sigma()));
        if (base.kind() == BasisKind::Bvp && base.eigenvalue(base.size() - 1) > 0.0)
            lambda0 = std::max(lambda0, 1e4 * span / base.eigenvalue(base.size() - 1));
    }
    const double lambda_min = lambda0 * std::pow(4.0, -(kSteps - 1));

    C0Estimate est;
    EigenSystem sys = base;
    if (base.kind() == BasisKind::Trig) {
        constexpr double kTail = 1e8;
        const int need = trig_truncation(base.order(), base.sigma(), lambda_min, kTail, 200000);
        if (need > base.size()) sys = base.resized(need);
        const int top = sys.size() - 1;
        est.truncation_ok = lambda_min * sys.eigenvalue(top) >= kTail * (1.0 - 1e-12);
    } else {
        est.truncation_ok = lambda_min * base.eigenvalue(base.size() - 1) >= 1e4;
    }

    for (int j = 0; j < kSteps; ++j) {
        const double lam = lambda0 * std::pow(4.0, -j);
        est.lambdas.push_back(lam);
        est.ratios.push_back(q_sum(sys, lam, z0, 2) / q_sum(sys, lam, z0, 1));
    }
    const double r0 = est.ratios[kSteps - 3], r1 = est.ratios[kSteps - 2], r2 = est.ratios[kSteps - 1];
    const double d1 = r1 - r0, d2 = r2 - r1;
    double value = r2;
    const double denom = d2 - d1;
    // Aitken Δ² on the geometric ladder; fall back to the last ratio when it is ill-posed.
    if (d1 * d2 > 0.0 && std::abs(d2) < std::abs(d1) && std::abs(denom) > 1e-14 * std::abs(r2)) {
        const double extrap = r2 - d2 * d2 / denom;
        if (std::abs(extrap - r2) <= 10.0 * std::abs(d2)) value = extrap;
    }
    est.value = value;
    est.converged = std::abs(d2) <= 1e-2 * std::abs(r2);
    return est;
}

double c0_trig(int m) {
    if (m < 1) throw ArgumentError("c0_trig: m must be >= 1");
    return 1.0 - 1.0 / (2.0 * m);
}

}  // namespace splinth
