#include "splinth/fitter.hpp"

#include "splinth/error.hpp"
#include "splinth/quadrature.hpp"
#include "splinth/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace splinth {

namespace {

double max_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

/// Solves A x = b for symmetric positive definite A with Jacobi scaling; on failure retries with
/// A + 1e-10·I and records a warning.
Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& A, const Eigen::MatrixXd& b, std::vector<std::string>* warnings) {
    const Eigen::Index k = A.rows();
    Eigen::VectorXd d(k);
    for (Eigen::Index i = 0; i < k; ++i) d[i] = A(i, i) > 0.0 ? 1.0 / std::sqrt(A(i, i)) : 1.0;
    Eigen::MatrixXd scaled = d.asDiagonal() * A * d.asDiagonal();
    Eigen::LLT<Eigen::MatrixXd> llt(scaled);
    if (llt.info() != Eigen::Success) {
        if (warnings) warnings->push_back("singular Newton system regularized by 1e-10 * I");
        scaled = d.asDiagonal() * (A + 1e-10 * Eigen::MatrixXd::Identity(k, k)) * d.asDiagonal();
        llt.compute(scaled);
        if (llt.info() != Eigen::Success) throw NumericError("Newton system is not positive definite");
    }
    return d.asDiagonal() * llt.solve(d.asDiagonal() * b);
}

/// DᵀWD/n for a diagonal weight vector.
Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& D, const Eigen::VectorXd& w) {
    const double n = static_cast<double>(D.rows());
    const Eigen::MatrixXd Dw = D.array().colwise() * w.array().sqrt();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(D.cols(), D.cols());
    G.selfadjointView<Eigen::Lower>().rankUpdate(Dw.transpose(), 1.0 / n);
    return G.selfadjointView<Eigen::Lower>();
}

struct NewtonOutcome {
    Eigen::VectorXd beta;
    int iterations = 0;
    double grad_norm = 0.0;
};

/// Damped Newton on β = β₀ + Zξ (Z empty for the unconstrained problem).
NewtonOutcome newton(const PenalizedProblem& prob, Eigen::VectorXd beta, const Eigen::MatrixXd* Z,
                     const FitOptions& opt, std::vector<std::string>& warnings) {
    NewtonOutcome out;
    double f = prob.value(beta);
    int small_steps = 0;
    for (int it = 0; it < opt.max_iter; ++it) {
        const Eigen::VectorXd g = prob.gradient(beta);
        const Eigen::VectorXd gr = Z ? Eigen::VectorXd(Z->transpose() * g) : g;
        out.grad_norm = max_norm(gr);
        out.iterations = it;
        if (out.grad_norm < opt.grad_tol) {
            out.beta = std::move(beta);
            return out;
        }
        const Eigen::MatrixXd H = -prob.hessian(beta);
        Eigen::VectorXd step;
        if (Z) {
            const Eigen::MatrixXd Hr = Z->transpose() * H * *Z;
            step = *Z * solve_spd(Hr, gr, &warnings);
        } else {
            step = solve_spd(H, gr, &warnings);
        }
        double t = 1.0;
        bool accepted = false;
        Eigen::VectorXd cand;
        // Predicted ascent below the rounding level of the objective: take the full step.
        const double rounding = 1e3 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f));
        if (0.5 * gr.dot(Z ? Eigen::VectorXd(Z->transpose() * step) : step) < rounding) {
            cand = beta + step;
            const double fc = prob.value(cand);
            if (std::isfinite(fc) && fc >= f - rounding) {
                f = std::max(f, fc);
                accepted = true;
            }
        }
        for (int halving = 0; !accepted && halving <= opt.max_halvings; ++halving) {
            cand = beta + t * step;
            const double fc = prob.value(cand);
            if (std::isfinite(fc) && fc >= f) {
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        const double step_norm = t * step.norm();
        if (!accepted) {
            // No ascent at machine precision: the iterate is already optimal to rounding.
            if (out.grad_norm < 1e3 * opt.grad_tol || step.norm() < 1e-8 * (1.0 + beta.norm())) {
                out.beta = std::move(beta);
                return out;
            }
            std::ostringstream msg;
            msg << "line search failed at iteration " << it << " (gradient max-norm " << out.grad_norm << ")";
            throw NumericError(msg.str());
        }
        beta = std::move(cand);
        if (step_norm < opt.step_tol) {
            const Eigen::VectorXd g2 = prob.gradient(beta);
            out.grad_norm = max_norm(Z ? Eigen::VectorXd(Z->transpose() * g2) : g2);
            out.iterations = it + 1;
            if (out.grad_norm < opt.grad_tol || ++small_steps >= 5) {
                out.beta = std::move(beta);
                return out;
            }
        }
    }
    std::ostringstream msg;
    msg << "Newton did not converge in " << opt.max_iter << " iterations (gradient max-norm " << out.grad_norm
        << ")";
    throw NumericError(msg.str());
}

/// Working-problem trace tr((DᵀWD/n + λP)^{-1} DᵀWD/n) with Fisher weights at β.
double working_trace(const PenalizedProblem& prob, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd a = prob.design() * beta;
    Eigen::VectorXd w(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) w[i] = prob.family().fisher_weight(a[i]);
    const Eigen::MatrixXd S = weighted_gram(prob.design(), w);
    Eigen::MatrixXd A = S;
    A.diagonal() += prob.lambda() * prob.penalty();
    return solve_spd(A, S, nullptr).trace();
}

FitResult make_result(const PenalizedProblem& prob, const Family& family, const EigenSystem& system,
                      const Eigen::VectorXd& beta) {
    FitResult r(family, system);
    const Eigen::Index p = prob.data().p();
    r.theta = beta.head(p);
    r.coef = beta.tail(beta.size() - p);
    r.lambda = prob.lambda();
    r.n = prob.data().n();
    r.h = std::pow(prob.lambda(), 1.0 / (2.0 * system.order()));
    r.objective = prob.value(beta);
    return r;
}

struct GaussianSystem {
    Eigen::MatrixXd S;  // DᵀD/n
    Eigen::VectorXd b;  // Dᵀy/n
};

GaussianSystem gaussian_system(const PenalizedProblem& prob) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(prob.design().rows());
    GaussianSystem gs;
    gs.S = weighted_gram(prob.design(), ones);
    gs.b = prob.design().transpose() * prob.data().y / static_cast<double>(prob.design().rows());
    return gs;
}

Eigen::MatrixXd constraint_matrix(const Hypothesis& hyp, const EigenSystem& system) {
    const Eigen::Index p = hyp.M.cols();
    const Eigen::VectorXd phi = system.eval_all(hyp.z0);
    Eigen::MatrixXd C(hyp.k(), p + system.size());
    C.leftCols(p) = hyp.M;
    C.rightCols(system.size()) = hyp.Q * phi.transpose();
    return C;
}

}  // namespace

void Dataset::validate(const Family& family, int null_dim) const {
    const Eigen::Index rows = y.size();
    if (rows == 0) throw DataError("dataset: no data rows");
    if (X.rows() != rows || z.size() != rows) throw DataError("dataset: y, X and z row counts differ");
    if (rows <= X.cols() + null_dim)
        throw DataError("dataset: need n > p + null-space dimension (n = " + std::to_string(rows) + ")");
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (!std::isfinite(y[i]) || !std::isfinite(z[i]) || !X.row(i).allFinite())
            throw DataError("dataset: non-finite entry in row " + std::to_string(i + 1));
        if (z[i] < 0.0 || z[i] > 1.0) throw DataError("dataset: z outside [0, 1] in row " + std::to_string(i + 1));
        if (!family.in_support(y[i]))
            throw DataError("dataset: response outside the " + family.name() + " support in row " +
                            std::to_string(i + 1));
    }
}

PenalizedProblem::PenalizedProblem(const Dataset& data, const Family& family, const EigenSystem& system,
                                   double lambda)
    : data_(&data), family_(family), lambda_(lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ArgumentError("fit: lambda must be positive");
    const Eigen::Index n = data.n(), p = data.p(), N = system.size();
    design_.resize(n, p + N);
    design_.leftCols(p) = data.X;
    design_.rightCols(N) = system.design(std::span<const double>(data.z.data(), static_cast<std::size_t>(n)));
    penalty_ = Eigen::VectorXd::Zero(p + N);
    penalty_.tail(N) = system.eigenvalues();
}

double PenalizedProblem::value(const Eigen::VectorXd& beta) const {
    const Eigen::VectorXd a = design_ * beta;
    const Eigen::VectorXd& y = data_->y;
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) s += family_.value(y[i], a[i]);
    const double pen = (penalty_.array() * beta.array().square()).sum();
    return s / static_cast<double>(a.size()) - 0.5 * lambda_ * pen;
}

Eigen::VectorXd PenalizedProblem::gradient(const Eigen::VectorXd& beta) const {
    const Eigen::VectorXd a = design_ * beta;
    const Eigen::VectorXd& y = data_->y;
    Eigen::VectorXd r(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) r[i] = family_.grad(y[i], a[i]);
    return design_.transpose() * r / static_cast<double>(a.size()) -
           lambda_ * (penalty_.array() * beta.array()).matrix();
}

Eigen::MatrixXd PenalizedProblem::hessian(const Eigen::VectorXd& beta) const {
    const Eigen::VectorXd a = design_ * beta;
    const Eigen::VectorXd& y = data_->y;
    Eigen::VectorXd w(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) w[i] = -family_.hess(y[i], a[i]);
    Eigen::MatrixXd H = -weighted_gram(design_, w);
    H.diagonal() -= lambda_ * penalty_;
    return H;
}

FitResult fit(const Dataset& data, const Family& family, const EigenSystem& system, double lambda,
              const FitOptions& options) {
    data.validate(family, system.null_dim());
    const PenalizedProblem prob(data, family, system, lambda);
    std::vector<std::string> warnings;

    if (family.kind() == FamilyKind::Gaussian) {
        const GaussianSystem gs = gaussian_system(prob);
        Eigen::MatrixXd A = gs.S;
        A.diagonal() += lambda * prob.penalty();
        const Eigen::VectorXd beta = solve_spd(A, gs.b, &warnings);
        FitResult r = make_result(prob, family, system, beta);
        r.grad_norm = max_norm(prob.gradient(beta));
        r.trace = solve_spd(A, gs.S, nullptr).trace();
        r.warnings = std::move(warnings);
        const double n = static_cast<double>(data.n());
        if (r.trace < n) {
            const double rss = (data.y - prob.design() * beta).squaredNorm();
            r.sigma2 = rss / (n - r.trace);
        }
        return r;
    }

    const NewtonOutcome out = newton(prob, Eigen::VectorXd::Zero(prob.dim()), nullptr, options, warnings);
    FitResult r = make_result(prob, family, system, out.beta);
    r.iterations = out.iterations;
    r.grad_norm = out.grad_norm;
    r.trace = working_trace(prob, out.beta);
    r.warnings = std::move(warnings);
    return r;
}

FitResult fit_constrained(const Dataset& data, const Family& family, const EigenSystem& system, double lambda,
                          const Hypothesis& hyp, const FitOptions& options) {
    data.validate(family, system.null_dim());
    hyp.validate(data.p());
    const PenalizedProblem prob(data, family, system, lambda);
    const Eigen::MatrixXd C = constraint_matrix(hyp, system);
    const Eigen::Index k = C.rows(), dim = C.cols();

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
    const Eigen::VectorXd sv = svd.singularValues();
    if ((sv.array() > 1e-10 * std::max(1.0, sv[0])).count() < k)
        throw NumericError("fit_constrained: constraint matrix [M | Q phi(z0)^T] is rank deficient");

    // Cᵀ = [Q1 Q2] [R; 0]: particular solution Q1 R^{-T} α, null space Q2.
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(C.transpose());
    const Eigen::MatrixXd Qfull = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    const Eigen::VectorXd u = R.transpose().triangularView<Eigen::Lower>().solve(hyp.alpha);
    const Eigen::VectorXd beta_p = Qfull.leftCols(k) * u;
    const Eigen::MatrixXd Z = Qfull.rightCols(dim - k);

    std::vector<std::string> warnings;
    Eigen::VectorXd beta;
    int iterations = 0;
    double grad_norm = 0.0;
    if (family.kind() == FamilyKind::Gaussian) {
        const GaussianSystem gs = gaussian_system(prob);
        Eigen::MatrixXd A = gs.S;
        A.diagonal() += lambda * prob.penalty();
        const Eigen::MatrixXd Ar = Z.transpose() * A * Z;
        const Eigen::VectorXd rhs = Z.transpose() * (gs.b - A * beta_p);
        beta = beta_p + Z * solve_spd(Ar, rhs, &warnings);
        grad_norm = max_norm(Z.transpose() * prob.gradient(beta));
    } else {
        const NewtonOutcome out = newton(prob, beta_p, &Z, options, warnings);
        beta = out.beta;
        iterations = out.iterations;
        grad_norm = out.grad_norm;
    }
    const double resid = max_norm(C * beta - hyp.alpha);
    if (resid > 1e-10 * std::max(1.0, max_norm(hyp.alpha))) {
        // One projection step back onto the constraint set.
        beta -= C.transpose() * (C * C.transpose()).ldlt().solve(C * beta - hyp.alpha);
    }
    FitResult r = make_result(prob, family, system, beta);
    r.iterations = iterations;
    r.grad_norm = grad_norm;
    r.warnings = std::move(warnings);
    return r;
}

double rate_lambda(Eigen::Index n, int m) {
    return std::pow(static_cast<double>(n), -2.0 * m / (2.0 * m + 1.0));
}

std::vector<double> default_lambda_grid(Eigen::Index n, int m, int count) {
    if (count < 1) throw ArgumentError("lambda grid: count must be >= 1");
    const double base = rate_lambda(n, m);
    std::vector<double> grid(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double e = count == 1 ? -4.0 : -10.0 + 12.0 * i / (count - 1.0);
        grid[static_cast<std::size_t>(i)] = base * std::pow(10.0, e);
    }
    return grid;
}

int default_basis_size(Eigen::Index n, int m, double sigma) {
    const int cap = static_cast<int>(std::min<Eigen::Index>(2000, n));
    int N = trig_truncation(m, sigma, 1e-4 * rate_lambda(n, m), 1e4, std::max(1, cap));
    if (N % 2 == 0) --N;
    return std::max(1, N);
}

GcvTable select_lambda(const Dataset& data, const Family& family, const EigenSystem& system,
                       std::span<const double> grid, const FitOptions& options) {
    if (grid.empty()) throw ArgumentError("select_lambda: empty grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0)) throw ArgumentError("select_lambda: grid values must be positive");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw ArgumentError("select_lambda: grid must be sorted ascending");
    }
    data.validate(family, system.null_dim());
    const double n = static_cast<double>(data.n());

    GcvTable table;
    table.lambdas.assign(grid.begin(), grid.end());
    table.scores.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
    table.traces.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());

    const PenalizedProblem prob(data, family, system, grid.front());

    if (family.kind() == FamilyKind::Gaussian) {
        // Simultaneous diagonalization of S and P through B = S + τP:
        // with C = L^{-1} S L^{-T} = U diag(s) Uᵀ, S + λP = L U diag(s + (λ/τ)(1 - s)) Uᵀ Lᵀ.
        const GaussianSystem gs = gaussian_system(prob);
        const double tau = std::sqrt(grid.front() * grid.back());
        Eigen::MatrixXd B = gs.S;
        B.diagonal() += tau * prob.penalty();
        const Eigen::Index k = B.rows();
        Eigen::VectorXd d(k);
        for (Eigen::Index i = 0; i < k; ++i) d[i] = 1.0 / std::sqrt(B(i, i));
        const Eigen::MatrixXd Bs = d.asDiagonal() * B * d.asDiagonal();
        Eigen::LLT<Eigen::MatrixXd> llt(Bs);
        if (llt.info() != Eigen::Success) throw NumericError("select_lambda: S + tau P is not positive definite");
        const Eigen::MatrixXd L = llt.matrixL();
        const Eigen::MatrixXd Ss = d.asDiagonal() * gs.S * d.asDiagonal();
        Eigen::MatrixXd Cm = L.triangularView<Eigen::Lower>().solve(Ss);
        Cm = L.triangularView<Eigen::Lower>().solve(Cm.transpose()).transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Cm + Cm.transpose()));
        const Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseMin(1.0);
        const Eigen::VectorXd r =
            es.eigenvectors().transpose() * L.triangularView<Eigen::Lower>().solve(d.asDiagonal() * gs.b);
        const double yy = data.y.squaredNorm() / n;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const double rho = grid[j] / tau;
            const Eigen::ArrayXd dd = s.array() + rho * (1.0 - s.array());
            const double tr = (s.array() / dd).sum();
            const double rss_n =
                std::max(0.0, yy - (r.array().square() * (2.0 / dd - s.array() / dd.square())).sum());
            table.traces[j] = tr;
            if (tr >= n) {
                table.warnings.push_back("trace A(lambda) >= n at lambda = " + std::to_string(grid[j]) + "; skipped");
                continue;
            }
            table.scores[j] = n * n * rss_n / ((n - tr) * (n - tr));
        }
    } else {
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(prob.dim());
        for (std::size_t jj = grid.size(); jj-- > 0;) {
            const PenalizedProblem pj(data, family, system, grid[jj]);
            std::vector<std::string> warnings;
            try {
                beta = newton(pj, beta, nullptr, options, warnings).beta;
            } catch (const NumericError& e) {
                table.warnings.push_back("fit failed at lambda = " + std::to_string(grid[jj]) + ": " + e.what());
                beta.setZero();
                continue;
            }
            const double tr = working_trace(pj, beta);
            table.traces[jj] = tr;
            if (tr >= n) {
                table.warnings.push_back("trace A(lambda) >= n at lambda = " + std::to_string(grid[jj]) + "; skipped");
                continue;
            }
            const Eigen::VectorXd a = pj.design() * beta;
            double rss = 0.0;
            for (Eigen::Index i = 0; i < a.size(); ++i) {
                const double w = family.fisher_weight(a[i]);
                const double e = family.grad(data.y[i], a[i]);
                if (w > 0.0) rss += e * e / w;
            }
            table.scores[jj] = n * rss / ((n - tr) * (n - tr));
        }
    }

    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (std::isfinite(table.scores[j]) && table.scores[j] < best) {
            best = table.scores[j];
            table.best = grid[j];
            any = true;
        }
    }
    if (!any) throw NumericError("select_lambda: no admissible lambda on the grid");
    return table;
}

double sigma2_hat(const FitResult& fit, const Dataset& data) {
    if (fit.family.kind() != FamilyKind::Gaussian) throw UnsupportedError("sigma2_hat: Gaussian family only");
    const double n = static_cast<double>(data.n());
    if (!(fit.trace < n)) throw NumericError("sigma2_hat: trace A(lambda) >= n");
    double rss = 0.0;
    const Eigen::VectorXd phi_c = fit.system.design(std::span<const double>(data.z.data(), data.z.size())) * fit.coef;
    rss = (data.y - data.X * fit.theta - phi_c).squaredNorm();
    return rss / (n - fit.trace);
}

double trace_hutchinson(const FitResult& fit, const Dataset& data, int probes, std::uint64_t seed) {
    if (fit.family.kind() != FamilyKind::Gaussian) throw UnsupportedError("trace_hutchinson: Gaussian family only");
    if (probes < 1) throw ArgumentError("trace_hutchinson: probes must be >= 1");
    const PenalizedProblem prob(data, fit.family, fit.system, fit.lambda);
    const Eigen::MatrixXd& D = prob.design();
    const double n = static_cast<double>(data.n());
    Eigen::MatrixXd A = D.transpose() * D / n;
    A.diagonal() += fit.lambda * prob.penalty();
    const Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw NumericError("trace_hutchinson: system not positive definite");
    Rng rng(seed, 0);
    double acc = 0.0;
    Eigen::VectorXd v(data.n());
    for (int t = 0; t < probes; ++t) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.rademacher();
        const Eigen::VectorXd Dv = D.transpose() * v;
        acc += Dv.dot(llt.solve(Dv)) / n;
    }
    return acc / probes;
}

BahadurResult bahadur_diagnostic(const FitResult& fit, const Dataset& data, const BahadurTruth& truth) {
    if (!truth.g0 || !truth.G || truth.theta0.size() == 0)
        throw UnsupportedError("bahadur_diagnostic: truth (theta0, g0, G, Omega) required");
    const Eigen::Index p = data.p(), n = data.n();
    if (truth.theta0.size() != p || truth.omega.rows() != p || truth.omega.cols() != p)
        throw ArgumentError("bahadur_diagnostic: truth dimensions do not match the data");
    const EigenSystem& sys = fit.system;
    const Eigen::Index N = sys.size();
    const double lambda = fit.lambda;
    const KernelHandle K(sys, lambda);

    // V(G_k, h_ν), V(G_k, G_l) and V(g₀, h_ν) by quadrature against the system weight.
    const CompositeRule& rule = unit_interval_rule();
    Eigen::MatrixXd Gc = Eigen::MatrixXd::Zero(p, N);
    Eigen::MatrixXd VGG = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd g0c = Eigen::VectorXd::Zero(N);
    Eigen::VectorXd hz(N);
    for (std::size_t i = 0; i < rule.size(); ++i) {
        const double z = rule.nodes[i];
        const double w = rule.weights[i] * sys.weight(z);
        sys.eval_all(z, hz);
        const Eigen::VectorXd Gz = truth.G(z);
        Gc += w * Gz * hz.transpose();
        VGG += w * Gz * Gz.transpose();
        g0c += w * truth.g0(z) * hz;
    }
    const Eigen::ArrayXd damp = 1.0 + lambda * sys.eigenvalues().array();
    const Eigen::ArrayXd wfac = lambda * sys.eigenvalues().array() / damp;
    const Eigen::MatrixXd Acoef = Gc * (1.0 / damp).matrix().asDiagonal();  // A(·) coefficients, p × N
    const Eigen::MatrixXd Sigma = VGG - Acoef * Gc.transpose();
    const Eigen::MatrixXd OS = truth.omega + Sigma;
    const Eigen::LDLT<Eigen::MatrixXd> os_solve(OS);

    // (1/n) Σ ε_i R_{U_i}
    Eigen::VectorXd sH = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd sT = Eigen::VectorXd::Zero(N);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = data.z[i];
        const double a0 = data.X.row(i).dot(truth.theta0) + truth.g0(z);
        const double eps = fit.family.grad(data.y[i], a0);
        const Eigen::VectorXd kc = K.kernel_coef(z);
        const Eigen::VectorXd Az = Acoef * sys.eval_all(z);
        const Eigen::VectorXd H = os_solve.solve(data.X.row(i).transpose() - Az);
        sH += eps * H;
        sT += eps * (kc - Acoef.transpose() * H);
    }
    sH /= static_cast<double>(n);
    sT /= static_cast<double>(n);

    // P_λ f₀ = (H*, T*)
    const Eigen::VectorXd Wg0 = (g0c.array() * wfac).matrix();
    const Eigen::VectorXd VGWg = Gc * Wg0;
    const Eigen::VectorXd Hs = -os_solve.solve(VGWg);
    const Eigen::VectorXd Ts = -Acoef.transpose() * Hs + Wg0;

    const auto norm2 = [&](const Eigen::VectorXd& th, const Eigen::VectorXd& c) {
        return th.dot((truth.omega + VGG) * th) + 2.0 * th.dot(Gc * c) + (damp * c.array().square()).sum();
    };
    const Eigen::VectorXd dth = fit.theta - truth.theta0 - (sH - Hs);
    const Eigen::VectorXd dc = fit.coef - g0c - (sT - Ts);
    BahadurResult out;
    out.remainder = std::sqrt(std::max(0.0, norm2(dth, dc)));
    out.penalty_norm = std::sqrt(std::max(0.0, norm2(Hs, Ts)));
    return out;
}

}  // namespace splinth
