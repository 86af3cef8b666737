#include "doctest.h"

#include "splinth/error.hpp"
#include "splinth/fitter.hpp"
#include "splinth/lrt.hpp"
#include "splinth/rng.hpp"
#include "splinth/simlab.hpp"

#include <Eigen/Dense>

#include <cmath>

using namespace splinth;

namespace {

Dataset example_data(Eigen::Index n, int p, std::uint64_t seed, SimModel model = SimModel::Example1CaseI) {
    SimDesign d;
    d.model = model;
    d.n = n;
    d.theta0 = Eigen::VectorXd::LinSpaced(p, 2.0, -2.0);
    d.g0 = model == SimModel::Logistic ? "sin-2pi" : "sin-pi";
    d.seed = seed;
    return generate(d, 0);
}

Eigen::MatrixXd design_matrix(const Dataset& data, const EigenSystem& sys) {
    Eigen::MatrixXd D(data.n(), data.p() + sys.size());
    D.leftCols(data.p()) = data.X;
    D.rightCols(sys.size()) =
        sys.design(std::span<const double>(data.z.data(), static_cast<std::size_t>(data.n())));
    return D;
}

Eigen::VectorXd penalty(const Dataset& data, const EigenSystem& sys) {
    Eigen::VectorXd P = Eigen::VectorXd::Zero(data.p() + sys.size());
    P.tail(sys.size()) = sys.eigenvalues();
    return P;
}

// Stacked least squares [D/√n; √(λP)] β ≈ [y/√n; 0] by column-pivoted QR.
Eigen::VectorXd ls_oracle(const Dataset& data, const EigenSystem& sys, double lambda) {
    const Eigen::MatrixXd D = design_matrix(data, sys);
    const Eigen::VectorXd P = penalty(data, sys);
    const auto n = static_cast<double>(data.n());
    const Eigen::Index q = D.cols();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(data.n() + q, q);
    A.topRows(data.n()) = D / std::sqrt(n);
    A.bottomRows(q) = (lambda * P).cwiseSqrt().asDiagonal();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(data.n() + q);
    b.head(data.n()) = data.y / std::sqrt(n);
    return A.colPivHouseholderQr().solve(b);
}

// Lagrange system [[H, Cᵀ], [C, 0]] [β; μ] = [Dᵀy/n; α].
Eigen::VectorXd kkt_oracle(const Dataset& data, const EigenSystem& sys, double lambda, const Hypothesis& h) {
    const Eigen::MatrixXd D = design_matrix(data, sys);
    const auto n = static_cast<double>(data.n());
    const Eigen::Index q = D.cols(), k = h.k(), p = data.p();
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(k, q);
    C.leftCols(p) = h.M;
    C.rightCols(sys.size()) = h.Q * sys.eval_all(h.z0).transpose();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(q + k, q + k);
    K.topLeftCorner(q, q) = D.transpose() * D / n;
    K.topLeftCorner(q, q).diagonal() += lambda * penalty(data, sys);
    K.topRightCorner(q, k) = C.transpose();
    K.bottomLeftCorner(k, q) = C;
    Eigen::VectorXd rhs(q + k);
    rhs.head(q) = D.transpose() * data.y / n;
    rhs.tail(k) = h.alpha;
    return K.fullPivLu().solve(rhs).head(q);
}

Eigen::VectorXd stacked(const FitResult& f) {
    Eigen::VectorXd b(f.theta.size() + f.coef.size());
    b << f.theta, f.coef;
    return b;
}

}  // namespace

TEST_CASE("Gaussian fit equals the stacked least-squares oracle") {
    const Dataset data = example_data(200, 2, 3);
    const EigenSystem sys = EigenSystem::trig(2, 1.0, 60);
    for (double lambda : {1e-6, 1e-4, 1e-2}) {
        const FitResult f = fit(data, Family::gaussian(), sys, lambda);
        CHECK((stacked(f) - ls_oracle(data, sys, lambda)).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(f.trace > 0.0);
        CHECK(f.trace < 200.0);
        CHECK(f.h == doctest::Approx(std::pow(lambda, 0.25)));
    }
}

TEST_CASE("constrained Gaussian fit equals the KKT oracle") {
    const Dataset data = example_data(200, 2, 4);
    const EigenSystem sys = EigenSystem::trig(2, 1.0, 60);
    const double lambda = 1e-5;
    Eigen::VectorXd x0(2);
    x0 << 0.3, 0.6;
    Hypothesis general;
    general.M = Eigen::MatrixXd(2, 2);
    general.M << 1.0, 0.5, 0.0, 1.0;
    general.Q = Eigen::Vector2d(1.0, -0.5);
    general.alpha = Eigen::Vector2d(0.2, -1.0);
    general.z0 = 0.37;
    general.kind = HypothesisCase::General;
    for (const Hypothesis& h : {Hypothesis::case_III(x0, 0.1, 0.4), Hypothesis::case_I(Eigen::Vector2d(2, -2), 1.0, 0.5),
                                general}) {
        const FitResult c = fit_constrained(data, Family::gaussian(), sys, lambda, h);
        CHECK((stacked(c) - kkt_oracle(data, sys, lambda, h)).cwiseAbs().maxCoeff() < 1e-8);
        const Eigen::VectorXd resid = h.M * c.theta + h.Q * c.g(h.z0) - h.alpha;
        CHECK(resid.cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("case I fixes θ and g(z0); non-binding constraints change nothing") {
    const Dataset data = example_data(150, 2, 5);
    const EigenSystem sys = EigenSystem::trig(2, 1.0, 31);
    const double lambda = 1e-4;
    const Hypothesis h1 = Hypothesis::case_I(Eigen::Vector2d(1.5, -1.0), 0.3, 0.6);
    const FitResult c = fit_constrained(data, Family::gaussian(), sys, lambda, h1);
    CHECK(c.theta[0] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(c.theta[1] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(c.g(0.6) == doctest::Approx(0.3).epsilon(1e-10));

    for (const Family& fam : {Family::gaussian(), Family::logistic()}) {
        const Dataset d = fam.kind() == FamilyKind::Logistic ? example_data(300, 2, 6, SimModel::Logistic) : data;
        const FitResult u = fit(d, fam, sys, lambda);
        Eigen::VectorXd x0(2);
        x0 << 0.25, 0.5;
        const Hypothesis h = Hypothesis::case_III(x0, u.linear_predictor(x0, 0.4), 0.4);
        const FitResult cc = fit_constrained(d, fam, sys, lambda, h);
        CHECK((stacked(cc) - stacked(u)).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(std::abs(lrt_statistic(u, cc)) < 1e-8);
    }
}

TEST_CASE("large λ leaves only the null-space component") {
    Dataset data = example_data(120, 1, 7);
    data.X.resize(data.n(), 0);
    const EigenSystem sys = EigenSystem::trig(2, 1.0, 21);
    const FitResult f = fit(data, Family::gaussian(), sys, 1e12);
    for (double z : {0.0, 0.3, 0.8}) CHECK(f.g(z) == doctest::Approx(data.y.mean()).epsilon(1e-8));
}

TEST_CASE("first-order conditions for non-Gaussian families") {
    const EigenSystem sys = EigenSystem::trig(2, 1.0, 31);
    {
        SimDesign d;
        d.model = SimModel::Logistic;
        d.n = 4000;
        d.theta0 = Eigen::VectorXd::Zero(1);
        d.g0 = "zero";
        d.covariates = "independent";
        const Dataset data = generate(d, 0);
        const FitResult f = fit(data, Family::logistic(), sys, 1e-3);
        CHECK(f.grad_norm < 1e-9);
        CHECK(std::abs(f.theta[0]) < 0.4);
        double sup = 0.0;
        for (int i = 0; i <= 50; ++i) sup = std::max(sup, std::abs(f.g(i / 50.0)));
        CHECK(sup < 0.4);
    }
    {
        const Dataset data = example_data(300, 2, 8, SimModel::Gamma);
        const FitResult f = fit(data, Family::gamma(2.0), sys, 1e-4);
        CHECK(f.grad_norm < 1e-9);
        const PenalizedProblem prob(data, Family::gamma(2.0), sys, 1e-4);
        CHECK(prob.gradient(stacked(f)).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("gradient and Hessian match finite differences") {
    const EigenSystem sys = EigenSystem::trig(2, 1.0, 11);
    Rng rng(21, 0);
    const std::pair<Family, SimModel> cases[] = {{Family::gaussian(), SimModel::Example1CaseI},
                                                 {Family::gamma(2.0), SimModel::Gamma},
                                                 {Family::logistic(), SimModel::Logistic}};
    for (const auto& [fam, model] : cases) {
        const Dataset data = example_data(80, 2, 9, model);
        const PenalizedProblem prob(data, fam, sys, 1e-3);
        for (int t = 0; t < 20; ++t) {
            Eigen::VectorXd b(prob.dim());
            for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 0.5 * rng.normal();
            const Eigen::VectorXd g = prob.gradient(b);
            const Eigen::MatrixXd H = prob.hessian(b);
            Eigen::VectorXd fd_g(b.size());
            Eigen::MatrixXd fd_H(b.size(), b.size());
            const double e = 1e-6;
            for (Eigen::Index i = 0; i < b.size(); ++i) {
                Eigen::VectorXd bp = b, bm = b;
                bp[i] += e;
                bm[i] -= e;
                fd_g[i] = (prob.value(bp) - prob.value(bm)) / (2 * e);
                fd_H.col(i) = (prob.gradient(bp) - prob.gradient(bm)) / (2 * e);
            }
            CHECK((g - fd_g).norm() / std::max(1.0, g.norm()) < 1e-5);
            CHECK((H - fd_H).norm() / std::max(1.0, H.norm()) < 1e-5);
        }
    }
}

TEST_CASE("GCV table matches a dense-hat-matrix evaluation") {
    const Dataset data = example_data(100, 1, 10);
    const EigenSystem sys = EigenSystem::trig(2, 1.0, 41);
    const std::vector<double> grid = {1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2};
    const GcvTable t = select_lambda(data, Family::gaussian(), sys, grid);
    const Eigen::MatrixXd D = design_matrix(data, sys);
    const Eigen::VectorXd P = penalty(data, sys);
    const double n = 100.0;
    double best_score = 1e300, best = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        Eigen::MatrixXd M = D.transpose() * D / n;
        M.diagonal() += grid[j] * P;
        const Eigen::MatrixXd A = D * M.inverse() * D.transpose() / n;
        const double tr = A.trace();
        const double rss = (data.y - A * data.y).squaredNorm();
        const double gcv = n * rss / std::pow(n - tr, 2);
        CHECK(t.traces[j] == doctest::Approx(tr).epsilon(1e-8));
        CHECK(t.scores[j] == doctest::Approx(gcv).epsilon(1e-8));
        if (j > 0) CHECK(t.traces[j] < t.traces[j - 1]);
        if (gcv < best_score) {
            best_score = gcv;
            best = grid[j];
        }
        const FitResult f = fit(data, Family::gaussian(), sys, grid[j]);
        CHECK(f.trace == doctest::Approx(tr).epsilon(1e-8));
    }
    CHECK(t.best == best);
    const std::vector<double> one = {3e-5};
    CHECK(select_lambda(data, Family::gaussian(), sys, one).best == 3e-5);
    const std::vector<double> bad = {1e-3, 1e-4};
    CHECK_THROWS_AS(select_lambda(data, Family::gaussian(), sys, bad), ArgumentError);

    const Dataset ld = example_data(300, 1, 12, SimModel::Logistic);
    const GcvTable lt = select_lambda(ld, Family::logistic(), sys, default_lambda_grid(300, 2, 12));
    CHECK(lt.best > 0.0);
}

TEST_CASE("σ² estimate and trace estimators") {
    const EigenSystem sys = EigenSystem::trig(2, 1.0, default_basis_size(200, 2));
    int inside = 0;
    for (std::uint64_t r = 0; r < 50; ++r) {
        const Dataset data = example_data(200, 1, 100 + r);
        const double lambda = select_lambda(data, Family::gaussian(), sys, default_lambda_grid(200, 2)).best;
        const FitResult f = fit(data, Family::gaussian(), sys, lambda);
        CHECK(f.sigma2 == doctest::Approx(sigma2_hat(f, data)).epsilon(1e-12));
        inside += f.sigma2 >= 0.7 && f.sigma2 <= 1.3;
    }
    CHECK(inside == 50);

    const Dataset data = example_data(100, 1, 13);
    const EigenSystem small = EigenSystem::trig(2, 1.0, 41);
    const FitResult f = fit(data, Family::gaussian(), small, 1e-5);
    CHECK(trace_hutchinson(f, data, 4000, 99) == doctest::Approx(f.trace).epsilon(0.01));

    Dataset exact = data;
    exact.y = 2.0 * exact.X.col(0).array() + 1.0;
    const FitResult e = fit(exact, Family::gaussian(), small, 1e-5);
    CHECK(e.sigma2 < 1e-20);
    CHECK_THROWS_AS(sigma2_hat(fit(example_data(100, 1, 1, SimModel::Logistic), Family::logistic(), small, 1e-4),
                               example_data(100, 1, 1, SimModel::Logistic)),
                    UnsupportedError);
}

TEST_CASE("fits are invariant to rescaling the basis") {
    const Dataset data = example_data(150, 2, 14);
    const EigenSystem a = EigenSystem::trig(2, 1.0, 31);
    const EigenSystem b = EigenSystem::trig(2, 2.5, 31);
    const FitResult fa = fit(data, Family::gaussian(), a, 1e-5);
    const FitResult fb = fit(data, Family::gaussian(), b, 1e-5);
    for (int i = 0; i <= 20; ++i) CHECK(std::abs(fa.g(i / 20.0) - fb.g(i / 20.0)) < 1e-8);
    CHECK((fa.theta - fb.theta).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("nesting: constrained objective never exceeds the unconstrained one") {
    const EigenSystem sys = EigenSystem::trig(2, 1.0, 21);
    Rng rng(31, 0);
    for (const auto& [fam, model] : {std::pair{Family::gaussian(), SimModel::Example1CaseI},
                                     std::pair{Family::logistic(), SimModel::Logistic}}) {
        const Dataset data = example_data(200, 2, 15, model);
        const FitResult u = fit(data, fam, sys, 1e-4);
        for (int t = 0; t < 10; ++t) {
            Eigen::VectorXd x0(2);
            x0 << rng.uniform(), rng.uniform();
            const Hypothesis h = Hypothesis::case_III(x0, rng.normal(), 0.1 + 0.8 * rng.uniform());
            const FitResult c = fit_constrained(data, fam, sys, 1e-4, h);
            CHECK(c.objective <= u.objective + 1e-12);
        }
    }
}

TEST_CASE("Bahadur remainder equals ‖P_λ f0‖ when ε = 0 and f̂ = f0") {
    const EigenSystem sys = EigenSystem::trig(2, 1.0, 11);
    SimDesign d;
    d.n = 200;
    d.theta0 = Eigen::VectorXd::Constant(1, 1.5);
    d.g0 = "zero";
    d.covariates = "independent";
    Dataset data = generate(d, 0);
    const auto g0 = [&sys](double z) { return sys.eval(1, z) + 0.5 * sys.eval(3, z); };
    for (Eigen::Index i = 0; i < data.n(); ++i) data.y[i] = 1.5 * data.X(i, 0) + g0(data.z[i]);

    FitResult f(Family::gaussian(), sys);
    f.theta = d.theta0;
    f.coef = Eigen::VectorXd::Zero(11);
    f.coef[1] = 1.0;
    f.coef[3] = 0.5;
    f.lambda = 1e-4;
    f.h = std::pow(f.lambda, 0.25);
    f.n = data.n();
    BahadurTruth truth;
    truth.theta0 = d.theta0;
    truth.g0 = g0;
    truth.G = [](double) { return Eigen::VectorXd::Constant(1, 0.5); };
    truth.omega = Eigen::MatrixXd::Constant(1, 1, 1.0 / 12.0);
    const BahadurResult r = bahadur_diagnostic(f, data, truth);
    CHECK(r.penalty_norm > 0.0);
    CHECK(r.remainder == doctest::Approx(r.penalty_norm).epsilon(1e-10));
    CHECK(d.omega()(0, 0) == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
}

TEST_CASE("dataset validation") {
    Dataset data = example_data(50, 1, 16);
    data.z[6] = 1.5;
    try {
        data.validate(Family::gaussian(), 1);
        FAIL("expected a data error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("row 7") != std::string::npos);
    }
    Dataset tiny = example_data(50, 1, 16);
    tiny.y.conservativeResize(2);
    CHECK_THROWS_AS(tiny.validate(Family::gaussian(), 1), DataError);
    Dataset lg = example_data(50, 1, 16);
    CHECK_THROWS_AS(lg.validate(Family::logistic(), 1), DataError);
    CHECK_THROWS_AS(fit(example_data(50, 1, 16), Family::gaussian(), EigenSystem::trig(2, 1.0, 11), -1.0),
                    ArgumentError);
}
