#include "doctest.h"

#include "splinth/eigensys.hpp"
#include "splinth/error.hpp"
#include "splinth/quadrature.hpp"

#include <cmath>
#include <numbers>

using namespace splinth;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent rule for checks: 50 panels of 20 nodes.
const CompositeRule& check_rule() {
    static const CompositeRule r = composite_gauss_legendre(0.0, 1.0, 50, 20);
    return r;
}

Eigen::MatrixXd gram(const EigenSystem& sys, const std::function<double(double)>& w, int order) {
    const int N = sys.size();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(N, N);
    const CompositeRule& r = check_rule();
    Eigen::VectorXd d(N);
    for (std::size_t q = 0; q < r.size(); ++q) {
        const double z = r.nodes[q];
        for (int nu = 0; nu < N; ++nu) d[nu] = order == 0 ? sys.eval(nu, z) : sys.derivative(nu, z, order);
        G.noalias() += r.weights[q] * w(z) * d * d.transpose();
    }
    return G;
}

// Roots of cos(b)cosh(b) = 1 (free-free beam), by bisection on cos(b) - 1/cosh(b).
double beam_root(int k) {
    double lo = (k + 0.5) * kPi - 0.5, hi = (k + 0.5) * kPi + 0.5;
    const auto f = [](double b) { return std::cos(b) - 1.0 / std::cosh(b); };
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if ((f(lo) < 0) == (f(mid) < 0)) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("trigonometric system matches its closed form") {
    const EigenSystem s = EigenSystem::trig(2, 1.0, 3);
    CHECK(s.kind() == BasisKind::Trig);
    CHECK(s.null_dim() == 1);
    const double g = 16 * std::pow(kPi, 4);
    CHECK(s.eigenvalue(0) == 0.0);
    CHECK(s.eigenvalue(1) == doctest::Approx(g).epsilon(1e-14));
    CHECK(s.eigenvalue(2) == doctest::Approx(g).epsilon(1e-14));
    for (double z : {0.0, 0.11, 0.5, 0.93}) {
        CHECK(s.eval(0, z) == doctest::Approx(1.0));
        CHECK(s.eval(1, z) == doctest::Approx(std::sqrt(2.0) * std::sin(2 * kPi * z)).epsilon(1e-14));
        CHECK(s.eval(2, z) == doctest::Approx(std::sqrt(2.0) * std::cos(2 * kPi * z)).epsilon(1e-14));
    }
    const EigenSystem s2 = EigenSystem::trig(2, 2.0, 1);
    CHECK(s2.eval(0, 0.3) == doctest::Approx(2.0));
    CHECK(s2.eigenvalue(0) == 0.0);
    CHECK(s2.weight(0.4) == doctest::Approx(0.25));

    const EigenSystem big = EigenSystem::trig(3, 0.7, 41);
    for (int k = 1; k <= 20; ++k) {
        const double expect = 0.49 * std::pow(2 * kPi * k, 6);
        CHECK(big.eigenvalue(2 * k - 1) == doctest::Approx(expect).epsilon(1e-13));
        CHECK(big.eigenvalue(2 * k) == doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("trigonometric V-orthonormality and J-diagonality") {
    for (double sigma : {0.5, 1.0, 1.7}) {
        const EigenSystem s = EigenSystem::trig(2, sigma, 31);
        const Eigen::MatrixXd V = gram(s, [&](double) { return 1.0 / (sigma * sigma); }, 0);
        CHECK((V - Eigen::MatrixXd::Identity(31, 31)).cwiseAbs().maxCoeff() < 1e-6);
        const Eigen::MatrixXd J = gram(s, [](double) { return 1.0; }, 2);
        const Eigen::MatrixXd D = s.eigenvalues().asDiagonal();
        CHECK((J - D).cwiseAbs().maxCoeff() < 1e-6 * s.eigenvalues().maxCoeff());
    }
}

TEST_CASE("trig derivatives agree with finite differences") {
    const EigenSystem s = EigenSystem::trig(2, 1.3, 9);
    for (int nu = 0; nu < 9; ++nu) {
        const double z = 0.37, e = 1e-5;
        const double fd = (s.eval(nu, z + e) - s.eval(nu, z - e)) / (2 * e);
        CHECK(s.derivative(nu, z, 1) == doctest::Approx(fd).epsilon(1e-6).scale(10));
    }
}

TEST_CASE("BVP m=1 recovers the cosine system") {
    const EigenSystem s = EigenSystem::bvp(1, WeightTable::constant(1.0), 9, 2048);
    CHECK(s.kind() == BasisKind::Bvp);
    CHECK(std::abs(s.eigenvalue(0)) < 1e-10);
    double max_err = 0.0;
    for (int nu = 1; nu <= 8; ++nu) {
        CHECK(std::abs(s.eigenvalue(nu) / std::pow(kPi * nu, 2) - 1.0) < 1e-3);
        for (int i = 0; i <= 1000; ++i) {
            const double z = i / 1000.0;
            max_err = std::max(max_err, std::abs(s.eval(nu, z) - std::sqrt(2.0) * std::cos(kPi * nu * z)));
        }
    }
    CHECK(max_err < 1e-3);
    for (int i = 0; i <= 10; ++i) CHECK(s.eval(0, i / 10.0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("BVP m=2 matches the free-free beam spectrum") {
    const EigenSystem s = EigenSystem::bvp(2, WeightTable::constant(1.0), 21, 4096);
    CHECK(s.null_dim() == 2);
    CHECK(std::abs(s.eigenvalue(0)) < 1e-8);
    CHECK(std::abs(s.eigenvalue(1)) < 1e-8);
    for (int nu = 2; nu < 21; ++nu) {
        const double beta = beam_root(nu - 1);
        CHECK(s.eigenvalue(nu) == doctest::Approx(std::pow(beta, 4)).epsilon(1e-6));
    }
    // (πν)⁴ is only the leading-order rate; the ratio enters [0.8, 1.2] from ν = 10 on.
    for (int nu = 10; nu <= 20; ++nu) {
        const double r = s.eigenvalue(nu) / std::pow(kPi * nu, 4);
        CHECK(r >= 0.8);
        CHECK(r <= 1.2);
    }
    for (int nu = 2; nu < 21; ++nu) {
        CHECK(s.eigenvalue(nu) >= s.eigenvalue(nu - 1));
        const double r = s.eigenvalue(nu) / std::pow(nu, 4);
        CHECK(r > 1.0);
        CHECK(r < 200.0);
    }
}

TEST_CASE("BVP with a variable weight: V-orthonormality, J-diagonality, grid stability") {
    std::vector<std::pair<double, double>> knots;
    for (int i = 0; i <= 200; ++i) {
        const double z = i / 200.0;
        knots.emplace_back(z, 1.0 + 0.5 * std::sin(3.0 * z));
    }
    const WeightTable w(knots);
    for (int m : {1, 2, 3}) {
        const EigenSystem s = EigenSystem::bvp(m, w, 16, 4096);
        const Eigen::MatrixXd V = gram(s, [&](double z) { return w(z); }, 0);
        CHECK((V - Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-3);
        const Eigen::MatrixXd J = gram(s, [](double) { return 1.0; }, m);
        const Eigen::MatrixXd D = s.eigenvalues().asDiagonal();
        CHECK((J - D).cwiseAbs().maxCoeff() < 1e-3 * s.eigenvalues().maxCoeff());

        const EigenSystem coarse = EigenSystem::bvp(m, w, 16, 2048);
        for (int nu = m; nu < 8; ++nu)
            CHECK(std::abs(coarse.eigenvalue(nu) / s.eigenvalue(nu) - 1.0) < 5e-3);
    }
}

TEST_CASE("reproducing property through quadrature of V and λJ") {
    const EigenSystem trig = EigenSystem::trig(2, 1.0, 41);
    const EigenSystem bvp = EigenSystem::bvp(2, WeightTable::constant(1.0), 30);
    for (const EigenSystem* sys : {&trig, &bvp}) {
        const double lambda = 1e-4;
        const KernelHandle K = kernel(*sys, lambda);
        const int m = sys->order();
        const CompositeRule& r = unit_interval_rule();
        for (int zi = 1; zi <= 9; ++zi) {
            const double z = zi / 10.0;
            const Eigen::VectorXd kc = K.kernel_coef(z);
            double worst = 0.0;
            for (int nu = 0; nu < sys->size(); nu += 3) {
                double v = 0.0, j = 0.0;
                for (std::size_t q = 0; q < r.size(); ++q) {
                    const double t = r.nodes[q];
                    double kv = 0.0, kd = 0.0;
                    for (int mu = 0; mu < sys->size(); ++mu) {
                        kv += kc[mu] * sys->eval(mu, t);
                        kd += kc[mu] * sys->derivative(mu, t, m);
                    }
                    v += r.weights[q] * sys->weight(t) * kv * sys->eval(nu, t);
                    j += r.weights[q] * kd * sys->derivative(nu, t, m);
                }
                worst = std::max(worst, std::abs(v + lambda * j - sys->eval(nu, z)));
            }
            CHECK(worst < 1e-8);
            CHECK(K.eval(z, z) == doctest::Approx(sys->eval_all(z).dot(kc)).epsilon(1e-13));
        }
    }
}

TEST_CASE("kernel: symmetry, positivity and the large-λ limit") {
    const EigenSystem s = EigenSystem::trig(2, 1.0, 101);
    const KernelHandle K = kernel(s, 1e-4);
    CHECK(K.eval(0.2, 0.7) == doctest::Approx(K.eval(0.7, 0.2)).epsilon(1e-14));
    for (double z : {0.0, 0.3, 1.0}) CHECK(K.eval(z, z) > 0.0);
    double direct = 0.0;
    for (int nu = 0; nu < s.size(); ++nu)
        direct += std::pow(s.eval(nu, 0.3), 2) / (1.0 + 1e-4 * s.eigenvalue(nu));
    CHECK(K.eval(0.3, 0.3) == doctest::Approx(direct).epsilon(1e-12));
    const EigenSystem s2 = EigenSystem::trig(2, 1.5, 21);
    const KernelHandle big = kernel(s2, 1e12);
    for (double z : {0.1, 0.5, 0.9}) CHECK(big.eval(z, 0.4) == doctest::Approx(2.25).epsilon(1e-6));
    CHECK_THROWS_AS(K.eval(1.5, 0.2), ArgumentError);
    CHECK_THROWS_AS(kernel(s, 0.0), ArgumentError);
}

TEST_CASE("W_λ and the Riesz representer series") {
    const EigenSystem s = EigenSystem::trig(2, 1.0, 11);
    const double lambda = 1.0 / s.eigenvalue(3);
    const KernelHandle K = kernel(s, lambda);
    Eigen::VectorXd c = Eigen::VectorXd::Ones(11);
    const Eigen::VectorXd w = K.w_lambda(c);
    CHECK(w[0] == 0.0);
    CHECK(w[3] == doctest::Approx(0.5));
    const Eigen::VectorXd ww = K.w_lambda(w);
    for (int nu = 0; nu < 11; ++nu) CHECK(ww[nu] == doctest::Approx(w[nu] * w[nu]).epsilon(1e-14));

    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(2, 11);
    CHECK(K.riesz_A(G, 0.3).cwiseAbs().maxCoeff() == 0.0);
    G(1, 1) = 1.0;
    const double lg = lambda * s.eigenvalue(1);
    CHECK(K.riesz_A(G, 0.3)[1] == doctest::Approx(s.eval(1, 0.3) / (1 + lg)).epsilon(1e-14));
    CHECK(K.w_lambda_A(G, 0.3)[1] == doctest::Approx(lg * s.eval(1, 0.3) / std::pow(1 + lg, 2)).epsilon(1e-14));
    CHECK_THROWS_AS(K.riesz_A(Eigen::MatrixXd::Zero(1, 5), 0.3), ArgumentError);
}

TEST_CASE("σ²_{z0} for the trigonometric system") {
    for (double sigma : {1.0, 1.5}) {
        const int m = 2;
        const double target = quadrature_Il(m, 2) * std::pow(sigma, 2.0 - 1.0 / m) / kPi;
        double prev_err = 1.0;
        for (double lambda : {1e-6, 1e-8, 1e-10}) {
            const EigenSystem s = EigenSystem::trig(m, sigma, trig_truncation(m, sigma, lambda));
            const KernelHandle K = kernel(s, lambda);
            const double v = K.sigma_z0_sq(0.3);
            CHECK(v == doctest::Approx(K.sigma_z0_sq(0.71)).epsilon(1e-10));
            prev_err = std::abs(v / target - 1.0);
        }
        CHECK(prev_err < 0.01);
    }
    CHECK(quadrature_Il(2, 2) / kPi == doctest::Approx(0.26516).epsilon(1e-4));
    const EigenSystem s = EigenSystem::trig(2, 1.2, 11);
    const KernelHandle K = kernel(s, 1e12);
    CHECK(K.sigma_z0_sq(0.4) == doctest::Approx(K.bandwidth() * 1.44).epsilon(1e-6));
}

TEST_CASE("c0 by the λ ladder") {
    for (int m : {2, 3, 4}) {
        const EigenSystem s = EigenSystem::trig(m, 1.0, 21);
        const C0Estimate e = c0(kernel(s, 1e-4), 0.5);
        CHECK(e.value == doctest::Approx(1.0 - 1.0 / (2 * m)).epsilon(1e-3));
        CHECK(e.converged);
        CHECK(c0_trig(m) == doctest::Approx(1.0 - 1.0 / (2 * m)));
    }
    CHECK(c0_trig(2) == doctest::Approx(0.75));
    CHECK(std::abs(c0_trig(3) - 0.8333) < 1e-3);
    const EigenSystem s10 = EigenSystem::trig(10, 1.0, 21);
    CHECK(c0(kernel(s10, 1e-12), 0.5).value == doctest::Approx(0.95).epsilon(1e-3));

    const EigenSystem s = EigenSystem::trig(2, 1.0, 21);
    const C0Estimate a = c0(kernel(s, 1e-4), 0.25);
    for (double z : {0.5, 0.75}) {
        const C0Estimate b = c0(kernel(s, 1e-4), z);
        REQUIRE(a.ratios.size() == b.ratios.size());
        for (std::size_t j = 0; j < a.ratios.size(); ++j) CHECK(std::abs(a.ratios[j] - b.ratios[j]) < 1e-6);
    }

    const EigenSystem bvp = EigenSystem::bvp(2, WeightTable::constant(1.0), 120);
    const C0Estimate e = c0(kernel(bvp, 1e-6), 0.5);
    CHECK(e.value == doctest::Approx(0.75).epsilon(0.01));
}

TEST_CASE("argument validation") {
    CHECK_THROWS_AS(EigenSystem::trig(0, 1.0, 3), ArgumentError);
    CHECK_THROWS_AS(EigenSystem::trig(2, 1.0, 0), ArgumentError);
    CHECK_THROWS_AS(EigenSystem::trig(2, -1.0, 3), ArgumentError);
    CHECK_THROWS_AS(EigenSystem::bvp(2, WeightTable::constant(1.0), 5, 256), ArgumentError);
    CHECK_THROWS_AS(WeightTable({{0.0, 1.0}, {0.5, -1.0}}), ArgumentError);
    CHECK_THROWS_AS(basis_kind_from_string("spline"), ArgumentError);
}
