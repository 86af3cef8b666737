#include "doctest.h"

#include "splinth/error.hpp"
#include "splinth/lrt.hpp"
#include "splinth/simlab.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

using namespace splinth;

namespace {

double chi2_q(double dof, double p) { return boost::math::quantile(boost::math::chi_squared(dof), p); }
double chi2_c(double dof, double t) { return t <= 0.0 ? 0.0 : boost::math::cdf(boost::math::chi_squared(dof), t); }

// Sorted draws of χ²_r + c₀χ²₁ from sums of squared normals.
std::vector<double> mixture_draws(int r, double c0, std::size_t count, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    std::vector<double> out(count);
    for (auto& v : out) {
        double s = 0.0;
        for (int j = 0; j < r; ++j) {
            const double e = nd(gen);
            s += e * e;
        }
        const double e = nd(gen);
        v = s + c0 * e * e;
    }
    std::sort(out.begin(), out.end());
    return out;
}

double empirical_cdf(const std::vector<double>& sorted, double t) {
    return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin()) /
           static_cast<double>(sorted.size());
}

double max_cdf_gap(const NullLaw& law, const std::vector<double>& sorted) {
    double gap = 0.0;
    const double hi = sorted[static_cast<std::size_t>(0.999 * static_cast<double>(sorted.size()))];
    for (int i = 0; i <= 400; ++i) {
        const double t = hi * i / 400.0;
        gap = std::max(gap, std::abs(law.cdf(t) - empirical_cdf(sorted, t)));
    }
    return gap;
}

Eigen::MatrixXd random_spd(Eigen::Index p, std::mt19937_64& gen) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd B(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) B(i, j) = nd(gen);
    return B * B.transpose() + 0.5 * Eigen::MatrixXd::Identity(p, p);
}

// Orthogonal projection onto the columns of Λ Nᵀ, Λ = diag((Ω+Σ)^{-1/2}, √K)[[I, -A], [0, 1]].
Eigen::MatrixXd projection_oracle(const PhiInputs& in, const Eigen::MatrixXd& N) {
    const Eigen::Index p = in.omega.rows();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(p + 1, p + 1);
    L.topLeftCorner(p, p) = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(in.omega + in.sigma).operatorInverseSqrt();
    L(p, p) = std::sqrt(in.K00);
    Eigen::MatrixXd U = Eigen::MatrixXd::Identity(p + 1, p + 1);
    U.topRightCorner(p, 1) = -in.A0;
    const Eigen::MatrixXd B = L * U * N.transpose();
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(B);
    const Eigen::MatrixXd Qthin = qr.householderQ() * Eigen::MatrixXd::Identity(p + 1, B.cols());
    return Qthin * Qthin.transpose();
}

PhiInputs random_inputs(Eigen::Index p, std::mt19937_64& gen) {
    std::normal_distribution<double> nd;
    PhiInputs in;
    in.omega = random_spd(p, gen);
    in.sigma = 0.1 * random_spd(p, gen);
    in.A0 = Eigen::VectorXd(p);
    for (Eigen::Index i = 0; i < p; ++i) in.A0[i] = nd(gen);
    in.K00 = 3.0 + std::abs(nd(gen));
    return in;
}

Dataset study_data(Eigen::Index n, int p, std::uint64_t seed, SimModel model = SimModel::Example1CaseI) {
    SimDesign d;
    d.model = model;
    d.n = n;
    d.theta0 = Eigen::VectorXd::LinSpaced(p, 1.0, -1.0);
    d.g0 = model == SimModel::Logistic ? "sin-2pi" : "sin-pi";
    d.seed = seed;
    return generate(d, 0);
}

}  // namespace

TEST_CASE("case III quantile is the scaled χ²₁ quantile") {
    const NullLaw law = NullLaw::mixture(0, 0.75);
    CHECK(law.quantile(0.95) == doctest::Approx(2.881094).epsilon(1e-6));
    CHECK(law.cdf(2.881094) == doctest::Approx(0.95).epsilon(1e-6));
}

TEST_CASE("c0 = 1 gives χ²_{p+1}") {
    for (int p : {1, 2, 4}) {
        const NullLaw law = NullLaw::mixture(p, 1.0);
        for (double prob : {0.1, 0.5, 0.9, 0.95, 0.99}) CHECK(std::abs(law.quantile(prob) - chi2_q(p + 1, prob)) < 1e-4);
    }
}

TEST_CASE("convolution null law matches Monte Carlo for cases I, II and III") {
    const std::pair<int, double> cases[] = {{1, 0.75}, {2, 0.75}, {3, 0.833}, {1, 0.95}, {0, 0.75}};
    std::uint64_t seed = 101;
    for (const auto& [r, c0] : cases) {
        const NullLaw law = NullLaw::mixture(r, c0);
        const std::vector<double> draws = mixture_draws(r, c0, 1'000'000, seed++);
        CHECK(max_cdf_gap(law, draws) < 0.002);
    }
}

TEST_CASE("null law cdf is monotone and inverts its quantile") {
    for (const NullLaw& law : {NullLaw::mixture(2, 0.75), NullLaw::mixture(0, 0.9),
                               NullLaw::quadratic(Eigen::MatrixXd::Identity(3, 3), 0.75, 0.0, 200'000)}) {
        double prev = law.cdf(0.0);
        CHECK(prev >= 0.0);
        CHECK(prev < 1.0);
        for (int i = 1; i <= 2000; ++i) {
            const double c = law.cdf(i * 0.01);
            CHECK(c >= prev);
            prev = c;
        }
        for (double t : {0.3, 1.0, 2.5, 6.0}) CHECK(std::abs(law.quantile(law.cdf(t)) - t) < 1e-3);
        CHECK(law.sf(1.0) == doctest::Approx(1.0 - law.cdf(1.0)));
    }
}

TEST_CASE("quadratic law with Φ₀ = I and c_{z0} = 0 agrees with the mixture") {
    const NullLaw quad = NullLaw::quadratic(Eigen::MatrixXd::Identity(3, 3), 0.75);
    const NullLaw mix = NullLaw::mixture(2, 0.75);
    double gap = 0.0;
    for (int i = 0; i <= 300; ++i) gap = std::max(gap, std::abs(quad.cdf(i * 0.05) - mix.cdf(i * 0.05)));
    CHECK(gap < 0.003);
    CHECK(quad.draws() == NullLaw::kDefaultDraws);

    Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
    bad(1, 1) = -0.5;
    CHECK_THROWS_AS(NullLaw::quadratic(bad, 0.75), ArgumentError);
    CHECK_THROWS_AS(NullLaw::mixture(1, 0.0), ArgumentError);
    CHECK_THROWS_AS(NullLaw::mixture(1, 1.5), ArgumentError);
}

TEST_CASE("quadratic law with a noncentral offset shifts mass upward") {
    const NullLaw centered = NullLaw::quadratic(Eigen::MatrixXd::Identity(2, 2), 0.75, 0.0, 200'000);
    const NullLaw shifted = NullLaw::quadratic(Eigen::MatrixXd::Identity(2, 2), 0.75, 2.0, 200'000);
    CHECK(shifted.quantile(0.5) > centered.quantile(0.5));
    // Second coordinate is N(2, 0.75): E υᵀυ = 1 + 0.75 + 4.
    const std::vector<double> s = [&] {
        std::vector<double> v;
        for (int i = 1; i < 1000; ++i) v.push_back(shifted.quantile(i / 1000.0));
        return v;
    }();
    double mean = 0.0;
    for (double v : s) mean += v / static_cast<double>(s.size());
    CHECK(mean == doctest::Approx(5.75).epsilon(0.05));
}

TEST_CASE("Φ_λ is the projection onto ΛNᵀ") {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index p = 1 + trial % 4;
        const PhiInputs in = random_inputs(p, gen);
        std::normal_distribution<double> nd;
        Hypothesis h;
        const Eigen::Index k = 1 + trial % (p + 1);
        h.M = Eigen::MatrixXd(k, p);
        h.Q = Eigen::VectorXd(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            for (Eigen::Index j = 0; j < p; ++j) h.M(i, j) = nd(gen);
            h.Q[i] = nd(gen);
        }
        h.alpha = Eigen::VectorXd::Zero(k);
        h.z0 = 0.5;
        const Eigen::MatrixXd phi = phi_lambda(in, h);
        CHECK((phi - projection_oracle(in, h.N())).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((phi - phi.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(phi).eigenvalues().minCoeff() >= -1e-8);
        CHECK(phi.trace() == doctest::Approx(static_cast<double>(k)).epsilon(1e-8));
    }
}

TEST_CASE("Φ_λ for cases I, II and III") {
    std::mt19937_64 gen(8);
    const Eigen::Index p = 3;
    PhiInputs in = random_inputs(p, gen);
    const Hypothesis h1 = Hypothesis::case_I(Eigen::VectorXd::Zero(p), 0.0, 0.5);
    CHECK((phi_lambda(in, h1) - Eigen::MatrixXd::Identity(p + 1, p + 1)).cwiseAbs().maxCoeff() < 1e-10);

    // Limit inputs: Σ = 0, A = 0.
    in.sigma.setZero();
    in.A0.setZero();
    Eigen::MatrixXd D(2, p);
    D << 1.0, 2.0, 0.0, 0.0, 1.0, -1.0;
    const Hypothesis h2 = Hypothesis::case_II(D, Eigen::Vector2d(0, 0), 0.0, 0.5);
    const Eigen::MatrixXd phi2 = phi_lambda(in, h2);
    const Eigen::MatrixXd Oi = in.omega.inverse();
    const Eigen::MatrixXd Oh = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(in.omega).operatorInverseSqrt();
    const Eigen::MatrixXd P = Oh * D.transpose() * (D * Oi * D.transpose()).inverse() * D * Oh;
    const Eigen::MatrixXd upper = phi2.topLeftCorner(p, p);
    CHECK((upper - P).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((upper * upper - upper).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(upper.trace() == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(phi2(p, p) == doctest::Approx(1.0).epsilon(1e-10));

    // K(z₀, z₀) ~ 1/h dominates: Φ₀ = diag(0_p, 1).
    in.K00 = 1e12;
    const Hypothesis h3 = Hypothesis::case_III(Eigen::Vector3d(0.25, 0.5, 1.0), 0.0, 0.5);
    const Eigen::MatrixXd phi3 = phi_lambda(in, h3);
    CHECK(phi3(p, p) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(phi3.topLeftCorner(p, p).cwiseAbs().maxCoeff() < 1e-8);

    in.K00 = 0.0;
    CHECK_THROWS_AS(phi_lambda(in, h3), ArgumentError);
}

TEST_CASE("Gaussian statistic equals the penalized RSS difference over σ̂²") {
    const Dataset data = study_data(300, 2, 41);
    const EigenSystem sys = EigenSystem::trig(2, 1.0, 31);
    const double lambda = 1e-4;
    const Hypothesis h = Hypothesis::case_III(Eigen::Vector2d(0.25, 0.5), 0.3, 0.4);
    const FitResult u = fit(data, Family::gaussian(), sys, lambda);
    const FitResult c = fit_constrained(data, Family::gaussian(), sys, lambda, h);
    const Eigen::MatrixXd Phi = sys.design(std::span<const double>(data.z.data(), 300));
    const auto crit = [&](const FitResult& f) {
        const Eigen::VectorXd r = data.y - data.X * f.theta - Phi * f.coef;
        return r.squaredNorm() + 300.0 * lambda * f.coef.dot(sys.eigenvalues().cwiseProduct(f.coef));
    };
    const double expected = (crit(c) - crit(u)) / u.sigma2;
    CHECK(lrt_statistic(u, c) == doctest::Approx(expected).epsilon(1e-8));
    CHECK(lrt_statistic(data, Family::gaussian(), sys, lambda, h) == doctest::Approx(expected).epsilon(1e-8));
}

TEST_CASE("statistic is nonnegative on random nested problems") {
    std::mt19937_64 gen(9);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.05, 0.95);
    const EigenSystem sys = EigenSystem::trig(2, 1.0, 11);
    int checked = 0;
    for (int t = 0; t < 1000; ++t) {
        const int p = 1 + t % 3;
        const SimModel model = t % 10 == 0 ? SimModel::Logistic : (t % 10 == 1 ? SimModel::Gamma : SimModel::Example1CaseI);
        const Dataset data = study_data(60, p, 1000 + static_cast<std::uint64_t>(t), model);
        SimDesign d;
        d.model = model;
        const Family fam = d.family();
        const double lambda = std::pow(10.0, -5.0 + 3.0 * ud(gen));
        Hypothesis h;
        switch (t % 3) {
            case 0: {
                Eigen::VectorXd x0(p);
                for (int j = 0; j < p; ++j) x0[j] = nd(gen);
                h = Hypothesis::case_III(x0, nd(gen), ud(gen));
                break;
            }
            case 1: {
                Eigen::VectorXd th(p);
                for (int j = 0; j < p; ++j) th[j] = 0.5 * nd(gen);
                h = Hypothesis::case_I(th, 0.5 * nd(gen), ud(gen));
                break;
            }
            default: {
                h.M = Eigen::MatrixXd(1, p);
                for (int j = 0; j < p; ++j) h.M(0, j) = nd(gen);
                h.Q = Eigen::VectorXd::Constant(1, nd(gen));
                h.alpha = Eigen::VectorXd::Constant(1, 0.5 * nd(gen));
                h.z0 = ud(gen);
                h.kind = HypothesisCase::General;
            }
        }
        const double s = lrt_statistic(data, fam, sys, lambda, h);
        CHECK(s >= 0.0);
        ++checked;
    }
    CHECK(checked == 1000);
}

TEST_CASE("non-binding hypothesis gives a zero statistic") {
    const Dataset data = study_data(200, 2, 42);
    const EigenSystem sys = EigenSystem::trig(2, 1.0, 21);
    const FitResult u = fit(data, Family::gaussian(), sys, 1e-4);
    const Hypothesis h = Hypothesis::case_I(u.theta, u.g(0.6), 0.6);
    CHECK(std::abs(lrt_statistic(data, Family::gaussian(), sys, 1e-4, h)) < 1e-8);
}

TEST_CASE("test assembles statistic, law and decision") {
    const Dataset data = study_data(400, 1, 43);
    const EigenSystem sys = EigenSystem::trig(2, 1.0, 31);
    LambdaChoice choice;
    choice.policy = LambdaPolicy::Rate;
    const Hypothesis h1 = Hypothesis::case_I(Eigen::VectorXd::Constant(1, 1.0), std::sin(0.5 * 3.141592653589793), 0.5);
    const LrtResult r = test(data, Family::gaussian(), sys, h1, 0.95, choice);
    CHECK(r.law.kind() == NullLawKind::Mixture);
    CHECK(r.law.dof() == 1);
    CHECK(r.c0 == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(r.lambda == doctest::Approx(rate_lambda(400, 2)));
    CHECK(r.p_value >= 0.0);
    CHECK(r.p_value <= 1.0);
    CHECK(r.p_value == doctest::Approx(1.0 - r.law.cdf(r.statistic)));
    CHECK(r.reject == (r.p_value < 0.05));

    const Hypothesis far = Hypothesis::case_III(Eigen::VectorXd::Constant(1, 0.5), 5.0, 0.5);
    const LrtResult rf = test(data, Family::gaussian(), sys, far, 0.95, choice);
    CHECK(rf.reject);
    CHECK(rf.law.dof() == 0);

    Hypothesis gen;
    gen.M = Eigen::MatrixXd::Constant(1, 1, 2.0);
    gen.Q = Eigen::VectorXd::Constant(1, 1.0);
    gen.alpha = Eigen::VectorXd::Constant(1, 3.0);
    gen.z0 = 0.5;
    gen.kind = HypothesisCase::General;
    TestOptions opt;
    opt.mc_draws = 100'000;
    const LrtResult rg = test(data, Family::gaussian(), sys, gen, 0.95, choice, opt);
    CHECK(rg.law.kind() == NullLawKind::Quadratic);
    CHECK(rg.law.draws() == 100'000);
    CHECK(rg.law.phi0().trace() == doctest::Approx(1.0).epsilon(1e-6));

    CHECK_THROWS_AS(test(data, Family::gaussian(), sys, h1, 1.0, choice), ArgumentError);
}

TEST_CASE("c0 for trigonometric systems") {
    for (int m : {1, 2, 3, 5}) CHECK(c0_for(EigenSystem::trig(m, 1.0, 21), 1e-4, 0.5) == doctest::Approx(1.0 - 0.5 / m));
}
