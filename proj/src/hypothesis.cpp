#include "splinth/hypothesis.hpp"

#include "splinth/error.hpp"

#include <cmath>

namespace splinth {

std::string to_string(HypothesisCase c) {
    switch (c) {
        case HypothesisCase::I: return "I";
        case HypothesisCase::II: return "II";
        case HypothesisCase::III: return "III";
        case HypothesisCase::General: return "general";
    }
    return "general";
}

HypothesisCase hypothesis_case_from_string(const std::string& text) {
    if (text == "I") return HypothesisCase::I;
    if (text == "II") return HypothesisCase::II;
    if (text == "III") return HypothesisCase::III;
    if (text == "general") return HypothesisCase::General;
    throw ArgumentError("unknown hypothesis case '" + text + "' (expected I|II|III|general)");
}

Eigen::MatrixXd Hypothesis::N() const {
    Eigen::MatrixXd n(M.rows(), M.cols() + 1);
    n << M, Q;
    return n;
}

int Hypothesis::mixture_dof() const {
    switch (kind) {
        case HypothesisCase::I: return static_cast<int>(M.cols());
        case HypothesisCase::II: return static_cast<int>(k()) - 1;
        case HypothesisCase::III: return 0;
        case HypothesisCase::General: break;
    }
    throw ArgumentError("mixture_dof: general hypotheses have no mixture law");
}

void Hypothesis::validate(Eigen::Index p) const {
    const Eigen::Index kk = k();
    if (kk < 1) throw ArgumentError("hypothesis: no constraint rows");
    if (M.cols() != p) throw ArgumentError("hypothesis: M must have p = " + std::to_string(p) + " columns");
    if (Q.size() != kk || alpha.size() != kk) throw ArgumentError("hypothesis: M, Q and alpha row counts differ");
    if (kk > p + 1) throw ArgumentError("hypothesis: more than p + 1 constraints");
    if (!(z0 > 0.0 && z0 < 1.0)) throw ArgumentError("hypothesis: z0 must lie in (0, 1)");
    if (!M.allFinite() || !Q.allFinite() || !alpha.allFinite()) throw ArgumentError("hypothesis: non-finite entry");

    const Eigen::MatrixXd n = N();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(n);
    const Eigen::VectorXd s = svd.singularValues();
    const double tol = 1e-10 * std::max(1.0, s[0]);
    if ((s.array() > tol).count() < kk) throw ArgumentError("hypothesis: N = (M | Q) is rank deficient");

    const auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
    switch (kind) {
        case HypothesisCase::I:
            if (kk != p + 1 || !n.isApprox(Eigen::MatrixXd::Identity(kk, kk), 1e-12))
                throw ArgumentError("hypothesis case I requires N = I_{p+1}");
            break;
        case HypothesisCase::II: {
            if (kk < 2) throw ArgumentError("hypothesis case II requires at least one row of D");
            for (Eigen::Index j = 0; j + 1 < kk; ++j)
                if (!near(Q[j], 0.0)) throw ArgumentError("hypothesis case II: Q must be zero on the D rows");
            if (!near(Q[kk - 1], 1.0) || M.row(kk - 1).cwiseAbs().maxCoeff() > 1e-12)
                throw ArgumentError("hypothesis case II: last row must be (0, ..., 0, 1)");
            break;
        }
        case HypothesisCase::III:
            if (kk != 1 || !near(Q[0], 1.0)) throw ArgumentError("hypothesis case III requires N = (x0ᵀ, 1)");
            break;
        case HypothesisCase::General: break;
    }
}

Hypothesis Hypothesis::case_I(const Eigen::VectorXd& theta0, double w0, double z0) {
    const Eigen::Index p = theta0.size();
    Hypothesis h;
    h.M = Eigen::MatrixXd::Zero(p + 1, p);
    h.M.topRows(p).setIdentity();
    h.Q = Eigen::VectorXd::Zero(p + 1);
    h.Q[p] = 1.0;
    h.alpha.resize(p + 1);
    h.alpha << theta0, w0;
    h.z0 = z0;
    h.kind = HypothesisCase::I;
    return h;
}

Hypothesis Hypothesis::case_II(const Eigen::MatrixXd& D, const Eigen::VectorXd& d, double w0, double z0) {
    const Eigen::Index r = D.rows(), p = D.cols();
    if (d.size() != r) throw ArgumentError("case_II: D and d row counts differ");
    Hypothesis h;
    h.M = Eigen::MatrixXd::Zero(r + 1, p);
    h.M.topRows(r) = D;
    h.Q = Eigen::VectorXd::Zero(r + 1);
    h.Q[r] = 1.0;
    h.alpha.resize(r + 1);
    h.alpha << d, w0;
    h.z0 = z0;
    h.kind = HypothesisCase::II;
    return h;
}

Hypothesis Hypothesis::case_III(const Eigen::VectorXd& x0, double a, double z0) {
    Hypothesis h;
    h.M = x0.transpose();
    h.Q = Eigen::VectorXd::Ones(1);
    h.alpha = Eigen::VectorXd::Constant(1, a);
    h.z0 = z0;
    h.kind = HypothesisCase::III;
    return h;
}

}  // namespace splinth
