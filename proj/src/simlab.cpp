#include "splinth/simlab.hpp"

#include "splinth/error.hpp"
#include "splinth/inference.hpp"
#include "splinth/rng.hpp"

#include <boost/math/distributions/normal.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numbers>

namespace splinth {

namespace {

constexpr std::uint64_t kNewResponseStream = 0x6e65772d79ULL;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

void finish(SimReport& report, const SimDesign& design, int ok,
            std::chrono::steady_clock::time_point start, const RunOptions& options) {
    report.design = design;
    report.replications = design.replications;
    report.failures = design.replications - ok;
    report.seeds.reserve(static_cast<std::size_t>(design.replications));
    for (int r = 0; r < design.replications; ++r)
        report.seeds.push_back(mix_seed(design.seed, static_cast<std::uint64_t>(r)));
    report.summary["failures"] = report.failures;
    if (options.timing)
        report.wall_clock =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (report.failures * 100 > design.replications)
        throw NumericError(report.study + ": " + std::to_string(report.failures) + " of " +
                           std::to_string(design.replications) + " replications failed (limit 1%)" +
                           (report.failure_messages.empty() ? "" : "; first: " + report.failure_messages.front()));
}

template <class T>
int count_ok(const std::vector<std::optional<T>>& v) {
    int c = 0;
    for (const auto& x : v) c += x.has_value();
    return c;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const auto n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

std::string to_string(SimModel model) {
    switch (model) {
        case SimModel::Example1CaseI: return "example1-caseI";
        case SimModel::Example1CaseII: return "example1-caseII";
        case SimModel::Gamma: return "gamma";
        case SimModel::Logistic: return "logistic";
    }
    return "example1-caseI";
}

SimModel sim_model_from_string(const std::string& text) {
    if (text == "example1-caseI") return SimModel::Example1CaseI;
    if (text == "example1-caseII") return SimModel::Example1CaseII;
    if (text == "gamma") return SimModel::Gamma;
    if (text == "logistic") return SimModel::Logistic;
    throw ArgumentError("unknown model '" + text + "' (expected example1-caseI|example1-caseII|gamma|logistic)");
}

double beta_density(double a, double b, double z) {
    if (z <= 0.0 || z >= 1.0) return 0.0;
    const double lg = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
    return std::exp(lg + (a - 1.0) * std::log(z) + (b - 1.0) * std::log1p(-z));
}

void SimDesign::validate() const {
    if (n < 20) throw ArgumentError("design: n must be >= 20");
    if (replications < 1) throw ArgumentError("design: replications must be >= 1");
    if (theta0.size() < 1 || !theta0.allFinite()) throw ArgumentError("design: theta0 must be a finite vector");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ArgumentError("design: sigma must be >= 0");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ArgumentError("design: alpha must be positive");
    if (m < 1) throw ArgumentError("design: m must be >= 1");
    if (covariates != "correlated" && covariates != "independent")
        throw ArgumentError("design: covariates must be correlated|independent");
    g0_value(0.5);
}

Family SimDesign::family() const {
    switch (model) {
        case SimModel::Example1CaseI:
        case SimModel::Example1CaseII: return Family::gaussian();
        case SimModel::Gamma: return Family::gamma(alpha);
        case SimModel::Logistic: return Family::logistic();
    }
    return Family::gaussian();
}

double SimDesign::g0_value(double z) const {
    if (g0 == "beta-mixture") return 0.6 * beta_density(30.0, 17.0, z) + 0.4 * beta_density(3.0, 11.0, z);
    if (g0 == "sin-pi") return std::sin(std::numbers::pi * z);
    if (g0 == "sin-2.8pi") return std::sin(2.8 * std::numbers::pi * z);
    if (g0 == "sin-2pi") return std::sin(2.0 * std::numbers::pi * z);
    if (g0 == "logistic") return 0.3e6 * std::pow(1.0 - z, 6) + 1e4 * std::pow(1.0 - z, 10) - 2.0;
    if (g0 == "logistic-alt")
        return 0.3e6 * std::pow(z, 11) * std::pow(1.0 - z, 6) + 1e4 * std::pow(z, 3) * std::pow(1.0 - z, 10) - 2.0;
    if (g0 == "zero") return 0.0;
    throw ArgumentError("design: unknown g0 '" + g0 + "'");
}

Eigen::VectorXd SimDesign::G(double z) const {
    const double v = covariates == "correlated" ? (0.5 + 0.2 * z) / 1.2 : 0.5;
    return Eigen::VectorXd::Constant(theta0.size(), v);
}

Eigen::MatrixXd SimDesign::omega() const {
    const double var = covariates == "correlated" ? (1.0 / 12.0) / 1.44 : 1.0 / 12.0;
    double b = 1.0;  // Gaussian in the unit-variance metric
    if (model == SimModel::Gamma) b = alpha;
    if (model == SimModel::Logistic) throw UnsupportedError("design: Omega has no closed form for logistic");
    return b * var * Eigen::MatrixXd::Identity(theta0.size(), theta0.size());
}

EigenSystem SimDesign::basis() const {
    const int N = n_basis > 0 ? n_basis : default_basis_size(n, m);
    switch (model) {
        case SimModel::Example1CaseI:
        case SimModel::Gamma: return EigenSystem::trig(m, 1.0, N);
        case SimModel::Example1CaseII:
        case SimModel::Logistic: return EigenSystem::bvp(m, WeightTable::constant(1.0), N);
    }
    return EigenSystem::trig(m, 1.0, N);
}

Dataset generate(const SimDesign& design, std::uint64_t rep) {
    design.validate();
    const Eigen::Index n = design.n, p = design.theta0.size();
    Rng rng(design.seed, rep);
    Dataset d;
    d.y.resize(n);
    d.X.resize(n, p);
    d.z.resize(n);
    const bool correlated = design.covariates == "correlated";
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = rng.uniform();
        d.z[i] = z;
        for (Eigen::Index k = 0; k < p; ++k) {
            const double u = rng.uniform();
            d.X(i, k) = correlated ? (u + 0.2 * z) / 1.2 : u;
        }
        const double a = d.X.row(i).dot(design.theta0) + design.g0_value(z);
        switch (design.model) {
            case SimModel::Example1CaseI:
            case SimModel::Example1CaseII: d.y[i] = a + design.sigma * rng.normal(); break;
            case SimModel::Gamma: d.y[i] = rng.gamma(design.alpha) * std::exp(-a); break;
            case SimModel::Logistic: d.y[i] = rng.bernoulli(logistic_cdf(a)) ? 1.0 : 0.0; break;
        }
    }
    return d;
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("SPLINTH_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

std::vector<double> interior_grid(int count) {
    std::vector<double> g(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) g[static_cast<std::size_t>(j)] = (j + 0.5) / count;
    return g;
}

SimReport run_correlation_study(const SimDesign& design, const std::vector<double>& z_grid,
                                const RunOptions& options) {
    design.validate();
    if (design.replications < 2) throw ArgumentError("correlation study: ACC needs at least two replications");
    if (z_grid.empty()) throw ArgumentError("correlation study: empty z grid");
    const auto start = std::chrono::steady_clock::now();
    const EigenSystem basis = design.basis();
    const Family family = design.family();
    const Eigen::Index p = design.theta0.size();

    struct Rep {
        Eigen::VectorXd theta;
        std::vector<double> g;
    };
    SimReport report;
    report.study = "correlation";
    const std::function<Rep(int)> fn = [&](int r) {
        const Dataset data = generate(design, static_cast<std::uint64_t>(r));
        const double lambda = resolve_lambda(data, family, basis, design.lambda);
        const FitResult f = fit(data, family, basis, lambda);
        Rep out;
        out.theta = f.theta;
        for (const double z : z_grid) out.g.push_back(f.g(z));
        return out;
    };
    const auto reps = parallel_map(design.replications, resolve_threads(options.threads), fn, report.failure_messages);

    double max_acc = 0.0, sum_acc = 0.0;
    int cells = 0;
    for (Eigen::Index k = 0; k < p; ++k) {
        for (std::size_t j = 0; j < z_grid.size(); ++j) {
            std::vector<double> a, b;
            for (const auto& rep : reps) {
                if (!rep) continue;
                a.push_back(rep->theta[k]);
                b.push_back(rep->g[j]);
            }
            const double acc = std::abs(correlation(a, b));
            SimCell cell;
            cell.params["k"] = static_cast<double>(k + 1);
            cell.params["z"] = z_grid[j];
            cell.stats["acc"] = acc;
            report.cells.push_back(std::move(cell));
            max_acc = std::max(max_acc, acc);
            sum_acc += acc;
            ++cells;
        }
    }
    report.summary["max_acc"] = max_acc;
    report.summary["mean_acc"] = sum_acc / cells;
    finish(report, design, count_ok(reps), start, options);
    return report;
}

SimReport run_coverage_study(const SimDesign& design, const std::vector<CoverageTarget>& targets, double level,
                             const RunOptions& options) {
    design.validate();
    if (targets.empty()) throw ArgumentError("coverage study: no targets");
    for (const auto& t : targets) {
        if (t.x0.size() != design.theta0.size()) throw ArgumentError("coverage study: x0 has the wrong length");
        if (!(t.z0 > 0.0 && t.z0 < 1.0)) throw ArgumentError("coverage study: z0 must lie in (0, 1)");
    }
    const auto start = std::chrono::steady_clock::now();
    const EigenSystem basis = design.basis();
    const Family family = design.family();
    const bool logistic = design.model == SimModel::Logistic;
    const bool closed = design.model == SimModel::Example1CaseI;
    if (design.model == SimModel::Gamma) throw UnsupportedError("coverage study: no interval for the gamma model");

    struct Rep {
        std::vector<double> covered, conditional, length;
    };
    SimReport report;
    report.study = "coverage";
    const std::function<Rep(int)> fn = [&](int r) {
        const Dataset data = generate(design, static_cast<std::uint64_t>(r));
        const double lambda = resolve_lambda(data, family, basis, design.lambda);
        const FitResult f = fit(data, family, basis, lambda);
        std::optional<PlugIn> plugin;
        if (!closed) {
            InferenceOptions io;
            io.design_density = [](double) { return 1.0; };
            plugin = estimate_plugins(f, data, io);
        }
        Rng fresh(mix_seed(design.seed, kNewResponseStream), static_cast<std::uint64_t>(r));
        Rep out;
        for (const auto& t : targets) {
            const double a0 = t.x0.dot(design.theta0) + design.g0_value(t.z0);
            Interval iv;
            double covered = 0.0, cond = 0.0;
            if (logistic) {
                iv = conditional_mean_ci(f, *plugin, t.x0, t.z0, level);
                covered = iv.contains(logistic_cdf(a0)) ? 1.0 : 0.0;
                cond = covered;
            } else {
                iv = closed ? prediction_interval(f, t.x0, t.z0, level)
                            : prediction_interval(f, *plugin, t.x0, t.z0, level);
                const double ynew = a0 + design.sigma * fresh.normal();
                covered = iv.contains(ynew) ? 1.0 : 0.0;
                if (design.sigma > 0.0) {
                    cond = normal_cdf((iv.upper - a0) / design.sigma) - normal_cdf((iv.lower - a0) / design.sigma);
                } else {
                    cond = iv.contains(a0) ? 1.0 : 0.0;
                }
            }
            out.covered.push_back(covered);
            out.conditional.push_back(cond);
            out.length.push_back(iv.length());
        }
        return out;
    };
    const auto reps = parallel_map(design.replications, resolve_threads(options.threads), fn, report.failure_messages);
    const int ok = count_ok(reps);

    double min_cov = 1.0, max_cov = 0.0, min_cond = 1.0, max_cond = 0.0, len_sum = 0.0;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        double cov = 0.0, cond = 0.0, cond2 = 0.0, len = 0.0;
        for (const auto& rep : reps) {
            if (!rep) continue;
            cov += rep->covered[t];
            cond += rep->conditional[t];
            cond2 += rep->conditional[t] * rep->conditional[t];
            len += rep->length[t];
        }
        const double R = std::max(ok, 1);
        cov /= R;
        cond /= R;
        len /= R;
        const double cond_var = std::max(0.0, cond2 / R - cond * cond);
        SimCell cell;
        for (Eigen::Index k = 0; k < targets[t].x0.size(); ++k)
            cell.params["x0_" + std::to_string(k + 1)] = targets[t].x0[k];
        cell.params["z0"] = targets[t].z0;
        cell.stats["coverage"] = cov;
        cell.stats["coverage_se"] = std::sqrt(cov * (1.0 - cov) / R);
        cell.stats["conditional_coverage"] = cond;
        cell.stats["conditional_coverage_se"] = std::sqrt(cond_var / R);
        cell.stats["mean_length"] = len;
        report.cells.push_back(std::move(cell));
        min_cov = std::min(min_cov, cov);
        max_cov = std::max(max_cov, cov);
        min_cond = std::min(min_cond, cond);
        max_cond = std::max(max_cond, cond);
        len_sum += len;
    }
    report.summary["min_coverage"] = min_cov;
    report.summary["max_coverage"] = max_cov;
    report.summary["min_conditional_coverage"] = min_cond;
    report.summary["max_conditional_coverage"] = max_cond;
    report.summary["mean_length"] = len_sum / static_cast<double>(targets.size());
    finish(report, design, ok, start, options);
    return report;
}

SimReport run_power_study(const SimDesign& design, const std::vector<PowerCell>& cells, double level,
                          const RunOptions& options) {
    design.validate();
    if (cells.empty()) throw ArgumentError("power study: no hypotheses");
    std::vector<Hypothesis> hyps;
    for (const auto& c : cells) {
        Hypothesis h = Hypothesis::case_III(c.x0, c.alpha, c.z0);
        h.validate(design.theta0.size());
        hyps.push_back(std::move(h));
    }
    const auto start = std::chrono::steady_clock::now();
    const EigenSystem basis = design.basis();
    const Family family = design.family();

    SimReport report;
    report.study = "power";
    const std::function<std::vector<double>(int)> fn = [&](int r) {
        const Dataset data = generate(design, static_cast<std::uint64_t>(r));
        const double lambda = resolve_lambda(data, family, basis, design.lambda);
        const FitResult u = fit(data, family, basis, lambda);
        const NullLaw law = NullLaw::mixture(0, c0_for(basis, lambda, 0.5));
        std::vector<double> rejected;
        for (const auto& h : hyps) {
            const FitResult c = fit_constrained(data, family, basis, lambda, h);
            const double stat = lrt_statistic(u, c);
            rejected.push_back(law.sf(stat) < 1.0 - level ? 1.0 : 0.0);
        }
        return rejected;
    };
    const auto reps = parallel_map(design.replications, resolve_threads(options.threads), fn, report.failure_messages);
    const int ok = count_ok(reps);
    const double R = std::max(ok, 1);
    for (std::size_t j = 0; j < cells.size(); ++j) {
        double rate = 0.0;
        for (const auto& rep : reps)
            if (rep) rate += (*rep)[j];
        rate /= R;
        SimCell cell;
        for (Eigen::Index k = 0; k < cells[j].x0.size(); ++k)
            cell.params["x0_" + std::to_string(k + 1)] = cells[j].x0[k];
        cell.params["z0"] = cells[j].z0;
        cell.params["alpha"] = cells[j].alpha;
        cell.params["n"] = static_cast<double>(design.n);
        cell.stats["rejection_rate"] = rate;
        cell.stats["se"] = std::sqrt(rate * (1.0 - rate) / R);
        report.cells.push_back(std::move(cell));
    }
    finish(report, design, ok, start, options);
    return report;
}

SimReport run_null_study(const SimDesign& design, const Hypothesis& hyp, const RunOptions& options,
                         std::vector<double>* statistics) {
    design.validate();
    hyp.validate(design.theta0.size());
    if (hyp.kind == HypothesisCase::General) throw UnsupportedError("null study: mixture cases I-III only");
    const auto start = std::chrono::steady_clock::now();
    const EigenSystem basis = design.basis();
    const Family family = design.family();

    SimReport report;
    report.study = "null";
    const std::function<double(int)> fn = [&](int r) {
        const Dataset data = generate(design, static_cast<std::uint64_t>(r));
        const double lambda = resolve_lambda(data, family, basis, design.lambda);
        const FitResult u = fit(data, family, basis, lambda);
        const FitResult c = fit_constrained(data, family, basis, lambda, hyp);
        return lrt_statistic(u, c);
    };
    const auto reps = parallel_map(design.replications, resolve_threads(options.threads), fn, report.failure_messages);
    std::vector<double> stats;
    for (const auto& s : reps)
        if (s) stats.push_back(*s);
    std::sort(stats.begin(), stats.end());
    const double c0v = c0_for(basis, rate_lambda(design.n, design.m), hyp.z0);
    const NullLaw law = NullLaw::mixture(hyp.mixture_dof(), c0v);
    double ks = 0.0, reject = 0.0, mean = 0.0;
    const auto R = static_cast<double>(stats.size());
    for (std::size_t i = 0; i < stats.size(); ++i) {
        const double F = law.cdf(stats[i]);
        ks = std::max({ks, (i + 1) / R - F, F - i / R});
        reject += law.sf(stats[i]) < 0.05 ? 1.0 : 0.0;
        mean += stats[i];
    }
    SimCell cell;
    cell.params["z0"] = hyp.z0;
    cell.params["dof"] = hyp.mixture_dof();
    cell.params["c0"] = c0v;
    cell.stats["ks_distance"] = ks;
    cell.stats["rejection_rate_5pct"] = reject / R;
    cell.stats["mean_statistic"] = mean / R;
    report.cells.push_back(std::move(cell));
    report.summary["ks_distance"] = ks;
    if (statistics) *statistics = stats;
    finish(report, design, static_cast<int>(stats.size()), start, options);
    return report;
}

SimReport run_bahadur_study(const SimDesign& design, const std::vector<Eigen::Index>& sizes,
                            const RunOptions& options) {
    design.validate();
    if (design.model != SimModel::Example1CaseI)
        throw UnsupportedError("bahadur study: Example-1 case I (Gaussian, trigonometric basis) only");
    if (sizes.empty()) throw ArgumentError("bahadur study: no sample sizes");
    const auto start = std::chrono::steady_clock::now();
    SimReport report;
    report.study = "bahadur";
    int ok_total = 0;
    BahadurTruth truth;
    truth.theta0 = design.theta0;
    truth.g0 = [&design](double z) { return design.g0_value(z); };
    truth.G = [&design](double z) { return design.G(z); };
    truth.omega = design.omega();
    for (const Eigen::Index n : sizes) {
        SimDesign dn = design;
        dn.n = n;
        dn.validate();
        const EigenSystem basis = dn.basis();
        const Family family = dn.family();
        const std::function<std::pair<double, double>(int)> fn = [&](int r) {
            const Dataset data = generate(dn, static_cast<std::uint64_t>(r));
            const double lambda = resolve_lambda(data, family, basis, dn.lambda);
            const FitResult f = fit(data, family, basis, lambda);
            const BahadurResult b = bahadur_diagnostic(f, data, truth);
            return std::make_pair(b.remainder, b.penalty_norm);
        };
        std::vector<std::string> errors;
        const auto reps = parallel_map(dn.replications, resolve_threads(options.threads), fn, errors);
        std::vector<double> rem, pen;
        for (const auto& r : reps) {
            if (!r) continue;
            rem.push_back(r->first);
            pen.push_back(r->second);
        }
        for (auto& e : errors) report.failure_messages.push_back("n=" + std::to_string(n) + " " + e);
        ok_total += static_cast<int>(rem.size());
        SimCell cell;
        cell.params["n"] = static_cast<double>(n);
        cell.stats["median_remainder"] = median(rem);
        cell.stats["median_penalty_norm"] = median(pen);
        report.cells.push_back(std::move(cell));
    }
    SimDesign shown = design;
    shown.replications = design.replications * static_cast<int>(sizes.size());
    finish(report, shown, ok_total, start, options);
    report.design = design;
    return report;
}

}  // namespace splinth
