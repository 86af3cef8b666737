#include "splinth/cli.hpp"

#include "splinth/error.hpp"
#include "splinth/inference.hpp"
#include "splinth/io.hpp"
#include "splinth/quadrature.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace splinth::cli {

namespace {

using io::json;

void require(bool ok, const std::string& message) {
    if (!ok) throw UsageError(message);
}

double parse_real(const std::string& s, const std::string& flag) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw UsageError(flag + ": expected a number, got '" + s + "'");
    }
}

WeightTable read_weight_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path + ": cannot open for reading");
    std::string line;
    std::vector<std::pair<double, double>> knots;
    std::size_t line_no = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        std::string a, b;
        std::getline(ss, a, ',');
        std::getline(ss, b);
        try {
            std::size_t pa = 0, pb = 0;
            const double z = std::stod(a, &pa);
            const double w = std::stod(b, &pb);
            knots.emplace_back(z, w);
        } catch (const std::exception&) {
            if (header) {
                header = false;
                continue;
            }
            throw DataError(path + ": line " + std::to_string(line_no) + ": expected 'z,w'");
        }
        header = false;
    }
    if (knots.empty()) throw DataError(path + ": no weight rows");
    try {
        return WeightTable(std::move(knots));
    } catch (const ArgumentError& e) {
        throw DataError(path + ": " + e.what());
    }
}

EigenSystem make_basis(const RunConfig& cfg, Eigen::Index n) {
    const BasisKind kind = basis_kind_from_string(cfg.basis);
    const int N = cfg.n_basis > 0 ? cfg.n_basis : default_basis_size(n, cfg.m, cfg.sigma);
    if (kind == BasisKind::Trig) return EigenSystem::trig(cfg.m, cfg.sigma, N);
    const WeightTable w = cfg.weight_file.empty() ? WeightTable::constant(1.0) : read_weight_file(cfg.weight_file);
    return EigenSystem::bvp(cfg.m, w, N);
}

struct Fitted {
    FitResult fit;
    std::optional<PlugIn> plugin;
    std::string plugin_error;
    std::string policy;
};

Fitted fit_from_data(const RunConfig& cfg, bool need_plugin) {
    require(!cfg.data.empty(), to_string(cfg.command) + ": --data is required");
    const Dataset data = io::read_csv(cfg.data);
    const Family family = Family::parse(cfg.family);
    const EigenSystem basis = make_basis(cfg, data.n());
    data.validate(family, basis.null_dim());
    const LambdaChoice choice = parse_lambda(cfg.lambda);
    const double lambda = resolve_lambda(data, family, basis, choice);
    Fitted out{fit(data, family, basis, lambda), std::nullopt, {}, cfg.lambda};
    try {
        out.plugin = estimate_plugins(out.fit, data);
    } catch (const Error& e) {
        if (need_plugin) throw;
        out.plugin_error = e.what();
    }
    return out;
}

Fitted load_fit(const RunConfig& cfg) {
    if (cfg.fit.empty()) return fit_from_data(cfg, true);
    require(cfg.data.empty(), to_string(cfg.command) + ": give either --fit or --data, not both");
    json j;
    try {
        j = json::parse(io::read_text(cfg.fit));
    } catch (const json::exception& e) {
        throw DataError(cfg.fit + ": " + e.what());
    }
    io::LoadedFit loaded = io::fit_from_json(j);
    if (!loaded.plugin) throw DataError(cfg.fit + ": fit has no plug-in estimates; refit with --data");
    return Fitted{std::move(loaded.fit), std::move(loaded.plugin), {}, j.value("lambda_policy", std::string())};
}

Eigen::VectorXd x0_vector(const RunConfig& cfg, Eigen::Index p) {
    require(static_cast<Eigen::Index>(cfg.x0.size()) == p,
            "--x0: expected " + std::to_string(p) + " comma-separated values, got " + std::to_string(cfg.x0.size()));
    return Eigen::Map<const Eigen::VectorXd>(cfg.x0.data(), p);
}

double z0_value(const RunConfig& cfg) {
    require(cfg.z0.has_value(), to_string(cfg.command) + ": --z0 is required");
    return *cfg.z0;
}

void emit(const json& j, const RunConfig& cfg) { io::write_text(io::dump(j), cfg.output); }

void cmd_fit(const RunConfig& cfg) {
    const Fitted f = fit_from_data(cfg, false);
    json j = io::fit_to_json(f.fit, f.plugin ? &*f.plugin : nullptr);
    j["lambda_policy"] = f.policy;
    if (!f.plugin_error.empty()) j["plugin_error"] = f.plugin_error;
    emit(j, cfg);
    if (!cfg.grid_csv.empty()) {
        std::ostringstream ss;
        io::write_g_grid_csv(f.fit, ss);
        io::write_text(ss.str(), cfg.grid_csv);
    }
}

void cmd_ci(const RunConfig& cfg) {
    require(cfg.what == "theta" || cfg.what == "g" || cfg.what == "joint" || cfg.what == "mean",
            "--what: expected theta|g|joint|mean, got '" + cfg.what + "'");
    const double z0 = z0_value(cfg);
    const Fitted f = load_fit(cfg);
    json j;
    if (cfg.what == "mean") {
        const Eigen::VectorXd x0 = x0_vector(cfg, f.fit.theta.size());
        const Interval iv = conditional_mean_ci(f.fit, *f.plugin, x0, z0, cfg.level);
        j = json{{"what", "mean"}, {"interval", io::interval_to_json(iv)}, {"level", cfg.level}, {"z0", z0},
                 {"x0", io::to_json(x0)}, {"estimate", logistic_cdf(f.fit.linear_predictor(x0, z0))}};
    } else {
        const JointCI ci = joint_ci(f.fit, *f.plugin, z0, cfg.level);
        j = io::joint_ci_to_json(ci);
        if (cfg.what == "theta") j.erase("g");
        if (cfg.what == "g") j.erase("theta");
        j["what"] = cfg.what;
        j["theta_hat"] = io::to_json(f.fit.theta);
        j["g_hat"] = f.fit.g(z0);
    }
    emit(j, cfg);
}

void cmd_predict(const RunConfig& cfg) {
    const double z0 = z0_value(cfg);
    const Fitted f = load_fit(cfg);
    const Eigen::VectorXd x0 = x0_vector(cfg, f.fit.theta.size());
    const double eta = f.fit.linear_predictor(x0, z0);
    json j{{"x0", io::to_json(x0)}, {"z0", z0}, {"level", cfg.level}, {"linear_predictor", eta}};
    switch (f.fit.family.kind()) {
        case FamilyKind::Gaussian:
            j["prediction"] = eta;
            j["interval"] = io::interval_to_json(prediction_interval(f.fit, *f.plugin, x0, z0, cfg.level));
            j["kind"] = "prediction";
            break;
        case FamilyKind::Logistic:
            j["prediction"] = logistic_cdf(eta);
            j["interval"] = io::interval_to_json(conditional_mean_ci(f.fit, *f.plugin, x0, z0, cfg.level));
            j["kind"] = "conditional-mean";
            break;
        case FamilyKind::Gamma:
            throw UnsupportedError("predict: no interval is defined for the gamma family");
    }
    emit(j, cfg);
}

void cmd_test(const RunConfig& cfg) {
    require(!cfg.hypothesis.empty(), "test: --hypothesis is required");
    require(!cfg.data.empty(), "test: --data is required");
    const Hypothesis hyp = parse_hypothesis(cfg.hypothesis);
    const Dataset data = io::read_csv(cfg.data);
    const Family family = Family::parse(cfg.family);
    const EigenSystem basis = make_basis(cfg, data.n());
    data.validate(family, basis.null_dim());
    hyp.validate(data.p());
    TestOptions opts;
    if (cfg.seed) opts.mc_seed = *cfg.seed;
    const LrtResult r = test(data, family, basis, hyp, cfg.level, parse_lambda(cfg.lambda), opts);
    json j = io::lrt_to_json(r);
    j["hypothesis"] = json{{"case", to_string(hyp.kind)},
                           {"M", io::to_json(hyp.M)},
                           {"Q", io::to_json(hyp.Q)},
                           {"alpha", io::to_json(hyp.alpha)},
                           {"z0", hyp.z0}};
    emit(j, cfg);
}

void cmd_simulate(const RunConfig& cfg) {
    require(!cfg.design.empty(), "simulate: --design is required");
    StudySpec spec = read_study(cfg.design);
    if (cfg.seed) spec.design.seed = *cfg.seed;
    RunOptions opts;
    opts.threads = cfg.threads;
    opts.timing = cfg.timing;
    const SimReport report = run_study(spec, opts);
    emit(io::report_to_json(report), cfg);
    std::string csv = cfg.csv;
    if (csv.empty() && !cfg.output.empty() && cfg.output != "-") {
        const auto dot = cfg.output.rfind('.');
        const auto slash = cfg.output.rfind('/');
        csv = (dot != std::string::npos && (slash == std::string::npos || dot > slash) ? cfg.output.substr(0, dot)
                                                                                        : cfg.output) +
              ".csv";
    }
    if (!csv.empty()) {
        std::ostringstream ss;
        io::write_report_csv(report, ss);
        io::write_text(ss.str(), csv);
    }
}

constexpr int kBvpConstantsSize = 40;

void cmd_eigensys(const RunConfig& cfg) {
    RunConfig c = cfg;
    if (c.n_basis <= 0) c.n_basis = 21;
    const EigenSystem sys = make_basis(c, 0);
    json j = io::basis_to_json(sys);
    j["eigenvalues"] = io::to_json(sys.eigenvalues());
    j["null_dim"] = sys.null_dim();

    // Constants at a fixed λ (default 1e-4); the trigonometric kernel is refined to its truncation rule.
    const LambdaChoice choice = parse_lambda(cfg.lambda);
    const double lambda = choice.policy == LambdaPolicy::Fixed ? choice.value : 1e-4;
    const double z0 = cfg.z0.value_or(0.5);
    require(z0 > 0.0 && z0 < 1.0, "eigensys: --z0 must lie in (0, 1)");
    EigenSystem ksys = sys;
    if (sys.kind() == BasisKind::Trig) {
        const int N = std::max(sys.size(), trig_truncation(c.m, c.sigma, lambda));
        ksys = EigenSystem::trig(c.m, c.sigma, N % 2 == 1 ? N : N + 1);
    } else if (sys.size() < kBvpConstantsSize) {
        RunConfig kc = c;
        kc.n_basis = kBvpConstantsSize;
        ksys = make_basis(kc, 0);
    }
    const KernelHandle K(ksys, lambda);
    json constants;
    constants["lambda"] = lambda;
    constants["z0"] = z0;
    constants["h"] = K.bandwidth();
    constants["c0"] = c0_for(ksys, lambda, z0);
    constants["sigma_z0_sq"] = K.sigma_z0_sq(z0);
    constants["I1"] = quadrature_Il(c.m, 1);
    constants["I2"] = quadrature_Il(c.m, 2);
    constants["kernel_basis_size"] = ksys.size();
    j["constants"] = constants;
    emit(j, cfg);
    if (!cfg.grid_csv.empty()) {
        std::ostringstream ss;
        ss << "z";
        for (int nu = 0; nu < sys.size(); ++nu) ss << ",h" << nu;
        ss << '\n';
        ss.precision(17);
        for (int i = 0; i < io::kGridPoints; ++i) {
            const double z = static_cast<double>(i) / (io::kGridPoints - 1);
            const Eigen::VectorXd h = sys.eval_all(z);
            ss << z;
            for (int nu = 0; nu < sys.size(); ++nu) ss << ',' << h[nu];
            ss << '\n';
        }
        io::write_text(ss.str(), cfg.grid_csv);
    }
}

std::string key_of(const CLI::ConfigItem& item) {
    std::string key;
    for (const auto& p : item.parents) key += p + ".";
    return key + item.name;
}

std::vector<double> reals(const std::vector<std::string>& inputs, const std::string& key) {
    std::vector<double> out;
    for (const auto& s : inputs) {
        std::stringstream ss(s);
        std::string part;
        while (std::getline(ss, part, ',')) {
            const auto b = part.find_first_not_of(" \t[]");
            const auto e = part.find_last_not_of(" \t[]");
            if (b == std::string::npos) continue;
            out.push_back(parse_real(part.substr(b, e - b + 1), key));
        }
    }
    return out;
}

}  // namespace

std::string to_string(Command c) {
    switch (c) {
        case Command::Fit: return "fit";
        case Command::Ci: return "ci";
        case Command::Predict: return "predict";
        case Command::Test: return "test";
        case Command::Simulate: return "simulate";
        case Command::Eigensys: return "eigensys";
    }
    return "fit";
}

LambdaChoice parse_lambda(const std::string& text) {
    LambdaChoice c;
    if (text == "gcv") return c;
    if (text == "rate") {
        c.policy = LambdaPolicy::Rate;
        return c;
    }
    const double v = parse_real(text, "--lambda");
    require(v > 0.0, "--lambda: expected gcv, rate or a positive number, got '" + text + "'");
    c.policy = LambdaPolicy::Fixed;
    c.value = v;
    return c;
}

Hypothesis parse_hypothesis(const std::string& text) {
    json j;
    const auto first = text.find_first_not_of(" \t\r\n");
    const bool inline_json = first != std::string::npos && text[first] == '{';
    try {
        j = json::parse(inline_json ? text : io::read_text(text));
    } catch (const json::exception& e) {
        throw UsageError(std::string("--hypothesis: invalid JSON: ") + e.what());
    } catch (const DataError& e) {
        throw UsageError(std::string("--hypothesis: ") + e.what());
    }
    try {
        const std::string kind = j.value("case", std::string("general"));
        const double z0 = j.at("z0").get<double>();
        const HypothesisCase c = hypothesis_case_from_string(kind);
        if (j.contains("M")) {
            Hypothesis h;
            h.M = io::matrix_from_json(j.at("M"));
            h.Q = io::vector_from_json(j.at("Q"));
            h.alpha = io::vector_from_json(j.at("alpha"));
            h.z0 = z0;
            h.kind = c;
            return h;
        }
        switch (c) {
            case HypothesisCase::I:
                return Hypothesis::case_I(io::vector_from_json(j.at("theta0")), j.at("w0").get<double>(), z0);
            case HypothesisCase::II:
                return Hypothesis::case_II(io::matrix_from_json(j.at("D")), io::vector_from_json(j.at("d")),
                                           j.at("w0").get<double>(), z0);
            case HypothesisCase::III:
                return Hypothesis::case_III(io::vector_from_json(j.at("x0")), j.at("a").get<double>(), z0);
            case HypothesisCase::General: {
                Hypothesis h;
                h.M = io::matrix_from_json(j.at("M"));
                h.Q = io::vector_from_json(j.at("Q"));
                h.alpha = io::vector_from_json(j.at("alpha"));
                h.z0 = z0;
                h.kind = HypothesisCase::General;
                return h;
            }
        }
    } catch (const json::exception& e) {
        throw UsageError(std::string("--hypothesis: ") + e.what());
    } catch (const ArgumentError& e) {
        throw UsageError(std::string("--hypothesis: ") + e.what());
    }
    throw UsageError("--hypothesis: unrecognized case");
}

StudySpec read_study(const std::string& path) {
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_file(path);
    } catch (const CLI::Error& e) {
        throw DataError(path + ": " + e.what());
    }
    StudySpec s;
    bool have_n = false;
    for (const auto& item : items) {
        const std::string key = key_of(item);
        if (item.name == "++" || item.name == "--") continue;
        const auto one = [&]() -> std::string {
            if (item.inputs.size() != 1) throw DataError(path + ": key '" + key + "' expects a single value");
            return item.inputs.front();
        };
        const auto number = [&]() {
            try {
                return parse_real(one(), key);
            } catch (const UsageError& e) {
                throw DataError(path + ": " + e.what());
            }
        };
        const auto integer = [&]() {
            const double v = number();
            if (v != std::floor(v)) throw DataError(path + ": key '" + key + "' expects an integer");
            return v;
        };
        const auto list = [&]() {
            try {
                return reals(item.inputs, key);
            } catch (const UsageError& e) {
                throw DataError(path + ": " + e.what());
            }
        };
        if (key == "study") {
            s.study = one();
        } else if (key == "model") {
            s.design.model = sim_model_from_string(one());
        } else if (key == "n") {
            for (double v : list()) s.sizes.push_back(static_cast<Eigen::Index>(v));
            have_n = true;
        } else if (key == "theta0") {
            const auto v = list();
            s.design.theta0 = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        } else if (key == "g0") {
            s.design.g0 = one();
        } else if (key == "covariates") {
            s.design.covariates = one();
        } else if (key == "sigma") {
            s.design.sigma = number();
        } else if (key == "alpha") {
            s.design.alpha = number();
        } else if (key == "replications") {
            s.design.replications = static_cast<int>(integer());
        } else if (key == "seed") {
            s.design.seed = static_cast<std::uint64_t>(integer());
        } else if (key == "lambda") {
            try {
                s.design.lambda = parse_lambda(one());
            } catch (const UsageError& e) {
                throw DataError(path + ": " + e.what());
            }
        } else if (key == "m") {
            s.design.m = static_cast<int>(integer());
        } else if (key == "n_basis") {
            s.design.n_basis = static_cast<int>(integer());
        } else if (key == "level") {
            s.level = number();
        } else if (key == "z_points") {
            s.z_points = static_cast<int>(integer());
        } else if (key == "x0") {
            s.x0 = list();
        } else if (key == "z0") {
            s.z0 = list();
        } else if (key == "z0_points") {
            s.z0 = interior_grid(static_cast<int>(integer()));
        } else if (key == "hypothesis_value") {
            s.hypothesis_value = number();
        } else if (key == "hypothesis") {
            s.hypothesis = one();
        } else {
            throw DataError(path + ": unknown key '" + key + "'");
        }
    }
    if (s.study.empty()) throw DataError(path + ": missing key 'study'");
    if (s.study != "correlation" && s.study != "coverage" && s.study != "power" && s.study != "null" &&
        s.study != "bahadur")
        throw DataError(path + ": study must be correlation|coverage|power|null|bahadur");
    if (!have_n || s.sizes.empty()) s.sizes = {s.design.n};
    s.design.n = s.sizes.front();
    try {
        s.design.validate();
    } catch (const ArgumentError& e) {
        throw DataError(path + ": " + e.what());
    }
    return s;
}

SimReport run_study(const StudySpec& spec, const RunOptions& options) {
    const Eigen::Index p = spec.design.theta0.size();
    if (spec.study == "bahadur") return run_bahadur_study(spec.design, spec.sizes, options);

    std::vector<Eigen::VectorXd> x0s;
    if (spec.study == "coverage" || spec.study == "power") {
        std::vector<double> raw = spec.x0.empty() ? std::vector<double>{0.25, 0.5, 0.75} : spec.x0;
        if (p == 1) {
            for (double v : raw) x0s.push_back(Eigen::VectorXd::Constant(1, v));
        } else {
            if (raw.size() % static_cast<std::size_t>(p) != 0)
                throw ArgumentError("x0: length must be a multiple of p = " + std::to_string(p));
            for (std::size_t i = 0; i < raw.size(); i += static_cast<std::size_t>(p))
                x0s.push_back(Eigen::Map<const Eigen::VectorXd>(raw.data() + i, p));
        }
    }
    const std::vector<double> z0s =
        spec.z0.empty() ? (spec.study == "coverage" ? interior_grid(30) : std::vector<double>{0.25, 0.5, 0.75})
                        : spec.z0;

    SimReport merged;
    for (std::size_t s = 0; s < spec.sizes.size(); ++s) {
        SimDesign d = spec.design;
        d.n = spec.sizes[s];
        SimReport r;
        if (spec.study == "correlation") {
            r = run_correlation_study(d, interior_grid(spec.z_points), options);
        } else if (spec.study == "coverage") {
            std::vector<CoverageTarget> targets;
            for (const auto& x : x0s)
                for (double z : z0s) targets.push_back({x, z});
            r = run_coverage_study(d, targets, spec.level, options);
        } else if (spec.study == "power") {
            std::vector<PowerCell> cells;
            for (const auto& x : x0s)
                for (double z : z0s) cells.push_back({x, z, spec.hypothesis_value});
            r = run_power_study(d, cells, spec.level, options);
        } else {
            const double z0 = z0s.front();
            Hypothesis h;
            const HypothesisCase c = hypothesis_case_from_string(spec.hypothesis);
            if (c == HypothesisCase::I) {
                h = Hypothesis::case_I(d.theta0, d.g0_value(z0), z0);
            } else if (c == HypothesisCase::III) {
                const Eigen::VectorXd x = x0s.empty() ? Eigen::VectorXd::Constant(p, 0.5) : x0s.front();
                h = Hypothesis::case_III(x, x.dot(d.theta0) + d.g0_value(z0), z0);
            } else {
                throw ArgumentError("null study: hypothesis must be I or III");
            }
            r = run_null_study(d, h, options);
        }
        for (auto& cell : r.cells) cell.params["n"] = static_cast<double>(d.n);
        if (s == 0) {
            merged = r;
            merged.design = spec.design;
            merged.summary.clear();
            merged.wall_clock.reset();
        } else {
            merged.cells.insert(merged.cells.end(), r.cells.begin(), r.cells.end());
            merged.failures += r.failures;
            merged.failure_messages.insert(merged.failure_messages.end(), r.failure_messages.begin(),
                                           r.failure_messages.end());
        }
        const std::string prefix = spec.sizes.size() > 1 ? "n" + std::to_string(d.n) + "." : "";
        for (const auto& [k, v] : r.summary) merged.summary[prefix + k] = v;
        if (r.wall_clock) merged.wall_clock = merged.wall_clock.value_or(0.0) + *r.wall_clock;
    }
    return merged;
}

RunConfig parse_args(const std::vector<std::string>& args) {
    RunConfig cfg;
    CLI::App app{"Partially linear smoothing-spline models: fitting, joint inference and local LRTs", "splinth"};
    app.set_config("--config", "", "TOML key = value file; command-line flags override it");
    app.require_subcommand(1);

    std::string seed;
    app.add_option("--data", cfg.data, "CSV with header y,x1..xp,z");
    app.add_option("--fit", cfg.fit, "fit JSON written by `fit`");
    app.add_option("--family", cfg.family, "gaussian | gamma:<alpha> | logistic");
    app.add_option("--m", cfg.m, "penalty order m");
    app.add_option("--lambda", cfg.lambda, "gcv | rate | <value>");
    app.add_option("--basis", cfg.basis, "trig | bvp");
    app.add_option("--kind", cfg.basis, "alias of --basis");
    app.add_option("--n-basis", cfg.n_basis, "number of basis functions (0: automatic)");
    app.add_option("--sigma", cfg.sigma, "sigma of the trigonometric system");
    app.add_option("--weight-file", cfg.weight_file, "CSV z,w knots of the BVP weight");
    app.add_option("--x0", cfg.x0, "covariate vector, comma separated")->delimiter(',');
    app.add_option("--z0", cfg.z0, "point in (0, 1)");
    app.add_option("--level", cfg.level, "confidence level");
    app.add_option("--what", cfg.what, "theta | g | joint | mean");
    app.add_option("--hypothesis", cfg.hypothesis, "hypothesis JSON (inline or path)");
    app.add_option("--design", cfg.design, "simulation study TOML");
    app.add_option("--threads", cfg.threads, "worker threads (default: SPLINTH_THREADS, else all cores)");
    app.add_option("--seed", seed, "base seed");
    app.add_option("--output", cfg.output, "output path (default stdout)");
    app.add_option("--grid-csv", cfg.grid_csv, "CSV of the fitted curve or basis on 201 points");
    app.add_option("--csv", cfg.csv, "per-cell CSV for simulate");
    app.add_flag("--timing", cfg.timing, "report wall-clock time");

    const std::pair<Command, const char*> commands[] = {
        {Command::Fit, "fit a model"},
        {Command::Ci, "joint confidence intervals"},
        {Command::Predict, "prediction or conditional-mean interval"},
        {Command::Test, "joint local likelihood ratio test"},
        {Command::Simulate, "run a Monte Carlo study"},
        {Command::Eigensys, "tabulate an eigensystem"},
    };
    std::vector<std::pair<Command, CLI::App*>> subs;
    for (const auto& [c, help] : commands) subs.emplace_back(c, app.add_subcommand(to_string(c), help)->fallthrough());

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested{app.help()};
    } catch (const CLI::CallForAllHelp&) {
        throw HelpRequested{app.help("", CLI::AppFormatMode::All)};
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }
    for (const auto& [c, sub] : subs)
        if (sub->parsed()) cfg.command = c;

    Family::parse(cfg.family);
    require(cfg.m >= 1 && cfg.m <= 8, "--m: expected an integer in [1, 8]");
    require(cfg.basis == "trig" || cfg.basis == "bvp", "--basis: expected trig or bvp, got '" + cfg.basis + "'");
    require(cfg.n_basis >= 0, "--n-basis: must be nonnegative");
    require(cfg.sigma > 0.0 && std::isfinite(cfg.sigma), "--sigma: must be positive");
    require(cfg.level > 0.0 && cfg.level < 1.0, "--level: must lie in (0, 1)");
    require(cfg.what == "theta" || cfg.what == "g" || cfg.what == "joint" || cfg.what == "mean",
            "--what: expected theta, g, joint or mean, got '" + cfg.what + "'");
    require(cfg.threads >= 0, "--threads: must be nonnegative");
    if (cfg.z0) require(*cfg.z0 > 0.0 && *cfg.z0 < 1.0, "--z0: must lie in (0, 1)");
    parse_lambda(cfg.lambda);
    if (!seed.empty()) {
        try {
            std::size_t pos = 0;
            const unsigned long long v = std::stoull(seed, &pos);
            require(pos == seed.size(), "");
            cfg.seed = v;
        } catch (const std::exception&) {
            throw UsageError("--seed: expected a nonnegative integer, got '" + seed + "'");
        }
    }
    switch (cfg.command) {
        case Command::Fit: require(!cfg.data.empty(), "fit: --data is required"); break;
        case Command::Ci:
        case Command::Predict:
            require(!cfg.fit.empty() || !cfg.data.empty(), to_string(cfg.command) + ": --fit or --data is required");
            require(cfg.z0.has_value(), to_string(cfg.command) + ": --z0 is required");
            if (cfg.command == Command::Predict) require(!cfg.x0.empty(), "predict: --x0 is required");
            break;
        case Command::Test:
            require(!cfg.hypothesis.empty(), "test: --hypothesis is required");
            require(!cfg.data.empty(), "test: --data is required");
            break;
        case Command::Simulate: require(!cfg.design.empty(), "simulate: --design is required"); break;
        case Command::Eigensys: break;
    }
    return cfg;
}

void run(const RunConfig& cfg) {
    switch (cfg.command) {
        case Command::Fit: cmd_fit(cfg); return;
        case Command::Ci: cmd_ci(cfg); return;
        case Command::Predict: cmd_predict(cfg); return;
        case Command::Test: cmd_test(cfg); return;
        case Command::Simulate: cmd_simulate(cfg); return;
        case Command::Eigensys: cmd_eigensys(cfg); return;
    }
}

int main_entry(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    try {
        run(parse_args(args));
        return 0;
    } catch (const HelpRequested& h) {
        std::cout << h.text;
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "splinth: usage error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "splinth: data error: " << e.what() << "\n";
        return 3;
    } catch (const ArgumentError& e) {
        std::cerr << "splinth: usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "splinth: error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "splinth: error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace splinth::cli
