#include "splinth/io.hpp"

#include "splinth/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace splinth::io {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_double(const std::string& s, double& v) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(v);
}

std::string real(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s = buf;
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

void emit(const json& v, std::string& out, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
    switch (v.type()) {
        case json::value_t::object: {
            if (v.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = v.begin(); it != v.end(); ++it) {  // std::map: keys already sorted
                if (!first) out += ",\n";
                first = false;
                out += inner + json(it.key()).dump() + ": ";
                emit(it.value(), out, indent + 1);
            }
            out += "\n" + pad + "}";
            return;
        }
        case json::value_t::array: {
            if (v.empty()) {
                out += "[]";
                return;
            }
            bool scalar = true;
            for (const auto& e : v) scalar = scalar && !e.is_structured();
            if (scalar) {
                out += "[";
                for (std::size_t i = 0; i < v.size(); ++i) {
                    if (i) out += ", ";
                    emit(v[i], out, indent + 1);
                }
                out += "]";
                return;
            }
            out += "[\n";
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) out += ",\n";
                out += inner;
                emit(v[i], out, indent + 1);
            }
            out += "\n" + pad + "]";
            return;
        }
        case json::value_t::number_float: out += real(v.get<double>()); return;
        default: out += v.dump(); return;
    }
}

double num(const json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    return j.get<double>();
}

json weight_to_json(const WeightTable& w) {
    json arr = json::array();
    for (const auto& [z, v] : w.knots()) arr.push_back(json::array({z, v}));
    return arr;
}

WeightTable weight_from_json(const json& j) {
    std::vector<std::pair<double, double>> knots;
    for (const auto& kv : j) knots.emplace_back(kv.at(0).get<double>(), kv.at(1).get<double>());
    return WeightTable(std::move(knots));
}

std::string policy_name(LambdaPolicy p) {
    switch (p) {
        case LambdaPolicy::Gcv: return "gcv";
        case LambdaPolicy::Fixed: return "fixed";
        case LambdaPolicy::Rate: return "rate";
    }
    return "gcv";
}

LambdaPolicy policy_from(const std::string& s) {
    if (s == "gcv") return LambdaPolicy::Gcv;
    if (s == "fixed") return LambdaPolicy::Fixed;
    if (s == "rate") return LambdaPolicy::Rate;
    throw ArgumentError("unknown lambda policy '" + s + "'");
}

json strings(const std::vector<std::string>& v) {
    json a = json::array();
    for (const auto& s : v) a.push_back(s);
    return a;
}

json fit_summary(const FitResult& f) {
    return json{{"theta", to_json(f.theta)},
                {"objective", f.objective},
                {"iterations", f.iterations},
                {"grad_norm", f.grad_norm}};
}

}  // namespace

Dataset parse_csv(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split(trim(line));
            break;
        }
    }
    if (header.empty()) throw DataError(source + ": no data rows");

    int y_col = -1, z_col = -1;
    std::map<int, int> x_cols;  // x index (1-based) -> column
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& h = header[c];
        const int ci = static_cast<int>(c);
        if (h == "y") {
            if (y_col >= 0) throw DataError(source + ": duplicate column 'y'");
            y_col = ci;
        } else if (h == "z") {
            if (z_col >= 0) throw DataError(source + ": duplicate column 'z'");
            z_col = ci;
        } else if (h.size() > 1 && h[0] == 'x') {
            int k = 0;
            const auto [ptr, ec] = std::from_chars(h.data() + 1, h.data() + h.size(), k);
            if (ec != std::errc() || ptr != h.data() + h.size() || k < 1)
                throw DataError(source + ": unrecognized column '" + h + "'");
            if (!x_cols.emplace(k, ci).second) throw DataError(source + ": duplicate column '" + h + "'");
        } else {
            throw DataError(source + ": unrecognized column '" + h + "'");
        }
    }
    if (y_col < 0) throw DataError(source + ": missing column 'y'");
    if (z_col < 0) throw DataError(source + ": missing column 'z'");
    const int p = static_cast<int>(x_cols.size());
    for (int k = 1; k <= p; ++k)
        if (!x_cols.count(k)) throw DataError(source + ": missing column 'x" + std::to_string(k) + "'");

    std::vector<double> ys, zs, xs;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        ++row;
        const auto cells = split(t);
        const std::string where = source + ": row " + std::to_string(row) + " (line " + std::to_string(line_no) + ")";
        if (cells.size() != header.size())
            throw DataError(where + ": expected " + std::to_string(header.size()) + " columns, found " +
                            std::to_string(cells.size()));
        const auto get = [&](int col) {
            double v = 0.0;
            if (!parse_double(cells[static_cast<std::size_t>(col)], v))
                throw DataError(where + ", column '" + header[static_cast<std::size_t>(col)] +
                                "': non-numeric value '" + cells[static_cast<std::size_t>(col)] + "'");
            return v;
        };
        ys.push_back(get(y_col));
        for (int k = 1; k <= p; ++k) xs.push_back(get(x_cols[k]));
        const double z = get(z_col);
        if (z < 0.0 || z > 1.0) throw DataError(where + ", column 'z': value " + real(z) + " outside [0, 1]");
        zs.push_back(z);
    }
    if (row == 0) throw DataError(source + ": no data rows");

    Dataset d;
    const auto n = static_cast<Eigen::Index>(row);
    d.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
    d.z = Eigen::Map<Eigen::VectorXd>(zs.data(), n);
    d.X = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(xs.data(), n, p);
    return d;
}

Dataset read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path + ": cannot open for reading");
    return parse_csv(in, path);
}

void write_csv(const Dataset& data, std::ostream& out) {
    out << "y";
    for (Eigen::Index k = 0; k < data.p(); ++k) out << ",x" << k + 1;
    out << ",z\n";
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        out << real(data.y[i]);
        for (Eigen::Index k = 0; k < data.p(); ++k) out << ',' << real(data.X(i, k));
        out << ',' << real(data.z[i]) << '\n';
    }
}

std::string dump(const json& value) {
    std::string out;
    emit(value, out, 0);
    out += '\n';
    return out;
}

void write_text(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        std::cout.flush();
        if (!std::cout) throw Error("stdout: write failed");
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(path + ": cannot open for writing");
    out << text;
    out.close();
    if (!out) throw Error(path + ": write failed");
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path + ": cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json to_json(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        a.push_back(std::move(row));
    }
    return a;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = num(j[i]);
    return v;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& r = j[static_cast<std::size_t>(i)];
        if (static_cast<Eigen::Index>(r.size()) != cols) throw ArgumentError("ragged matrix in JSON");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = num(r[static_cast<std::size_t>(c)]);
    }
    return m;
}

json basis_to_json(const EigenSystem& system) {
    json j{{"kind", to_string(system.kind())}, {"m", system.order()}, {"size", system.size()}};
    if (system.kind() == BasisKind::Trig) {
        j["sigma"] = system.sigma();
    } else {
        j["grid"] = system.grid();
        j["weight"] = weight_to_json(system.weight_table());
    }
    return j;
}

EigenSystem basis_from_json(const json& j) {
    const BasisKind kind = basis_kind_from_string(j.at("kind").get<std::string>());
    const int m = j.at("m").get<int>();
    const int N = j.at("size").get<int>();
    if (kind == BasisKind::Trig) return EigenSystem::trig(m, j.at("sigma").get<double>(), N);
    return EigenSystem::bvp(m, weight_from_json(j.at("weight")), N, j.at("grid").get<int>());
}

json fit_to_json(const FitResult& fit, const PlugIn* plugin) {
    json g_z = json::array(), g_v = json::array();
    for (int i = 0; i < kGridPoints; ++i) {
        const double z = static_cast<double>(i) / (kGridPoints - 1);
        g_z.push_back(z);
        g_v.push_back(fit.g(z));
    }
    json j{{"family", fit.family.name()},
           {"n", fit.n},
           {"p", fit.theta.size()},
           {"basis", basis_to_json(fit.system)},
           {"lambda", fit.lambda},
           {"h", fit.h},
           {"theta", to_json(fit.theta)},
           {"coef", to_json(fit.coef)},
           {"sigma2", fit.sigma2},
           {"trace", fit.trace},
           {"objective", fit.objective},
           {"iterations", fit.iterations},
           {"grad_norm", fit.grad_norm},
           {"warnings", strings(fit.warnings)},
           {"g_grid", json{{"z", g_z}, {"g", g_v}}}};
    if (plugin) {
        j["plugin"] = json{{"n", plugin->n},
                           {"omega", to_json(plugin->omega)},
                           {"weight", weight_to_json(plugin->weight)},
                           {"g_num_coef", to_json(plugin->g_num_coef)},
                           {"b_coef", to_json(plugin->b_coef)},
                           {"b_const", plugin->b_const},
                           {"lambda", plugin->lambda},
                           {"closed_form", plugin->closed_form}};
    }
    return j;
}

void write_g_grid_csv(const FitResult& fit, std::ostream& out) {
    out << "z,g\n";
    for (int i = 0; i < kGridPoints; ++i) {
        const double z = static_cast<double>(i) / (kGridPoints - 1);
        out << real(z) << ',' << real(fit.g(z)) << '\n';
    }
}

LoadedFit fit_from_json(const json& j) {
    try {
        LoadedFit out{FitResult(Family::parse(j.at("family").get<std::string>()), basis_from_json(j.at("basis"))),
                      std::nullopt};
        FitResult& f = out.fit;
        f.n = j.at("n").get<Eigen::Index>();
        f.lambda = j.at("lambda").get<double>();
        f.h = num(j.at("h"));
        f.theta = vector_from_json(j.at("theta"));
        f.coef = vector_from_json(j.at("coef"));
        f.sigma2 = num(j.at("sigma2"));
        f.trace = num(j.at("trace"));
        f.objective = num(j.at("objective"));
        f.iterations = j.at("iterations").get<int>();
        f.grad_norm = num(j.at("grad_norm"));
        for (const auto& w : j.at("warnings")) f.warnings.push_back(w.get<std::string>());
        if (f.coef.size() != f.system.size()) throw DataError("fit JSON: coef length does not match the basis");
        if (j.contains("plugin")) {
            const json& pj = j.at("plugin");
            PlugIn pl;
            pl.n = pj.at("n").get<Eigen::Index>();
            pl.omega = matrix_from_json(pj.at("omega"));
            pl.weight = weight_from_json(pj.at("weight"));
            pl.g_num_coef = matrix_from_json(pj.at("g_num_coef"));
            pl.b_coef = vector_from_json(pj.at("b_coef"));
            pl.b_const = pj.at("b_const").get<double>();
            if (pl.g_num_coef.rows() != f.theta.size() ||
                (f.theta.size() > 0 && pl.g_num_coef.cols() != f.system.size()))
                throw DataError("fit JSON: plug-in G coefficients do not match the fit");
            attach_G(pl, f.system);
            attach_inference_system(pl, f);
            out.plugin = std::move(pl);
        }
        return out;
    } catch (const json::exception& e) {
        throw DataError(std::string("fit JSON: ") + e.what());
    }
}

json interval_to_json(const Interval& iv) {
    return json{{"lower", iv.lower}, {"upper", iv.upper}, {"center", iv.center()}, {"length", iv.length()}};
}

json joint_ci_to_json(const JointCI& ci) {
    json theta = json::array();
    for (const auto& iv : ci.theta) theta.push_back(interval_to_json(iv));
    return json{{"theta", theta},
                {"g", interval_to_json(ci.g)},
                {"level", ci.level},
                {"z0", ci.z0},
                {"omega", to_json(ci.omega)},
                {"sigma_z0_sq", ci.sigma_z0_sq},
                {"h", ci.h}};
}

json lrt_to_json(const LrtResult& r) {
    const NullLaw& law = r.law;
    json lj{{"kind", law.kind() == NullLawKind::Mixture ? "mixture" : "quadratic"},
            {"description", law.describe()},
            {"dof", law.dof()},
            {"c0", law.c0()},
            {"cz0", law.cz0()},
            {"quantile", law.quantile(r.level)}};
    if (law.kind() == NullLawKind::Quadratic) {
        lj["phi0"] = to_json(law.phi0());
        lj["draws"] = law.draws();
    }
    return json{{"statistic", r.statistic},
                {"p_value", r.p_value},
                {"reject", r.reject},
                {"level", r.level},
                {"c0", r.c0},
                {"lambda", r.lambda},
                {"null_law", lj},
                {"unconstrained", fit_summary(r.unconstrained)},
                {"constrained", fit_summary(r.constrained)},
                {"warnings", strings(r.warnings)}};
}

json design_to_json(const SimDesign& d) {
    json lambda{{"policy", policy_name(d.lambda.policy)}, {"value", d.lambda.value}};
    lambda["grid"] = json::array();
    for (double g : d.lambda.grid) lambda["grid"].push_back(g);
    return json{{"model", to_string(d.model)},
                {"n", d.n},
                {"theta0", to_json(d.theta0)},
                {"g0", d.g0},
                {"covariates", d.covariates},
                {"sigma", d.sigma},
                {"alpha", d.alpha},
                {"replications", d.replications},
                {"seed", d.seed},
                {"lambda", lambda},
                {"m", d.m},
                {"n_basis", d.n_basis}};
}

SimDesign design_from_json(const json& j) {
    SimDesign d;
    d.model = sim_model_from_string(j.at("model").get<std::string>());
    d.n = j.at("n").get<Eigen::Index>();
    d.theta0 = vector_from_json(j.at("theta0"));
    d.g0 = j.at("g0").get<std::string>();
    d.covariates = j.at("covariates").get<std::string>();
    d.sigma = j.at("sigma").get<double>();
    d.alpha = j.at("alpha").get<double>();
    d.replications = j.at("replications").get<int>();
    d.seed = j.at("seed").get<std::uint64_t>();
    const json& l = j.at("lambda");
    d.lambda.policy = policy_from(l.at("policy").get<std::string>());
    d.lambda.value = l.at("value").get<double>();
    for (const auto& g : l.at("grid")) d.lambda.grid.push_back(g.get<double>());
    d.m = j.at("m").get<int>();
    d.n_basis = j.at("n_basis").get<int>();
    return d;
}

json report_to_json(const SimReport& r) {
    json cells = json::array();
    for (const auto& c : r.cells) {
        json params = json::object(), stats = json::object();
        for (const auto& [k, v] : c.params) params[k] = v;
        for (const auto& [k, v] : c.stats) stats[k] = v;
        cells.push_back(json{{"params", params}, {"stats", stats}});
    }
    json summary = json::object();
    for (const auto& [k, v] : r.summary) summary[k] = v;
    json seeds = json::array();
    for (auto s : r.seeds) seeds.push_back(s);
    json j{{"study", r.study},
           {"design", design_to_json(r.design)},
           {"cells", cells},
           {"summary", summary},
           {"replications", r.replications},
           {"failures", r.failures},
           {"failure_messages", strings(r.failure_messages)},
           {"seeds", seeds}};
    if (r.wall_clock) j["wall_clock_seconds"] = *r.wall_clock;
    return j;
}

SimReport report_from_json(const json& j) {
    try {
        SimReport r;
        r.study = j.at("study").get<std::string>();
        r.design = design_from_json(j.at("design"));
        for (const auto& cj : j.at("cells")) {
            SimCell c;
            for (auto it = cj.at("params").begin(); it != cj.at("params").end(); ++it) c.params[it.key()] = num(*it);
            for (auto it = cj.at("stats").begin(); it != cj.at("stats").end(); ++it) c.stats[it.key()] = num(*it);
            r.cells.push_back(std::move(c));
        }
        for (auto it = j.at("summary").begin(); it != j.at("summary").end(); ++it) r.summary[it.key()] = num(*it);
        r.replications = j.at("replications").get<int>();
        r.failures = j.at("failures").get<int>();
        for (const auto& m : j.at("failure_messages")) r.failure_messages.push_back(m.get<std::string>());
        for (const auto& s : j.at("seeds")) r.seeds.push_back(s.get<std::uint64_t>());
        if (j.contains("wall_clock_seconds")) r.wall_clock = j.at("wall_clock_seconds").get<double>();
        return r;
    } catch (const json::exception& e) {
        throw DataError(std::string("report JSON: ") + e.what());
    }
}

void write_report_csv(const SimReport& report, std::ostream& out) {
    std::set<std::string> params, stats;
    for (const auto& c : report.cells) {
        for (const auto& kv : c.params) params.insert(kv.first);
        for (const auto& kv : c.stats) stats.insert(kv.first);
    }
    out << "study";
    for (const auto& k : params) out << ',' << k;
    for (const auto& k : stats) out << ',' << k;
    out << '\n';
    const auto cell_value = [](const std::map<std::string, double>& m, const std::string& k) {
        const auto it = m.find(k);
        return it == m.end() ? std::string() : (std::isfinite(it->second) ? real(it->second) : std::string("nan"));
    };
    for (const auto& c : report.cells) {
        out << report.study;
        for (const auto& k : params) out << ',' << cell_value(c.params, k);
        for (const auto& k : stats) out << ',' << cell_value(c.stats, k);
        out << '\n';
    }
}

}  // namespace splinth::io
