#pragma once

// CSV ingestion and deterministic JSON/CSV serialization of fits, intervals, tests and
// simulation reports.

#include "splinth/fitter.hpp"
#include "splinth/inference.hpp"
#include "splinth/lrt.hpp"
#include "splinth/simlab.hpp"

#include "json.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace splinth::io {

using json = nlohmann::json;

/// Header `y,x1,...,xp,z` (any column order); p is inferred from the x columns.
Dataset read_csv(const std::string& path);
Dataset parse_csv(std::istream& in, const std::string& source = "<input>");
void write_csv(const Dataset& data, std::ostream& out);

/// Sorted keys, reals with 17 significant digits, non-finite reals as null, trailing newline.
std::string dump(const json& value);
/// Writes to `path`, or stdout when path is empty or "-". Throws Error naming the path.
void write_text(const std::string& text, const std::string& path);
std::string read_text(const std::string& path);

json to_json(const Eigen::VectorXd& v);
json to_json(const Eigen::MatrixXd& m);
Eigen::VectorXd vector_from_json(const json& j);
Eigen::MatrixXd matrix_from_json(const json& j);

json basis_to_json(const EigenSystem& system);
EigenSystem basis_from_json(const json& j);

/// Number of points on the reported ĝ grid.
inline constexpr int kGridPoints = 201;

json fit_to_json(const FitResult& fit, const PlugIn* plugin = nullptr);
/// `z,g` with kGridPoints rows.
void write_g_grid_csv(const FitResult& fit, std::ostream& out);

struct LoadedFit {
    FitResult fit;
    std::optional<PlugIn> plugin;
};
LoadedFit fit_from_json(const json& j);

json interval_to_json(const Interval& iv);
json joint_ci_to_json(const JointCI& ci);
json lrt_to_json(const LrtResult& result);

json design_to_json(const SimDesign& design);
SimDesign design_from_json(const json& j);
json report_to_json(const SimReport& report);
SimReport report_from_json(const json& j);
/// One row per cell: study, then params and stats columns in sorted order.
void write_report_csv(const SimReport& report, std::ostream& out);

}  // namespace splinth::io
