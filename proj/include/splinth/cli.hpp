#pragma once

// Command-line front end: argument parsing and subcommand dispatch.

#include "splinth/lrt.hpp"
#include "splinth/simlab.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace splinth::cli {

enum class Command { Fit, Ci, Predict, Test, Simulate, Eigensys };

std::string to_string(Command c);

struct RunConfig {
    Command command = Command::Fit;
    std::string data;
    std::string fit;
    std::string hypothesis;
    std::string design;
    std::string weight_file;
    std::string output;
    std::string grid_csv;
    std::string csv;
    std::string family = "gaussian";
    int m = 2;
    std::string lambda = "gcv";
    std::string basis = "trig";
    int n_basis = 0;
    std::vector<double> x0;
    std::optional<double> z0;
    double level = 0.95;
    std::string what = "joint";
    int threads = 0;
    std::optional<std::uint64_t> seed;
    double sigma = 1.0;
    bool timing = false;
};

/// Thrown by parse_args for --help; carries the help text.
struct HelpRequested {
    std::string text;
};

/// Throws UsageError naming the offending flag, or HelpRequested.
RunConfig parse_args(const std::vector<std::string>& args);

LambdaChoice parse_lambda(const std::string& text);

/// Hypothesis from inline JSON or a path to a JSON file.
Hypothesis parse_hypothesis(const std::string& text);

/// Simulation study read from a TOML-style key = value file.
struct StudySpec {
    std::string study;
    SimDesign design;
    std::vector<Eigen::Index> sizes;
    double level = 0.95;
    int z_points = 10;
    std::vector<double> x0;
    std::vector<double> z0;
    double hypothesis_value = 0.0;
    std::string hypothesis = "I";
};

StudySpec read_study(const std::string& path);

/// Runs a study; the report's cells span every requested sample size.
SimReport run_study(const StudySpec& spec, const RunOptions& options);

/// Executes the configured subcommand; throws splinth::Error subclasses.
void run(const RunConfig& config);

/// argv entry point: 0 success, 1 numeric/model failure, 2 usage, 3 data error.
int main_entry(int argc, char** argv);

}  // namespace splinth::cli
