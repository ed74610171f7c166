#pragma once

#include "cli/problem.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace jumpflow::cli {

/// Martingale window: product weights at `past`, increment over [s, t].
struct WindowSpec {
    std::vector<double> past;
    double s = 0;
    double t = 0;
};

/// Everything that determines a run's outputs. The worker count is not part
/// of it because results never depend on threading.
struct RunConfig {
    std::string command;

    // problem
    std::string scenario;
    std::optional<ProblemSpec> problem;

    // time grid [0, T] with K equal steps
    double horizon = 1.0;
    std::size_t steps = 100;

    // Monte Carlo
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    std::size_t substeps = 1;

    // regularization
    std::vector<double> epsilons;

    // verification
    std::string source = "mc";  ///< mc | reference
    std::string bank = "compact";  ///< compact | truncation | all
    std::size_t bank_size = 12;
    std::vector<WindowSpec> windows;  ///< empty selects two default windows
    std::optional<double> bias_constant;
    double se_multiplier = 3.0;
    double w1_tolerance = 0.03;
    std::string negative_control = "none";  ///< none | double-drift
    std::string probe = "none";  ///< none | growth | lipschitz | aldous
    std::string input;  ///< directory of an earlier `simulate` run

    // grid solver (0 picks the problem default)
    double fp_half_width = 0;
    std::size_t fp_cells = 0;
    double fp_dt = 0;
    std::vector<double> fp_times;

    // output
    std::string out_dir = "out";
    bool svg = false;
    /// Ensemble CSV keeps every stride-th recording time; 0 picks the
    /// smallest stride that keeps the file under about 2e6 rows.
    std::size_t stride = 0;

    double dt() const { return horizon / static_cast<double>(steps); }
};

nlohmann::json to_json(const RunConfig& c);
/// Unknown keys are ConfigErrors so that a typo never silently changes a run.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

/// Sets `steps` from a step size; the step must divide the horizon.
void set_step_size(RunConfig& c, double dt);

/// Throws ConfigError on inconsistent settings.
void validate(const RunConfig& c);

/// The scenario (registered or inline) with its horizon set to the run's T.
Scenario resolve_problem(const RunConfig& c);

/// Writes `config.echo.json` into the output directory.
void write_echo(const RunConfig& c);

}  // namespace jumpflow::cli
