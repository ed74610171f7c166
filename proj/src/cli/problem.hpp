#pragma once

#include "jumpflow/oracle.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace jumpflow::cli {

/// A user-defined problem assembled from registered coefficient families.
///
/// drift:     zero | linear (b = -rate (x - target)) | sign (b = gain sign(x) - rate x)
/// diffusion: zero | constant (sigma * I)
/// jumps:     none | unit (x -> x + size, rate kappa)
///            | two-sided (x -> x +- size, rate kappa or kappa / (1 + |x|^2) when damped)
/// initial:   dirac at x | normal (one dimension, quantized on `atoms` points)
struct ProblemSpec {
    std::string name = "inline";
    int dim = 1;

    std::string drift = "zero";
    double drift_rate = 1.0;
    double drift_target = 0.0;
    double drift_gain = 1.0;

    std::string diffusion = "zero";
    double sigma = 1.0;

    std::string jumps = "none";
    double jump_size = 1.0;
    double jump_rate = 1.0;
    bool damped = false;

    std::string initial = "dirac";
    std::vector<double> initial_point{0.0};
    double initial_variance = 1.0;
    std::size_t initial_atoms = 201;

    double roi_center = 0.0;
    double roi_half_width = 2.0;
    double bias_constant = 2.0;
    double grid_half_width = 15.0;
    std::size_t grid_cells = 1500;
};

/// Reads a problem object; unknown families and keys are ConfigErrors.
ProblemSpec problem_from_json(const nlohmann::json& j);
/// Fully resolved form, suitable for the config echo.
nlohmann::json problem_to_json(const ProblemSpec& p);

Scenario build_problem(const ProblemSpec& p);

}  // namespace jumpflow::cli
