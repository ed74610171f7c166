#pragma once

#include "jumpflow/empirical.hpp"
#include "jumpflow/model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace jumpflow {

/// Domain [-L, L] split into `cells` equal cells.
struct GridDomain {
    double half_width = 30.0;
    std::size_t cells = 3000;

    double dx() const { return 2.0 * half_width / static_cast<double>(cells); }
    double center(std::size_t i) const {
        return -half_width + (static_cast<double>(i) + 0.5) * dx();
    }
};

/// A registered problem with its references.
struct Scenario {
    std::string name;
    std::string notes;
    CoefficientSet coeffs;
    JumpKernel kernel;
    ProbCloud initial = ProbCloud::dirac(scalar_vec(0.0));
    /// Law of X_t when known in closed form (or by an exact lattice solve).
    std::function<ProbCloud(double)> exact_marginal;
    /// E[X_t] when known.
    std::function<double(double)> exact_mean;
    /// Coefficients do not depend on t (lets the grid solver cache them).
    bool autonomous = true;
    /// Residual and martingale bias budgets are bias_constant * dt.
    double bias_constant = 0;
    /// Region where the dynamics live; the test-function bank is spread over
    /// [roi_center - roi_half_width, roi_center + roi_half_width].
    double roi_center = 0;
    double roi_half_width = 1;
    /// Domain used when the reference flow comes from the grid solver.
    GridDomain grid{15.0, 1500};
};

std::vector<std::string> scenario_names();

/// Throws ConfigError listing the registry when the name is unknown.
Scenario scenario(const std::string& name);

/// Poisson(mean) probabilities up to the first k with tail < tail_tol.
std::vector<double> poisson_pmf(double mean, double tail_tol = 1e-12);

/// Exact flow on the grid, or the grid-solved flow when no closed form
/// exists. Grid flows keep cells with mass above 1e-13.
MarginalFlow reference_flow(const Scenario& sc, const TimeGrid& grid);

//---------------------------------------------------------------------------//
// Finite-volume solver
//---------------------------------------------------------------------------//

/// Cell averages on a GridDomain plus mass that left through jumps.
struct GridDensity {
    GridDomain domain;
    double t = 0;
    std::vector<double> density;
    double leaked_mass = 0;
    /// Negative mass removed by clipping (stays 0 under the step bound).
    double clipped_mass = 0;

    double interior_mass() const;
};

/// Thrown when dt violates the explicit stability bound.
class StabilityError : public std::runtime_error {
  public:
    StabilityError(double dt, double suggested);
    double suggested_dt() const { return suggested_; }

  private:
    double suggested_;
};

struct GridSolveOptions {
    GridDomain domain;
    /// Time step; 0 picks the smaller of the stability limit and dx / 2.
    double dt = 0;
    std::vector<double> output_times;
    bool autonomous = false;
};

/// Explicit conservative scheme for
///   d_t f + div(b f) = 1/2 d_xx(a f) + (jump operator),
/// one-dimensional. Drift is upwinded at cell interfaces. Diffusion uses
/// the flux -(a_{i+1} f_{i+1} - a_i f_i)/(2 dx) with no flux through +-L.
/// Cell i loses mass at rate Lambda(t, x_i); it lands at x_i + g split
/// linearly between the two bracketing cell centres. Landings beyond +-L
/// leak. Requires dt (max Lambda + 2 max a/dx^2 + max|b|/dx) <= 0.9.
/// Returns one GridDensity per output time.
std::vector<GridDensity> fp_grid_solve(const CoefficientSet& coeffs, const JumpKernel& kernel,
                                       const ProbCloud& initial, const GridSolveOptions& options);

std::vector<GridDensity> fp_grid_solve(const Scenario& sc, const GridDomain& domain,
                                       const std::vector<double>& output_times, double dt = 0);

/// Atoms at cell centres weighted by renormalized cell masses; cells with
/// mass <= min_mass are dropped. Warns on stderr when leaked mass >= 0.01.
ProbCloud grid_to_cloud(const GridDensity& g, double min_mass = 0.0);

/// Largest stable step for the given problem on the domain.
double stable_dt(const CoefficientSet& coeffs, const JumpKernel& kernel, const GridDomain& domain,
                 double t_end);

}  // namespace jumpflow
