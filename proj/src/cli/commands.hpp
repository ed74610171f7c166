#pragma once

#include "cli/config.hpp"
#include "jumpflow/io.hpp"
#include "jumpflow/verify.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace jumpflow::cli {

/// Process exit status. A failed verdict and a diverged path both map to
/// kExitFailure; bad flags or configs map to kExitUsage.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

/// One row of a martingale report.
struct MartingaleRow {
    std::string test_fn;
    std::size_t window = 0;
    double t = 0;
    double value = 0;
    double se = 0;
    double bias_budget = 0;
    bool pass = false;
};

CsvTable martingale_table(const std::vector<MartingaleRow>& rows);

/// Bumps spread over the problem's region of interest and/or the truncation
/// family psi_1..psi_3, as selected by the config.
std::vector<TestFunction> test_bank(const RunConfig& c, const Scenario& sc);

/// The configured windows, or two default ones: [0, T/2] with no weights and
/// [T/2, T] weighted at T/4. Default times snap to the grid.
std::vector<WindowSpec> martingale_windows(const RunConfig& c, const TimeGrid& grid);

/// w(x) = 1 / (1 + |x|^2)
double window_weight(const Vec& x);

/// Runs the three-function battery (the first three bank bumps) over every
/// window on at most max_paths paths of the ensemble. The budget per row is
/// bias_constant * (largest recording step); a row passes when
/// |K| <= se_multiplier * se + budget.
std::vector<MartingaleRow> martingale_battery(const PathEnsemble& ens,
                                              const GeneratorOperator& op,
                                              const std::vector<TestFunction>& battery,
                                              const std::vector<WindowSpec>& windows,
                                              double bias_constant, double se_multiplier,
                                              std::size_t max_paths, unsigned threads);

/// Drift doubled; every other coefficient unchanged.
CoefficientSet double_drift(const CoefficientSet& coeffs);

//---------------------------------------------------------------------------//
// Pipelines (compute only, no files)
//---------------------------------------------------------------------------//

struct VerifyResult {
    std::vector<ResidualReport> residuals;
    std::vector<MartingaleRow> martingale;
    double bias_constant = 0;
    std::size_t paths = 0;
    bool pass() const;
};

/// Residuals and the martingale battery for the base dynamics. `ensemble`
/// overrides simulation (source "mc").
VerifyResult verify_pipeline(const RunConfig& c, const Scenario& sc, unsigned threads,
                             const PathEnsemble* ensemble = nullptr);

struct ChainEntry {
    double epsilon = 0;
    double w1 = 0;
    double sup_norm_moment = 0;
    std::size_t paths = 0;
    std::size_t diverged = 0;
    std::vector<MartingaleRow> martingale;
    double seconds = 0;
    bool w1_pass = false;
    bool pass() const;
};

struct ChainResult {
    std::vector<ChainEntry> entries;
    double first_moment_f0 = 0;
    /// max/min of sup_norm_moment over the epsilon list
    double sup_norm_ratio = 0;
    bool pass() const;
};

/// For each epsilon, simulates the regularized SDE against the reference flow.
/// The marginal at T is compared in W1 with f_T smoothed by phi_eps, and the
/// martingale battery runs under the regularized generator.
ChainResult chain_pipeline(const RunConfig& c, const Scenario& sc, unsigned threads);

/// Number of paths the martingale battery uses.
inline constexpr std::size_t kMartingalePaths = 2000;

//---------------------------------------------------------------------------//
// Commands (write files into c.out_dir, return an exit code)
//---------------------------------------------------------------------------//

int cmd_simulate(const RunConfig& c, unsigned threads, std::ostream& log);
int cmd_verify(const RunConfig& c, unsigned threads, std::ostream& log);
int cmd_chain(const RunConfig& c, unsigned threads, std::ostream& log);
int cmd_fp_solve(const RunConfig& c, unsigned threads, std::ostream& log);
void cmd_scenario_list(std::ostream& out);

/// Full command-line entry point; never throws.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace jumpflow::cli
