#pragma once

#include "jumpflow/empirical.hpp"
#include "jumpflow/model.hpp"
#include "jumpflow/types.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace jumpflow {

/// States beyond this magnitude count as diverged.
inline constexpr double kDivergenceThreshold = 1e12;

/// Raised when paths diverge and the caller did not ask to drop them.
class DivergenceError : public std::runtime_error {
  public:
    DivergenceError(std::size_t count, std::size_t first_path);
    std::size_t count() const { return count_; }
    std::size_t first_path() const { return first_path_; }

  private:
    std::size_t count_;
    std::size_t first_path_;
};

/// One accepted jump.
struct JumpRecord {
    double t = 0;
    Vec mark;
    Vec displacement;
};

struct SimulationOptions {
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    /// Euler steps per recording interval.
    std::size_t substeps = 1;
    bool record_jumps = false;
    /// Drop diverged paths instead of throwing DivergenceError.
    bool exclude_diverged = false;
    /// 0 resolves through JUMPFLOW_THREADS.
    unsigned threads = 0;
};

/// N paths recorded at the grid times. Path n uses the Philox streams keyed by
/// (seed, n, purpose), so a path's values never depend on N or on threading.
class PathEnsemble {
  public:
    PathEnsemble(TimeGrid grid, int dim, std::uint64_t seed, double epsilon);

    const TimeGrid& grid() const { return grid_; }
    int dim() const { return dim_; }
    std::size_t size() const { return path_ids_.size(); }
    std::uint64_t seed() const { return seed_; }
    /// 0 for the base SDE.
    double epsilon() const { return epsilon_; }
    /// Rebuilds an ensemble from stored states laid out path-major
    /// ((n * grid.size() + k) * dim + c), e.g. when reading an exported CSV.
    static PathEnsemble from_states(TimeGrid grid, int dim, std::uint64_t seed, double epsilon,
                                    std::vector<double> states,
                                    std::vector<std::size_t> path_ids);

    static constexpr const char* stream_rule = "philox4x32-10/seed-path-tag";

    double coord(std::size_t n, std::size_t k, int c) const {
        return states_[(n * grid_.size() + k) * static_cast<std::size_t>(dim_) +
                       static_cast<std::size_t>(c)];
    }
    Vec state(std::size_t n, std::size_t k) const;
    /// Original index of the n-th stored path (differs once paths are dropped).
    std::size_t path_id(std::size_t n) const { return path_ids_[n]; }
    const std::vector<std::vector<JumpRecord>>& jump_log() const { return jumps_; }
    /// Indices of diverged paths (only populated with exclude_diverged).
    const std::vector<std::size_t>& diverged() const { return diverged_; }

  private:
    friend class EnsembleBuilder;
    TimeGrid grid_;
    int dim_;
    std::uint64_t seed_;
    double epsilon_;
    std::vector<double> states_;
    std::vector<std::size_t> path_ids_;
    std::vector<std::vector<JumpRecord>> jumps_;
    std::vector<std::size_t> diverged_;
};

/// Euler-Maruyama between the exact candidate times of a Poisson clock of
/// rate nu(F) kappa_bar; each candidate draws w ~ nu/nu(F) and u ~ U[0,kbar)
/// and jumps by g(t,w,X_{t-}) when u < kappa(t,w,X_{t-}). A candidate that
/// falls exactly on a recording time is applied before that time is recorded.
/// The initial state is drawn from `initial`.
PathEnsemble simulate_base_paths(const CoefficientSet& coeffs, const JumpKernel& kernel,
                                 const ProbCloud& initial, const TimeGrid& grid,
                                 const SimulationOptions& options);

/// The regularized SDE driven by b^eps, sigma^eps of `flow`. The initial state is
/// x + sqrt(eps) xi with x drawn from the flow's first cloud. At a candidate
/// time an anchor x_i is drawn from the tilt at X_{t-}; the jump g(t,w,x_i) is
/// applied when u < kappa(t,w,x_i). Coefficients are read from the cloud at
/// the largest flow time <= t and evaluated at that flow time.
/// Throws ConfigError unless every recording time is a flow time.
PathEnsemble simulate_regularized_paths(const CoefficientSet& coeffs, const JumpKernel& kernel,
                                        const MarginalFlow& flow, double epsilon,
                                        const TimeGrid& grid, const SimulationOptions& options);

/// Equal-weight cloud of the recorded states at the largest grid time <= t.
ProbCloud marginal_at(const PathEnsemble& ens, double t);

/// All marginals as a paired flow (atom i is path i at every time).
MarginalFlow ensemble_flow(const PathEnsemble& ens);

/// (1/N) sum_n max_k |X_n(t_k)|
double sup_norm_moment(const PathEnsemble& ens);

struct AldousEntry {
    double anchor;
    double beta;
    double mean_increment;  ///< E|X_{S+beta} - X_S|
    double se;
};

struct AldousTable {
    std::vector<AldousEntry> entries;
    /// max over entries of mean_increment / (beta + sqrt(beta))
    double constant = 0;
};

/// Deterministic anchors S; S + beta must be a grid time for every pair.
AldousTable aldous_modulus(const PathEnsemble& ens, const std::vector<double>& betas,
                           const std::vector<double>& anchors);

}  // namespace jumpflow
