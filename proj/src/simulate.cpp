#include "jumpflow/simulate.hpp"

#include "jumpflow/parallel.hpp"
#include "jumpflow/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

namespace jumpflow {

DivergenceError::DivergenceError(std::size_t count, std::size_t first_path)
    : std::runtime_error(std::to_string(count) + " path(s) diverged (first: path " +
                         std::to_string(first_path) + ")"),
      count_(count),
      first_path_(first_path) {}

PathEnsemble::PathEnsemble(TimeGrid grid, int dim, std::uint64_t seed, double epsilon)
    : grid_(std::move(grid)), dim_(dim), seed_(seed), epsilon_(epsilon) {}

Vec PathEnsemble::state(std::size_t n, std::size_t k) const {
    Vec x(dim_);
    for (int c = 0; c < dim_; ++c) x(c) = coord(n, k, c);
    return x;
}

class EnsembleBuilder {
  public:
    // Packs per-path results, dropping diverged paths when allowed.
    static PathEnsemble build(TimeGrid grid, int dim, std::uint64_t seed, double eps,
                              std::vector<double> states, std::vector<char> diverged,
                              std::vector<std::vector<JumpRecord>> jumps,
                              const SimulationOptions& options) {
        PathEnsemble ens(std::move(grid), dim, seed, eps);
        const std::size_t n = diverged.size();
        const std::size_t row = ens.grid_.size() * static_cast<std::size_t>(dim);
        std::size_t bad = 0, first_bad = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (diverged[i]) {
                if (bad++ == 0) first_bad = i;
            }
        }
        if (bad > 0 && !options.exclude_diverged) throw DivergenceError(bad, first_bad);
        if (bad == n) throw DivergenceError(bad, first_bad);
        if (bad == 0) {
            ens.states_ = std::move(states);
            ens.path_ids_.resize(n);
            std::iota(ens.path_ids_.begin(), ens.path_ids_.end(), std::size_t{0});
            ens.jumps_ = std::move(jumps);
            return ens;
        }
        ens.states_.reserve((n - bad) * row);
        for (std::size_t i = 0; i < n; ++i) {
            if (diverged[i]) {
                ens.diverged_.push_back(i);
                continue;
            }
            ens.states_.insert(ens.states_.end(), states.begin() + static_cast<long>(i * row),
                               states.begin() + static_cast<long>((i + 1) * row));
            ens.path_ids_.push_back(i);
            if (!jumps.empty()) ens.jumps_.push_back(std::move(jumps[i]));
        }
        return ens;
    }
};

namespace {

bool diverged(const Vec& x) {
    return !x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceThreshold;
}

void check_common(const CoefficientSet& coeffs, const JumpKernel& kernel, const TimeGrid& grid,
                  const SimulationOptions& options) {
    coeffs.validate();
    if (options.n_paths == 0) throw ConfigError("need at least one path");
    if (options.substeps == 0) throw ConfigError("substeps must be >= 1");
    if (grid.size() < 2 || grid.front() != 0.0) {
        throw ConfigError("recording grid must start at 0 and have at least two times");
    }
    if (grid.back() > coeffs.horizon * (1 + 1e-12)) {
        throw ConfigError("recording grid extends past the horizon");
    }
    if (!kernel.empty() && kernel.marks().front().label.size() == 0 && !kernel.has_sampler()) {
        throw ConfigError("jump kernel marks need labels");
    }
}

std::size_t draw_index(const std::vector<double>& cumulative, Philox4x32& rng) {
    double u = uniform01(rng) * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                 cumulative.size() - 1);
}

// Local coefficients at (t, x): the base simulator evaluates b and sigma
// directly, the regularized one goes through the frozen mollifier.
struct Stepper {
    virtual ~Stepper() = default;
    virtual void coefficients(double t, const Vec& x, Vec& b, Mat& sigma) = 0;
    // Applies a jump candidate at time t; returns true when accepted.
    virtual bool jump(double t, Vec& x, const Vec& mark, double u, Vec& disp) = 0;
};

struct PathDriver {
    const JumpKernel& kernel;
    const TimeGrid& grid;
    std::size_t substeps;

    // Runs one path from x (already initialized); writes grid.size() states.
    bool run(Stepper& stepper, PathStreams& rs, Vec x, double* out,
             std::vector<JumpRecord>* log) const {
        const int d = static_cast<int>(x.size());
        const double rate = kernel.candidate_rate();
        const double kbar = kernel.rate_majorant();
        const double inf = std::numeric_limits<double>::infinity();
        double next = rate > 0 ? exponential(rs.clock, rate) : inf;
        Vec b(d), disp(d);
        Mat sigma(d, d);

        auto euler = [&](double t, double h) {
            if (h <= 0) return;
            stepper.coefficients(t, x, b, sigma);
            x += b * h;
            if (!sigma.isZero(0.0)) {
                Vec xi(d);
                for (int c = 0; c < d; ++c) xi(c) = rs.gaussian();
                x += sigma * xi * std::sqrt(h);
            }
        };

        for (int c = 0; c < d; ++c) out[c] = x(c);
        if (diverged(x)) return false;
        for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
            const double t0 = grid[k], t1 = grid[k + 1];
            const double h = (t1 - t0) / static_cast<double>(substeps);
            for (std::size_t s = 0; s < substeps; ++s) {
                double cur = t0 + h * static_cast<double>(s);
                const double end = (s + 1 == substeps) ? t1 : t0 + h * static_cast<double>(s + 1);
                while (next <= end) {
                    euler(cur, next - cur);
                    cur = next;
                    Vec mark = kernel.draw_mark(rs.mark);
                    double u = uniform01(rs.thinning) * kbar;
                    if (stepper.jump(cur, x, mark, u, disp) && log) {
                        log->push_back({cur, mark, disp});
                    }
                    next += exponential(rs.clock, rate);
                }
                euler(cur, end - cur);
                if (diverged(x)) return false;
            }
            for (int c = 0; c < d; ++c) out[(k + 1) * static_cast<std::size_t>(d) + c] = x(c);
        }
        return true;
    }
};

struct BaseStepper final : Stepper {
    const CoefficientSet& coeffs;
    const JumpKernel& kernel;
    BaseStepper(const CoefficientSet& c, const JumpKernel& k) : coeffs(c), kernel(k) {}

    void coefficients(double t, const Vec& x, Vec& b, Mat& sigma) override {
        b = coeffs.drift(t, x);
        sigma = coeffs.diffusion(t, x);
    }
    bool jump(double t, Vec& x, const Vec& mark, double u, Vec& disp) override {
        if (!(u < kernel.rate(t, mark, x))) return false;
        disp = kernel.jump(t, mark, x);
        x += disp;
        return true;
    }
};

struct RegularizedStepper final : Stepper {
    const JumpKernel& kernel;
    const MarginalFlow& flow;
    const std::vector<std::unique_ptr<FrozenMollifier>>& frozen;
    Philox4x32& tilt_rng;
    Tilt scratch;
    Mat a;

    RegularizedStepper(const JumpKernel& k, const MarginalFlow& f,
                       const std::vector<std::unique_ptr<FrozenMollifier>>& fr, Philox4x32& rng)
        : kernel(k), flow(f), frozen(fr), tilt_rng(rng) {}

    void coefficients(double t, const Vec& x, Vec& b, Mat& sigma) override {
        const auto& m = *frozen[flow.grid().index_at(t)];
        m.evaluate(x, b, a);
        sigma = symmetric_sqrt(a);
    }
    bool jump(double t, Vec& x, const Vec& mark, double u, Vec& disp) override {
        std::size_t k = flow.grid().index_at(t);
        const auto& view = frozen[k]->view();
        view.tilt(x, scratch);
        const Vec& anchor = view.base().point(scratch.sample(tilt_rng));
        if (!(u < kernel.rate(t, mark, anchor))) return false;
        disp = kernel.jump(t, mark, anchor);
        x += disp;
        return true;
    }
};

}  // namespace

PathEnsemble PathEnsemble::from_states(TimeGrid grid, int dim, std::uint64_t seed,
                                       double epsilon, std::vector<double> states,
                                       std::vector<std::size_t> path_ids) {
    PathEnsemble ens(std::move(grid), dim, seed, epsilon);
    if (states.size() != path_ids.size() * ens.grid_.size() * static_cast<std::size_t>(dim)) {
        throw ConfigError("stored states do not match the path count and grid");
    }
    ens.states_ = std::move(states);
    ens.path_ids_ = std::move(path_ids);
    return ens;
}

PathEnsemble simulate_base_paths(const CoefficientSet& coeffs, const JumpKernel& kernel,
                                 const ProbCloud& initial, const TimeGrid& grid,
                                 const SimulationOptions& options) {
    check_common(coeffs, kernel, grid, options);
    if (initial.dim() != coeffs.dim) throw ConfigError("initial law has the wrong dimension");

    const std::size_t n = options.n_paths;
    const std::size_t row = grid.size() * static_cast<std::size_t>(coeffs.dim);
    std::vector<double> states(n * row);
    std::vector<char> bad(n, 0);
    std::vector<std::vector<JumpRecord>> jumps(options.record_jumps ? n : 0);
    std::vector<double> cumulative(initial.size());
    std::partial_sum(initial.weights().begin(), initial.weights().end(), cumulative.begin());

    PathDriver driver{kernel, grid, options.substeps};
    parallel_for(n, resolve_threads(options.threads), [&](std::size_t begin, std::size_t end) {
        BaseStepper stepper(coeffs, kernel);
        for (std::size_t i = begin; i < end; ++i) {
            PathStreams rs(options.seed, static_cast<std::uint32_t>(i));
            Vec x = initial.point(draw_index(cumulative, rs.initial));
            bad[i] = !driver.run(stepper, rs, x, states.data() + i * row,
                                 options.record_jumps ? &jumps[i] : nullptr);
        }
    });
    return EnsembleBuilder::build(grid, coeffs.dim, options.seed, 0.0, std::move(states),
                                  std::move(bad), std::move(jumps), options);
}

PathEnsemble simulate_regularized_paths(const CoefficientSet& coeffs, const JumpKernel& kernel,
                                        const MarginalFlow& flow, double epsilon,
                                        const TimeGrid& grid, const SimulationOptions& options) {
    check_common(coeffs, kernel, grid, options);
    if (!(epsilon > 0) || !std::isfinite(epsilon)) {
        throw ConfigError("epsilon must be > 0");
    }
    if (flow.dim() != coeffs.dim) throw ConfigError("flow has the wrong dimension");
    for (double t : grid.times()) {
        if (!flow.grid().contains(t)) {
            throw ConfigError("recording time " + std::to_string(t) +
                              " is not a time of the marginal flow");
        }
    }

    std::vector<std::unique_ptr<FrozenMollifier>> frozen;
    frozen.reserve(flow.grid().size());
    for (std::size_t k = 0; k < flow.grid().size(); ++k) {
        frozen.push_back(std::make_unique<FrozenMollifier>(MollifiedView(flow.cloud(k), epsilon),
                                                           coeffs, flow.grid()[k]));
    }

    const ProbCloud& initial = flow.cloud(0);
    const std::size_t n = options.n_paths;
    const std::size_t row = grid.size() * static_cast<std::size_t>(coeffs.dim);
    std::vector<double> states(n * row);
    std::vector<char> bad(n, 0);
    std::vector<std::vector<JumpRecord>> jumps(options.record_jumps ? n : 0);
    std::vector<double> cumulative(initial.size());
    std::partial_sum(initial.weights().begin(), initial.weights().end(), cumulative.begin());
    const double root_eps = std::sqrt(epsilon);

    PathDriver driver{kernel, grid, options.substeps};
    parallel_for(n, resolve_threads(options.threads), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            PathStreams rs(options.seed, static_cast<std::uint32_t>(i));
            RegularizedStepper stepper(kernel, flow, frozen, rs.tilt);
            Vec x = initial.point(draw_index(cumulative, rs.initial));
            for (int c = 0; c < x.size(); ++c) x(c) += root_eps * rs.gaussian();
            bad[i] = !driver.run(stepper, rs, x, states.data() + i * row,
                                 options.record_jumps ? &jumps[i] : nullptr);
        }
    });
    return EnsembleBuilder::build(grid, coeffs.dim, options.seed, epsilon, std::move(states),
                                  std::move(bad), std::move(jumps), options);
}

ProbCloud marginal_at(const PathEnsemble& ens, double t) {
    if (t < ens.grid().front() - 1e-12 || t > ens.grid().back() * (1 + 1e-12)) {
        throw std::domain_error("time outside the ensemble grid");
    }
    std::size_t k = ens.grid().index_at(t);
    std::vector<Vec> pts;
    pts.reserve(ens.size());
    for (std::size_t n = 0; n < ens.size(); ++n) pts.push_back(ens.state(n, k));
    return ProbCloud::uniform(std::move(pts), Provenance::monte_carlo);
}

MarginalFlow ensemble_flow(const PathEnsemble& ens) {
    std::vector<ProbCloud> clouds;
    clouds.reserve(ens.grid().size());
    for (std::size_t k = 0; k < ens.grid().size(); ++k) {
        clouds.push_back(marginal_at(ens, ens.grid()[k]));
    }
    return MarginalFlow(ens.grid(), std::move(clouds), true);
}

double sup_norm_moment(const PathEnsemble& ens) {
    std::vector<double> per_path(ens.size());
    for (std::size_t n = 0; n < ens.size(); ++n) {
        double m = 0;
        for (std::size_t k = 0; k < ens.grid().size(); ++k) m = std::max(m, ens.state(n, k).norm());
        per_path[n] = m;
    }
    return stable_sum(per_path) / static_cast<double>(ens.size());
}

AldousTable aldous_modulus(const PathEnsemble& ens, const std::vector<double>& betas,
                           const std::vector<double>& anchors) {
    AldousTable table;
    const double N = static_cast<double>(ens.size());
    for (double s : anchors) {
        std::size_t ks = ens.grid().node_index(s);
        for (double beta : betas) {
            if (!(beta > 0)) throw ConfigError("beta must be > 0");
            std::size_t kb = ens.grid().node_index(s + beta);
            std::vector<double> inc(ens.size());
            for (std::size_t n = 0; n < ens.size(); ++n) {
                inc[n] = (ens.state(n, kb) - ens.state(n, ks)).norm();
            }
            double mean = stable_sum(inc) / N;
            double var = 0;
            for (double v : inc) var += (v - mean) * (v - mean);
            double se = ens.size() > 1 ? std::sqrt(var / (N - 1) / N) : 0.0;
            table.entries.push_back({s, beta, mean, se});
            table.constant = std::max(table.constant, mean / (beta + std::sqrt(beta)));
        }
    }
    return table;
}

}  // namespace jumpflow
