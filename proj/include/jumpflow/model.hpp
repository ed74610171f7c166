#pragma once

#include "jumpflow/rng.hpp"
#include "jumpflow/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace jumpflow {

using DriftFn = std::function<Vec(double t, const Vec& x)>;
using DiffusionFn = std::function<Mat(double t, const Vec& x)>;

/// Drift b(t,x) and diffusion sigma(t,x) on [0,T] x R^d.
///
/// Neither field needs to be continuous; both must be total and pure so they
/// can be evaluated concurrently.
struct CoefficientSet {
    int dim = 1;
    double horizon = 1.0;
    DriftFn drift;
    DiffusionFn diffusion;

    /// Throws ConfigError when dim/horizon are out of range or a field is empty.
    void validate() const;
};

struct GeneratorCoeffs {
    Vec drift;
    Mat a;  ///< sigma * sigma^T
};

/// b(t,x) and a(t,x) = sigma sigma^T. Throws std::domain_error if t is
/// outside [0, T].
GeneratorCoeffs eval_generator_coeffs(const CoefficientSet& coeffs, double t, const Vec& x);

//---------------------------------------------------------------------------//
// Jump kernels
//---------------------------------------------------------------------------//

/// One atom of the mark measure nu.
struct Mark {
    double weight = 0;
    Vec label;
};

using JumpMapFn = std::function<Vec(double t, const Vec& mark, const Vec& x)>;
using RateFn = std::function<double(double t, const Vec& mark, const Vec& x)>;
using MarkSampler = std::function<Vec(Philox4x32& rng)>;

/// Jumps x -> x + g(t,w,x) at rate kappa(t,w,x) nu(dw), with kappa bounded by
/// a majorant and nu of finite total mass.
///
/// The general jump coefficient is h(t,(w,u),x) = g(t,w,x) 1{u <= kappa(t,w,x)}
/// against nu(dw) du. Operators integrate u out analytically; simulators
/// sample it for thinning.
///
/// For a continuous mark law the kernel keeps a sampler (used by the
/// simulators) plus quadrature atoms whose weights sum to the total mass
/// (used for every deterministic evaluation).
class JumpKernel {
  public:
    /// No jumps at all.
    JumpKernel() = default;

    JumpKernel(std::vector<Mark> marks, JumpMapFn jump_map, RateFn rate, double rate_majorant);

    static JumpKernel continuous(double total_mass, MarkSampler sampler,
                                 std::vector<Mark> quadrature, JumpMapFn jump_map, RateFn rate,
                                 double rate_majorant);

    bool empty() const { return marks_.empty() || rate_majorant_ == 0.0; }

    const std::vector<Mark>& marks() const { return marks_; }
    double total_mass() const { return total_mass_; }
    double rate_majorant() const { return rate_majorant_; }

    /// Candidate intensity nu(F) * kappa_bar of the dominating Poisson clock.
    double candidate_rate() const { return empty() ? 0.0 : total_mass_ * rate_majorant_; }

    bool has_sampler() const { return static_cast<bool>(sampler_); }

    Vec jump(double t, const Vec& mark, const Vec& x) const { return jump_map_(t, mark, x); }
    double rate(double t, const Vec& mark, const Vec& x) const { return rate_(t, mark, x); }

    /// Draws w ~ nu / nu(F).
    Vec draw_mark(Philox4x32& rng) const;

  private:
    std::vector<Mark> marks_;
    std::vector<double> cumulative_;
    double total_mass_ = 0;
    double rate_majorant_ = 0;
    JumpMapFn jump_map_;
    RateFn rate_;
    MarkSampler sampler_;
};

/// Lambda(t,x) = sum_j nu_j kappa(t,w_j,x).
double jump_intensity(const JumpKernel& kernel, double t, const Vec& x);

/// sum_j nu_j |g(t,w_j,x)| kappa(t,w_j,x), i.e. the integral of |h| against mu.
double mean_jump_magnitude(const JumpKernel& kernel, double t, const Vec& x);

//---------------------------------------------------------------------------//
// Growth audit
//---------------------------------------------------------------------------//

struct ProbeSpec {
    std::vector<double> times;
    std::vector<double> radii;
    std::size_t samples_per_radius = 64;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

struct GrowthProbe {
    double t = 0;
    Vec x;
};

struct GrowthReport {
    /// max over probes of (|sigma|_F + |b| + int |h| dmu) / (1 + |x|)
    double constant_estimate = 0;
    std::size_t probe_count = 0;
    GrowthProbe worst_point;
    /// Per-term maxima of the same ratio.
    struct {
        double diffusion = 0;
        double drift = 0;
        double jump = 0;
    } components;
    /// Probes where a coefficient evaluated to a non-finite value.
    std::vector<GrowthProbe> non_finite;
    /// Probes where a = sigma sigma^T failed the symmetry/PSD tolerance.
    std::size_t psd_violations = 0;
    /// Probes where Lambda(t,x) exceeded nu(F) * kappa_bar.
    std::size_t majorant_violations = 0;

    bool ok() const {
        return non_finite.empty() && psd_violations == 0 && majorant_violations == 0;
    }
};

/// Points are uniform in the ball of each radius (uniform direction, radius
/// scaled by U^(1/d)), crossed with every probe time. Samples for a radius
/// come from one stream in order, so a larger samples_per_radius extends the
/// probe set of a smaller one.
std::vector<GrowthProbe> growth_probe_points(int dim, const ProbeSpec& spec);

GrowthReport audit_linear_growth(const CoefficientSet& coeffs, const JumpKernel& kernel,
                                 const ProbeSpec& spec);

/// True when a is symmetric to 1e-12 and its smallest eigenvalue is
/// >= -1e-10 (1 + |a|).
bool is_symmetric_psd(const Mat& a);

}  // namespace jumpflow
