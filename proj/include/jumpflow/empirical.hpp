#pragma once

#include "jumpflow/model.hpp"
#include "jumpflow/rng.hpp"
#include "jumpflow/types.hpp"

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace jumpflow {

/// Where a cloud came from. Monte Carlo clouds carry sampling error.
enum class Provenance { exact, grid, monte_carlo };

/// Weighted empirical probability measure on R^d.
class ProbCloud {
  public:
    /// Weights must be > 0 and sum to 1 within 1e-12; points must be finite
    /// and share one dimension.
    ProbCloud(std::vector<Vec> points, std::vector<double> weights,
              Provenance provenance = Provenance::exact);

    static ProbCloud dirac(const Vec& x);
    static ProbCloud uniform(std::vector<Vec> points,
                             Provenance provenance = Provenance::monte_carlo);
    /// Normalizes nonnegative masses; atoms with mass <= min_mass are dropped.
    static ProbCloud from_masses(std::vector<Vec> points, const std::vector<double>& masses,
                                 Provenance provenance = Provenance::exact,
                                 double min_mass = 0.0);

    int dim() const { return dim_; }
    std::size_t size() const { return points_.size(); }
    const Vec& point(std::size_t i) const { return points_[i]; }
    double weight(std::size_t i) const { return weights_[i]; }
    const std::vector<Vec>& points() const { return points_; }
    const std::vector<double>& weights() const { return weights_; }
    Provenance provenance() const { return provenance_; }

    /// sum_i w_i psi(x_i)
    double expect(const std::function<double(const Vec&)>& psi) const;

  private:
    std::vector<Vec> points_;
    std::vector<double> weights_;
    int dim_ = 1;
    Provenance provenance_ = Provenance::exact;
};

/// m_1 = sum_i w_i |x_i|
double first_moment(const ProbCloud& cloud);

/// Compensated sum.
double stable_sum(const std::vector<double>& values);

/// Time-indexed family of clouds; off-grid lookups use the cloud at the
/// largest grid time <= t.
class MarginalFlow {
  public:
    MarginalFlow(TimeGrid grid, std::vector<ProbCloud> clouds, bool paired = false);

    const TimeGrid& grid() const { return grid_; }
    const std::vector<ProbCloud>& clouds() const { return clouds_; }
    const ProbCloud& cloud(std::size_t k) const { return clouds_[k]; }
    const ProbCloud& at(double t) const { return clouds_[grid_.index_at(t)]; }
    int dim() const { return clouds_.front().dim(); }

    /// True when atom i of every cloud is the state of Monte Carlo path i
    /// (equal weights, same count), which allows per-path error estimates.
    bool paired() const { return paired_; }

    double sup_first_moment() const;

  private:
    TimeGrid grid_;
    std::vector<ProbCloud> clouds_;
    bool paired_ = false;
};

//---------------------------------------------------------------------------//
// Gaussian mollification
//---------------------------------------------------------------------------//

/// phi_eps(v) = (2 pi eps)^(-d/2) exp(-|v|^2 / (2 eps)); throws
/// std::domain_error for eps <= 0.
double gaussian_kernel(double eps, const Vec& v);
double log_gaussian_kernel(double eps, const Vec& v);

/// Sparse categorical law over cloud indices.
struct Tilt {
    std::vector<std::uint32_t> index;
    std::vector<double> prob;
    /// log sum_i w_i exp(-|x_i - y|^2 / (2 eps))
    double log_mass = 0;

    std::size_t sample(Philox4x32& rng) const;
};

/// f^eps = f * phi_eps for a cloud f, with the tilt
/// F^eps(x_i, y) = phi_eps(x_i - y) / f^eps(y).
///
/// All ratios are evaluated from log-weights with max subtraction. In one
/// dimension atoms whose log-term is more than 40 below the dominant term
/// are skipped; their total relative contribution is below size() * e^-40.
/// The base cloud must outlive the view.
class MollifiedView {
  public:
    MollifiedView(const ProbCloud& base, double epsilon);

    const ProbCloud& base() const { return *base_; }
    double epsilon() const { return eps_; }
    int dim() const { return base_->dim(); }

    double log_density(const Vec& y) const;
    double density(const Vec& y) const;

    /// Writes the tilt at y into out (buffers are reused).
    void tilt(const Vec& y, Tilt& out) const;
    Tilt tilt(const Vec& y) const;

    /// Dense probabilities w_i F^eps(x_i, y), one per cloud atom.
    std::vector<double> tilt_distribution(const Vec& y) const;

    /// CDF of f^eps (one dimension only).
    double cdf(double x) const;

    /// One dimension: indices [first, last) into the sorted atoms that carry
    /// all but a relative e^-40 of the tilt mass at y.
    std::pair<std::size_t, std::size_t> window(double y) const;
    const std::vector<double>& sorted_points() const { return sorted_x_; }
    const std::vector<std::uint32_t>& sorted_order() const { return order_; }
    double max_log_weight() const { return max_log_weight_; }

  private:
    const ProbCloud* base_;
    double eps_;
    std::vector<double> log_weights_;
    double max_log_weight_ = 0;
    // one-dimensional acceleration
    std::vector<double> sorted_x_;
    std::vector<double> sorted_log_weights_;
    std::vector<std::uint32_t> order_;
};

double mollified_density(const MollifiedView& view, const Vec& y);

/// b^eps(t,y): tilt-weighted average of b(t, x_i).
Vec mollified_drift(const MollifiedView& view, const CoefficientSet& coeffs, double t,
                    const Vec& y);

struct MollifiedDiffusion {
    Mat a;      ///< a^eps(t,y)
    Mat sigma;  ///< symmetric PSD square root of a^eps
};

MollifiedDiffusion mollified_diffusion(const MollifiedView& view, const CoefficientSet& coeffs,
                                       double t, const Vec& y);

/// Tilt-weighted average of mean_jump_magnitude(t, x_i).
double mollified_jump_magnitude(const MollifiedView& view, const JumpKernel& kernel, double t,
                                const Vec& y);

/// Unique symmetric PSD root; eigenvalues in [-1e-10 (1+|a|), 0) are treated
/// as 0. Throws NumericError (with the matrix in the message) otherwise.
Mat symmetric_sqrt(const Mat& a);

std::size_t sample_tilted_index(const MollifiedView& view, const Vec& y, Philox4x32& rng);
const Vec& sample_tilted(const MollifiedView& view, const Vec& y, Philox4x32& rng);

/// Draws n points x ~ cloud, returns x + sqrt(eps) xi as an equal-weight
/// Monte Carlo cloud.
ProbCloud sample_mollified(const ProbCloud& cloud, double eps, std::size_t n,
                           std::uint64_t seed);

/// Caches b(t,x_i) and a(t,x_i) for every atom at one frozen time, so the
/// regularized coefficients at a new y cost one tilt.
class FrozenMollifier {
  public:
    FrozenMollifier(const MollifiedView& view, const CoefficientSet& coeffs, double t);

    const MollifiedView& view() const { return view_; }
    double time() const { return t_; }

    /// Fills scratch with the tilt at y and returns b^eps, a^eps.
    void evaluate(const Vec& y, Tilt& scratch, Vec& drift, Mat& a) const;

    /// b^eps, a^eps without materializing the tilt. One dimension takes a
    /// single pass over the window with a running log-sum-exp.
    void evaluate(const Vec& y, Vec& drift, Mat& a) const;

  private:
    MollifiedView view_;
    double t_;
    int dim_;
    std::vector<double> drift_;  // size() * d
    std::vector<double> a_;      // size() * d * d
    // one-dimensional copies in sorted atom order
    std::vector<double> sorted_x_, sorted_logw_, sorted_b_, sorted_a_;
    double max_log_weight_ = 0;
};

//---------------------------------------------------------------------------//
// Wasserstein-1
//---------------------------------------------------------------------------//

/// Exact W1 between one-dimensional clouds by integrating |F_A - F_B|.
/// Throws ConfigError for d != 1.
double wasserstein1_1d(const ProbCloud& a, const ProbCloud& b);

/// Max over coordinates of the W1 distance between coordinate marginals.
double wasserstein1_marginals(const ProbCloud& a, const ProbCloud& b);

/// W1 between a one-dimensional cloud and a law given by its CDF. The CDF is
/// sampled on `nodes` equal cells of [lo, hi] (widened to cover the cloud)
/// and interpolated linearly; the integral of |F_cloud - F| is exact for the
/// interpolant. Mass of the reference law outside [lo, hi] is ignored.
double wasserstein1_to_cdf(const ProbCloud& sample, const std::function<double(double)>& cdf,
                           double lo, double hi, std::size_t nodes = 20000);

}  // namespace jumpflow
