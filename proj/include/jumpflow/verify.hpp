#pragma once

#include "jumpflow/empirical.hpp"
#include "jumpflow/model.hpp"
#include "jumpflow/simulate.hpp"
#include "jumpflow/test_functions.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace jumpflow {

/// The three parts of (A + B) psi at one point.
struct GeneratorValue {
    double drift = 0;      ///< b . grad psi
    double diffusion = 0;  ///< 1/2 trace(a Hess psi)
    double jump = 0;       ///< B psi

    double local() const { return drift + diffusion; }
    double total() const { return drift + diffusion + jump; }
};

/// A psi = b.grad psi + 1/2 tr(a Hess psi);
/// B psi = sum_j nu_j kappa(t,w_j,x) [psi(x + g(t,w_j,x)) - psi(x)].
/// Throws std::domain_error when t is outside [0, T].
GeneratorValue apply_generator(const CoefficientSet& coeffs, const JumpKernel& kernel,
                               const TestFunction& psi, double t, const Vec& x);

/// Same with b^eps and a^eps plus a tilt-weighted jump part: jumps are sized
/// and rated at the anchor x_i but applied at y.
GeneratorValue apply_mollified_generator(const MollifiedView& view, const CoefficientSet& coeffs,
                                         const JumpKernel& kernel, const TestFunction& psi,
                                         double t, const Vec& y);

/// Generator as a callable object, so statistics can run against either the
/// plain or the regularized dynamics.
class GeneratorOperator {
  public:
    virtual ~GeneratorOperator() = default;
    virtual GeneratorValue apply(const TestFunction& psi, double t, const Vec& x) const = 0;
    /// Largest total jump intensity, used for grid-resolution allowances.
    virtual double intensity_bound() const = 0;
    /// Largest drift magnitude at x.
    virtual double drift_norm(double t, const Vec& x) const = 0;
};

class PlainGenerator final : public GeneratorOperator {
  public:
    PlainGenerator(CoefficientSet coeffs, JumpKernel kernel);
    GeneratorValue apply(const TestFunction& psi, double t, const Vec& x) const override;
    double intensity_bound() const override { return kernel_.candidate_rate(); }
    double drift_norm(double t, const Vec& x) const override;

  private:
    CoefficientSet coeffs_;
    JumpKernel kernel_;
};

/// Uses the cloud at the largest flow time t_k <= t, with every coefficient
/// evaluated at t_k (the regularized simulator freezes time the same way).
/// The flow must outlive the operator.
class MollifiedGenerator final : public GeneratorOperator {
  public:
    MollifiedGenerator(CoefficientSet coeffs, JumpKernel kernel, const MarginalFlow& flow,
                       double epsilon);
    GeneratorValue apply(const TestFunction& psi, double t, const Vec& x) const override;
    double intensity_bound() const override { return kernel_.candidate_rate(); }
    double drift_norm(double t, const Vec& x) const override;

  private:
    CoefficientSet coeffs_;
    JumpKernel kernel_;
    const MarginalFlow* flow_;
    std::vector<MollifiedView> views_;
    struct Frozen {
        FrozenMollifier mollifier;
        std::vector<double> rate;         // nu_j kappa(t_k, w_j, x_i), atom-major
        std::vector<Vec> shift;           // g(t_k, w_j, x_i)
        std::vector<char> uniform_shift;  // per mark: g is the same for every atom
    };
    std::vector<Frozen> frozen_;
};

//---------------------------------------------------------------------------//
// Weak residual
//---------------------------------------------------------------------------//

struct ResidualReport {
    std::string test_fn;
    double t = 0;
    double residual = 0;
    double dt = 0;           ///< largest flow grid step up to t
    double se = 0;           ///< 0 unless the flow is Monte Carlo
    double bias_budget = 0;  ///< C_bias * dt
    bool pass = false;       ///< |R| <= bias_budget + 3 se
};

struct ResidualOptions {
    /// 0 selects the plain equation; > 0 the mollified one at that epsilon.
    double epsilon = 0;
    /// Bias budget constant C_bias; the budget is C_bias * dt.
    double bias_constant = 0;
    /// Simpson nodes for the y-integrals of the mollified equation.
    std::size_t y_nodes = 801;
};

/// R(t) = <psi,f_t> - <psi,f_0> - sum_{t_k < t} dt_k <(A+B)psi, f_{t_k}>.
///
/// The time integral is taken exactly for the step interpolation of the flow
/// (left endpoint on each grid cell), so the residual of an exact flow is
/// first order in dt. For a paired Monte Carlo flow the residual is the mean
/// of per-path residuals and se is their standard error; for unpaired Monte
/// Carlo clouds se combines the per-cloud variances. Evaluates at every
/// requested time, which must be grid times.
std::vector<ResidualReport> weak_residual(const MarginalFlow& flow, const CoefficientSet& coeffs,
                                          const JumpKernel& kernel, const TestFunction& psi,
                                          const std::vector<double>& times,
                                          const ResidualOptions& options = {});

ResidualReport weak_residual(const MarginalFlow& flow, const CoefficientSet& coeffs,
                             const JumpKernel& kernel, const TestFunction& psi, double t,
                             const ResidualOptions& options = {});

//---------------------------------------------------------------------------//
// Martingale functional
//---------------------------------------------------------------------------//

using WeightFn = std::function<double(const Vec&)>;

struct MartingaleWindow {
    std::vector<double> past;  ///< s_1 <= ... <= s_k <= s
    double s = 0;
    double t = 0;
};

struct MartingaleResult {
    double value = 0;  ///< sample mean of K
    double se = 0;
    std::size_t paths = 0;
};

/// Per path: prod_i w_i(X_{s_i}) (psi(X_t) - psi(X_s) - int_s^t (A+B)psi(X_r) dr),
/// the integral taken on the recording grid with left endpoints.
MartingaleResult martingale_statistic(const PathEnsemble& ens, const GeneratorOperator& op,
                                      const MartingaleWindow& window,
                                      const std::vector<WeightFn>& weights,
                                      const TestFunction& psi, unsigned threads = 1);

//---------------------------------------------------------------------------//
// Truncation family and moment bounds
//---------------------------------------------------------------------------//

struct IncrementProbe {
    double t = 0;
    Vec x;
};

struct IncrementBoundReport {
    double max_ratio = 0;  ///< max |psi_n(x+h) - psi_n(x)| / (|h| psi_n(x) / phi(x))
    std::size_t evaluated = 0;
    IncrementProbe worst;
};

/// Checks the increment bound over every probe and every mark with kappa > 0.
IncrementBoundReport jump_increment_bound_check(const JumpKernel& kernel, int n,
                                                const std::vector<IncrementProbe>& probes);

/// Largest (A+B)psi / psi over the probes; psi must be positive there.
double gronwall_constant(const GeneratorOperator& op, const TestFunction& psi,
                         const std::vector<IncrementProbe>& probes);

struct MomentPropagation {
    std::vector<double> times;
    std::vector<double> moments;  ///< <psi, f_t>
    std::vector<double> bounds;   ///< <psi, f_0> e^{C t} (+ 3 se for Monte Carlo flows)
    bool holds = true;
};

MomentPropagation moment_propagation_check(const MarginalFlow& flow, const TestFunction& psi,
                                           double constant);

//---------------------------------------------------------------------------//
// Maximum principle and operator bounds
//---------------------------------------------------------------------------//

enum class Verdict { pass, fail, inconclusive };
const char* to_string(Verdict v);

struct SearchBox {
    Vec lo, hi;
    std::size_t nodes_per_dim = 401;
};

struct MaxPrincipleReport {
    Verdict verdict = Verdict::inconclusive;
    Vec argmax;
    double psi_max = 0;
    double jump_part = 0;
    double second_order = 0;
    double gradient_norm = 0;
    double tolerance = 0;
};

/// Locates the maximum of psi on a tensor grid, refines it with Newton steps,
/// then requires B psi <= tol and 1/2 tr(a Hess psi) <= tol there. The grid
/// allowance in tol is (intensity bound + |b|) |grad psi| h.
MaxPrincipleReport maximum_principle_check(const GeneratorOperator& op, const TestFunction& psi,
                                           double t, const SearchBox& box);

struct OperatorBound {
    double sup = 0;        ///< max |A psi| + |B psi|
    double near_max = 0;   ///< over probes with |x| <= 2M
    double far_max = 0;    ///< over probes with |x| > 2M
};

OperatorBound operator_bound_probe(const GeneratorOperator& op, const TestFunction& psi,
                                   const std::vector<IncrementProbe>& probes);

//---------------------------------------------------------------------------//
// Regularized coefficient probes
//---------------------------------------------------------------------------//

struct MollifiedGrowth {
    double max_ratio = 0;  ///< (|b^eps| + |a^eps|^{1/2} + jump term) / (1 + |y|)
    Vec worst;
};

MollifiedGrowth growth_probe(const MollifiedView& view, const CoefficientSet& coeffs,
                             const JumpKernel& kernel, double t, const std::vector<Vec>& ys);

struct LipschitzReport {
    double scale = 0;
    double max_quotient = 0;  ///< max |b^eps(y1)-b^eps(y2)| / |y1-y2|
    double max_quotient_a = 0;
    std::size_t pairs = 0;
};

/// Random pairs y1 in B(0,R), y2 = y1 + scale * (unit direction).
LipschitzReport lipschitz_probe(const MollifiedView& view, const CoefficientSet& coeffs, double t,
                                double radius, double scale, std::size_t pairs,
                                std::uint64_t seed);

}  // namespace jumpflow
