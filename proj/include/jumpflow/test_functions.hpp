#pragma once

#include "jumpflow/types.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace jumpflow {

enum class FunctionClass {
    compact_c2,   ///< C^2 with compact support
    extended_c2,  ///< C^2 with (1+|x|)(|psi|+|grad|+|hess|) bounded
};

/// Second-order jet of a function at one point.
struct Jet {
    double value = 0;
    Vec grad;
    Mat hess;
};

/// A C^2 test function with analytic derivatives.
class TestFunction {
  public:
    using JetFn = std::function<Jet(const Vec&)>;

    /// `support_radius` is M with psi = 0 for |x| >= M (infinite for the
    /// extended class).
    TestFunction(std::string id, int dim, FunctionClass cls, double support_radius, JetFn jet);

    const std::string& id() const { return id_; }
    int dim() const { return dim_; }
    FunctionClass function_class() const { return class_; }
    double support_radius() const { return support_radius_; }
    bool compact() const { return class_ == FunctionClass::compact_c2; }

    Jet jet(const Vec& x) const { return jet_(x); }
    double value(const Vec& x) const { return jet_(x).value; }
    Vec gradient(const Vec& x) const { return jet_(x).grad; }
    Mat hessian(const Vec& x) const { return jet_(x).hess; }

    /// The coordinate interval [lo, hi] outside of which psi vanishes
    /// (meaningful for compact functions in one dimension).
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    void set_bounds(double lo, double hi) {
        lo_ = lo;
        hi_ = hi;
    }

  private:
    std::string id_;
    int dim_;
    FunctionClass class_;
    double support_radius_;
    JetFn jet_;
    double lo_ = -std::numeric_limits<double>::infinity();
    double hi_ = std::numeric_limits<double>::infinity();
};

/// Quadratic weight p(x) = alpha + beta.(x-c) + (x-c)^T Gamma (x-c).
struct Quadratic {
    double alpha = 1;
    Vec beta;   ///< empty means zero
    Mat gamma;  ///< empty means zero
};

/// p(x) (1 - |x-c|^2/R^2)^3 on |x-c| < R, zero elsewhere.
TestFunction bump(std::string id, const Vec& center, double radius, const Quadratic& p = {});

/// Deterministic bank of `count` bumps spread over [center - half_width,
/// center + half_width] in every coordinate. Weights cycle through the
/// polynomials in x_1 of degree 0 to 2.
std::vector<TestFunction> bump_bank(int dim, double center, double half_width,
                                    std::size_t count = 12);

/// 1 on |x| <= n, 0 on |x| >= n+1, quintic smootherstep in between.
TestFunction chi_cutoff(int dim, int n);

/// phi(x) = sqrt(1 + |x|^2)
TestFunction phi_function(int dim);

/// The increasing C^2 profile with chi(r) = r on [0,1], chi(r) = 2 on [2,inf)
/// and 1 + s + 4s^3 - 7s^4 + 3s^5 (s = r - 1) on [1,2]. Returns (chi, chi', chi'').
struct ChiValue {
    double value, d1, d2;
};
ChiValue chi_profile(double r);

/// psi_n(x) = n chi(phi(x)/n)
TestFunction truncation_family(int dim, int n);

double phi_value(const Vec& x);

}  // namespace jumpflow
