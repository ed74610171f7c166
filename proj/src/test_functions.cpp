#include "jumpflow/test_functions.hpp"

#include <cmath>
#include <limits>

namespace jumpflow {

TestFunction::TestFunction(std::string id, int dim, FunctionClass cls, double support_radius,
                           JetFn jet)
    : id_(std::move(id)),
      dim_(dim),
      class_(cls),
      support_radius_(support_radius),
      jet_(std::move(jet)) {
    if (dim_ < 1 || dim_ > kMaxDim) throw ConfigError("test function dimension out of range");
    if (!jet_) throw ConfigError("test function needs an evaluator");
    if (class_ == FunctionClass::compact_c2 && !std::isfinite(support_radius_)) {
        throw ConfigError("compact test function needs a finite support radius");
    }
}

namespace {

Jet zero_jet(int d) { return {0.0, Vec::Zero(d), Mat::Zero(d, d)}; }

// Radial profile f(|x - c|) lifted to R^d.
Jet radial_jet(const Vec& v, double f, double f1, double f2) {
    const int d = static_cast<int>(v.size());
    Jet j{f, Vec::Zero(d), Mat::Zero(d, d)};
    double rho = v.norm();
    if (rho == 0.0) {
        // f'(0) = 0 for every radial profile used here; the Hessian is f''(0) I.
        j.hess = f2 * Mat::Identity(d, d);
        return j;
    }
    Vec e = v / rho;
    j.grad = f1 * e;
    j.hess = f2 * (e * e.transpose()) + (f1 / rho) * (Mat::Identity(d, d) - e * e.transpose());
    return j;
}

}  // namespace

TestFunction bump(std::string id, const Vec& center, double radius, const Quadratic& p) {
    if (!(radius > 0)) throw ConfigError("bump radius must be > 0");
    const int d = static_cast<int>(center.size());
    Vec beta = p.beta.size() ? p.beta : Vec(Vec::Zero(d));
    Mat gamma = p.gamma.size() ? Mat(0.5 * (p.gamma + p.gamma.transpose())) : Mat(Mat::Zero(d, d));
    if (beta.size() != d || gamma.rows() != d) throw ConfigError("bump weight has wrong dimension");
    const double alpha = p.alpha, r2 = radius * radius;

    auto jet = [=](const Vec& x) {
        Vec v = x - center;
        double q = 1.0 - v.squaredNorm() / r2;
        if (q <= 0) return zero_jet(d);
        double pv = alpha + beta.dot(v) + v.dot(gamma * v);
        Vec gp = beta + 2.0 * gamma * v;
        Mat hp = 2.0 * gamma;
        Vec gq = -2.0 * v / r2;
        double q2 = q * q, q3 = q2 * q;
        Jet j;
        j.value = pv * q3;
        j.grad = q3 * gp + 3.0 * pv * q2 * gq;
        j.hess = q3 * hp + 3.0 * q2 * (gp * gq.transpose() + gq * gp.transpose()) +
                 6.0 * pv * q * (gq * gq.transpose()) - 6.0 * pv * q2 / r2 * Mat::Identity(d, d);
        return j;
    };
    TestFunction f(std::move(id), d, FunctionClass::compact_c2, center.norm() + radius, jet);
    if (d == 1) f.set_bounds(center(0) - radius, center(0) + radius);
    return f;
}

std::vector<TestFunction> bump_bank(int dim, double center, double half_width, std::size_t count) {
    if (count == 0) throw ConfigError("bank needs at least one function");
    std::vector<TestFunction> bank;
    bank.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
        double frac = count == 1 ? 0.5 : static_cast<double>(j) / static_cast<double>(count - 1);
        Vec c = Vec::Constant(dim, center + half_width * (1.5 * frac - 0.75));
        // three radius levels so every centre is tested at several scales
        double radius = half_width * (0.45 + 0.3 * static_cast<double>(j % 3));
        Quadratic p;
        switch (j % 3) {
            case 0:
                break;
            case 1:  // p(x) = x_1
                p.alpha = c(0);
                p.beta = Vec::Zero(dim);
                p.beta(0) = 1.0;
                break;
            default:  // p(x) = x_1^2
                p.alpha = c(0) * c(0);
                p.beta = Vec::Zero(dim);
                p.beta(0) = 2.0 * c(0);
                p.gamma = Mat::Zero(dim, dim);
                p.gamma(0, 0) = 1.0;
                break;
        }
        bank.push_back(bump("bump-" + std::to_string(j), c, radius, p));
    }
    return bank;
}

TestFunction chi_cutoff(int dim, int level) {
    if (level < 1) throw ConfigError("cutoff level must be >= 1");
    const double n = level;
    auto jet = [=](const Vec& x) {
        double rho = x.norm();
        if (rho <= n) {
            Jet j = zero_jet(dim);
            j.value = 1.0;
            return j;
        }
        if (rho >= n + 1) return zero_jet(dim);
        double r = rho - n, r2 = r * r, r3 = r2 * r;
        double f = 1.0 - (6 * r3 * r2 - 15 * r3 * r + 10 * r3);
        double f1 = -30.0 * r2 * (r - 1) * (r - 1);
        double f2 = -60.0 * r * (r - 1) * (2 * r - 1);
        return radial_jet(x, f, f1, f2);
    };
    return TestFunction("chi-" + std::to_string(level), dim, FunctionClass::compact_c2, n + 1, jet);
}

double phi_value(const Vec& x) { return std::sqrt(1.0 + x.squaredNorm()); }

TestFunction phi_function(int dim) {
    auto jet = [=](const Vec& x) {
        double p = phi_value(x);
        Jet j;
        j.value = p;
        j.grad = x / p;
        j.hess = Mat::Identity(dim, dim) / p - (x * x.transpose()) / (p * p * p);
        return j;
    };
    return TestFunction("phi", dim, FunctionClass::extended_c2,
                        std::numeric_limits<double>::infinity(), jet);
}

ChiValue chi_profile(double r) {
    if (r <= 1.0) return {r, 1.0, 0.0};
    if (r >= 2.0) return {2.0, 0.0, 0.0};
    double s = r - 1.0, s2 = s * s, s3 = s2 * s;
    return {1.0 + s + 4 * s3 - 7 * s3 * s + 3 * s3 * s2,
            1.0 + 12 * s2 - 28 * s3 + 15 * s3 * s,
            24 * s - 84 * s2 + 60 * s3};
}

TestFunction truncation_family(int dim, int n) {
    if (n < 1) throw ConfigError("truncation index must be >= 1");
    const double nn = n;
    auto jet = [=](const Vec& x) {
        double p = phi_value(x);
        ChiValue c = chi_profile(p / nn);
        Vec gphi = x / p;
        Mat hphi = Mat::Identity(dim, dim) / p - (x * x.transpose()) / (p * p * p);
        Jet j;
        // n * (phi / n) need not round back to phi, so the two outer branches
        // are written out to keep the identity and plateau values exact.
        j.value = p <= nn ? p : (p >= 2 * nn ? 2 * nn : nn * c.value);
        j.grad = c.d1 * gphi;
        j.hess = (c.d2 / nn) * (gphi * gphi.transpose()) + c.d1 * hphi;
        return j;
    };
    return TestFunction("psi-" + std::to_string(n), dim, FunctionClass::extended_c2,
                        std::numeric_limits<double>::infinity(), jet);
}

}  // namespace jumpflow
