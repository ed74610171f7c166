#include "jumpflow/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace jumpflow {
namespace {

constexpr double kLogCut = 40.0;

void require_positive_eps(double eps) {
    if (!(eps > 0) || !std::isfinite(eps)) {
        throw std::domain_error("mollification width must be > 0");
    }
}

}  // namespace

double stable_sum(const std::vector<double>& values) {
    double sum = 0, comp = 0;
    for (double v : values) {
        double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    return sum + comp;
}

//---------------------------------------------------------------------------//
// ProbCloud
//---------------------------------------------------------------------------//

ProbCloud::ProbCloud(std::vector<Vec> points, std::vector<double> weights,
                     Provenance provenance)
    : points_(std::move(points)), weights_(std::move(weights)), provenance_(provenance) {
    if (points_.empty()) throw ConfigError("cloud must contain at least one atom");
    if (points_.size() != weights_.size()) {
        throw ConfigError("cloud needs one weight per point");
    }
    dim_ = static_cast<int>(points_.front().size());
    if (dim_ < 1 || dim_ > kMaxDim) throw ConfigError("cloud dimension out of range");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (points_[i].size() != dim_) throw ConfigError("cloud points differ in dimension");
        if (!points_[i].allFinite()) throw ConfigError("cloud point is not finite");
        if (!(weights_[i] > 0) || !std::isfinite(weights_[i])) {
            throw ConfigError("cloud weights must be finite and > 0");
        }
    }
    double total = stable_sum(weights_);
    if (std::abs(total - 1.0) > 1e-12) {
        std::ostringstream msg;
        msg << "cloud weights sum to " << total << ", expected 1";
        throw ConfigError(msg.str());
    }
}

ProbCloud ProbCloud::dirac(const Vec& x) { return ProbCloud({x}, {1.0}, Provenance::exact); }

ProbCloud ProbCloud::uniform(std::vector<Vec> points, Provenance provenance) {
    std::vector<double> w(points.size(), 1.0 / static_cast<double>(points.size()));
    return ProbCloud(std::move(points), std::move(w), provenance);
}

ProbCloud ProbCloud::from_masses(std::vector<Vec> points, const std::vector<double>& masses,
                                 Provenance provenance, double min_mass) {
    if (points.size() != masses.size()) throw ConfigError("one mass per point required");
    std::vector<Vec> kept;
    std::vector<double> w;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (masses[i] < 0 || !std::isfinite(masses[i])) {
            throw ConfigError("masses must be finite and >= 0");
        }
        if (masses[i] > min_mass) {
            kept.push_back(points[i]);
            w.push_back(masses[i]);
        }
    }
    if (kept.empty()) throw ConfigError("all masses are zero");
    double total = stable_sum(w);
    for (double& x : w) x /= total;
    return ProbCloud(std::move(kept), std::move(w), provenance);
}

double ProbCloud::expect(const std::function<double(const Vec&)>& psi) const {
    std::vector<double> terms(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) terms[i] = weights_[i] * psi(points_[i]);
    return stable_sum(terms);
}

double first_moment(const ProbCloud& cloud) {
    return cloud.expect([](const Vec& x) { return x.norm(); });
}

//---------------------------------------------------------------------------//
// MarginalFlow
//---------------------------------------------------------------------------//

MarginalFlow::MarginalFlow(TimeGrid grid, std::vector<ProbCloud> clouds, bool paired)
    : grid_(std::move(grid)), clouds_(std::move(clouds)), paired_(paired) {
    if (clouds_.size() != grid_.size()) {
        throw ConfigError("flow needs exactly one cloud per grid time");
    }
    if (grid_.front() != 0.0) throw ConfigError("flow grid must start at t = 0");
    for (const auto& c : clouds_) {
        if (c.dim() != clouds_.front().dim()) throw ConfigError("flow clouds differ in dimension");
        if (paired_ && c.size() != clouds_.front().size()) {
            throw ConfigError("paired flow clouds must have equal sizes");
        }
    }
}

double MarginalFlow::sup_first_moment() const {
    double m = 0;
    for (const auto& c : clouds_) m = std::max(m, first_moment(c));
    return m;
}

//---------------------------------------------------------------------------//
// Gaussian kernel and tilt
//---------------------------------------------------------------------------//

double log_gaussian_kernel(double eps, const Vec& v) {
    require_positive_eps(eps);
    const double d = static_cast<double>(v.size());
    return -0.5 * d * std::log(2.0 * std::numbers::pi * eps) - v.squaredNorm() / (2.0 * eps);
}

double gaussian_kernel(double eps, const Vec& v) { return std::exp(log_gaussian_kernel(eps, v)); }

std::size_t Tilt::sample(Philox4x32& rng) const {
    double u = uniform01(rng);
    double acc = 0;
    for (std::size_t k = 0; k < prob.size(); ++k) {
        acc += prob[k];
        if (u < acc) return index[k];
    }
    // u landed in the rounding gap above the accumulated sum
    for (std::size_t k = prob.size(); k-- > 0;) {
        if (prob[k] > 0) return index[k];
    }
    return index.back();
}

MollifiedView::MollifiedView(const ProbCloud& base, double epsilon)
    : base_(&base), eps_(epsilon) {
    require_positive_eps(epsilon);
    log_weights_.resize(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) log_weights_[i] = std::log(base.weight(i));
    max_log_weight_ = *std::max_element(log_weights_.begin(), log_weights_.end());
    if (base.dim() == 1) {
        order_.resize(base.size());
        std::iota(order_.begin(), order_.end(), 0u);
        std::stable_sort(order_.begin(), order_.end(), [&](std::uint32_t a, std::uint32_t b) {
            return base.point(a)(0) < base.point(b)(0);
        });
        sorted_x_.resize(base.size());
        sorted_log_weights_.resize(base.size());
        for (std::size_t k = 0; k < order_.size(); ++k) {
            sorted_x_[k] = base.point(order_[k])(0);
            sorted_log_weights_[k] = log_weights_[order_[k]];
        }
    }
}

void MollifiedView::tilt(const Vec& y, Tilt& out) const {
    out.index.clear();
    out.prob.clear();
    const double inv2e = 1.0 / (2.0 * eps_);
    double top = -std::numeric_limits<double>::infinity();

    if (!sorted_x_.empty()) {
        const double yy = y(0);
        auto [first, last] = window(yy);
        for (std::size_t k = first; k < last; ++k) {
            double dx = sorted_x_[k] - yy;
            double l = sorted_log_weights_[k] - dx * dx * inv2e;
            out.index.push_back(order_[k]);
            out.prob.push_back(l);
            top = std::max(top, l);
        }
    } else {
        const auto& base = *base_;
        for (std::size_t i = 0; i < base.size(); ++i) {
            double l = log_weights_[i] - (base.point(i) - y).squaredNorm() * inv2e;
            out.index.push_back(static_cast<std::uint32_t>(i));
            out.prob.push_back(l);
            top = std::max(top, l);
        }
    }

    double sum = 0;
    for (double& p : out.prob) {
        p = std::exp(p - top);
        sum += p;
    }
    for (double& p : out.prob) p /= sum;
    out.log_mass = top + std::log(sum);
}

std::pair<std::size_t, std::size_t> MollifiedView::window(double yy) const {
    const double inv2e = 1.0 / (2.0 * eps_);
    const std::size_t n = sorted_x_.size();
    std::size_t j = static_cast<std::size_t>(
        std::lower_bound(sorted_x_.begin(), sorted_x_.end(), yy) - sorted_x_.begin());
    double anchor = -std::numeric_limits<double>::infinity();
    for (std::size_t c : {j == 0 ? std::size_t{0} : j - 1, std::min(j, n - 1)}) {
        double dx = sorted_x_[c] - yy;
        anchor = std::max(anchor, sorted_log_weights_[c] - dx * dx * inv2e);
    }
    // every atom outside the radius has log-term < anchor - kLogCut
    double radius = std::sqrt(2.0 * eps_ * (max_log_weight_ - anchor + kLogCut));
    auto lo = std::lower_bound(sorted_x_.begin(), sorted_x_.end(), yy - radius);
    auto hi = std::upper_bound(lo, sorted_x_.end(), yy + radius);
    return {static_cast<std::size_t>(lo - sorted_x_.begin()),
            static_cast<std::size_t>(hi - sorted_x_.begin())};
}

Tilt MollifiedView::tilt(const Vec& y) const {
    Tilt t;
    tilt(y, t);
    return t;
}

std::vector<double> MollifiedView::tilt_distribution(const Vec& y) const {
    Tilt t = tilt(y);
    std::vector<double> dense(base_->size(), 0.0);
    for (std::size_t k = 0; k < t.index.size(); ++k) dense[t.index[k]] = t.prob[k];
    return dense;
}

double MollifiedView::log_density(const Vec& y) const {
    Tilt t = tilt(y);
    return t.log_mass - 0.5 * dim() * std::log(2.0 * std::numbers::pi * eps_);
}

double MollifiedView::density(const Vec& y) const { return std::exp(log_density(y)); }

double MollifiedView::cdf(double x) const {
    if (dim() != 1) throw ConfigError("mollified CDF is only defined in one dimension");
    const double s = std::sqrt(eps_);
    std::vector<double> terms(base_->size());
    for (std::size_t i = 0; i < base_->size(); ++i) {
        double z = (x - base_->point(i)(0)) / s;
        terms[i] = base_->weight(i) * 0.5 * std::erfc(-z / std::numbers::sqrt2);
    }
    return stable_sum(terms);
}

double mollified_density(const MollifiedView& view, const Vec& y) { return view.density(y); }

Vec mollified_drift(const MollifiedView& view, const CoefficientSet& coeffs, double t,
                    const Vec& y) {
    Tilt tilt = view.tilt(y);
    Vec b = Vec::Zero(coeffs.dim);
    for (std::size_t k = 0; k < tilt.index.size(); ++k) {
        b += tilt.prob[k] * coeffs.drift(t, view.base().point(tilt.index[k]));
    }
    return b;
}

Mat symmetric_sqrt(const Mat& a) {
    if (a.rows() == 1) {
        double v = a(0, 0);
        if (v < -1e-10 * (1.0 + std::abs(v)) || !std::isfinite(v)) {
            throw NumericError("matrix square root of negative scalar " + std::to_string(v));
        }
        Mat r(1, 1);
        r(0, 0) = std::sqrt(std::max(v, 0.0));
        return r;
    }
    Eigen::SelfAdjointEigenSolver<Mat> solver(a);
    double floor = -1e-10 * (1.0 + a.norm());
    if (solver.info() != Eigen::Success || !a.allFinite() ||
        solver.eigenvalues().minCoeff() < floor) {
        std::ostringstream msg;
        msg << "symmetric square root failed for matrix\n" << a;
        throw NumericError(msg.str());
    }
    Vec roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

MollifiedDiffusion mollified_diffusion(const MollifiedView& view, const CoefficientSet& coeffs,
                                       double t, const Vec& y) {
    Tilt tilt = view.tilt(y);
    Mat a = Mat::Zero(coeffs.dim, coeffs.dim);
    for (std::size_t k = 0; k < tilt.index.size(); ++k) {
        Mat s = coeffs.diffusion(t, view.base().point(tilt.index[k]));
        a += tilt.prob[k] * (s * s.transpose());
    }
    a = 0.5 * (a + a.transpose());
    return {a, symmetric_sqrt(a)};
}

double mollified_jump_magnitude(const MollifiedView& view, const JumpKernel& kernel, double t,
                                const Vec& y) {
    Tilt tilt = view.tilt(y);
    double total = 0;
    for (std::size_t k = 0; k < tilt.index.size(); ++k) {
        total += tilt.prob[k] * mean_jump_magnitude(kernel, t, view.base().point(tilt.index[k]));
    }
    return total;
}

std::size_t sample_tilted_index(const MollifiedView& view, const Vec& y, Philox4x32& rng) {
    return view.tilt(y).sample(rng);
}

const Vec& sample_tilted(const MollifiedView& view, const Vec& y, Philox4x32& rng) {
    return view.base().point(sample_tilted_index(view, y, rng));
}

ProbCloud sample_mollified(const ProbCloud& cloud, double eps, std::size_t n,
                           std::uint64_t seed) {
    require_positive_eps(eps);
    std::vector<double> cumulative(cloud.size());
    std::partial_sum(cloud.weights().begin(), cloud.weights().end(), cumulative.begin());
    Philox4x32 pick(seed, 0, static_cast<std::uint32_t>(StreamTag::initial));
    GaussianStream noise(seed, 0);
    const double s = std::sqrt(eps);
    std::vector<Vec> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        double u = uniform01(pick) * cumulative.back();
        std::size_t i = std::min<std::size_t>(
            static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                     cumulative.begin()),
            cloud.size() - 1);
        Vec x = cloud.point(i);
        for (int c = 0; c < x.size(); ++c) x(c) += s * noise();
        out.push_back(std::move(x));
    }
    return ProbCloud::uniform(std::move(out));
}

//---------------------------------------------------------------------------//
// FrozenMollifier
//---------------------------------------------------------------------------//

FrozenMollifier::FrozenMollifier(const MollifiedView& view, const CoefficientSet& coeffs,
                                 double t)
    : view_(view), t_(t), dim_(coeffs.dim) {
    const auto& base = view.base();
    if (base.dim() != coeffs.dim) throw ConfigError("flow and coefficients differ in dimension");
    const std::size_t d = static_cast<std::size_t>(dim_);
    drift_.resize(base.size() * d);
    a_.resize(base.size() * d * d);
    for (std::size_t i = 0; i < base.size(); ++i) {
        Vec b = coeffs.drift(t, base.point(i));
        Mat s = coeffs.diffusion(t, base.point(i));
        Mat a = s * s.transpose();
        for (std::size_t r = 0; r < d; ++r) {
            drift_[i * d + r] = b(static_cast<Eigen::Index>(r));
            for (std::size_t c = 0; c < d; ++c) {
                a_[(i * d + r) * d + c] =
                    a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            }
        }
    }
    if (dim_ == 1) {
        max_log_weight_ = view_.max_log_weight();
        const auto& order = view_.sorted_order();
        sorted_x_ = view_.sorted_points();
        sorted_logw_.resize(order.size());
        sorted_b_.resize(order.size());
        sorted_a_.resize(order.size());
        for (std::size_t k = 0; k < order.size(); ++k) {
            sorted_logw_[k] = std::log(base.weight(order[k]));
            sorted_b_[k] = drift_[order[k]];
            sorted_a_[k] = a_[order[k]];
        }
    }
}

void FrozenMollifier::evaluate(const Vec& y, Vec& drift, Mat& a) const {
    if (dim_ != 1) {
        Tilt scratch;
        evaluate(y, scratch, drift, a);
        return;
    }
    const double yy = y(0);
    const double inv2e = 1.0 / (2.0 * view_.epsilon());
    auto [first, last] = view_.window(yy);
    // running log-sum-exp: sums are stored relative to exp(top)
    double top = -std::numeric_limits<double>::infinity();
    double s = 0, sb = 0, sa = 0;
    for (std::size_t k = first; k < last; ++k) {
        double dx = sorted_x_[k] - yy;
        double l = sorted_logw_[k] - dx * dx * inv2e;
        if (l > top) {
            double scale = std::exp(top - l);
            s *= scale;
            sb *= scale;
            sa *= scale;
            top = l;
        }
        double e = std::exp(l - top);
        s += e;
        sb += e * sorted_b_[k];
        sa += e * sorted_a_[k];
    }
    drift.resize(1);
    a.resize(1, 1);
    drift(0) = sb / s;
    a(0, 0) = sa / s;
}

void FrozenMollifier::evaluate(const Vec& y, Tilt& scratch, Vec& drift, Mat& a) const {
    view_.tilt(y, scratch);
    const std::size_t d = static_cast<std::size_t>(dim_);
    drift.setZero(dim_);
    a.setZero(dim_, dim_);
    if (d == 1) {
        double b = 0, aa = 0;
        for (std::size_t k = 0; k < scratch.index.size(); ++k) {
            std::size_t i = scratch.index[k];
            b += scratch.prob[k] * drift_[i];
            aa += scratch.prob[k] * a_[i];
        }
        drift(0) = b;
        a(0, 0) = aa;
        return;
    }
    for (std::size_t k = 0; k < scratch.index.size(); ++k) {
        std::size_t i = scratch.index[k];
        double p = scratch.prob[k];
        for (std::size_t r = 0; r < d; ++r) {
            drift(static_cast<Eigen::Index>(r)) += p * drift_[i * d + r];
            for (std::size_t c = 0; c < d; ++c) {
                a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) +=
                    p * a_[(i * d + r) * d + c];
            }
        }
    }
    a = 0.5 * (a + a.transpose());
}

//---------------------------------------------------------------------------//
// Wasserstein-1
//---------------------------------------------------------------------------//

namespace {

void require_1d(const ProbCloud& c) {
    if (c.dim() != 1) {
        throw ConfigError("one-dimensional W1 requested for a " + std::to_string(c.dim()) +
                          "-dimensional cloud; use wasserstein1_marginals");
    }
}

double w1_coordinate(const ProbCloud& a, const ProbCloud& b, int coord) {
    std::vector<std::pair<double, double>> atoms;
    atoms.reserve(a.size() + b.size());
    for (std::size_t i = 0; i < a.size(); ++i) atoms.emplace_back(a.point(i)(coord), a.weight(i));
    for (std::size_t i = 0; i < b.size(); ++i) {
        atoms.emplace_back(b.point(i)(coord), -b.weight(i));
    }
    std::sort(atoms.begin(), atoms.end(),
              [](const auto& l, const auto& r) { return l.first < r.first; });
    double cum = 0, total = 0;
    for (std::size_t k = 0; k + 1 < atoms.size(); ++k) {
        cum += atoms[k].second;
        total += std::abs(cum) * (atoms[k + 1].first - atoms[k].first);
    }
    return total;
}

// Integral over [u, v] of |c - F| with F linear from fu to fv.
double abs_linear_area(double c, double fu, double fv, double width) {
    double du = c - fu, dv = c - fv;
    if (du * dv >= 0) return 0.5 * (std::abs(du) + std::abs(dv)) * width;
    return 0.5 * (du * du + dv * dv) / std::abs(du - dv) * width;
}

}  // namespace

double wasserstein1_1d(const ProbCloud& a, const ProbCloud& b) {
    require_1d(a);
    require_1d(b);
    return w1_coordinate(a, b, 0);
}

double wasserstein1_marginals(const ProbCloud& a, const ProbCloud& b) {
    if (a.dim() != b.dim()) throw ConfigError("W1 between clouds of different dimension");
    double w = 0;
    for (int c = 0; c < a.dim(); ++c) w = std::max(w, w1_coordinate(a, b, c));
    return w;
}

double wasserstein1_to_cdf(const ProbCloud& sample, const std::function<double(double)>& cdf,
                           double lo, double hi, std::size_t nodes) {
    require_1d(sample);
    if (nodes < 2) throw ConfigError("need at least two CDF nodes");
    std::vector<std::pair<double, double>> atoms;
    atoms.reserve(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        atoms.emplace_back(sample.point(i)(0), sample.weight(i));
    }
    std::sort(atoms.begin(), atoms.end(),
              [](const auto& l, const auto& r) { return l.first < r.first; });
    lo = std::min(lo, atoms.front().first);
    hi = std::max(hi, atoms.back().first);
    if (!(hi > lo)) hi = lo + 1.0;

    const double h = (hi - lo) / static_cast<double>(nodes);
    std::vector<double> f(nodes + 1);
    for (std::size_t k = 0; k <= nodes; ++k) f[k] = cdf(lo + h * static_cast<double>(k));
    auto interp = [&](double x) {
        double s = (x - lo) / h;
        std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(std::max(s, 0.0)), nodes - 1);
        double frac = s - static_cast<double>(k);
        return f[k] + (f[k + 1] - f[k]) * frac;
    };

    double total = 0, empirical = 0, x = lo;
    std::size_t next_atom = 0;
    for (std::size_t k = 1; k <= nodes; ++k) {
        const double cell_end = (k == nodes) ? hi : lo + h * static_cast<double>(k);
        while (next_atom < atoms.size() && atoms[next_atom].first <= cell_end) {
            double xa = atoms[next_atom].first;
            if (xa > x) {
                total += abs_linear_area(empirical, interp(x), interp(xa), xa - x);
                x = xa;
            }
            empirical += atoms[next_atom].second;
            ++next_atom;
        }
        if (cell_end > x) {
            total += abs_linear_area(empirical, interp(x), f[k], cell_end - x);
            x = cell_end;
        }
    }
    return total;
}

}  // namespace jumpflow
