#include "jumpflow/verify.hpp"

#include "jumpflow/parallel.hpp"
#include "jumpflow/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace jumpflow {

//---------------------------------------------------------------------------//
// Generators
//---------------------------------------------------------------------------//

namespace {

double jump_part(const JumpKernel& kernel, const TestFunction& psi, double t, const Vec& at,
                 const Vec& y, double psi_y) {
    double total = 0;
    for (const auto& m : kernel.marks()) {
        double k = kernel.rate(t, m.label, at);
        if (k == 0.0) continue;
        total += m.weight * k * (psi.value(y + kernel.jump(t, m.label, at)) - psi_y);
    }
    return total;
}

GeneratorValue local_part(const Jet& jet, const Vec& b, const Mat& a) {
    GeneratorValue g;
    g.drift = b.dot(jet.grad);
    g.diffusion = 0.5 * (a.cwiseProduct(jet.hess)).sum();
    return g;
}

void check_time(const CoefficientSet& coeffs, double t) {
    if (!(t >= 0.0 && t <= coeffs.horizon)) {
        throw std::domain_error("time " + std::to_string(t) + " outside [0, T]");
    }
}

}  // namespace

GeneratorValue apply_generator(const CoefficientSet& coeffs, const JumpKernel& kernel,
                               const TestFunction& psi, double t, const Vec& x) {
    GeneratorCoeffs c = eval_generator_coeffs(coeffs, t, x);
    Jet jet = psi.jet(x);
    GeneratorValue g = local_part(jet, c.drift, c.a);
    g.jump = jump_part(kernel, psi, t, x, x, jet.value);
    return g;
}

GeneratorValue apply_mollified_generator(const MollifiedView& view, const CoefficientSet& coeffs,
                                         const JumpKernel& kernel, const TestFunction& psi,
                                         double t, const Vec& y) {
    check_time(coeffs, t);
    Tilt tilt = view.tilt(y);
    const int d = coeffs.dim;
    Vec b = Vec::Zero(d);
    Mat a = Mat::Zero(d, d);
    Jet jet = psi.jet(y);
    double jump = 0;
    for (std::size_t k = 0; k < tilt.index.size(); ++k) {
        const Vec& x = view.base().point(tilt.index[k]);
        GeneratorCoeffs c = eval_generator_coeffs(coeffs, t, x);
        b += tilt.prob[k] * c.drift;
        a += tilt.prob[k] * c.a;
        jump += tilt.prob[k] * jump_part(kernel, psi, t, x, y, jet.value);
    }
    GeneratorValue g = local_part(jet, b, a);
    g.jump = jump;
    return g;
}

PlainGenerator::PlainGenerator(CoefficientSet coeffs, JumpKernel kernel)
    : coeffs_(std::move(coeffs)), kernel_(std::move(kernel)) {
    coeffs_.validate();
}

GeneratorValue PlainGenerator::apply(const TestFunction& psi, double t, const Vec& x) const {
    return apply_generator(coeffs_, kernel_, psi, t, x);
}

double PlainGenerator::drift_norm(double t, const Vec& x) const {
    return coeffs_.drift(t, x).norm();
}

MollifiedGenerator::MollifiedGenerator(CoefficientSet coeffs, JumpKernel kernel,
                                       const MarginalFlow& flow, double epsilon)
    : coeffs_(std::move(coeffs)), kernel_(std::move(kernel)), flow_(&flow) {
    coeffs_.validate();
    views_.reserve(flow.grid().size());
    for (const auto& c : flow.clouds()) views_.emplace_back(c, epsilon);

    // Per flow time: b, a cached per atom plus a jump table per (atom, mark).
    const std::size_t marks = kernel_.marks().size();
    frozen_.reserve(views_.size());
    for (std::size_t k = 0; k < views_.size(); ++k) {
        const double tk = flow.grid()[k];
        Frozen f{FrozenMollifier(views_[k], coeffs_, tk), {}, {}, {}};
        const auto& cloud = flow.cloud(k);
        f.rate.resize(cloud.size() * marks);
        f.shift.resize(cloud.size() * marks);
        f.uniform_shift.assign(marks, 1);
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            for (std::size_t j = 0; j < marks; ++j) {
                const auto& m = kernel_.marks()[j];
                double r = kernel_.rate(tk, m.label, cloud.point(i));
                f.rate[i * marks + j] = m.weight * r;
                f.shift[i * marks + j] = r > 0 ? kernel_.jump(tk, m.label, cloud.point(i))
                                               : Vec(Vec::Zero(coeffs_.dim));
            }
        }
        for (std::size_t j = 0; j < marks; ++j) {
            const Vec* first = nullptr;
            for (std::size_t i = 0; i < cloud.size(); ++i) {
                if (f.rate[i * marks + j] == 0.0) continue;
                if (!first) {
                    first = &f.shift[i * marks + j];
                } else if (f.shift[i * marks + j] != *first) {
                    f.uniform_shift[j] = 0;
                    break;
                }
            }
        }
        frozen_.push_back(std::move(f));
    }
}

GeneratorValue MollifiedGenerator::apply(const TestFunction& psi, double t, const Vec& y) const {
    const std::size_t k = flow_->grid().index_at(t);
    const Frozen& f = frozen_[k];
    thread_local Tilt scratch;
    Vec b;
    Mat a;
    f.mollifier.evaluate(y, scratch, b, a);
    Jet jet = psi.jet(y);
    GeneratorValue g = local_part(jet, b, a);

    const std::size_t marks = kernel_.marks().size();
    for (std::size_t j = 0; j < marks; ++j) {
        if (f.uniform_shift[j]) {
            double rate = 0;
            const Vec* shift = nullptr;
            for (std::size_t q = 0; q < scratch.index.size(); ++q) {
                std::size_t idx = scratch.index[q] * marks + j;
                if (f.rate[idx] == 0.0) continue;
                rate += scratch.prob[q] * f.rate[idx];
                shift = &f.shift[idx];
            }
            if (shift) g.jump += rate * (psi.value(y + *shift) - jet.value);
        } else {
            for (std::size_t q = 0; q < scratch.index.size(); ++q) {
                std::size_t idx = scratch.index[q] * marks + j;
                if (f.rate[idx] == 0.0) continue;
                g.jump += scratch.prob[q] * f.rate[idx] * (psi.value(y + f.shift[idx]) - jet.value);
            }
        }
    }
    return g;
}

double MollifiedGenerator::drift_norm(double t, const Vec& y) const {
    const std::size_t k = flow_->grid().index_at(t);
    Tilt scratch;
    Vec b;
    Mat a;
    frozen_[k].mollifier.evaluate(y, scratch, b, a);
    return b.norm();
}

//---------------------------------------------------------------------------//
// Weak residual
//---------------------------------------------------------------------------//

namespace {

struct Moments {
    double mean = 0;
    double var_of_mean = 0;  // variance of the weighted mean (Monte Carlo only)
};

Moments cloud_moments(const ProbCloud& c, const std::vector<double>& values) {
    Moments m;
    std::vector<double> terms(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) terms[i] = c.weight(i) * values[i];
    m.mean = stable_sum(terms);
    if (c.provenance() != Provenance::monte_carlo || c.size() < 2) return m;
    double var = 0, w2 = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        var += c.weight(i) * (values[i] - m.mean) * (values[i] - m.mean);
        w2 += c.weight(i) * c.weight(i);
    }
    // weighted variance times the effective 1/N, with the unbiased correction
    m.var_of_mean = var * w2 / (1.0 - w2);
    return m;
}

std::vector<double> map_cloud(const ProbCloud& c, const std::function<double(const Vec&)>& f) {
    std::vector<double> v(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) v[i] = f(c.point(i));
    return v;
}

double mean_and_se(const std::vector<double>& v, double& se) {
    const double n = static_cast<double>(v.size());
    double mean = stable_sum(v) / n;
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = v.size() > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
    return mean;
}

// Composite Simpson on [lo, hi] with an odd node count.
double simpson(const std::function<double(double)>& f, double lo, double hi, std::size_t nodes) {
    if (nodes < 3) nodes = 3;
    if (nodes % 2 == 0) ++nodes;
    const double h = (hi - lo) / static_cast<double>(nodes - 1);
    double s = f(lo) + f(hi);
    for (std::size_t i = 1; i + 1 < nodes; ++i) {
        s += (i % 2 ? 4.0 : 2.0) * f(lo + h * static_cast<double>(i));
    }
    return s * h / 3.0;
}

std::vector<std::size_t> residual_indices(const MarginalFlow& flow,
                                          const std::vector<double>& times) {
    std::vector<std::size_t> idx;
    idx.reserve(times.size());
    for (double t : times) idx.push_back(flow.grid().node_index(t));
    return idx;
}

ResidualReport make_report(const TestFunction& psi, const MarginalFlow& flow, std::size_t k,
                           double residual, double se, double bias_constant) {
    ResidualReport r;
    r.test_fn = psi.id();
    r.t = flow.grid()[k];
    r.residual = residual;
    r.dt = 0;
    for (std::size_t q = 0; q < k; ++q) r.dt = std::max(r.dt, flow.grid().step(q));
    r.se = se;
    r.bias_budget = bias_constant * r.dt;
    r.pass = std::abs(residual) <= r.bias_budget + 3.0 * se + 1e-13;
    return r;
}

std::vector<ResidualReport> plain_residual(const MarginalFlow& flow, const CoefficientSet& coeffs,
                                           const JumpKernel& kernel, const TestFunction& psi,
                                           const std::vector<std::size_t>& targets,
                                           double bias_constant) {
    const std::size_t last = *std::max_element(targets.begin(), targets.end());
    const auto& grid = flow.grid();
    auto gen = [&](double t) {
        return [&, t](const Vec& x) { return apply_generator(coeffs, kernel, psi, t, x).total(); };
    };
    auto value = [&](const Vec& x) { return psi.value(x); };
    std::vector<ResidualReport> out;

    if (flow.paired()) {
        const std::size_t n = flow.cloud(0).size();
        std::vector<double> integral(n, 0.0), psi0 = map_cloud(flow.cloud(0), value);
        std::size_t next = 0;
        std::vector<std::size_t> order(targets.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return targets[a] < targets[b]; });
        std::vector<ResidualReport> sorted(targets.size());
        for (std::size_t k = 0; k <= last; ++k) {
            while (next < order.size() && targets[order[next]] == k) {
                std::vector<double> per(n);
                const auto& c = flow.cloud(k);
                for (std::size_t i = 0; i < n; ++i) {
                    per[i] = psi.value(c.point(i)) - psi0[i] - integral[i];
                }
                double se = 0;
                double mean = mean_and_se(per, se);
                sorted[order[next]] = make_report(psi, flow, k, mean, se, bias_constant);
                ++next;
            }
            if (k == last) break;
            auto gk = gen(grid[k]);
            const auto& c = flow.cloud(k);
            for (std::size_t i = 0; i < n; ++i) integral[i] += grid.step(k) * gk(c.point(i));
        }
        return sorted;
    }

    Moments m0 = cloud_moments(flow.cloud(0), map_cloud(flow.cloud(0), value));
    std::vector<double> integral(last + 1, 0.0), integral_var(last + 1, 0.0);
    for (std::size_t k = 0; k < last; ++k) {
        Moments mk = cloud_moments(flow.cloud(k), map_cloud(flow.cloud(k), gen(grid[k])));
        double h = grid.step(k);
        integral[k + 1] = integral[k] + h * mk.mean;
        integral_var[k + 1] = integral_var[k] + h * h * mk.var_of_mean;
    }
    for (std::size_t k : targets) {
        Moments mt = cloud_moments(flow.cloud(k), map_cloud(flow.cloud(k), value));
        double r = mt.mean - m0.mean - integral[k];
        double se = std::sqrt(mt.var_of_mean + m0.var_of_mean + integral_var[k]);
        out.push_back(make_report(psi, flow, k, r, se, bias_constant));
    }
    return out;
}

std::vector<ResidualReport> mollified_residual(const MarginalFlow& flow,
                                               const CoefficientSet& coeffs,
                                               const JumpKernel& kernel, const TestFunction& psi,
                                               const std::vector<std::size_t>& targets,
                                               const ResidualOptions& options) {
    if (flow.dim() != 1) throw ConfigError("the mollified residual is one-dimensional only");
    if (!psi.compact()) throw ConfigError("the mollified residual needs a compact test function");
    for (const auto& c : flow.clouds()) {
        if (c.provenance() == Provenance::monte_carlo) {
            throw ConfigError("the mollified residual needs an exact or grid flow");
        }
    }
    const std::size_t last = *std::max_element(targets.begin(), targets.end());
    const auto& grid = flow.grid();
    const double eps = options.epsilon;
    auto pairing = [&](const MollifiedView& view, double lo, double hi,
                       const std::function<double(double)>& f) {
        return simpson([&](double y) { return f(y) * view.density(scalar_vec(y)); }, lo, hi,
                       options.y_nodes);
    };

    std::vector<double> integral(last + 1, 0.0);
    for (std::size_t k = 0; k < last; ++k) {
        MollifiedView view(flow.cloud(k), eps);
        double reach = 0;
        for (const auto& x : flow.cloud(k).points()) {
            for (const auto& m : kernel.marks()) {
                if (kernel.rate(grid[k], m.label, x) > 0) {
                    reach = std::max(reach, kernel.jump(grid[k], m.label, x).norm());
                }
            }
        }
        double e = pairing(view, psi.lo() - reach, psi.hi() + reach, [&](double y) {
            return apply_mollified_generator(view, coeffs, kernel, psi, grid[k], scalar_vec(y))
                .total();
        });
        integral[k + 1] = integral[k] + grid.step(k) * e;
    }
    auto psi_pair = [&](std::size_t k) {
        MollifiedView view(flow.cloud(k), eps);
        return pairing(view, psi.lo(), psi.hi(), [&](double y) { return psi.value(scalar_vec(y)); });
    };
    double p0 = psi_pair(0);
    std::vector<ResidualReport> out;
    for (std::size_t k : targets) {
        out.push_back(make_report(psi, flow, k, psi_pair(k) - p0 - integral[k], 0.0,
                                  options.bias_constant));
    }
    return out;
}

}  // namespace

std::vector<ResidualReport> weak_residual(const MarginalFlow& flow, const CoefficientSet& coeffs,
                                          const JumpKernel& kernel, const TestFunction& psi,
                                          const std::vector<double>& times,
                                          const ResidualOptions& options) {
    coeffs.validate();
    if (times.empty()) return {};
    if (psi.dim() != flow.dim()) throw ConfigError("test function and flow differ in dimension");
    if (!psi.compact() && !std::isfinite(flow.sup_first_moment())) {
        throw ConfigError("extended test functions need a flow with finite first moments");
    }
    auto targets = residual_indices(flow, times);
    if (options.epsilon > 0) {
        return mollified_residual(flow, coeffs, kernel, psi, targets, options);
    }
    return plain_residual(flow, coeffs, kernel, psi, targets, options.bias_constant);
}

ResidualReport weak_residual(const MarginalFlow& flow, const CoefficientSet& coeffs,
                             const JumpKernel& kernel, const TestFunction& psi, double t,
                             const ResidualOptions& options) {
    return weak_residual(flow, coeffs, kernel, psi, std::vector<double>{t}, options).front();
}

//---------------------------------------------------------------------------//
// Martingale functional
//---------------------------------------------------------------------------//

MartingaleResult martingale_statistic(const PathEnsemble& ens, const GeneratorOperator& op,
                                      const MartingaleWindow& window,
                                      const std::vector<WeightFn>& weights,
                                      const TestFunction& psi, unsigned threads) {
    if (weights.size() != window.past.size()) {
        throw ConfigError("need one weight function per past window time");
    }
    const auto& grid = ens.grid();
    std::vector<std::size_t> past;
    for (double s : window.past) {
        if (s > window.s + 1e-12) throw ConfigError("past window times must be <= s");
        past.push_back(grid.node_index(s));
    }
    const std::size_t ks = grid.node_index(window.s), kt = grid.node_index(window.t);
    if (kt < ks) throw ConfigError("window needs s <= t");

    std::vector<double> per(ens.size());
    parallel_for(ens.size(), resolve_threads(threads), [&](std::size_t begin, std::size_t end) {
        for (std::size_t n = begin; n < end; ++n) {
            double factor = 1;
            for (std::size_t i = 0; i < past.size(); ++i) factor *= weights[i](ens.state(n, past[i]));
            if (factor == 0.0) {
                per[n] = 0.0;
                continue;
            }
            double integral = 0;
            for (std::size_t k = ks; k < kt; ++k) {
                integral += grid.step(k) * op.apply(psi, grid[k], ens.state(n, k)).total();
            }
            per[n] = factor * (psi.value(ens.state(n, kt)) - psi.value(ens.state(n, ks)) - integral);
        }
    });
    MartingaleResult r;
    r.paths = ens.size();
    r.value = mean_and_se(per, r.se);
    return r;
}

//---------------------------------------------------------------------------//
// Truncation family and moment bounds
//---------------------------------------------------------------------------//

IncrementBoundReport jump_increment_bound_check(const JumpKernel& kernel, int n,
                                                const std::vector<IncrementProbe>& probes) {
    IncrementBoundReport report;
    if (probes.empty()) return report;
    TestFunction psi = truncation_family(static_cast<int>(probes.front().x.size()), n);
    report.worst = probes.front();
    for (const auto& p : probes) {
        double base = psi.value(p.x);
        double phi = phi_value(p.x);
        for (const auto& m : kernel.marks()) {
            if (!(kernel.rate(p.t, m.label, p.x) > 0)) continue;
            Vec h = kernel.jump(p.t, m.label, p.x);
            ++report.evaluated;
            double hn = h.norm();
            if (hn == 0.0) continue;
            double ratio = std::abs(psi.value(p.x + h) - base) * phi / (hn * base);
            if (ratio > report.max_ratio) {
                report.max_ratio = ratio;
                report.worst = p;
            }
        }
    }
    return report;
}

double gronwall_constant(const GeneratorOperator& op, const TestFunction& psi,
                         const std::vector<IncrementProbe>& probes) {
    double c = -std::numeric_limits<double>::infinity();
    for (const auto& p : probes) {
        double v = psi.value(p.x);
        if (!(v > 0)) throw ConfigError("Gronwall fit needs a positive test function");
        c = std::max(c, op.apply(psi, p.t, p.x).total() / v);
    }
    return c;
}

MomentPropagation moment_propagation_check(const MarginalFlow& flow, const TestFunction& psi,
                                           double constant) {
    MomentPropagation m;
    auto value = [&](const Vec& x) { return psi.value(x); };
    Moments m0 = cloud_moments(flow.cloud(0), map_cloud(flow.cloud(0), value));
    for (std::size_t k = 0; k < flow.grid().size(); ++k) {
        Moments mk = cloud_moments(flow.cloud(k), map_cloud(flow.cloud(k), value));
        double t = flow.grid()[k];
        double bound = m0.mean * std::exp(constant * t);
        bound += 3.0 * std::sqrt(mk.var_of_mean + m0.var_of_mean) + 1e-12 * std::abs(bound);
        m.times.push_back(t);
        m.moments.push_back(mk.mean);
        m.bounds.push_back(bound);
        if (mk.mean > bound) m.holds = false;
    }
    return m;
}

//---------------------------------------------------------------------------//
// Maximum principle and operator bounds
//---------------------------------------------------------------------------//

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::pass:
            return "pass";
        case Verdict::fail:
            return "fail";
        default:
            return "inconclusive";
    }
}

MaxPrincipleReport maximum_principle_check(const GeneratorOperator& op, const TestFunction& psi,
                                           double t, const SearchBox& box) {
    const int d = psi.dim();
    if (box.lo.size() != d || box.hi.size() != d || box.nodes_per_dim < 3) {
        throw ConfigError("search box does not match the test function");
    }
    const std::size_t m = box.nodes_per_dim;
    std::size_t total = 1;
    for (int c = 0; c < d; ++c) total *= m;
    Vec h = (box.hi - box.lo) / static_cast<double>(m - 1);

    auto node = [&](std::size_t flat, std::vector<std::size_t>& idx) {
        Vec y(d);
        for (int c = 0; c < d; ++c) {
            idx[static_cast<std::size_t>(c)] = flat % m;
            y(c) = box.lo(c) + h(c) * static_cast<double>(flat % m);
            flat /= m;
        }
        return y;
    };
    std::vector<std::size_t> idx(static_cast<std::size_t>(d)), best_idx;
    double best = -std::numeric_limits<double>::infinity();
    Vec y0;
    for (std::size_t f = 0; f < total; ++f) {
        Vec y = node(f, idx);
        double v = psi.value(y);
        if (v > best) {
            best = v;
            y0 = y;
            best_idx = idx;
        }
    }

    MaxPrincipleReport r;
    for (std::size_t c : best_idx) {
        if (c == 0 || c + 1 == m) {
            r.argmax = y0;
            r.psi_max = best;
            return r;
        }
    }

    // Newton refinement towards the critical point while psi keeps increasing.
    for (int it = 0; it < 30; ++it) {
        Jet j = psi.jet(y0);
        if (j.grad.norm() < 1e-15) break;
        Eigen::LDLT<Mat> ldlt(-j.hess);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
        Vec step = ldlt.solve(j.grad);
        Vec y1 = y0 + step;
        if (((y1 - y0).array().abs() > h.array()).any()) break;
        if (psi.value(y1) < j.value) break;
        y0 = y1;
    }

    Jet j = psi.jet(y0);
    GeneratorValue g = op.apply(psi, t, y0);
    r.argmax = y0;
    r.psi_max = j.value;
    r.jump_part = g.jump;
    r.second_order = g.diffusion;
    r.gradient_norm = j.grad.norm();
    r.tolerance =
        1e-8 + (op.intensity_bound() + op.drift_norm(t, y0)) * r.gradient_norm * h.maxCoeff();
    r.verdict = (g.jump <= r.tolerance && g.diffusion <= r.tolerance) ? Verdict::pass
                                                                      : Verdict::fail;
    return r;
}

OperatorBound operator_bound_probe(const GeneratorOperator& op, const TestFunction& psi,
                                   const std::vector<IncrementProbe>& probes) {
    OperatorBound b;
    const double m = psi.support_radius();
    for (const auto& p : probes) {
        GeneratorValue g = op.apply(psi, p.t, p.x);
        double v = std::abs(g.local()) + std::abs(g.jump);
        b.sup = std::max(b.sup, v);
        if (p.x.norm() <= 2 * m) {
            b.near_max = std::max(b.near_max, v);
        } else {
            b.far_max = std::max(b.far_max, v);
        }
    }
    return b;
}

//---------------------------------------------------------------------------//
// Regularized coefficient probes
//---------------------------------------------------------------------------//

MollifiedGrowth growth_probe(const MollifiedView& view, const CoefficientSet& coeffs,
                             const JumpKernel& kernel, double t, const std::vector<Vec>& ys) {
    MollifiedGrowth g;
    const int d = coeffs.dim;
    for (const auto& y : ys) {
        Tilt tilt = view.tilt(y);
        Vec b = Vec::Zero(d);
        Mat a = Mat::Zero(d, d);
        double jump = 0;
        for (std::size_t k = 0; k < tilt.index.size(); ++k) {
            const Vec& x = view.base().point(tilt.index[k]);
            GeneratorCoeffs c = eval_generator_coeffs(coeffs, t, x);
            b += tilt.prob[k] * c.drift;
            a += tilt.prob[k] * c.a;
            jump += tilt.prob[k] * mean_jump_magnitude(kernel, t, x);
        }
        double ratio = (b.norm() + std::sqrt(a.norm()) + jump) / (1.0 + y.norm());
        if (ratio > g.max_ratio) {
            g.max_ratio = ratio;
            g.worst = y;
        }
    }
    return g;
}

LipschitzReport lipschitz_probe(const MollifiedView& view, const CoefficientSet& coeffs, double t,
                                double radius, double scale, std::size_t pairs,
                                std::uint64_t seed) {
    LipschitzReport r;
    r.scale = scale;
    r.pairs = pairs;
    const int d = coeffs.dim;
    Philox4x32 rng(seed, 0, static_cast<std::uint32_t>(StreamTag::probe));
    std::normal_distribution<double> normal;
    auto unit = [&] {
        Vec v(d);
        do {
            for (int c = 0; c < d; ++c) v(c) = normal(rng);
        } while (v.norm() == 0.0);
        return Vec(v / v.norm());
    };
    for (std::size_t p = 0; p < pairs; ++p) {
        Vec y1 = unit() * radius * std::pow(uniform01(rng), 1.0 / d);
        Vec y2 = y1 + scale * unit();
        double dist = (y2 - y1).norm();
        Vec b1 = mollified_drift(view, coeffs, t, y1), b2 = mollified_drift(view, coeffs, t, y2);
        Mat a1 = mollified_diffusion(view, coeffs, t, y1).a;
        Mat a2 = mollified_diffusion(view, coeffs, t, y2).a;
        r.max_quotient = std::max(r.max_quotient, (b1 - b2).norm() / dist);
        r.max_quotient_a = std::max(r.max_quotient_a, (a1 - a2).norm() / dist);
    }
    return r;
}

}  // namespace jumpflow
