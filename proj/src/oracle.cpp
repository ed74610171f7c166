#include "jumpflow/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

namespace jumpflow {

//---------------------------------------------------------------------------//
// Exact references
//---------------------------------------------------------------------------//

std::vector<double> poisson_pmf(double mean, double tail_tol) {
    if (!(mean >= 0)) throw ConfigError("Poisson mean must be >= 0");
    std::vector<double> p{std::exp(-mean)};
    double cum = p[0];
    while (1.0 - cum >= tail_tol && p.size() < 10000) {
        double next = p.back() * mean / static_cast<double>(p.size());
        p.push_back(next);
        cum += next;
    }
    return p;
}

namespace {

ProbCloud lattice_cloud(const std::vector<double>& mass, int offset) {
    std::vector<Vec> pts;
    for (std::size_t k = 0; k < mass.size(); ++k) {
        pts.push_back(scalar_vec(static_cast<double>(static_cast<int>(k) + offset)));
    }
    return ProbCloud::from_masses(std::move(pts), mass, Provenance::exact, 1e-300);
}

// Master equation on the integers in [-R, R] for marks +-1 with rate
// 1/(1+x^2); RK4 in time with step <= 1e-3.
std::vector<double> two_sided_lattice(double t) {
    const int R = 30;
    const std::size_t n = 2 * R + 1;
    std::vector<double> rate(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = static_cast<double>(static_cast<int>(i) - R);
        rate[i] = 1.0 / (1.0 + x * x);
    }
    std::vector<double> p(n, 0.0);
    p[R] = 1.0;
    if (t <= 0) return p;

    auto rhs = [&](const std::vector<double>& q, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i) {
            double in = 0;
            if (i > 0) in += rate[i - 1] * q[i - 1];
            if (i + 1 < n) in += rate[i + 1] * q[i + 1];
            out[i] = in - 2.0 * rate[i] * q[i];
        }
    };
    std::size_t steps = static_cast<std::size_t>(std::ceil(t / 1e-3));
    double h = t / static_cast<double>(steps);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    for (std::size_t s = 0; s < steps; ++s) {
        rhs(p, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = p[i] + 0.5 * h * k1[i];
        rhs(tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = p[i] + 0.5 * h * k2[i];
        rhs(tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = p[i] + h * k3[i];
        rhs(tmp, k4);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        }
    }
    for (double& v : p) v = std::max(v, 0.0);
    return p;
}

Mat zero_sigma(double, const Vec&) { return Mat::Zero(1, 1); }
Mat unit_sigma(double, const Vec&) { return Mat::Identity(1, 1); }

CoefficientSet one_d(DriftFn drift, DiffusionFn diffusion) {
    CoefficientSet c;
    c.dim = 1;
    c.horizon = 1.0;
    c.drift = std::move(drift);
    c.diffusion = std::move(diffusion);
    return c;
}

JumpKernel unit_jumps(double rate) {
    return JumpKernel({{1.0, scalar_vec(1.0)}},
                      [](double, const Vec& w, const Vec&) { return w; },
                      [rate](double, const Vec&, const Vec&) { return rate; }, rate);
}

Scenario make_pure_drift() {
    Scenario s;
    s.name = "pure-drift";
    s.notes = "b = -x, no noise, no jumps, X0 = 2; law delta at 2 exp(-t)";
    s.coeffs = one_d([](double, const Vec& x) { return Vec(-x); }, zero_sigma);
    s.initial = ProbCloud::dirac(scalar_vec(2.0));
    s.exact_marginal = [](double t) { return ProbCloud::dirac(scalar_vec(2.0 * std::exp(-t))); };
    s.exact_mean = [](double t) { return 2.0 * std::exp(-t); };
    s.bias_constant = 14.0;
    s.roi_center = 1.6;
    s.roi_half_width = 0.8;
    s.grid = {6.0, 1200};
    return s;
}

Scenario make_compound_poisson() {
    Scenario s;
    s.name = "compound-poisson";
    s.notes = "b = sigma = 0, unit jumps at rate 1, X0 = 0; law Poisson(t)";
    s.coeffs = one_d([](double, const Vec&) { return Vec(Vec::Zero(1)); }, zero_sigma);
    s.kernel = unit_jumps(1.0);
    s.exact_marginal = [](double t) {
        return lattice_cloud(poisson_pmf(t), 0);
    };
    s.exact_mean = [](double t) { return t; };
    s.bias_constant = 2.0;
    s.roi_center = 2.5;
    s.roi_half_width = 4.0;
    s.grid = {30.0, 3000};
    return s;
}

Scenario make_ou_jump() {
    Scenario s;
    s.name = "ou-jump";
    s.notes = "b = -x, sigma = 1, unit jumps at rate 1, X0 = 0; E X_t = 1 - exp(-t)";
    s.coeffs = one_d([](double, const Vec& x) { return Vec(-x); }, unit_sigma);
    s.kernel = unit_jumps(1.0);
    s.exact_mean = [](double t) { return 1.0 - std::exp(-t); };
    s.bias_constant = 5.0;
    s.roi_center = 0.5;
    s.roi_half_width = 2.5;
    s.grid = {15.0, 1500};
    return s;
}

Scenario make_rough_drift() {
    Scenario s;
    s.name = "rough-drift";
    s.notes = "b = sign(x) - x (discontinuous at 0), sigma = 1, no jumps, X0 = 0";
    s.coeffs = one_d(
        [](double, const Vec& x) {
            double sgn = (x(0) > 0) - (x(0) < 0);
            return scalar_vec(sgn - x(0));
        },
        unit_sigma);
    s.bias_constant = 1.5;
    s.roi_center = 0.0;
    s.roi_half_width = 2.5;
    s.grid = {30.0, 6000};
    return s;
}

Scenario make_two_sided_jumps() {
    Scenario s;
    s.name = "two-sided-jumps";
    s.notes = "b = sigma = 0, jumps +-1 (nu = 1 each) at rate 1/(1+x^2), X0 = 0";
    s.coeffs = one_d([](double, const Vec&) { return Vec(Vec::Zero(1)); }, zero_sigma);
    s.kernel = JumpKernel({{1.0, scalar_vec(1.0)}, {1.0, scalar_vec(-1.0)}},
                          [](double, const Vec& w, const Vec&) { return w; },
                          [](double, const Vec&, const Vec& x) {
                              return 1.0 / (1.0 + x.squaredNorm());
                          },
                          1.0);
    s.exact_marginal = [](double t) { return lattice_cloud(two_sided_lattice(t), -30); };
    s.exact_mean = [](double) { return 0.0; };
    s.bias_constant = 1.5;
    s.roi_center = 0.0;
    s.roi_half_width = 3.0;
    s.grid = {30.0, 3000};
    return s;
}

}  // namespace

std::vector<std::string> scenario_names() {
    return {"pure-drift", "compound-poisson", "ou-jump", "rough-drift", "two-sided-jumps"};
}

Scenario scenario(const std::string& name) {
    if (name == "pure-drift") return make_pure_drift();
    if (name == "compound-poisson") return make_compound_poisson();
    if (name == "ou-jump") return make_ou_jump();
    if (name == "rough-drift") return make_rough_drift();
    if (name == "two-sided-jumps") return make_two_sided_jumps();
    std::ostringstream msg;
    msg << "unknown scenario '" << name << "'; registered:";
    for (const auto& n : scenario_names()) msg << ' ' << n;
    throw ConfigError(msg.str());
}

MarginalFlow reference_flow(const Scenario& sc, const TimeGrid& grid) {
    std::vector<ProbCloud> clouds;
    clouds.reserve(grid.size());
    if (sc.exact_marginal) {
        for (double t : grid.times()) clouds.push_back(sc.exact_marginal(t));
    } else {
        auto sol = fp_grid_solve(sc, sc.grid, grid.times());
        for (const auto& g : sol) clouds.push_back(grid_to_cloud(g, 1e-13));
    }
    return MarginalFlow(grid, std::move(clouds));
}

//---------------------------------------------------------------------------//
// Finite-volume solver
//---------------------------------------------------------------------------//

double GridDensity::interior_mass() const {
    std::vector<double> m(density.size());
    for (std::size_t i = 0; i < density.size(); ++i) m[i] = density[i] * domain.dx();
    return stable_sum(m);
}

StabilityError::StabilityError(double dt, double suggested)
    : std::runtime_error("time step " + std::to_string(dt) +
                         " violates the stability bound; use dt <= " + std::to_string(suggested)),
      suggested_(suggested) {}

namespace {

// Coefficient arrays for one time level.
struct Level {
    std::vector<double> b_face;  // b at interfaces between cell i and i+1
    std::vector<double> a;       // a at cell centres
    std::vector<double> lambda;  // total departure rate per cell
    // per (cell, mark): rate and landing position
    std::vector<double> jump_rate, landing;
};

Level build_level(const CoefficientSet& coeffs, const JumpKernel& kernel, const GridDomain& dom,
                  double t) {
    const std::size_t m = dom.cells, nm = kernel.marks().size();
    const double dx = dom.dx();
    Level lv;
    lv.b_face.resize(m > 0 ? m - 1 : 0);
    lv.a.resize(m);
    lv.lambda.assign(m, 0.0);
    lv.jump_rate.assign(m * nm, 0.0);
    lv.landing.assign(m * nm, 0.0);
    for (std::size_t i = 0; i + 1 < m; ++i) {
        lv.b_face[i] = coeffs.drift(t, scalar_vec(-dom.half_width + dx * static_cast<double>(i + 1)))(0);
    }
    for (std::size_t i = 0; i < m; ++i) {
        Vec x = scalar_vec(dom.center(i));
        Mat s = coeffs.diffusion(t, x);
        lv.a[i] = (s * s.transpose())(0, 0);
        for (std::size_t j = 0; j < nm; ++j) {
            const auto& mk = kernel.marks()[j];
            double r = mk.weight * kernel.rate(t, mk.label, x);
            lv.jump_rate[i * nm + j] = r;
            lv.lambda[i] += r;
            lv.landing[i * nm + j] = r > 0 ? x(0) + kernel.jump(t, mk.label, x)(0) : x(0);
        }
    }
    return lv;
}

double level_limit(const Level& lv, double dx) {
    double lam = 0, a = 0, b = 0;
    for (double v : lv.lambda) lam = std::max(lam, v);
    for (double v : lv.a) a = std::max(a, v);
    for (double v : lv.b_face) b = std::max(b, std::abs(v));
    double rate = lam + 2.0 * a / (dx * dx) + b / dx;
    return rate > 0 ? 0.9 / rate : std::numeric_limits<double>::infinity();
}

void check_1d(const CoefficientSet& coeffs, const ProbCloud& initial, const GridDomain& dom) {
    coeffs.validate();
    if (coeffs.dim != 1 || initial.dim() != 1) {
        throw ConfigError("the grid solver is one-dimensional only");
    }
    if (!(dom.half_width > 0) || dom.cells < 2) throw ConfigError("grid domain is degenerate");
}

}  // namespace

double stable_dt(const CoefficientSet& coeffs, const JumpKernel& kernel, const GridDomain& domain,
                 double t_end) {
    double dt = std::numeric_limits<double>::infinity();
    for (double t : {0.0, 0.5 * t_end, t_end}) {
        dt = std::min(dt, level_limit(build_level(coeffs, kernel, domain, t), domain.dx()));
    }
    return dt;
}

std::vector<GridDensity> fp_grid_solve(const CoefficientSet& coeffs, const JumpKernel& kernel,
                                       const ProbCloud& initial, const GridSolveOptions& options) {
    const GridDomain& dom = options.domain;
    check_1d(coeffs, initial, dom);
    std::vector<double> outputs = options.output_times;
    if (outputs.empty()) throw ConfigError("grid solver needs output times");
    if (!std::is_sorted(outputs.begin(), outputs.end()) || outputs.front() < 0) {
        throw ConfigError("output times must be sorted and >= 0");
    }
    const std::size_t m = dom.cells, nm = kernel.marks().size();
    const double dx = dom.dx();
    const double t_end = outputs.back();

    double dt = options.dt;
    double limit = stable_dt(coeffs, kernel, dom, t_end);
    // The stability bound alone allows steps of order 1/Lambda for pure jump
    // problems, where the explicit time error would swamp the spatial one.
    if (dt <= 0) dt = std::min(limit, 0.5 * dx);
    if (dt > limit * (1 + 1e-12)) throw StabilityError(dt, limit);

    // Initial masses deposited linearly between bracketing cell centres.
    GridDensity cur;
    cur.domain = dom;
    std::vector<double> mass(m, 0.0);
    double leaked = 0, clipped = 0;
    auto deposit = [&](std::vector<double>& target, double z, double amount) {
        if (z < -dom.half_width || z > dom.half_width) {
            leaked += amount;
            return;
        }
        double s = (z - dom.center(0)) / dx;
        if (s <= 0) {
            target[0] += amount;
        } else if (s >= static_cast<double>(m - 1)) {
            target[m - 1] += amount;
        } else {
            std::size_t i0 = static_cast<std::size_t>(s);
            double frac = s - static_cast<double>(i0);
            target[i0] += amount * (1.0 - frac);
            target[i0 + 1] += amount * frac;
        }
    };
    for (std::size_t i = 0; i < initial.size(); ++i) {
        deposit(mass, initial.point(i)(0), initial.weight(i));
    }

    std::vector<GridDensity> result;
    auto emit = [&](double t) {
        GridDensity g;
        g.domain = dom;
        g.t = t;
        g.density.resize(m);
        for (std::size_t i = 0; i < m; ++i) g.density[i] = mass[i] / dx;
        g.leaked_mass = leaked;
        g.clipped_mass = clipped;
        result.push_back(std::move(g));
    };

    Level lv;
    bool have_level = false;
    std::vector<double> next(m);
    double t = 0;
    std::size_t out = 0;
    while (out < outputs.size() && outputs[out] <= 0.0) emit(outputs[out++]);
    while (out < outputs.size()) {
        double h = std::min(dt, outputs[out] - t);
        if (!have_level || !options.autonomous) {
            lv = build_level(coeffs, kernel, dom, t);
            have_level = true;
        }
        // flux through the interface between i and i+1 (mass per unit time)
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i + 1 < m; ++i) {
            double rho_l = mass[i] / dx, rho_r = mass[i + 1] / dx;
            double b = lv.b_face[i];
            double flux = (b > 0 ? b * rho_l : b * rho_r) -
                          (lv.a[i + 1] * rho_r - lv.a[i] * rho_l) / (2.0 * dx);
            next[i] -= h * flux;
            next[i + 1] += h * flux;
        }
        for (std::size_t i = 0; i < m; ++i) {
            if (lv.lambda[i] == 0.0 || mass[i] == 0.0) continue;
            next[i] -= h * lv.lambda[i] * mass[i];
            for (std::size_t j = 0; j < nm; ++j) {
                double r = lv.jump_rate[i * nm + j];
                if (r > 0) deposit(next, lv.landing[i * nm + j], h * r * mass[i]);
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            mass[i] += next[i];
            if (mass[i] < 0) {
                clipped -= mass[i];
                mass[i] = 0;
            }
        }
        t += h;
        if (std::abs(t - outputs[out]) <= 1e-12 * std::max(1.0, outputs[out])) {
            t = outputs[out];
            while (out < outputs.size() && outputs[out] <= t) emit(outputs[out++]);
        }
    }
    return result;
}

std::vector<GridDensity> fp_grid_solve(const Scenario& sc, const GridDomain& domain,
                                       const std::vector<double>& output_times, double dt) {
    GridSolveOptions opt;
    opt.domain = domain;
    opt.dt = dt;
    opt.output_times = output_times;
    opt.autonomous = sc.autonomous;
    return fp_grid_solve(sc.coeffs, sc.kernel, sc.initial, opt);
}

ProbCloud grid_to_cloud(const GridDensity& g, double min_mass) {
    if (g.leaked_mass >= 0.01) {
        std::cerr << "warning: grid density leaked " << g.leaked_mass << " of its mass\n";
    }
    std::vector<Vec> pts;
    std::vector<double> masses;
    const double dx = g.domain.dx();
    for (std::size_t i = 0; i < g.density.size(); ++i) {
        pts.push_back(scalar_vec(g.domain.center(i)));
        masses.push_back(g.density[i] * dx);
    }
    return ProbCloud::from_masses(std::move(pts), masses, Provenance::grid, min_mass);
}

}  // namespace jumpflow
