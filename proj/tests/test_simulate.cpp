#include "jumpflow/oracle.hpp"
#include "jumpflow/simulate.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

using namespace jumpflow;

namespace {

CoefficientSet zero_coeffs(int dim = 1) {
    CoefficientSet c;
    c.dim = dim;
    c.drift = [](double, const Vec& x) { return Vec(Vec::Zero(x.size())); };
    c.diffusion = [dim](double, const Vec&) { return Mat(Mat::Zero(dim, dim)); };
    return c;
}

JumpKernel unit_jumps(double rate) {
    return JumpKernel({{1.0, scalar_vec(1.0)}}, [](double, const Vec& w, const Vec&) { return w; },
                      [rate](double, const Vec&, const Vec&) { return rate; }, rate);
}

SimulationOptions opts(std::size_t n, std::uint64_t seed, std::size_t substeps = 1) {
    SimulationOptions o;
    o.n_paths = n;
    o.seed = seed;
    o.substeps = substeps;
    o.threads = 1;
    return o;
}

}  // namespace

TEST_CASE("no dynamics keeps every path at its initial state") {
    ProbCloud init({scalar_vec(-1), scalar_vec(2)}, {0.3, 0.7});
    auto ens = simulate_base_paths(zero_coeffs(), JumpKernel(), init, TimeGrid::uniform(1, 10),
                                   opts(500, 3));
    for (std::size_t n = 0; n < ens.size(); ++n) {
        for (std::size_t k = 1; k < ens.grid().size(); ++k) {
            REQUIRE(ens.coord(n, k, 0) == ens.coord(n, 0, 0));
        }
    }
    auto m0 = marginal_at(ens, 0.0), m1 = marginal_at(ens, 1.0);
    CHECK(wasserstein1_1d(m0, m1) == 0.0);
}

TEST_CASE("compound Poisson counts pass a chi-square test") {
    const std::size_t n = 100000;
    auto ens = simulate_base_paths(zero_coeffs(), unit_jumps(1.0), ProbCloud::dirac(scalar_vec(0)),
                                   TimeGrid::uniform(1, 10), opts(n, 7));
    std::vector<double> counts(7, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double x = ens.coord(i, 10, 0);
        REQUIRE(x == std::round(x));
        counts[std::min<std::size_t>(6, static_cast<std::size_t>(x))] += 1;
    }
    auto pmf = poisson_pmf(1.0);
    double p0 = std::exp(-1.0);
    CHECK(std::abs(counts[0] / n - p0) <= 3 * std::sqrt(p0 * (1 - p0) / n));
    double chi2 = 0, tail = 1;
    for (std::size_t k = 0; k < 6; ++k) {
        double e = pmf[k] * n;
        chi2 += (counts[k] - e) * (counts[k] - e) / e;
        tail -= pmf[k];
    }
    chi2 += (counts[6] - tail * n) * (counts[6] - tail * n) / (tail * n);
    CHECK(chi2 < 22.458);  // 0.999 quantile of chi-square with 6 degrees of freedom
}

TEST_CASE("pure drift follows the ODE") {
    Scenario sc = scenario("pure-drift");
    auto ens = simulate_base_paths(sc.coeffs, sc.kernel, sc.initial, TimeGrid::uniform(1, 1000),
                                   opts(4, 1));
    CHECK(std::abs(ens.coord(0, 1000, 0) - 2 * std::exp(-1.0)) < 5e-3);
    CHECK(sup_norm_moment(ens) == doctest::Approx(2.0));
}

TEST_CASE("state-dependent thinning reproduces the two-sided lattice law") {
    Scenario sc = scenario("two-sided-jumps");
    const std::size_t n = 100000;
    auto ens = simulate_base_paths(sc.coeffs, sc.kernel, sc.initial, TimeGrid::uniform(1, 4),
                                   opts(n, 11));
    ProbCloud exact = sc.exact_marginal(1.0);
    std::map<int, double> freq;
    for (std::size_t i = 0; i < n; ++i) freq[static_cast<int>(ens.coord(i, 4, 0))] += 1.0 / n;
    double chi2 = 0;
    int cells = 0;
    double rest_obs = 1, rest_exp = 1;
    for (std::size_t j = 0; j < exact.size(); ++j) {
        double p = exact.weight(j);
        if (p * n < 20) continue;
        int x = static_cast<int>(exact.point(j)(0));
        double o = freq[x];
        chi2 += n * (o - p) * (o - p) / p;
        rest_obs -= o;
        rest_exp -= p;
        ++cells;
    }
    chi2 += n * (rest_obs - rest_exp) * (rest_obs - rest_exp) / std::max(rest_exp, 1e-12);
    // cells + 1 bins, cells degrees of freedom; generous bound at the 0.999 level
    CHECK(cells >= 3);
    CHECK(chi2 < 10.83 + 3.5 * cells);
}

TEST_CASE("path values do not depend on N or the worker count") {
    Scenario sc = scenario("ou-jump");
    TimeGrid g = TimeGrid::uniform(1, 20);
    auto small = simulate_base_paths(sc.coeffs, sc.kernel, sc.initial, g, opts(50, 5));
    auto o = opts(400, 5);
    o.threads = 4;
    auto big = simulate_base_paths(sc.coeffs, sc.kernel, sc.initial, g, o);
    for (std::size_t n = 0; n < 50; ++n) {
        for (std::size_t k = 0; k < g.size(); ++k) {
            REQUIRE(small.coord(n, k, 0) == big.coord(n, k, 0));
        }
    }
}

TEST_CASE("different paths are uncorrelated") {
    Scenario sc = scenario("ou-jump");
    const std::size_t n = 20000;
    auto ens = simulate_base_paths(sc.coeffs, sc.kernel, sc.initial, TimeGrid::uniform(1, 10),
                                   opts(n, 21));
    // correlation between neighbouring paths' terminal values
    double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    const std::size_t m = n / 2;
    for (std::size_t i = 0; i < m; ++i) {
        double a = ens.coord(2 * i, 10, 0), b = ens.coord(2 * i + 1, 10, 0);
        sa += a;
        sb += b;
        sab += a * b;
        saa += a * a;
        sbb += b * b;
    }
    double cov = sab / m - sa / m * sb / m;
    double corr = cov / std::sqrt((saa / m - sa * sa / m / m) * (sbb / m - sb * sb / m / m));
    CHECK(std::abs(corr) < 4.0 / std::sqrt(double(m)));
    CHECK(std::abs(sa / m - sc.exact_mean(1.0)) < 0.05);
}

TEST_CASE("a candidate on a recording time is applied before recording") {
    // Every logged jump at t <= t_k must show up in the state recorded at t_k.
    auto o = opts(200, 4);
    o.record_jumps = true;
    auto ens = simulate_base_paths(zero_coeffs(), unit_jumps(3.0), ProbCloud::dirac(scalar_vec(0)),
                                   TimeGrid::uniform(1, 8), o);
    for (std::size_t n = 0; n < ens.size(); ++n) {
        for (std::size_t k = 0; k < ens.grid().size(); ++k) {
            int count = 0;
            for (const auto& j : ens.jump_log()[n]) count += j.t <= ens.grid()[k];
            REQUIRE(ens.coord(n, k, 0) == count);
        }
    }
}

TEST_CASE("divergence handling") {
    CoefficientSet c = zero_coeffs();
    c.drift = [](double, const Vec& x) { return Vec(x.array().cube().matrix() * 50.0); };
    ProbCloud init({scalar_vec(0), scalar_vec(3)}, {0.5, 0.5});
    CHECK_THROWS_AS(simulate_base_paths(c, JumpKernel(), init, TimeGrid::uniform(1, 100), opts(50, 1)),
                    DivergenceError);
    auto o = opts(50, 1);
    o.exclude_diverged = true;
    auto ens = simulate_base_paths(c, JumpKernel(), init, TimeGrid::uniform(1, 100), o);
    CHECK(ens.size() + ens.diverged().size() == 50);
    CHECK(!ens.diverged().empty());
    for (std::size_t n = 0; n < ens.size(); ++n) CHECK(ens.coord(n, 100, 0) == 0.0);
}

TEST_CASE("marginals") {
    auto ens = simulate_base_paths(zero_coeffs(), unit_jumps(1.0), ProbCloud::dirac(scalar_vec(0.5)),
                                   TimeGrid::uniform(1, 4), opts(1, 9));
    auto m = marginal_at(ens, 0.0);
    CHECK(m.size() == 1);
    CHECK(m.point(0)(0) == 0.5);
    auto flow = ensemble_flow(ens);
    CHECK(flow.paired());
    CHECK(flow.grid().size() == 5);

    auto constant = simulate_base_paths(zero_coeffs(), JumpKernel(), ProbCloud::dirac(scalar_vec(-1.5)),
                                        TimeGrid::uniform(1, 4), opts(10, 9));
    CHECK(sup_norm_moment(constant) == 1.5);
}

TEST_CASE("regularized dynamics with a single-particle flow") {
    const double x0 = 0.7, eps = 0.1;
    TimeGrid g = TimeGrid::uniform(1, 20);
    std::vector<ProbCloud> clouds(g.size(), ProbCloud::dirac(scalar_vec(x0)));
    MarginalFlow flow(g, clouds);
    const std::size_t n = 100000;
    auto ens = simulate_regularized_paths(zero_coeffs(), unit_jumps(1.0), flow, eps, g, opts(n, 2));
    // direct draws of x0 + sqrt(eps) Z + Poisson(1)
    Philox4x32 rng(99, 0, 7);
    std::normal_distribution<double> z;
    auto pmf = poisson_pmf(1.0);
    std::vector<Vec> pts;
    for (std::size_t i = 0; i < n; ++i) {
        double u = uniform01(rng), c = 0;
        std::size_t k = 0;
        while (k + 1 < pmf.size() && u > (c += pmf[k])) ++k;
        pts.push_back(scalar_vec(x0 + std::sqrt(eps) * z(rng) + static_cast<double>(k)));
    }
    double w = wasserstein1_1d(marginal_at(ens, 1.0), ProbCloud::uniform(pts));
    CHECK(w < 0.02);
}

TEST_CASE("regularized marginal tracks the smoothed flow without jumps") {
    Scenario sc = scenario("pure-drift");
    TimeGrid g = TimeGrid::uniform(1, 100);
    MarginalFlow flow = reference_flow(sc, g);
    const double eps = 0.1;
    auto ens = simulate_regularized_paths(sc.coeffs, sc.kernel, flow, eps, g, opts(50000, 3));
    MollifiedView v(flow.cloud(100), eps);
    double w = wasserstein1_to_cdf(marginal_at(ens, 1.0), [&](double x) { return v.cdf(x); }, -3, 4);
    CHECK(w < 0.02);
}

TEST_CASE("regularized marginal approaches the base one as epsilon shrinks") {
    Scenario sc = scenario("compound-poisson");
    TimeGrid g = TimeGrid::uniform(1, 50);
    MarginalFlow flow = reference_flow(sc, g);
    auto base = simulate_base_paths(sc.coeffs, sc.kernel, sc.initial, g, opts(20000, 5));
    double prev = INFINITY;
    for (double eps : {0.5, 0.1, 0.02}) {
        auto reg = simulate_regularized_paths(sc.coeffs, sc.kernel, flow, eps, g, opts(20000, 6));
        double w = wasserstein1_1d(marginal_at(reg, 1.0), marginal_at(base, 1.0));
        CHECK(w < prev);
        prev = w;
    }
}

TEST_CASE("regularized simulation needs recording times on the flow grid") {
    TimeGrid g = TimeGrid::uniform(1, 10);
    std::vector<ProbCloud> clouds(g.size(), ProbCloud::dirac(scalar_vec(0)));
    MarginalFlow flow(g, clouds);
    CHECK_THROWS_AS(simulate_regularized_paths(zero_coeffs(), JumpKernel(), flow, 0.1,
                                               TimeGrid::uniform(1, 3), opts(10, 1)),
                    ConfigError);
    CHECK_THROWS_AS(simulate_regularized_paths(zero_coeffs(), JumpKernel(), flow, 0.0, g, opts(10, 1)),
                    ConfigError);
}

TEST_CASE("aldous modulus") {
    TimeGrid g = TimeGrid::uniform(1, 1000);
    auto constant = simulate_base_paths(zero_coeffs(), JumpKernel(), ProbCloud::dirac(scalar_vec(1)),
                                        g, opts(100, 1));
    auto t0 = aldous_modulus(constant, {0.001, 0.01, 0.25}, {0.0, 0.5});
    CHECK(t0.constant == 0.0);
    for (const auto& e : t0.entries) CHECK(e.mean_increment == 0.0);

    CoefficientSet bm = zero_coeffs();
    bm.diffusion = [](double, const Vec&) { return Mat(Mat::Identity(1, 1)); };
    auto ens = simulate_base_paths(bm, JumpKernel(), ProbCloud::dirac(scalar_vec(0)), g,
                                   opts(20000, 8));
    const std::vector<double> betas{0.001, 0.005, 0.01, 0.05, 0.1, 0.25};
    auto t = aldous_modulus(ens, betas, {0.0, 0.125, 0.25, 0.5});
    CHECK(t.entries.size() == betas.size() * 4);
    for (const auto& e : t.entries) {
        double expect = std::sqrt(2 * e.beta / M_PI);
        CHECK(std::abs(e.mean_increment - expect) <= 4 * e.se + 1e-12);
        // sqrt(2/pi) = 0.7979, so the half-normal mean sits below 0.8 (beta + sqrt(beta))
        CHECK(e.mean_increment <= 0.8 * (e.beta + std::sqrt(e.beta)) + 4 * e.se);
    }
    for (double anchor : {0.0, 0.125, 0.25, 0.5}) {
        double prev = 0, prev_se = 0;
        for (const auto& e : t.entries) {
            if (e.anchor != anchor) continue;
            CHECK(e.mean_increment >= prev - 3 * std::hypot(e.se, prev_se));
            prev = e.mean_increment;
            prev_se = e.se;
        }
    }
    CHECK_THROWS_AS(aldous_modulus(ens, {0.6}, {0.5}), ConfigError);
}
