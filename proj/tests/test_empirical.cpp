#include "jumpflow/empirical.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace jumpflow;

namespace {

const double kPhi0 = 0.3989422804014327;  // (2 pi)^(-1/2)

ProbCloud two_points(double a, double b) {
    return ProbCloud({scalar_vec(a), scalar_vec(b)}, {0.5, 0.5});
}

CoefficientSet coeffs_1d(DriftFn b, DiffusionFn s) {
    CoefficientSet c;
    c.dim = 1;
    c.drift = std::move(b);
    c.diffusion = std::move(s);
    return c;
}

CoefficientSet identity_drift() {
    return coeffs_1d([](double, const Vec& x) { return Vec(x); },
                     [](double, const Vec& x) { return Mat(x.cwiseAbs().asDiagonal()); });
}

}  // namespace

TEST_CASE("cloud validation") {
    CHECK_THROWS_AS(ProbCloud({scalar_vec(0)}, {0.5}), ConfigError);
    CHECK_THROWS_AS(ProbCloud({scalar_vec(0), scalar_vec(1)}, {1.5, -0.5}), ConfigError);
    CHECK_THROWS_AS(ProbCloud({scalar_vec(NAN)}, {1.0}), ConfigError);
    CHECK_THROWS_AS(ProbCloud({scalar_vec(0), make_vec({0, 1})}, {0.5, 0.5}), ConfigError);
    auto c = ProbCloud::from_masses({scalar_vec(0), scalar_vec(1), scalar_vec(2)}, {2, 0, 6});
    CHECK(c.size() == 2);
    CHECK(c.weight(1) == doctest::Approx(0.75));
}

TEST_CASE("first moment") {
    CHECK(first_moment(ProbCloud::dirac(scalar_vec(0))) == 0.0);
    CHECK(first_moment(ProbCloud::dirac(scalar_vec(-3.5))) == 3.5);
    CHECK(first_moment(two_points(-2, 2)) == 2.0);
}

TEST_CASE("compensated sum") {
    std::vector<double> v{1e16, 1.0, -1e16, 1.0};
    CHECK(stable_sum(v) == 2.0);
}

TEST_CASE("gaussian kernel") {
    CHECK(gaussian_kernel(1.0, scalar_vec(0)) == doctest::Approx(kPhi0).epsilon(1e-12));
    CHECK(gaussian_kernel(0.5, make_vec({1, 0})) ==
          doctest::Approx(std::exp(-1.0) / M_PI).epsilon(1e-12));
    double prev = gaussian_kernel(0.3, scalar_vec(0));
    for (double r = 0.5; r < 50; r += 0.5) {
        double v = gaussian_kernel(0.3, scalar_vec(r));
        CHECK(v <= prev);
        prev = v;
    }
    CHECK(prev < 1e-300);
    CHECK_THROWS_AS(gaussian_kernel(0.0, scalar_vec(0)), std::domain_error);
}

TEST_CASE("mollified density") {
    ProbCloud d = ProbCloud::dirac(scalar_vec(0));
    CHECK(mollified_density(MollifiedView(d, 1.0), scalar_vec(0)) ==
          doctest::Approx(kPhi0).epsilon(1e-12));
    ProbCloud sym = two_points(-1, 1);
    CHECK(mollified_density(MollifiedView(sym, 0.7), scalar_vec(0)) ==
          doctest::Approx(gaussian_kernel(0.7, scalar_vec(1))).epsilon(1e-12));

    // integrates to one (trapezoid on a wide grid)
    ProbCloud c({scalar_vec(-1), scalar_vec(0.3), scalar_vec(2)}, {0.2, 0.5, 0.3});
    MollifiedView v(c, 0.25);
    double h = 1e-3, s = 0;
    for (double y = -8; y <= 10; y += h) s += v.density(scalar_vec(y)) * h;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("mollified cdf matches the density") {
    ProbCloud c({scalar_vec(-1), scalar_vec(0.3), scalar_vec(2)}, {0.2, 0.5, 0.3});
    MollifiedView v(c, 0.1);
    const double h = 1e-4;
    double s = 0;
    for (int i = 0; i < 65000; ++i) s += v.density(scalar_vec(-6 + (i + 0.5) * h)) * h;
    CHECK(v.cdf(0.5) == doctest::Approx(s).epsilon(1e-7));
    CHECK(v.cdf(-100) == 0.0);
    CHECK(v.cdf(100) == doctest::Approx(1.0));
}

TEST_CASE("mollified drift") {
    ProbCloud one = ProbCloud::dirac(scalar_vec(1.7));
    auto c = coeffs_1d([](double, const Vec& x) { return Vec(x * x(0)); },
                       [](double, const Vec&) { return Mat(Mat::Zero(1, 1)); });
    for (double y : {-40.0, 0.0, 3.0, 1e3}) {
        CHECK(mollified_drift(MollifiedView(one, 0.1), c, 0, scalar_vec(y))(0) ==
              doctest::Approx(1.7 * 1.7));
    }
    ProbCloud sym = two_points(-1, 1);
    CHECK(std::abs(mollified_drift(MollifiedView(sym, 1.0), identity_drift(), 0, scalar_vec(0))(0)) <
          1e-15);
    ProbCloud c01 = two_points(0, 1);
    CHECK(mollified_drift(MollifiedView(c01, 1.0), identity_drift(), 0, scalar_vec(1))(0) ==
          doctest::Approx(0.62246).epsilon(1e-5));
}

TEST_CASE("mollified diffusion") {
    ProbCloud c01 = two_points(0, 1);
    auto unit = coeffs_1d([](double, const Vec& x) { return Vec(x); },
                          [](double, const Vec&) { return Mat(Mat::Identity(1, 1)); });
    for (double y : {-3.0, 0.5, 7.0}) {
        auto md = mollified_diffusion(MollifiedView(c01, 0.2), unit, 0, scalar_vec(y));
        CHECK(md.a(0, 0) == doctest::Approx(1.0));
        CHECK(md.sigma(0, 0) == doctest::Approx(1.0));
    }
    // sigma(x) = |x| so a(x) = x^2
    auto md = mollified_diffusion(MollifiedView(c01, 1.0), identity_drift(), 0, scalar_vec(1));
    CHECK(md.a(0, 0) == doctest::Approx(0.62246).epsilon(1e-5));
    CHECK(md.sigma(0, 0) == doctest::Approx(0.78897).epsilon(1e-5));

    ProbCloud one = ProbCloud::dirac(scalar_vec(-2));
    auto single = mollified_diffusion(MollifiedView(one, 0.5), identity_drift(), 0, scalar_vec(9));
    CHECK(single.a(0, 0) == doctest::Approx(4.0));
}

TEST_CASE("symmetric square root") {
    Mat a(2, 2);
    a << 2, 1, 1, 2;
    Mat s = symmetric_sqrt(a);
    CHECK((s * s).isApprox(a, 1e-12));
    CHECK(s.isApprox(s.transpose()));
    Mat neg(1, 1);
    neg << -1.0;
    CHECK_THROWS_AS(symmetric_sqrt(neg), NumericError);
    Mat tiny(1, 1);
    tiny << -1e-14;
    CHECK(symmetric_sqrt(tiny)(0, 0) == 0.0);
}

TEST_CASE("tilt distribution") {
    ProbCloud one = ProbCloud::dirac(scalar_vec(5));
    auto p1 = MollifiedView(one, 0.1).tilt_distribution(scalar_vec(-50));
    CHECK(p1.size() == 1);
    CHECK(p1[0] == 1.0);

    auto p2 = MollifiedView(two_points(-1, 1), 0.3).tilt_distribution(scalar_vec(0));
    CHECK(p2[0] == doctest::Approx(0.5));
    CHECK(p2[1] == doctest::Approx(0.5));

    auto p3 = MollifiedView(two_points(0, 1), 1.0).tilt_distribution(scalar_vec(1));
    CHECK(p3[0] == doctest::Approx(0.37754).epsilon(1e-5));
    CHECK(p3[1] == doctest::Approx(0.62246).epsilon(1e-5));
}

TEST_CASE("tilt normalization holds across clouds, epsilons and queries") {
    Philox4x32 rng(17, 0, 7);
    for (int trial = 0; trial < 40; ++trial) {
        const int dim = 1 + trial % 2;
        const std::size_t n = 1 + static_cast<std::size_t>(uniform01(rng) * 300);
        std::vector<Vec> pts;
        std::vector<double> mass;
        for (std::size_t i = 0; i < n; ++i) {
            Vec x(dim);
            for (int c = 0; c < dim; ++c) x(c) = 10 * (uniform01(rng) - 0.5);
            pts.push_back(x);
            mass.push_back(std::exp(-20 * uniform01(rng)));
        }
        ProbCloud cloud = ProbCloud::from_masses(pts, mass);
        for (double eps : {0.5, 0.1, 0.02, 1e-4}) {
            MollifiedView v(cloud, eps);
            for (double y : {-30.0, -1.0, 0.0, 0.37, 4.0, 200.0}) {
                Vec q = Vec::Constant(dim, y);
                auto p = v.tilt_distribution(q);
                double s = std::accumulate(p.begin(), p.end(), 0.0);
                REQUIRE(std::abs(s - 1.0) <= 1e-10);
                Tilt t = v.tilt(q);
                double st = std::accumulate(t.prob.begin(), t.prob.end(), 0.0);
                REQUIRE(std::abs(st - 1.0) <= 1e-10);
            }
        }
    }
}

TEST_CASE("frozen mollifier agrees with direct evaluation") {
    std::vector<Vec> pts;
    std::vector<double> mass;
    for (int i = 0; i < 200; ++i) {
        pts.push_back(scalar_vec(-3 + 0.03 * i));
        mass.push_back(std::exp(-0.5 * (-3 + 0.03 * i) * (-3 + 0.03 * i)));
    }
    ProbCloud cloud = ProbCloud::from_masses(pts, mass);
    auto c = coeffs_1d([](double, const Vec& x) { return scalar_vec(std::sin(x(0)) - x(0)); },
                       [](double, const Vec& x) { return scalar_vec(1 + 0.5 * std::cos(x(0))).asDiagonal().toDenseMatrix().eval(); });
    for (double eps : {0.5, 0.02}) {
        MollifiedView view(cloud, eps);
        FrozenMollifier fm(view, c, 0.4);
        for (double y : {-5.0, -0.3, 0.0, 1.1, 8.0}) {
            Vec b1, b2;
            Mat a1, a2;
            Tilt scratch;
            fm.evaluate(scalar_vec(y), scratch, b1, a1);
            fm.evaluate(scalar_vec(y), b2, a2);
            Vec b = mollified_drift(view, c, 0.4, scalar_vec(y));
            Mat a = mollified_diffusion(view, c, 0.4, scalar_vec(y)).a;
            CHECK(b1(0) == doctest::Approx(b(0)).epsilon(1e-12));
            CHECK(b2(0) == doctest::Approx(b(0)).epsilon(1e-12));
            CHECK(a1(0, 0) == doctest::Approx(a(0, 0)).epsilon(1e-12));
            CHECK(a2(0, 0) == doctest::Approx(a(0, 0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("tilted sampling") {
    ProbCloud one = ProbCloud::dirac(scalar_vec(2.5));
    Philox4x32 rng(1, 0, 6);
    for (int i = 0; i < 10; ++i) {
        CHECK(sample_tilted(MollifiedView(one, 0.1), scalar_vec(-100), rng)(0) == 2.5);
    }

    ProbCloud c01 = two_points(0, 1);
    MollifiedView v(c01, 1.0);
    auto p = v.tilt_distribution(scalar_vec(1));
    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += sample_tilted_index(v, scalar_vec(1), rng) == 1;
    CHECK(std::abs(hits / double(n) - p[1]) <= 3 * std::sqrt(p[1] * (1 - p[1]) / n));

    // far query, equal distances: weights stay normalized
    ProbCloud far = two_points(-1, 1);
    MollifiedView vf(far, 1e-3);
    std::size_t idx = sample_tilted_index(vf, scalar_vec(0), rng);
    CHECK(idx < 2);
    auto pf = vf.tilt_distribution(scalar_vec(0));
    CHECK(pf[0] == doctest::Approx(0.5));
}

TEST_CASE("wasserstein-1 in one dimension") {
    ProbCloud a = two_points(0, 1);
    CHECK(wasserstein1_1d(a, a) == 0.0);
    CHECK(wasserstein1_1d(ProbCloud::dirac(scalar_vec(0)), ProbCloud::dirac(scalar_vec(1))) ==
          doctest::Approx(1.0));
    CHECK(wasserstein1_1d(a, ProbCloud::dirac(scalar_vec(0.5))) == doctest::Approx(0.5));
    CHECK_THROWS_AS(wasserstein1_1d(ProbCloud::dirac(make_vec({0, 0})),
                                    ProbCloud::dirac(make_vec({0, 1}))),
                    ConfigError);
    CHECK(wasserstein1_marginals(ProbCloud::dirac(make_vec({0, 0})),
                                 ProbCloud::dirac(make_vec({0.5, -2}))) == doctest::Approx(2.0));
}

TEST_CASE("wasserstein-1 against a cdf") {
    ProbCloud d = ProbCloud::dirac(scalar_vec(0.25));
    double w = wasserstein1_to_cdf(d, [](double x) { return x < 0 ? 0.0 : (x > 1 ? 1.0 : x); },
                                   0, 1, 1000);
    CHECK(w == doctest::Approx(0.3125).epsilon(1e-9));  // E|U - 0.25| for U uniform on [0,1]
    ProbCloud origin = ProbCloud::dirac(scalar_vec(0));
    ProbCloud u = sample_mollified(origin, 1.0, 200000, 3);
    MollifiedView v(origin, 1.0);
    double wn = wasserstein1_to_cdf(u, [&](double x) { return v.cdf(x); }, -8, 8);
    CHECK(wn < 0.01);
}

TEST_CASE("marginal flow") {
    TimeGrid g = TimeGrid::uniform(1.0, 2);
    std::vector<ProbCloud> cl{ProbCloud::dirac(scalar_vec(0)), ProbCloud::dirac(scalar_vec(1)),
                              ProbCloud::dirac(scalar_vec(-3))};
    MarginalFlow f(g, cl);
    CHECK(f.at(0.7).point(0)(0) == 1.0);
    CHECK(f.sup_first_moment() == 3.0);
    CHECK_THROWS_AS(MarginalFlow(g, {cl[0], cl[1]}), ConfigError);
}
