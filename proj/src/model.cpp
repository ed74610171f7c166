#include "jumpflow/model.hpp"

#include "jumpflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace jumpflow {

void CoefficientSet::validate() const {
    if (dim < 1 || dim > kMaxDim) {
        throw ConfigError("dimension must be in [1, " + std::to_string(kMaxDim) + "]");
    }
    if (!(horizon > 0) || !std::isfinite(horizon)) throw ConfigError("horizon must be > 0");
    if (!drift || !diffusion) throw ConfigError("drift and diffusion must both be set");
}

GeneratorCoeffs eval_generator_coeffs(const CoefficientSet& coeffs, double t, const Vec& x) {
    if (!(t >= 0.0 && t <= coeffs.horizon)) {
        throw std::domain_error("time " + std::to_string(t) + " outside [0, T]");
    }
    Mat sigma = coeffs.diffusion(t, x);
    Mat a = sigma * sigma.transpose();
    return {coeffs.drift(t, x), a};
}

JumpKernel::JumpKernel(std::vector<Mark> marks, JumpMapFn jump_map, RateFn rate,
                       double rate_majorant)
    : marks_(std::move(marks)),
      rate_majorant_(rate_majorant),
      jump_map_(std::move(jump_map)),
      rate_(std::move(rate)) {
    if (!(rate_majorant_ >= 0) || !std::isfinite(rate_majorant_)) {
        throw ConfigError("rate majorant must be finite and >= 0");
    }
    if (!marks_.empty() && (!jump_map_ || !rate_)) {
        throw ConfigError("jump kernel with marks needs a jump map and a rate");
    }
    cumulative_.reserve(marks_.size());
    for (const auto& m : marks_) {
        if (!(m.weight > 0) || !std::isfinite(m.weight)) {
            throw ConfigError("mark weights must be finite and > 0");
        }
        total_mass_ += m.weight;
        cumulative_.push_back(total_mass_);
    }
}

JumpKernel JumpKernel::continuous(double total_mass, MarkSampler sampler,
                                  std::vector<Mark> quadrature, JumpMapFn jump_map, RateFn rate,
                                  double rate_majorant) {
    if (!(total_mass > 0) || !std::isfinite(total_mass)) {
        throw ConfigError("continuous mark measure needs finite positive mass");
    }
    if (!sampler) throw ConfigError("continuous mark measure needs a sampler");
    JumpKernel k(std::move(quadrature), std::move(jump_map), std::move(rate), rate_majorant);
    if (std::abs(k.total_mass_ - total_mass) > 1e-9 * total_mass) {
        throw ConfigError("quadrature weights must sum to the mark measure's total mass");
    }
    k.total_mass_ = total_mass;
    k.sampler_ = std::move(sampler);
    return k;
}

Vec JumpKernel::draw_mark(Philox4x32& rng) const {
    if (sampler_) return sampler_(rng);
    double u = uniform01(rng) * total_mass_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                          marks_.size() - 1);
    return marks_[j].label;
}

double jump_intensity(const JumpKernel& kernel, double t, const Vec& x) {
    double total = 0;
    for (const auto& m : kernel.marks()) total += m.weight * kernel.rate(t, m.label, x);
    return total;
}

double mean_jump_magnitude(const JumpKernel& kernel, double t, const Vec& x) {
    double total = 0;
    for (const auto& m : kernel.marks()) {
        double k = kernel.rate(t, m.label, x);
        if (k == 0.0) continue;
        total += m.weight * kernel.jump(t, m.label, x).norm() * k;
    }
    return total;
}

bool is_symmetric_psd(const Mat& a) {
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12) return false;
    Eigen::SelfAdjointEigenSolver<Mat> solver(a, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) return false;
    return solver.eigenvalues().minCoeff() >= -1e-10 * (1.0 + a.norm());
}

std::vector<GrowthProbe> growth_probe_points(int dim, const ProbeSpec& spec) {
    std::vector<GrowthProbe> probes;
    probes.reserve(spec.radii.size() * spec.samples_per_radius * spec.times.size());
    for (std::size_t r = 0; r < spec.radii.size(); ++r) {
        Philox4x32 rng(spec.seed, static_cast<std::uint32_t>(r),
                       static_cast<std::uint32_t>(StreamTag::probe));
        std::normal_distribution<double> normal;
        for (std::size_t s = 0; s < spec.samples_per_radius; ++s) {
            Vec dir(dim);
            double n2 = 0;
            do {
                for (int i = 0; i < dim; ++i) dir(i) = normal(rng);
                n2 = dir.squaredNorm();
            } while (n2 == 0.0);
            double scale = spec.radii[r] * std::pow(uniform01(rng), 1.0 / dim);
            Vec x = dir / std::sqrt(n2) * scale;
            for (double t : spec.times) probes.push_back({t, x});
        }
    }
    return probes;
}

GrowthReport audit_linear_growth(const CoefficientSet& coeffs, const JumpKernel& kernel,
                                 const ProbeSpec& spec) {
    coeffs.validate();
    if (spec.times.empty() || spec.radii.empty() || spec.samples_per_radius == 0) {
        throw ConfigError("probe spec must have times, radii and samples");
    }
    const auto probes = growth_probe_points(coeffs.dim, spec);
    const double lambda_cap = kernel.total_mass() * kernel.rate_majorant();

    struct Eval {
        double total, sigma, drift, jump;
        bool finite, psd, majorant_ok;
    };
    std::vector<Eval> evals(probes.size());
    parallel_for(probes.size(), spec.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto& p = probes[i];
            Mat sigma = coeffs.diffusion(p.t, p.x);
            Vec b = coeffs.drift(p.t, p.x);
            double jump = mean_jump_magnitude(kernel, p.t, p.x);
            double lambda = jump_intensity(kernel, p.t, p.x);
            double denom = 1.0 + p.x.norm();
            Eval e{};
            e.sigma = sigma.norm() / denom;
            e.drift = b.norm() / denom;
            e.jump = jump / denom;
            e.total = e.sigma + e.drift + e.jump;
            e.finite = std::isfinite(e.total) && sigma.allFinite() && b.allFinite();
            e.psd = e.finite && is_symmetric_psd(sigma * sigma.transpose());
            e.majorant_ok = lambda <= lambda_cap * (1 + 1e-12) + 1e-300;
            evals[i] = e;
        }
    });

    GrowthReport report;
    report.probe_count = probes.size();
    report.worst_point = probes.front();
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto& e = evals[i];
        if (!e.finite) {
            report.non_finite.push_back(probes[i]);
            continue;
        }
        if (!e.psd) ++report.psd_violations;
        if (!e.majorant_ok) ++report.majorant_violations;
        if (e.total > report.constant_estimate) {
            report.constant_estimate = e.total;
            report.worst_point = probes[i];
        }
        report.components.diffusion = std::max(report.components.diffusion, e.sigma);
        report.components.drift = std::max(report.components.drift, e.drift);
        report.components.jump = std::max(report.components.jump, e.jump);
    }
    return report;
}

}  // namespace jumpflow
