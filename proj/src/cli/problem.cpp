#include "cli/problem.hpp"

#include <cmath>
#include <set>

namespace jumpflow::cli {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, std::set<std::string> allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
        }
    }
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

void require_one_of(const std::string& value, const std::string& what,
                    std::initializer_list<const char*> options) {
    std::string listing;
    for (const char* o : options) {
        if (value == o) return;
        listing += std::string(listing.empty() ? "" : ", ") + o;
    }
    throw ConfigError("unknown " + what + " family '" + value + "' (expected " + listing + ")");
}

}  // namespace

ProblemSpec problem_from_json(const json& j) {
    check_keys(j, "problem",
               {"name", "dim", "drift", "diffusion", "jumps", "initial", "roi", "bias_constant",
                "grid"});
    ProblemSpec p;
    read(j, "name", p.name);
    read(j, "dim", p.dim);
    read(j, "bias_constant", p.bias_constant);
    if (j.contains("drift")) {
        const json& d = j["drift"];
        check_keys(d, "drift", {"family", "rate", "target", "gain"});
        read(d, "family", p.drift);
        read(d, "rate", p.drift_rate);
        read(d, "target", p.drift_target);
        read(d, "gain", p.drift_gain);
    }
    if (j.contains("diffusion")) {
        const json& d = j["diffusion"];
        check_keys(d, "diffusion", {"family", "sigma"});
        read(d, "family", p.diffusion);
        read(d, "sigma", p.sigma);
    }
    if (j.contains("jumps")) {
        const json& d = j["jumps"];
        check_keys(d, "jumps", {"family", "size", "rate", "damped"});
        read(d, "family", p.jumps);
        read(d, "size", p.jump_size);
        read(d, "rate", p.jump_rate);
        read(d, "damped", p.damped);
    }
    if (j.contains("initial")) {
        const json& d = j["initial"];
        check_keys(d, "initial", {"family", "x", "variance", "atoms"});
        read(d, "family", p.initial);
        if (d.contains("x") && d["x"].is_number()) {
            p.initial_point = {d["x"].get<double>()};
        } else {
            read(d, "x", p.initial_point);
        }
        read(d, "variance", p.initial_variance);
        read(d, "atoms", p.initial_atoms);
    }
    if (j.contains("roi")) {
        const json& d = j["roi"];
        check_keys(d, "roi", {"center", "half_width"});
        read(d, "center", p.roi_center);
        read(d, "half_width", p.roi_half_width);
    }
    if (j.contains("grid")) {
        const json& d = j["grid"];
        check_keys(d, "grid", {"half_width", "cells"});
        read(d, "half_width", p.grid_half_width);
        read(d, "cells", p.grid_cells);
    }

    require_one_of(p.drift, "drift", {"zero", "linear", "sign"});
    require_one_of(p.diffusion, "diffusion", {"zero", "constant"});
    require_one_of(p.jumps, "jumps", {"none", "unit", "two-sided"});
    require_one_of(p.initial, "initial", {"dirac", "normal"});
    if (p.dim < 1 || p.dim > kMaxDim) {
        throw ConfigError("problem dim must be in [1, " + std::to_string(kMaxDim) + "]");
    }
    if (p.initial_point.size() == 1 && p.dim > 1) {
        p.initial_point.assign(static_cast<std::size_t>(p.dim), p.initial_point[0]);
    }
    if (p.initial_point.size() != static_cast<std::size_t>(p.dim)) {
        throw ConfigError("initial x must have dim entries");
    }
    if (p.initial == "normal" && (p.dim != 1 || !(p.initial_variance > 0) || p.initial_atoms < 3)) {
        throw ConfigError("normal initial law needs dim 1, variance > 0 and atoms >= 3");
    }
    if (!(p.jump_rate >= 0) || !std::isfinite(p.jump_rate)) {
        throw ConfigError("jump rate must be finite and >= 0");
    }
    if (!(p.roi_half_width > 0) || !(p.grid_half_width > 0) || p.grid_cells < 2) {
        throw ConfigError("roi half_width, grid half_width must be > 0 and cells >= 2");
    }
    return p;
}

json problem_to_json(const ProblemSpec& p) {
    json j;
    j["name"] = p.name;
    j["dim"] = p.dim;
    j["drift"] = {{"family", p.drift},
                  {"rate", p.drift_rate},
                  {"target", p.drift_target},
                  {"gain", p.drift_gain}};
    j["diffusion"] = {{"family", p.diffusion}, {"sigma", p.sigma}};
    j["jumps"] = {{"family", p.jumps},
                  {"size", p.jump_size},
                  {"rate", p.jump_rate},
                  {"damped", p.damped}};
    j["initial"] = {{"family", p.initial},
                    {"x", p.initial_point},
                    {"variance", p.initial_variance},
                    {"atoms", p.initial_atoms}};
    j["roi"] = {{"center", p.roi_center}, {"half_width", p.roi_half_width}};
    j["bias_constant"] = p.bias_constant;
    j["grid"] = {{"half_width", p.grid_half_width}, {"cells", p.grid_cells}};
    return j;
}

Scenario build_problem(const ProblemSpec& p) {
    Scenario s;
    s.name = p.name;
    s.notes = "inline problem";
    s.coeffs.dim = p.dim;
    s.coeffs.horizon = 1.0;
    const int d = p.dim;

    if (p.drift == "zero") {
        s.coeffs.drift = [d](double, const Vec&) { return Vec(Vec::Zero(d)); };
    } else if (p.drift == "linear") {
        double rate = p.drift_rate, target = p.drift_target;
        s.coeffs.drift = [rate, target](double, const Vec& x) {
            return Vec(-rate * (x.array() - target).matrix());
        };
    } else {
        double gain = p.drift_gain, rate = p.drift_rate;
        s.coeffs.drift = [gain, rate](double, const Vec& x) {
            Vec b(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                double sgn = (x(i) > 0) - (x(i) < 0);
                b(i) = gain * sgn - rate * x(i);
            }
            return b;
        };
    }

    if (p.diffusion == "zero") {
        s.coeffs.diffusion = [d](double, const Vec&) { return Mat(Mat::Zero(d, d)); };
    } else {
        double sigma = p.sigma;
        s.coeffs.diffusion = [d, sigma](double, const Vec&) {
            return Mat(sigma * Mat::Identity(d, d));
        };
    }

    if (p.jumps != "none" && p.jump_rate > 0) {
        Vec up = Vec::Constant(d, p.jump_size);
        std::vector<Mark> marks{{1.0, up}};
        if (p.jumps == "two-sided") marks.push_back({1.0, Vec(-up)});
        double rate = p.jump_rate;
        RateFn kappa;
        if (p.damped) {
            kappa = [rate](double, const Vec&, const Vec& x) {
                return rate / (1.0 + x.squaredNorm());
            };
        } else {
            kappa = [rate](double, const Vec&, const Vec&) { return rate; };
        }
        s.kernel = JumpKernel(std::move(marks), [](double, const Vec& w, const Vec&) { return w; },
                              std::move(kappa), rate);
        s.autonomous = true;
    }

    Vec x0(d);
    for (int i = 0; i < d; ++i) x0(i) = p.initial_point[static_cast<std::size_t>(i)];
    if (p.initial == "dirac") {
        s.initial = ProbCloud::dirac(x0);
    } else {
        // Midpoint quantization of N(m, v) on +-6 standard deviations.
        const std::size_t n = p.initial_atoms;
        const double sd = std::sqrt(p.initial_variance);
        const double h = 12.0 * sd / static_cast<double>(n);
        std::vector<Vec> pts;
        std::vector<double> mass;
        for (std::size_t i = 0; i < n; ++i) {
            double z = -6.0 * sd + (static_cast<double>(i) + 0.5) * h;
            pts.push_back(scalar_vec(x0(0) + z));
            mass.push_back(std::exp(-0.5 * z * z / p.initial_variance));
        }
        s.initial = ProbCloud::from_masses(std::move(pts), mass);
    }

    s.bias_constant = p.bias_constant;
    s.roi_center = p.roi_center;
    s.roi_half_width = p.roi_half_width;
    s.grid = {p.grid_half_width, p.grid_cells};
    return s;
}

}  // namespace jumpflow::cli
