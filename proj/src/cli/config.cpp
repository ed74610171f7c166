#include "cli/config.hpp"

#include "jumpflow/io.hpp"

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
    if (!j.contains(key) || j.at(key).is_null()) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

}  // namespace

json to_json(const RunConfig& c) {
    json j;
    j["command"] = c.command;
    j["scenario"] = c.scenario.empty() ? json(nullptr) : json(c.scenario);
    j["problem"] = c.problem ? problem_to_json(*c.problem) : json(nullptr);
    j["grid"] = {{"T", c.horizon}, {"K", c.steps}, {"dt", c.dt()}};
    j["mc"] = {{"n", c.n_paths}, {"seed", c.seed}, {"substeps", c.substeps}};
    j["mollify"] = {{"epsilons", c.epsilons}};
    json windows = json::array();
    for (const auto& w : c.windows) windows.push_back({{"past", w.past}, {"s", w.s}, {"t", w.t}});
    j["verify"] = {{"source", c.source},
                   {"bank", c.bank},
                   {"bank_size", c.bank_size},
                   {"windows", windows},
                   {"bias_constant", c.bias_constant ? json(*c.bias_constant) : json(nullptr)},
                   {"se_multiplier", c.se_multiplier},
                   {"w1_tolerance", c.w1_tolerance},
                   {"negative_control", c.negative_control},
                   {"probe", c.probe},
                   {"input", c.input}};
    j["fp"] = {{"half_width", c.fp_half_width},
               {"cells", c.fp_cells},
               {"dt", c.fp_dt},
               {"times", c.fp_times}};
    j["output"] = {{"dir", c.out_dir}, {"svg", c.svg}, {"stride", c.stride}};
    return j;
}

RunConfig config_from_json(const json& j) {
    check_keys(j, "config",
               {"command", "scenario", "problem", "grid", "mc", "mollify", "verify", "fp",
                "output"});
    RunConfig c;
    read(j, "command", c.command);
    read(j, "scenario", c.scenario);
    if (j.contains("problem") && !j["problem"].is_null()) {
        c.problem = problem_from_json(j["problem"]);
    }
    if (j.contains("grid")) {
        const json& g = j["grid"];
        check_keys(g, "grid", {"T", "K", "dt"});
        read(g, "T", c.horizon);
        if (g.contains("K")) {
            read(g, "K", c.steps);
        } else if (g.contains("dt")) {
            set_step_size(c, g["dt"].get<double>());
        }
    }
    if (j.contains("mc")) {
        const json& m = j["mc"];
        check_keys(m, "mc", {"n", "seed", "substeps"});
        read(m, "n", c.n_paths);
        read(m, "seed", c.seed);
        read(m, "substeps", c.substeps);
    }
    if (j.contains("mollify")) {
        check_keys(j["mollify"], "mollify", {"epsilons"});
        read(j["mollify"], "epsilons", c.epsilons);
    }
    if (j.contains("verify")) {
        const json& v = j["verify"];
        check_keys(v, "verify",
                   {"source", "bank", "bank_size", "windows", "bias_constant", "se_multiplier",
                    "w1_tolerance", "negative_control", "probe", "input"});
        read(v, "source", c.source);
        read(v, "bank", c.bank);
        read(v, "bank_size", c.bank_size);
        if (v.contains("windows")) {
            for (const auto& w : v["windows"]) {
                check_keys(w, "window", {"past", "s", "t"});
                WindowSpec ws;
                read(w, "past", ws.past);
                read(w, "s", ws.s);
                read(w, "t", ws.t);
                c.windows.push_back(ws);
            }
        }
        if (v.contains("bias_constant") && !v["bias_constant"].is_null()) {
            c.bias_constant = v["bias_constant"].get<double>();
        }
        read(v, "se_multiplier", c.se_multiplier);
        read(v, "w1_tolerance", c.w1_tolerance);
        read(v, "negative_control", c.negative_control);
        read(v, "probe", c.probe);
        read(v, "input", c.input);
    }
    if (j.contains("fp")) {
        const json& f = j["fp"];
        check_keys(f, "fp", {"half_width", "cells", "dt", "times"});
        read(f, "half_width", c.fp_half_width);
        read(f, "cells", c.fp_cells);
        read(f, "dt", c.fp_dt);
        read(f, "times", c.fp_times);
    }
    if (j.contains("output")) {
        const json& o = j["output"];
        check_keys(o, "output", {"dir", "svg", "stride"});
        read(o, "dir", c.out_dir);
        read(o, "svg", c.svg);
        read(o, "stride", c.stride);
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse " + path + ": " + e.what());
    }
    return config_from_json(j);
}

void set_step_size(RunConfig& c, double dt) {
    if (!(dt > 0) || !std::isfinite(dt)) throw ConfigError("dt must be > 0");
    double k = c.horizon / dt;
    double rounded = std::round(k);
    if (rounded < 1 || std::abs(k - rounded) > 1e-9 * std::max(1.0, k)) {
        throw ConfigError("dt must divide the horizon T into an integer number of steps");
    }
    c.steps = static_cast<std::size_t>(rounded);
}

void validate(const RunConfig& c) {
    if (c.scenario.empty() == !c.problem.has_value()) {
        throw ConfigError("give exactly one of --scenario or --problem");
    }
    if (!(c.horizon > 0) || !std::isfinite(c.horizon)) throw ConfigError("T must be > 0");
    if (c.steps < 1) throw ConfigError("K must be >= 1");
    if (c.n_paths < 1) throw ConfigError("n must be >= 1");
    if (c.substeps < 1) throw ConfigError("substeps must be >= 1");
    for (double e : c.epsilons) {
        if (!(e > 0) || !std::isfinite(e)) throw ConfigError("every epsilon must be > 0");
    }
    auto one_of = [](const std::string& v, const char* what, std::set<std::string> ok) {
        if (!ok.count(v)) {
            std::string listing;
            for (const auto& o : ok) listing += (listing.empty() ? "" : ", ") + o;
            throw ConfigError(std::string("unknown ") + what + " '" + v + "' (expected " +
                              listing + ")");
        }
    };
    one_of(c.source, "source", {"mc", "reference"});
    one_of(c.bank, "bank", {"compact", "truncation", "all"});
    one_of(c.negative_control, "negative control", {"none", "double-drift"});
    one_of(c.probe, "probe", {"none", "growth", "lipschitz", "aldous"});
    if (c.bank_size < 1) throw ConfigError("bank_size must be >= 1");
    if (!(c.se_multiplier >= 0) || !(c.w1_tolerance > 0)) {
        throw ConfigError("se_multiplier must be >= 0 and w1_tolerance > 0");
    }
    if (c.bias_constant && !(*c.bias_constant >= 0)) {
        throw ConfigError("bias_constant must be >= 0");
    }
    for (const auto& w : c.windows) {
        bool ordered = w.s <= w.t && w.t <= c.horizon && w.s >= 0;
        for (double p : w.past) ordered = ordered && p >= 0 && p <= w.s;
        if (!ordered) throw ConfigError("windows need 0 <= past <= s <= t <= T");
    }
    if (c.fp_half_width < 0 || c.fp_dt < 0) throw ConfigError("fp settings must be >= 0");
    for (double t : c.fp_times) {
        if (!(t >= 0) || t > c.horizon) throw ConfigError("fp times must lie in [0, T]");
    }
    if (c.out_dir.empty()) throw ConfigError("output directory must not be empty");
}

Scenario resolve_problem(const RunConfig& c) {
    Scenario sc = c.problem ? build_problem(*c.problem) : scenario(c.scenario);
    sc.coeffs.horizon = c.horizon;
    return sc;
}

void write_echo(const RunConfig& c) {
    write_text(std::filesystem::path(c.out_dir) / "config.echo.json", to_json(c).dump(2) + "\n");
}

}  // namespace jumpflow::cli
