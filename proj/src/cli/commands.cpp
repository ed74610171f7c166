#include "cli/commands.hpp"

#include "jumpflow/parallel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace jumpflow::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

TimeGrid run_grid(const RunConfig& c) { return TimeGrid::uniform(c.horizon, c.steps); }

double snap(const TimeGrid& g, double t) {
    double dt = g.horizon() / static_cast<double>(g.steps());
    auto k = static_cast<std::size_t>(std::llround(t / dt));
    return g[std::min(k, g.steps())];
}

SimulationOptions sim_options(const RunConfig& c, unsigned threads) {
    SimulationOptions o;
    o.n_paths = c.n_paths;
    o.seed = c.seed;
    o.substeps = c.substeps;
    o.exclude_diverged = true;
    o.threads = threads;
    return o;
}

PathEnsemble first_paths(const PathEnsemble& ens, std::size_t m) {
    if (m == 0 || m >= ens.size()) m = ens.size();
    const std::size_t row = ens.grid().size() * static_cast<std::size_t>(ens.dim());
    std::vector<double> states;
    states.reserve(m * row);
    std::vector<std::size_t> ids;
    for (std::size_t n = 0; n < m; ++n) {
        ids.push_back(ens.path_id(n));
        for (std::size_t k = 0; k < ens.grid().size(); ++k) {
            for (int c = 0; c < ens.dim(); ++c) states.push_back(ens.coord(n, k, c));
        }
    }
    return PathEnsemble::from_states(ens.grid(), ens.dim(), ens.seed(), ens.epsilon(),
                                     std::move(states), std::move(ids));
}

json verdict_counts(std::size_t pass, std::size_t fail) {
    return {{"pass", pass}, {"fail", fail}};
}

template <class Rows>
json count_rows(const Rows& rows) {
    std::size_t pass = 0;
    for (const auto& r : rows) pass += r.pass ? 1 : 0;
    return verdict_counts(pass, rows.size() - pass);
}

json vec_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

fs::path out_path(const RunConfig& c, const std::string& name) {
    return fs::path(c.out_dir) / name;
}

void write_json(const RunConfig& c, const std::string& name, const json& j) {
    write_text(out_path(c, name), j.dump(2) + "\n");
}

std::size_t auto_stride(std::size_t paths, std::size_t steps) {
    const double limit = 2e6;
    for (std::size_t s = 1; s < steps; ++s) {
        double times = std::ceil(static_cast<double>(steps) / static_cast<double>(s)) + 1.0;
        if (static_cast<double>(paths) * times <= limit) return s;
    }
    return std::max<std::size_t>(steps, 1);
}

std::vector<double> aldous_betas(const TimeGrid& g, double max_beta) {
    std::vector<double> out;
    for (double b : {1e-3, 2.5e-3, 5e-3, 1e-2, 2.5e-2, 5e-2, 0.1, 0.25}) {
        double s = snap(g, b);
        if (s <= 0) s = g[1];
        if (s > max_beta + 1e-12) continue;
        if (out.empty() || s > out.back()) out.push_back(s);
    }
    return out;
}

std::vector<double> aldous_anchors(const TimeGrid& g) {
    std::vector<double> out;
    for (double a : {0.0, 0.125, 0.25, 0.5}) {
        double s = snap(g, a * g.horizon());
        if (out.empty() || s > out.back()) out.push_back(s);
    }
    return out;
}

void check_negative_control(const RunConfig& c, const Scenario& sc) {
    if (c.negative_control != "double-drift") return;
    // The control is vacuous for a problem without drift.
    for (double x : {-2.0, -0.5, 0.3, 1.0, 2.5}) {
        Vec v = Vec::Constant(sc.coeffs.dim, x);
        if (sc.coeffs.drift(0.0, v).norm() > 0) return;
    }
    throw ConfigError("the double-drift control needs a problem with nonzero drift");
}

}  // namespace

//---------------------------------------------------------------------------//
// Shared pieces
//---------------------------------------------------------------------------//

CsvTable martingale_table(const std::vector<MartingaleRow>& rows) {
    CsvTable t;
    t.header = {"test_fn_id", "t", "value", "se", "bias_budget", "verdict"};
    for (const auto& r : rows) {
        t.rows.push_back({r.test_fn + "@window-" + std::to_string(r.window + 1),
                          format_double(r.t), format_double(r.value), format_double(r.se),
                          format_double(r.bias_budget), r.pass ? "pass" : "fail"});
    }
    return t;
}

std::vector<TestFunction> test_bank(const RunConfig& c, const Scenario& sc) {
    std::vector<TestFunction> bank;
    const int d = sc.coeffs.dim;
    if (c.bank == "compact" || c.bank == "all") {
        bank = bump_bank(d, sc.roi_center, sc.roi_half_width, c.bank_size);
    }
    if (c.bank == "truncation" || c.bank == "all") {
        for (int n = 1; n <= 3; ++n) bank.push_back(truncation_family(d, n));
    }
    return bank;
}

std::vector<WindowSpec> martingale_windows(const RunConfig& c, const TimeGrid& grid) {
    if (!c.windows.empty()) return c.windows;
    const double T = grid.horizon();
    WindowSpec first{{}, 0.0, snap(grid, 0.5 * T)};
    WindowSpec second{{snap(grid, 0.25 * T)}, snap(grid, 0.5 * T), T};
    return {first, second};
}

double window_weight(const Vec& x) { return 1.0 / (1.0 + x.squaredNorm()); }

std::vector<MartingaleRow> martingale_battery(const PathEnsemble& ens,
                                              const GeneratorOperator& op,
                                              const std::vector<TestFunction>& battery,
                                              const std::vector<WindowSpec>& windows,
                                              double bias_constant, double se_multiplier,
                                              std::size_t max_paths, unsigned threads) {
    const PathEnsemble sub = first_paths(ens, max_paths);
    const double budget = bias_constant * sub.grid().max_step();
    std::vector<MartingaleRow> rows;
    for (std::size_t w = 0; w < windows.size(); ++w) {
        MartingaleWindow mw{windows[w].past, windows[w].s, windows[w].t};
        std::vector<WeightFn> weights(mw.past.size(), window_weight);
        for (const auto& psi : battery) {
            auto r = martingale_statistic(sub, op, mw, weights, psi, threads);
            MartingaleRow row;
            row.test_fn = psi.id();
            row.window = w;
            row.t = mw.t;
            row.value = r.value;
            row.se = r.se;
            row.bias_budget = budget;
            row.pass = std::abs(r.value) <= se_multiplier * r.se + budget;
            rows.push_back(row);
        }
    }
    return rows;
}

CoefficientSet double_drift(const CoefficientSet& coeffs) {
    CoefficientSet out = coeffs;
    auto b = coeffs.drift;
    out.drift = [b](double t, const Vec& x) { return Vec(2.0 * b(t, x)); };
    return out;
}

//---------------------------------------------------------------------------//
// Pipelines
//---------------------------------------------------------------------------//

bool VerifyResult::pass() const {
    for (const auto& r : residuals) {
        if (!r.pass) return false;
    }
    for (const auto& r : martingale) {
        if (!r.pass) return false;
    }
    return true;
}

VerifyResult verify_pipeline(const RunConfig& c, const Scenario& sc, unsigned threads,
                             const PathEnsemble* ensemble) {
    check_negative_control(c, sc);
    VerifyResult out;
    out.bias_constant = c.bias_constant.value_or(sc.bias_constant);
    const CoefficientSet coeffs =
        c.negative_control == "double-drift" ? double_drift(sc.coeffs) : sc.coeffs;
    const auto bank = test_bank(c, sc);
    ResidualOptions ropt;
    ropt.bias_constant = out.bias_constant;

    std::optional<PathEnsemble> simulated;
    const PathEnsemble* ens = ensemble;
    TimeGrid grid = ens ? ens->grid() : run_grid(c);
    std::vector<double> check;
    for (int j = 1; j <= 4; ++j) {
        std::size_t k = (grid.steps() * static_cast<std::size_t>(j)) / 4;
        if (k > 0 && (check.empty() || grid[k] > check.back())) check.push_back(grid[k]);
    }

    if (c.source == "reference") {
        if (ensemble) throw ConfigError("--input needs source mc");
        MarginalFlow flow = reference_flow(sc, grid);
        for (const auto& psi : bank) {
            auto rs = weak_residual(flow, coeffs, sc.kernel, psi, check, ropt);
            out.residuals.insert(out.residuals.end(), rs.begin(), rs.end());
        }
        return out;
    }

    if (!ens) {
        simulated.emplace(simulate_base_paths(sc.coeffs, sc.kernel, sc.initial, grid,
                                              sim_options(c, threads)));
        ens = &*simulated;
    }
    out.paths = ens->size();
    MarginalFlow flow = ensemble_flow(*ens);
    for (const auto& psi : bank) {
        auto rs = weak_residual(flow, coeffs, sc.kernel, psi, check, ropt);
        out.residuals.insert(out.residuals.end(), rs.begin(), rs.end());
    }
    auto bumps = bump_bank(sc.coeffs.dim, sc.roi_center, sc.roi_half_width, c.bank_size);
    bumps.resize(std::min<std::size_t>(3, bumps.size()), bumps.front());
    PlainGenerator op(coeffs, sc.kernel);
    out.martingale =
        martingale_battery(*ens, op, bumps, martingale_windows(c, ens->grid()),
                           out.bias_constant, c.se_multiplier, kMartingalePaths, threads);
    return out;
}

bool ChainEntry::pass() const {
    if (!w1_pass || diverged > 0) return false;
    for (const auto& r : martingale) {
        if (!r.pass) return false;
    }
    return true;
}

bool ChainResult::pass() const {
    for (const auto& e : entries) {
        if (!e.pass()) return false;
    }
    return !entries.empty();
}

ChainResult chain_pipeline(const RunConfig& c, const Scenario& sc, unsigned threads) {
    if (c.epsilons.empty()) {
        throw ConfigError(
            "chain requires --epsilons (comma-separated list, e.g. --epsilons 0.5,0.1,0.02)");
    }
    const TimeGrid grid = run_grid(c);
    const MarginalFlow flow = reference_flow(sc, grid);
    const ProbCloud& final_cloud = flow.cloud(grid.size() - 1);
    const double bias = c.bias_constant.value_or(sc.bias_constant);
    auto bumps = bump_bank(sc.coeffs.dim, sc.roi_center, sc.roi_half_width, c.bank_size);
    bumps.resize(std::min<std::size_t>(3, bumps.size()), bumps.front());
    const auto windows = martingale_windows(c, grid);

    ChainResult out;
    out.first_moment_f0 = first_moment(flow.cloud(0));
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : final_cloud.points()) {
        lo = std::min(lo, p(0));
        hi = std::max(hi, p(0));
    }

    for (double eps : c.epsilons) {
        auto t0 = std::chrono::steady_clock::now();
        ChainEntry e;
        e.epsilon = eps;
        PathEnsemble ens = simulate_regularized_paths(sc.coeffs, sc.kernel, flow, eps, grid,
                                                      sim_options(c, threads));
        e.paths = ens.size();
        e.diverged = ens.diverged().size();
        e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ProbCloud marginal = marginal_at(ens, grid.horizon());
        if (sc.coeffs.dim == 1) {
            MollifiedView view(final_cloud, eps);
            double pad = 10.0 * std::sqrt(eps);
            e.w1 = wasserstein1_to_cdf(marginal, [&](double x) { return view.cdf(x); },
                                       lo - pad, hi + pad, 40000);
        } else {
            ProbCloud smooth = sample_mollified(final_cloud, eps, c.n_paths, c.seed + 1);
            e.w1 = wasserstein1_marginals(marginal, smooth);
        }
        e.w1_pass = e.w1 <= c.w1_tolerance;
        e.sup_norm_moment = sup_norm_moment(ens);
        MollifiedGenerator op(sc.coeffs, sc.kernel, flow, eps);
        e.martingale = martingale_battery(ens, op, bumps, windows, bias, c.se_multiplier,
                                          kMartingalePaths, threads);
        out.entries.push_back(std::move(e));
    }
    double mn = std::numeric_limits<double>::infinity(), mx = 0;
    for (const auto& e : out.entries) {
        mn = std::min(mn, e.sup_norm_moment);
        mx = std::max(mx, e.sup_norm_moment);
    }
    out.sup_norm_ratio = mn > 0 ? mx / mn : std::numeric_limits<double>::infinity();
    return out;
}

//---------------------------------------------------------------------------//
// Commands
//---------------------------------------------------------------------------//

int cmd_simulate(const RunConfig& c, unsigned threads, std::ostream& log) {
    validate(c);
    if (c.epsilons.size() > 1) throw ConfigError("simulate takes a single --epsilon");
    const Scenario sc = resolve_problem(c);
    const TimeGrid grid = run_grid(c);
    write_echo(c);

    std::optional<PathEnsemble> ens;
    double eps = 0;
    if (c.epsilons.empty()) {
        ens.emplace(simulate_base_paths(sc.coeffs, sc.kernel, sc.initial, grid,
                                        sim_options(c, threads)));
    } else {
        eps = c.epsilons.front();
        MarginalFlow flow = reference_flow(sc, grid);
        ens.emplace(simulate_regularized_paths(sc.coeffs, sc.kernel, flow, eps, grid,
                                               sim_options(c, threads)));
    }
    const std::size_t stride = c.stride ? c.stride : auto_stride(ens->size(), c.steps);
    write_ensemble_csv(out_path(c, "ensemble.csv"), *ens, stride);

    const std::size_t diverged = ens->diverged().size();
    json summary = {{"n_paths", c.n_paths},
                    {"stored_paths", ens->size()},
                    {"grid", {{"T", c.horizon}, {"K", c.steps}, {"dt", c.dt()}}},
                    {"sup_norm_moment", sup_norm_moment(*ens)},
                    {"diverged_count", diverged},
                    {"seed", c.seed},
                    {"epsilon", eps},
                    {"substeps", c.substeps},
                    {"csv_stride", stride},
                    {"stream_rule", PathEnsemble::stream_rule}};
    write_json(c, "summary.json", summary);

    if (c.svg) {
        std::vector<SvgSeries> series;
        SvgSeries mean{"mean", {}, false};
        for (std::size_t k = 0; k < grid.size(); ++k) {
            double m = 0;
            for (std::size_t n = 0; n < ens->size(); ++n) m += ens->coord(n, k, 0);
            mean.points.emplace_back(grid[k], m / static_cast<double>(ens->size()));
        }
        series.push_back(mean);
        for (std::size_t n = 0; n < std::min<std::size_t>(4, ens->size()); ++n) {
            SvgSeries p{"path " + std::to_string(ens->path_id(n)), {}, false};
            for (std::size_t k = 0; k < grid.size(); ++k) {
                p.points.emplace_back(grid[k], ens->coord(n, k, 0));
            }
            series.push_back(std::move(p));
        }
        write_text(out_path(c, "ensemble.svg"), render_svg(sc.name + ": x_1 paths", series));
    }
    log << "simulate: " << ens->size() << " paths, sup-norm moment "
        << format_double(sup_norm_moment(*ens)) << ", diverged " << diverged << "\n";
    return diverged > 0 ? kExitFailure : kExitOk;
}

namespace {

int verify_probe(const RunConfig& c, const Scenario& sc, unsigned threads, std::ostream& log) {
    const TimeGrid grid = run_grid(c);
    const double T = grid.horizon();
    bool ok = true;

    if (c.probe == "growth") {
        ProbeSpec spec;
        spec.times = {0.0, snap(grid, 0.5 * T), T};
        spec.radii = {0.5, 1.0, 2.0, 5.0, 10.0, 100.0, 1000.0};
        spec.seed = c.seed;
        spec.threads = threads;
        GrowthReport r = audit_linear_growth(sc.coeffs, sc.kernel, spec);
        json j = {{"constant_estimate", r.constant_estimate},
                  {"probe_count", r.probe_count},
                  {"worst_point", {{"t", r.worst_point.t}, {"x", vec_json(r.worst_point.x)}}},
                  {"components",
                   {{"diffusion", r.components.diffusion},
                    {"drift", r.components.drift},
                    {"jump", r.components.jump}}},
                  {"non_finite_count", r.non_finite.size()},
                  {"psd_violations", r.psd_violations},
                  {"majorant_violations", r.majorant_violations},
                  {"ok", r.ok()}};
        ok = r.ok() && std::isfinite(r.constant_estimate);
        if (!c.epsilons.empty()) {
            MarginalFlow flow = reference_flow(sc, grid);
            std::vector<Vec> ys;
            for (const auto& p : growth_probe_points(sc.coeffs.dim, spec)) ys.push_back(p.x);
            json mj = json::array();
            for (double eps : c.epsilons) {
                MollifiedView view(flow.cloud(grid.size() - 1), eps);
                auto g = growth_probe(view, sc.coeffs, sc.kernel, T, ys);
                mj.push_back({{"epsilon", eps},
                              {"max_ratio", g.max_ratio},
                              {"worst", vec_json(g.worst)}});
                ok = ok && std::isfinite(g.max_ratio);
            }
            j["mollified"] = mj;
        }
        write_json(c, "growth.json", j);
        log << "growth probe: constant " << format_double(r.constant_estimate)
            << (ok ? " ok" : " FAILED") << "\n";
    } else if (c.probe == "lipschitz") {
        if (c.epsilons.empty()) throw ConfigError("--probe lipschitz requires --epsilons");
        if (sc.coeffs.dim != 1) throw ConfigError("--probe lipschitz is one-dimensional");
        MarginalFlow flow = reference_flow(sc, grid);
        json arr = json::array();
        const double radius = std::abs(sc.roi_center) + sc.roi_half_width;
        for (double eps : c.epsilons) {
            MollifiedView view(flow.cloud(grid.size() - 1), eps);
            for (double scale : {1e-1, 1e-2, 1e-3}) {
                auto r = lipschitz_probe(view, sc.coeffs, T, radius, scale, 200, c.seed);
                arr.push_back({{"epsilon", eps},
                               {"scale", r.scale},
                               {"max_quotient_b", r.max_quotient},
                               {"max_quotient_a", r.max_quotient_a},
                               {"pairs", r.pairs}});
                ok = ok && std::isfinite(r.max_quotient) && std::isfinite(r.max_quotient_a);
            }
        }
        write_json(c, "lipschitz.json", {{"radius", radius}, {"entries", arr}});
        log << "lipschitz probe:" << (ok ? " ok" : " FAILED") << "\n";
    } else {
        // aldous
        std::vector<std::pair<double, PathEnsemble>> ensembles;
        ensembles.emplace_back(0.0, simulate_base_paths(sc.coeffs, sc.kernel, sc.initial, grid,
                                                        sim_options(c, threads)));
        if (!c.epsilons.empty()) {
            MarginalFlow flow = reference_flow(sc, grid);
            for (double eps : c.epsilons) {
                ensembles.emplace_back(eps, simulate_regularized_paths(
                                                sc.coeffs, sc.kernel, flow, eps, grid,
                                                sim_options(c, threads)));
            }
        }
        const auto anchors = aldous_anchors(grid);
        const auto betas = aldous_betas(grid, T - anchors.back());
        CsvTable table;
        table.header = {"epsilon", "anchor", "beta", "mean_increment", "se"};
        json constants = json::array();
        double mn = std::numeric_limits<double>::infinity(), mx = 0;
        for (const auto& [eps, ens] : ensembles) {
            AldousTable a = aldous_modulus(ens, betas, anchors);
            for (const auto& e : a.entries) {
                table.rows.push_back({format_double(eps), format_double(e.anchor),
                                      format_double(e.beta), format_double(e.mean_increment),
                                      format_double(e.se)});
            }
            constants.push_back({{"epsilon", eps}, {"constant", a.constant}});
            ok = ok && std::isfinite(a.constant);
            mn = std::min(mn, a.constant);
            mx = std::max(mx, a.constant);
        }
        write_csv(out_path(c, "aldous.csv"), table);
        write_json(c, "aldous.json",
                   {{"constants", constants}, {"max_over_min", mn > 0 ? mx / mn : 0.0}});
        log << "aldous probe: max/min constant " << format_double(mn > 0 ? mx / mn : 0.0)
            << (ok ? " ok" : " FAILED") << "\n";
    }
    return ok ? kExitOk : kExitFailure;
}

}  // namespace

int cmd_verify(const RunConfig& c_in, unsigned threads, std::ostream& log) {
    RunConfig c = c_in;
    std::optional<PathEnsemble> input;
    if (!c.input.empty()) {
        const fs::path dir(c.input);
        const fs::path echo = dir / "config.echo.json", csv = dir / "ensemble.csv";
        if (!fs::exists(echo) || !fs::exists(csv)) {
            throw ConfigError("input directory " + c.input +
                              " lacks config.echo.json or ensemble.csv");
        }
        RunConfig prior = load_config(echo.string());
        if (!prior.epsilons.empty()) {
            throw ConfigError("verify reads base ensembles; use chain for regularized runs");
        }
        if (c.scenario.empty() && !c.problem) {
            c.scenario = prior.scenario;
            c.problem = prior.problem;
        }
        c.horizon = prior.horizon;
        c.steps = prior.steps;
        input.emplace(read_ensemble_csv(csv, prior.seed, 0.0));
    }
    validate(c);
    const Scenario sc = resolve_problem(c);
    write_echo(c);
    if (c.probe != "none") return verify_probe(c, sc, threads, log);

    VerifyResult r = verify_pipeline(c, sc, threads, input ? &*input : nullptr);
    write_csv(out_path(c, "residuals.csv"), residual_table(r.residuals));
    if (c.source == "mc") write_csv(out_path(c, "martingale.csv"), martingale_table(r.martingale));
    json summary = {{"residuals", count_rows(r.residuals)},
                    {"martingale", count_rows(r.martingale)},
                    {"bias_constant", r.bias_constant},
                    {"source", c.source},
                    {"paths", r.paths},
                    {"negative_control", c.negative_control},
                    {"verdict", r.pass() ? "pass" : "fail"}};
    write_json(c, "summary.json", summary);

    if (c.svg) {
        std::vector<SvgSeries> series;
        std::map<std::string, SvgSeries> by_fn;
        for (const auto& rr : r.residuals) {
            auto& s = by_fn[rr.test_fn];
            s.label = rr.test_fn;
            s.points.emplace_back(rr.t, rr.residual);
        }
        for (auto& [id, s] : by_fn) {
            if (series.size() < 5) series.push_back(std::move(s));
        }
        write_text(out_path(c, "residuals.svg"), render_svg(sc.name + ": weak residuals", series));
    }
    log << "verify: residuals " << count_rows(r.residuals).dump() << ", martingale "
        << count_rows(r.martingale).dump() << " -> " << (r.pass() ? "pass" : "fail") << "\n";
    return r.pass() ? kExitOk : kExitFailure;
}

int cmd_chain(const RunConfig& c, unsigned threads, std::ostream& log) {
    validate(c);
    if (c.epsilons.empty()) {
        throw ConfigError(
            "chain requires --epsilons (comma-separated list, e.g. --epsilons 0.5,0.1,0.02)");
    }
    const Scenario sc = resolve_problem(c);
    write_echo(c);
    ChainResult r = chain_pipeline(c, sc, threads);

    CsvTable table;
    table.header = {"epsilon", "t",     "w1",       "w1_tolerance", "sup_norm_moment",
                    "paths",   "diverged", "martingale_fail", "verdict"};
    std::vector<MartingaleRow> all_rows;
    CsvTable mt;
    mt.header = {"epsilon", "test_fn_id", "t", "value", "se", "bias_budget", "verdict"};
    json entries = json::array();
    for (const auto& e : r.entries) {
        std::size_t mfail = 0;
        for (const auto& m : e.martingale) mfail += m.pass ? 0 : 1;
        table.rows.push_back({format_double(e.epsilon), format_double(c.horizon),
                              format_double(e.w1), format_double(c.w1_tolerance),
                              format_double(e.sup_norm_moment), std::to_string(e.paths),
                              std::to_string(e.diverged), std::to_string(mfail),
                              e.pass() ? "pass" : "fail"});
        for (const auto& row : martingale_table(e.martingale).rows) {
            std::vector<std::string> full{format_double(e.epsilon)};
            full.insert(full.end(), row.begin(), row.end());
            mt.rows.push_back(std::move(full));
        }
        entries.push_back({{"epsilon", e.epsilon},
                           {"w1", e.w1},
                           {"w1_pass", e.w1_pass},
                           {"sup_norm_moment", e.sup_norm_moment},
                           {"martingale", count_rows(e.martingale)},
                           {"diverged", e.diverged},
                           {"verdict", e.pass() ? "pass" : "fail"}});
        log << "chain: eps=" << format_double(e.epsilon) << " W1=" << format_double(e.w1)
            << " sup-norm=" << format_double(e.sup_norm_moment) << " martingale fails=" << mfail
            << " -> " << (e.pass() ? "pass" : "fail") << "\n";
    }
    write_csv(out_path(c, "chain.csv"), table);
    write_csv(out_path(c, "martingale.csv"), mt);
    write_json(c, "summary.json",
               {{"entries", entries},
                {"first_moment_f0", r.first_moment_f0},
                {"sup_norm_ratio", r.sup_norm_ratio},
                {"verdict", r.pass() ? "pass" : "fail"}});
    if (c.svg) {
        SvgSeries w{"W1", {}, true}, tol{"tolerance", {}, false};
        for (const auto& e : r.entries) {
            w.points.emplace_back(std::log10(e.epsilon), e.w1);
            tol.points.emplace_back(std::log10(e.epsilon), c.w1_tolerance);
        }
        std::sort(tol.points.begin(), tol.points.end());
        write_text(out_path(c, "chain.svg"), render_svg(sc.name + ": W1 vs log10 eps", {w, tol}));
    }
    return r.pass() ? kExitOk : kExitFailure;
}

int cmd_fp_solve(const RunConfig& c, unsigned /*threads*/, std::ostream& log) {
    validate(c);
    const Scenario sc = resolve_problem(c);
    if (sc.coeffs.dim != 1) throw ConfigError("fp-solve is one-dimensional");
    GridDomain domain = sc.grid;
    if (c.fp_half_width > 0) domain.half_width = c.fp_half_width;
    if (c.fp_cells > 0) domain.cells = c.fp_cells;
    std::vector<double> times = c.fp_times;
    if (times.empty()) {
        const TimeGrid g = run_grid(c);
        for (int j = 0; j <= 10; ++j) times.push_back(snap(g, c.horizon * j / 10.0));
        times.erase(std::unique(times.begin(), times.end()), times.end());
    }
    std::sort(times.begin(), times.end());
    write_echo(c);
    auto sol = fp_grid_solve(sc, domain, times, c.fp_dt);

    json snaps = json::array();
    std::vector<SvgSeries> series;
    for (std::size_t k = 0; k < sol.size(); ++k) {
        const auto& g = sol[k];
        write_csv(out_path(c, "density_" + std::to_string(k) + ".csv"), grid_table(g));
        json s = {{"index", k},
                  {"t", g.t},
                  {"interior_mass", g.interior_mass()},
                  {"leaked_mass", g.leaked_mass},
                  {"clipped_mass", g.clipped_mass}};
        if (sc.exact_marginal) {
            s["w1_to_exact"] = wasserstein1_1d(grid_to_cloud(g), sc.exact_marginal(g.t));
        }
        snaps.push_back(s);
        if (c.svg && series.size() < 5) {
            SvgSeries p{"t=" + format_double(g.t), {}, false};
            for (std::size_t i = 0; i < g.density.size(); ++i) {
                p.points.emplace_back(g.domain.center(i), g.density[i]);
            }
            series.push_back(std::move(p));
        }
    }
    const double dt = c.fp_dt > 0 ? c.fp_dt : 0.9 * stable_dt(sc.coeffs, sc.kernel, domain, c.horizon);
    write_json(c, "summary.json",
               {{"domain", {{"half_width", domain.half_width}, {"cells", domain.cells}}},
                {"dt", dt},
                {"snapshots", snaps}});
    if (c.svg) write_text(out_path(c, "density.svg"), render_svg(sc.name + ": density", series));
    log << "fp-solve: " << sol.size() << " snapshots, final leaked mass "
        << format_double(sol.back().leaked_mass) << "\n";
    return kExitOk;
}

void cmd_scenario_list(std::ostream& out) {
    for (const auto& name : scenario_names()) {
        out << name << "\t" << scenario(name).notes << "\n";
    }
}

//---------------------------------------------------------------------------//
// Argument parsing
//---------------------------------------------------------------------------//

namespace {

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("not a number: '" + item + "'");
        }
    }
    return out;
}

// "s:t" or "p1,p2:s:t"
WindowSpec parse_window(const std::string& text) {
    auto parts = std::vector<std::string>{};
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    WindowSpec w;
    if (parts.size() == 3) {
        w.past = parse_list(parts[0]);
        parts.erase(parts.begin());
    }
    if (parts.size() != 2) throw ConfigError("window must look like s:t or p1,p2:s:t");
    auto s = parse_list(parts[0]), t = parse_list(parts[1]);
    if (s.size() != 1 || t.size() != 1) throw ConfigError("bad window '" + text + "'");
    w.s = s[0];
    w.t = t[0];
    return w;
}

struct Flags {
    std::string config, scenario, problem, out, epsilons, windows_raw, times;
    std::vector<std::string> windows;
    double T = 0, dt = 0, eps = 0, bias = 0, se_mult = 0, w1_tol = 0, L = 0, fp_dt = 0;
    std::size_t K = 0, n = 0, substeps = 0, stride = 0, bank_size = 0, cells = 0;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    bool svg = false;
    std::string source, bank, negative_control, probe, input;
};

void common_options(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "Load a JSON config (e.g. a config.echo.json)");
    sub->add_option("--scenario", f.scenario, "Registered scenario name");
    sub->add_option("--problem", f.problem, "Inline problem as JSON text or @file");
    sub->add_option("--T", f.T, "Horizon");
    sub->add_option("--dt", f.dt, "Recording step (must divide T)");
    sub->add_option("--K", f.K, "Number of recording steps");
    sub->add_option("--n", f.n, "Number of paths");
    sub->add_option("--seed", f.seed, "Random seed");
    sub->add_option("--substeps", f.substeps, "Euler steps per recording step");
    sub->add_option("--threads", f.threads, "Worker threads (default JUMPFLOW_THREADS or 1)");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_flag("--svg", f.svg, "Also write a quick-look SVG plot");
}

void verify_options(CLI::App* sub, Flags& f) {
    sub->add_option("--bias-constant", f.bias, "Bias budget constant C (budget C*dt)");
    sub->add_option("--se-multiplier", f.se_mult, "Standard errors allowed per verdict");
    sub->add_option("--window", f.windows, "Martingale window s:t or p1,p2:s:t (repeatable)");
    sub->add_option("--bank-size", f.bank_size, "Number of bumps in the bank");
}

RunConfig merge(const Flags& f, CLI::App* sub, const std::string& command) {
    RunConfig c;
    if (!f.config.empty()) {
        c = load_config(f.config);
        if (!c.command.empty() && c.command != command) {
            throw ConfigError("config was written for '" + c.command + "', not '" + command + "'");
        }
    }
    c.command = command;
    auto given = [&](const char* name) {
        auto* opt = sub->get_option_no_throw(name);
        return opt && opt->count() > 0;
    };
    if (given("--scenario")) {
        c.scenario = f.scenario;
        c.problem.reset();
    }
    if (given("--problem")) {
        std::string text = f.problem;
        if (!text.empty() && text[0] == '@') text = read_text(text.substr(1));
        try {
            c.problem = problem_from_json(json::parse(text));
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("cannot parse --problem: ") + e.what());
        }
        c.scenario.clear();
    }
    if (given("--T")) c.horizon = f.T;
    if (given("--K") && given("--dt")) throw ConfigError("give --dt or --K, not both");
    if (given("--K")) c.steps = f.K;
    if (given("--dt")) set_step_size(c, f.dt);
    if (given("--n")) c.n_paths = f.n;
    if (given("--seed")) c.seed = f.seed;
    if (given("--substeps")) c.substeps = f.substeps;
    if (given("--out")) c.out_dir = f.out;
    if (given("--svg")) c.svg = f.svg;
    if (given("--stride")) c.stride = f.stride;
    if (given("--epsilon")) c.epsilons = {f.eps};
    if (given("--epsilons")) c.epsilons = parse_list(f.epsilons);
    if (given("--bias-constant")) c.bias_constant = f.bias;
    if (given("--se-multiplier")) c.se_multiplier = f.se_mult;
    if (given("--w1-tol")) c.w1_tolerance = f.w1_tol;
    if (given("--bank-size")) c.bank_size = f.bank_size;
    if (given("--window")) {
        c.windows.clear();
        for (const auto& w : f.windows) c.windows.push_back(parse_window(w));
    }
    if (given("--source")) c.source = f.source;
    if (given("--bank")) c.bank = f.bank;
    if (given("--negative-control")) c.negative_control = f.negative_control;
    if (given("--probe")) c.probe = f.probe;
    if (given("--input")) c.input = f.input;
    if (given("--L")) c.fp_half_width = f.L;
    if (given("--cells")) c.fp_cells = f.cells;
    if (given("--fp-dt")) c.fp_dt = f.fp_dt;
    if (given("--times")) c.fp_times = parse_list(f.times);
    return c;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"jumpflow: jump-diffusion marginal flows, simulators and verification"};
    app.require_subcommand(1);
    Flags f;

    auto* sim = app.add_subcommand("simulate", "Simulate an ensemble (base or regularized)");
    common_options(sim, f);
    sim->add_option("--epsilon", f.eps, "Use the regularized simulator at this epsilon");
    sim->add_option("--stride", f.stride, "Write every stride-th recording time (0 = auto)");

    auto* ver = app.add_subcommand("verify", "Weak residuals, martingale battery or probes");
    common_options(ver, f);
    verify_options(ver, f);
    ver->add_option("--source", f.source, "mc | reference");
    ver->add_option("--bank", f.bank, "compact | truncation | all");
    ver->add_option("--negative-control", f.negative_control, "none | double-drift");
    ver->add_option("--probe", f.probe, "growth | lipschitz | aldous");
    ver->add_option("--epsilons", f.epsilons, "Comma-separated epsilons for the probes");
    ver->add_option("--input", f.input, "Directory of an earlier simulate run");

    auto* chain = app.add_subcommand("chain", "Regularized chain check for a list of epsilons");
    common_options(chain, f);
    verify_options(chain, f);
    chain->add_option("--epsilons", f.epsilons, "Comma-separated epsilons (required)");
    chain->add_option("--w1-tol", f.w1_tol, "W1 tolerance at T");

    auto* fp = app.add_subcommand("fp-solve", "Finite-volume solve of the forward equation");
    common_options(fp, f);
    fp->add_option("--L", f.L, "Half width of the domain [-L, L]");
    fp->add_option("--cells", f.cells, "Number of cells");
    fp->add_option("--fp-dt", f.fp_dt, "Time step (0 = min of the stability limit and dx/2)");
    fp->add_option("--times", f.times, "Comma-separated output times");

    auto* sc = app.add_subcommand("scenario", "Scenario registry");
    sc->require_subcommand(1);
    auto* list = sc->add_subcommand("list", "List registered scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (list->parsed()) {
            cmd_scenario_list(out);
            return kExitOk;
        }
        if (sim->parsed()) {
            RunConfig c = merge(f, sim, "simulate");
            return cmd_simulate(c, resolve_threads(f.threads), out);
        }
        if (ver->parsed()) {
            RunConfig c = merge(f, ver, "verify");
            return cmd_verify(c, resolve_threads(f.threads), out);
        }
        if (chain->parsed()) {
            RunConfig c = merge(f, chain, "chain");
            return cmd_chain(c, resolve_threads(f.threads), out);
        }
        if (fp->parsed()) {
            RunConfig c = merge(f, fp, "fp-solve");
            return cmd_fp_solve(c, resolve_threads(f.threads), out);
        }
    } catch (const StabilityError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    err << "no command given\n";
    return kExitUsage;
}

}  // namespace jumpflow::cli
