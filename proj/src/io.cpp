#include "jumpflow/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

namespace jumpflow {

std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::string text;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text += ',';
            text += cells[i];
        }
        text += '\n';
    };
    line(table.header);
    for (const auto& r : table.rows) line(r);
    write_text(path, text);
}

namespace {

std::vector<std::size_t> recorded_indices(std::size_t K, std::size_t stride) {
    if (stride == 0) stride = 1;
    std::vector<std::size_t> ks;
    for (std::size_t k = 0; k < K; k += stride) ks.push_back(k);
    if (ks.back() != K - 1) ks.push_back(K - 1);
    return ks;
}

double parse_double(std::string_view cell, std::size_t line) {
    double v = 0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw ConfigError("malformed number '" + std::string(cell) + "' on line " +
                          std::to_string(line));
    }
    return v;
}

}  // namespace

CsvTable ensemble_table(const PathEnsemble& ens, std::size_t stride) {
    CsvTable t;
    t.header = {"path_id", "t"};
    for (int c = 0; c < ens.dim(); ++c) t.header.push_back("x_" + std::to_string(c + 1));
    const auto ks = recorded_indices(ens.grid().size(), stride);
    t.rows.reserve(ens.size() * ks.size());
    for (std::size_t n = 0; n < ens.size(); ++n) {
        for (std::size_t k : ks) {
            std::vector<std::string> row{std::to_string(ens.path_id(n)),
                                         format_double(ens.grid()[k])};
            for (int c = 0; c < ens.dim(); ++c) row.push_back(format_double(ens.coord(n, k, c)));
            t.rows.push_back(std::move(row));
        }
    }
    return t;
}


void write_ensemble_csv(const std::filesystem::path& path, const PathEnsemble& ens,
                        std::size_t stride) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "path_id,t";
    for (int c = 0; c < ens.dim(); ++c) out << ",x_" << c + 1;
    out << '\n';
    const auto ks = recorded_indices(ens.grid().size(), stride);
    std::string line;
    for (std::size_t n = 0; n < ens.size(); ++n) {
        const std::string id = std::to_string(ens.path_id(n));
        for (std::size_t k : ks) {
            line = id;
            line += ',';
            line += format_double(ens.grid()[k]);
            for (int c = 0; c < ens.dim(); ++c) {
                line += ',';
                line += format_double(ens.coord(n, k, c));
            }
            line += '\n';
            out << line;
        }
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

PathEnsemble read_ensemble_csv(const std::filesystem::path& path, std::uint64_t seed,
                               double epsilon) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("path_id,t", 0) != 0) {
        throw ConfigError(path.string() + " is not an ensemble CSV");
    }
    const int dim = static_cast<int>(std::count(line.begin(), line.end(), ',')) - 1;
    if (dim < 1 || dim > kMaxDim) throw ConfigError("ensemble CSV has a bad header");

    std::vector<double> times, states;
    std::vector<std::size_t> ids;
    std::size_t lineno = 1, k = 0;
    bool first_path = true;
    std::vector<std::string_view> cells;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        cells.clear();
        std::string_view rest(line);
        for (;;) {
            auto pos = rest.find(',');
            cells.push_back(rest.substr(0, pos));
            if (pos == std::string_view::npos) break;
            rest.remove_prefix(pos + 1);
        }
        if (cells.size() != static_cast<std::size_t>(dim) + 2) {
            throw ConfigError("wrong cell count on line " + std::to_string(lineno));
        }
        const auto id = static_cast<std::size_t>(parse_double(cells[0], lineno));
        const double t = parse_double(cells[1], lineno);
        if (ids.empty() || id != ids.back()) {
            if (!ids.empty()) {
                if (first_path) first_path = false;
                if (k != times.size()) {
                    throw ConfigError("path " + std::to_string(ids.back()) +
                                      " has the wrong number of rows");
                }
            }
            ids.push_back(id);
            k = 0;
        }
        if (first_path) {
            times.push_back(t);
        } else if (k >= times.size() || times[k] != t) {
            throw ConfigError("inconsistent times on line " + std::to_string(lineno));
        }
        ++k;
        for (int c = 0; c < dim; ++c) states.push_back(parse_double(cells[2 + c], lineno));
    }
    if (ids.empty()) throw ConfigError(path.string() + " holds no paths");
    if (k != times.size()) throw ConfigError("last path has the wrong number of rows");
    return PathEnsemble::from_states(TimeGrid(times), dim, seed, epsilon, std::move(states),
                                     std::move(ids));
}

CsvTable residual_table(const std::vector<ResidualReport>& reports) {
    CsvTable t;
    t.header = {"test_fn_id", "t", "value", "se", "bias_budget", "verdict"};
    for (const auto& r : reports) {
        t.rows.push_back({r.test_fn, format_double(r.t), format_double(r.residual),
                          format_double(r.se), format_double(r.bias_budget),
                          r.pass ? "pass" : "fail"});
    }
    return t;
}

CsvTable grid_table(const GridDensity& g) {
    CsvTable t;
    t.header = {"cell_center", "density"};
    for (std::size_t i = 0; i < g.density.size(); ++i) {
        t.rows.push_back({format_double(g.domain.center(i)), format_double(g.density[i])});
    }
    return t;
}

std::string render_svg(const std::string& title, const std::vector<SvgSeries>& series) {
    const double W = 640, H = 400, pad = 50;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series) {
        for (auto [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    }
    if (!std::isfinite(x0)) {
        x0 = y0 = 0;
        x1 = y1 = 1;
    }
    if (!(x1 > x0)) x1 = x0 + 1;
    if (!(y1 > y0)) y1 = y0 + 1;
    auto px = [&](double x) { return pad + (x - x0) / (x1 - x0) * (W - 2 * pad); };
    auto py = [&](double y) { return H - pad - (y - y0) / (y1 - y0) * (H - 2 * pad); };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n"
      << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << W - 2 * pad
      << "\" height=\"" << H - 2 * pad << "\" fill=\"none\" stroke=\"black\"/>\n"
      << "<text x=\"" << pad << "\" y=\"" << H - pad + 15 << "\">" << format_double(x0)
      << "</text><text x=\"" << W - pad << "\" y=\"" << H - pad + 15
      << "\" text-anchor=\"end\">" << format_double(x1) << "</text>\n"
      << "<text x=\"" << pad - 5 << "\" y=\"" << H - pad << "\" text-anchor=\"end\">"
      << format_double(y0) << "</text><text x=\"" << pad - 5 << "\" y=\"" << pad
      << "\" text-anchor=\"end\">" << format_double(y1) << "</text>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const char* c = colors[i % 5];
        if (s.scatter) {
            for (auto [x, y] : s.points) {
                o << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"2\" fill=\"" << c
                  << "\"/>\n";
            }
        } else {
            o << "<polyline fill=\"none\" stroke=\"" << c << "\" points=\"";
            for (auto [x, y] : s.points) o << px(x) << ',' << py(y) << ' ';
            o << "\"/>\n";
        }
        o << "<text x=\"" << W - pad - 5 << "\" y=\"" << pad + 15 * (i + 1)
          << "\" text-anchor=\"end\" fill=\"" << c << "\">" << s.label << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace jumpflow
