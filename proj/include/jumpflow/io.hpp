#pragma once

#include "jumpflow/oracle.hpp"
#include "jumpflow/simulate.hpp"
#include "jumpflow/verify.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace jumpflow {

/// Shortest decimal that round-trips (locale independent).
std::string format_double(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// `path_id,t,x_1..x_d`, recording every `stride`-th time plus the last one.
CsvTable ensemble_table(const PathEnsemble& ens, std::size_t stride = 1);

/// Same layout as ensemble_table, streamed straight to disk.
void write_ensemble_csv(const std::filesystem::path& path, const PathEnsemble& ens,
                        std::size_t stride = 1);

/// Reads a file written by write_ensemble_csv. Every path must list the same
/// times in increasing order; those times become the ensemble's grid.
PathEnsemble read_ensemble_csv(const std::filesystem::path& path, std::uint64_t seed = 0,
                               double epsilon = 0);

/// `test_fn_id,t,value,se,bias_budget,verdict`
CsvTable residual_table(const std::vector<ResidualReport>& reports);

/// `cell_center,density`
CsvTable grid_table(const GridDensity& g);

struct SvgSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
    bool scatter = false;
};

/// Minimal line/scatter plot for quick inspection.
std::string render_svg(const std::string& title, const std::vector<SvgSeries>& series);

}  // namespace jumpflow
