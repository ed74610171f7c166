#include "jumpflow/types.hpp"

#include <algorithm>
#include <cmath>

namespace jumpflow {
namespace {

double snap_tolerance(double t) { return 1e-9 * std::max(1.0, std::abs(t)); }

}  // namespace

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    if (times_.empty()) throw ConfigError("time grid must not be empty");
    for (double t : times_) {
        if (!std::isfinite(t)) throw ConfigError("time grid contains a non-finite time");
    }
    if (times_.front() != 0.0) throw ConfigError("time grid must start at 0");
    for (std::size_t k = 1; k < times_.size(); ++k) {
        if (!(times_[k] > times_[k - 1])) {
            throw ConfigError("time grid must be strictly increasing");
        }
    }
}

TimeGrid TimeGrid::uniform(double horizon, std::size_t steps) {
    if (!(horizon > 0) || steps == 0) {
        throw ConfigError("uniform grid needs horizon > 0 and at least one step");
    }
    std::vector<double> t(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        t[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
    }
    t.back() = horizon;
    return TimeGrid(std::move(t));
}

double TimeGrid::max_step() const {
    double m = 0;
    for (std::size_t k = 0; k + 1 < times_.size(); ++k) m = std::max(m, step(k));
    return m;
}

std::size_t TimeGrid::index_at(double t) const {
    auto it = std::upper_bound(times_.begin(), times_.end(), t + snap_tolerance(t));
    if (it == times_.begin()) return 0;
    return static_cast<std::size_t>(it - times_.begin()) - 1;
}

bool TimeGrid::contains(double t) const {
    std::size_t k = index_at(t);
    return std::abs(times_[k] - t) <= snap_tolerance(t);
}

std::size_t TimeGrid::node_index(double t) const {
    if (!contains(t)) {
        throw ConfigError("time " + std::to_string(t) + " is not on the grid");
    }
    return index_at(t);
}

}  // namespace jumpflow
