#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace jumpflow {

/// Largest supported state dimension. Vectors and matrices are sized
/// dynamically but stored inline, so hot loops never touch the heap.
inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                          kMaxDim, kMaxDim>;

inline Vec make_vec(std::initializer_list<double> values) {
    Vec v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

inline Vec scalar_vec(double x) {
    Vec v(1);
    v(0) = x;
    return v;
}

//---------------------------------------------------------------------------//
// Errors
//---------------------------------------------------------------------------//

/// Invalid user configuration (bad flags, unknown scenario, grid mismatch).
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Linear algebra or floating point failure inside an evaluation.
class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

//---------------------------------------------------------------------------//
// Time grid
//---------------------------------------------------------------------------//

/// Strictly increasing times t_0 = 0 < t_1 < ... < t_K = T.
class TimeGrid {
  public:
    TimeGrid() = default;
    explicit TimeGrid(std::vector<double> times);

    /// K equal steps on [0, horizon].
    static TimeGrid uniform(double horizon, std::size_t steps);

    std::size_t size() const { return times_.size(); }
    std::size_t steps() const { return times_.empty() ? 0 : times_.size() - 1; }
    double operator[](std::size_t k) const { return times_[k]; }
    double front() const { return times_.front(); }
    double back() const { return times_.back(); }
    double horizon() const { return times_.back(); }
    double step(std::size_t k) const { return times_[k + 1] - times_[k]; }
    double max_step() const;
    const std::vector<double>& times() const { return times_; }

    /// Index of the largest grid time <= t (times within 1e-9 relative of a
    /// node snap onto it).
    std::size_t index_at(double t) const;

    /// Exact node lookup; throws ConfigError when t is not a grid time.
    std::size_t node_index(double t) const;
    bool contains(double t) const;

  private:
    std::vector<double> times_;
};

}  // namespace jumpflow
