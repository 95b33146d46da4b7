#pragma once

/**
 * @file model.hpp
 * @brief Piecewise linear time-varying systems.
 *
 * A piecewise LTV system is given by breakpoints t_0 < ... < t_N and matrices
 * A_0..A_N. On segment k (t in [t_{k-1}, t_k]) the coefficient matrix is the
 * convex combination alpha_k(t) A_k + (1 - alpha_k(t)) A_{k-1}; outside the
 * grid it is held at A_0 or A_N. The uncertain variant adds delta * B(t) with
 * B interpolated the same way.
 */

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ltvcert {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thrown for malformed inputs (dimension mismatches, bad grids, bad arguments).
class InputError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a time lies outside the segment it was evaluated against.
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/**
 * @brief Ordered breakpoints t_0 < t_1 < ... < t_N.
 *
 * Segment k (1..N) is [t_{k-1}, t_k]; gamma(k) = 1 / (t_k - t_{k-1}) is the
 * rate of change of alpha on that segment.
 */
class TimeGrid {
  public:
    TimeGrid() = default;

    explicit TimeGrid(std::vector<double> breakpoints) : breakpoints_(std::move(breakpoints)) {
        if (breakpoints_.empty())
            throw InputError("time grid needs at least one breakpoint");
        for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
            if (!std::isfinite(breakpoints_[i]))
                throw InputError("non-finite breakpoint at index " + std::to_string(i));
            if (i > 0 && !(breakpoints_[i] > breakpoints_[i - 1]))
                throw InputError("non-increasing grid at index " + std::to_string(i));
        }
    }

    /// Number of segments N (the grid has N + 1 breakpoints).
    [[nodiscard]] int segments() const { return static_cast<int>(breakpoints_.size()) - 1; }
    [[nodiscard]] std::size_t size() const { return breakpoints_.size(); }
    [[nodiscard]] double operator[](std::size_t k) const { return breakpoints_[k]; }
    [[nodiscard]] double front() const { return breakpoints_.front(); }
    [[nodiscard]] double back() const { return breakpoints_.back(); }
    [[nodiscard]] const std::vector<double>& breakpoints() const { return breakpoints_; }

    [[nodiscard]] double width(int k) const {
        check_segment(k);
        return breakpoints_[k] - breakpoints_[k - 1];
    }

    [[nodiscard]] double gamma(int k) const { return 1.0 / width(k); }

    /**
     * @brief Segment that owns time t.
     *
     * Segments are right-closed: t == t_k belongs to segment k. Returns 0 for
     * t <= t_0 and N + 1 for t > t_N (the two constant extensions).
     */
    [[nodiscard]] int segment_of(double t) const {
        if (t <= breakpoints_.front())
            return 0;
        if (t > breakpoints_.back())
            return segments() + 1;
        // first breakpoint >= t
        std::size_t lo = 1, hi = breakpoints_.size() - 1;
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (breakpoints_[mid] >= t)
                hi = mid;
            else
                lo = mid + 1;
        }
        return static_cast<int>(lo);
    }

    void check_segment(int k) const {
        if (k < 1 || k > segments())
            throw DomainError("segment index " + std::to_string(k) + " outside 1.." +
                              std::to_string(segments()));
    }

  private:
    std::vector<double> breakpoints_{0.0};
};

/// alpha_k(t) = (t - t_{k-1}) / (t_k - t_{k-1}) for t in segment k.
[[nodiscard]] inline double alpha(const TimeGrid& grid, int k, double t) {
    grid.check_segment(k);
    const double lo = grid[k - 1], hi = grid[k];
    if (!(t >= lo && t <= hi))
        throw DomainError("time " + std::to_string(t) + " outside segment " + std::to_string(k));
    return (t - lo) / (hi - lo);
}

namespace detail {

// Interpolates a matrix sequence on the grid. Breakpoints return the stored
// matrix itself so knots are reproduced bit-for-bit.
[[nodiscard]] inline Matrix interpolate(const TimeGrid& grid, const std::vector<Matrix>& mats, double t) {
    const int seg = grid.segment_of(t);
    if (seg == 0)
        return mats.front();
    if (seg > grid.segments())
        return mats.back();
    if (t == grid[seg])
        return mats[seg];
    const double a = alpha(grid, seg, t);
    return a * mats[seg] + (1.0 - a) * mats[seg - 1];
}

}  // namespace detail

/// Piecewise-linear-in-time system xdot = A(t) x.
class PiecewiseLtvSystem {
  public:
    PiecewiseLtvSystem() = default;

    PiecewiseLtvSystem(TimeGrid grid, std::vector<Matrix> a) : grid_(std::move(grid)), a_(std::move(a)) {
        if (a_.size() != grid_.size())
            throw InputError("expected " + std::to_string(grid_.size()) + " A matrices, got " +
                             std::to_string(a_.size()));
        if (a_.front().rows() < 1 || a_.front().rows() != a_.front().cols())
            throw InputError("A_0 must be square and non-empty");
        for (std::size_t k = 1; k < a_.size(); ++k)
            if (a_[k].rows() != a_.front().rows() || a_[k].cols() != a_.front().cols())
                throw InputError("dimension mismatch at A_" + std::to_string(k));
    }

    [[nodiscard]] const TimeGrid& grid() const { return grid_; }
    [[nodiscard]] const std::vector<Matrix>& a() const { return a_; }
    [[nodiscard]] const Matrix& a(int k) const { return a_[static_cast<std::size_t>(k)]; }
    [[nodiscard]] int state_dim() const { return static_cast<int>(a_.front().rows()); }
    [[nodiscard]] int segments() const { return grid_.segments(); }

    [[nodiscard]] Matrix eval_a(double t) const { return detail::interpolate(grid_, a_, t); }

  private:
    TimeGrid grid_;
    std::vector<Matrix> a_{Matrix::Zero(1, 1)};
};

/// Uncertain system xdot = (A(t) + delta B(t)) x with B on the same grid.
class UncertainPiecewiseLtvSystem {
  public:
    UncertainPiecewiseLtvSystem() = default;

    UncertainPiecewiseLtvSystem(PiecewiseLtvSystem base, std::vector<Matrix> b)
        : base_(std::move(base)), b_(std::move(b)) {
        if (b_.size() != base_.a().size())
            throw InputError("expected " + std::to_string(base_.a().size()) + " B matrices, got " +
                             std::to_string(b_.size()));
        for (std::size_t k = 0; k < b_.size(); ++k)
            if (b_[k].rows() != base_.state_dim() || b_[k].cols() != base_.state_dim())
                throw InputError("dimension mismatch at B_" + std::to_string(k));
    }

    [[nodiscard]] const PiecewiseLtvSystem& base() const { return base_; }
    [[nodiscard]] const TimeGrid& grid() const { return base_.grid(); }
    [[nodiscard]] const std::vector<Matrix>& b() const { return b_; }
    [[nodiscard]] const Matrix& b(int k) const { return b_[static_cast<std::size_t>(k)]; }
    [[nodiscard]] int state_dim() const { return base_.state_dim(); }
    [[nodiscard]] int segments() const { return base_.segments(); }

    [[nodiscard]] Matrix eval_a(double t) const { return base_.eval_a(t); }
    [[nodiscard]] Matrix eval_b(double t) const { return detail::interpolate(grid(), b_, t); }

    /// A(t) + delta B(t); delta == 0 returns A(t) unchanged.
    [[nodiscard]] Matrix eval_perturbed(double t, double delta) const {
        if (!std::isfinite(delta))
            throw InputError("delta must be finite");
        if (delta == 0.0)
            return eval_a(t);
        return eval_a(t) + delta * eval_b(t);
    }

    /// True when every B_k is exactly zero.
    [[nodiscard]] bool uncertainty_inactive() const {
        for (const auto& bk : b_)
            if (!bk.isZero(0.0))
                return false;
        return true;
    }

  private:
    PiecewiseLtvSystem base_;
    std::vector<Matrix> b_{Matrix::Zero(1, 1)};
};

/// Free-function spellings mirroring the member accessors.
[[nodiscard]] inline Matrix eval_a(const PiecewiseLtvSystem& sys, double t) { return sys.eval_a(t); }
[[nodiscard]] inline Matrix eval_perturbed(const UncertainPiecewiseLtvSystem& usys, double t, double delta) {
    return usys.eval_perturbed(t, delta);
}

/// Raw, unchecked system description as read from a file.
struct SystemDescription {
    std::vector<double> breakpoints;
    std::vector<Matrix> a;
    std::optional<std::vector<Matrix>> b;
    std::optional<std::vector<double>> epsilon;
};

/**
 * @brief Diagnostics for a raw description; empty means well-formed.
 *
 * Reports non-increasing grids, count and dimension mismatches, and non-finite
 * entries. Every problem found is listed, not just the first.
 */
[[nodiscard]] inline std::vector<std::string> validate(const SystemDescription& desc) {
    std::vector<std::string> out;
    const auto& t = desc.breakpoints;
    if (t.empty())
        out.emplace_back("empty grid");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i]))
            out.push_back("non-finite breakpoint at index " + std::to_string(i));
        else if (i > 0 && std::isfinite(t[i - 1]) && !(t[i] > t[i - 1]))
            out.push_back("non-increasing grid at index " + std::to_string(i));
    }

    auto check_list = [&](const std::vector<Matrix>& mats, const char* name) {
        if (mats.size() != t.size())
            out.push_back(std::string("length mismatch: ") + std::to_string(mats.size()) + " " + name +
                          " matrices for " + std::to_string(t.size()) + " breakpoints");
        if (mats.empty())
            return;
        const auto n = desc.a.empty() ? mats.front().rows() : desc.a.front().rows();
        for (std::size_t k = 0; k < mats.size(); ++k) {
            const auto& m = mats[k];
            if (m.rows() == 0 || m.rows() != m.cols())
                out.push_back(std::string("non-square ") + name + "_" + std::to_string(k));
            else if (m.rows() != n)
                out.push_back(std::string("dimension mismatch at ") + name + "_" + std::to_string(k) + " (" +
                              std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + " vs " +
                              std::to_string(n) + "x" + std::to_string(n) + ")");
            if (!m.allFinite())
                out.push_back(std::string("non-finite entry in ") + name + "_" + std::to_string(k));
        }
    };
    check_list(desc.a, "A");
    if (desc.b)
        check_list(*desc.b, "B");
    if (desc.epsilon) {
        if (desc.epsilon->size() != t.size())
            out.push_back("length mismatch: " + std::to_string(desc.epsilon->size()) +
                          " epsilon values for " + std::to_string(t.size()) + " breakpoints");
        for (std::size_t k = 0; k < desc.epsilon->size(); ++k) {
            const double e = (*desc.epsilon)[k];
            if (!std::isfinite(e) || !(e > 0.0))
                out.push_back("epsilon_" + std::to_string(k) + " must be finite and positive");
        }
    }
    return out;
}

[[nodiscard]] inline std::vector<std::string> validate(const PiecewiseLtvSystem& sys) {
    return validate(SystemDescription{sys.grid().breakpoints(), sys.a(), std::nullopt, std::nullopt});
}

[[nodiscard]] inline std::vector<std::string> validate(const UncertainPiecewiseLtvSystem& usys) {
    return validate(
        SystemDescription{usys.grid().breakpoints(), usys.base().a(), usys.b(), std::nullopt});
}

/// Builds the checked base system; throws InputError carrying all diagnostics.
[[nodiscard]] inline PiecewiseLtvSystem make_system(const SystemDescription& desc) {
    auto issues = validate(desc);
    if (!issues.empty()) {
        std::string msg = "invalid system:";
        for (const auto& s : issues)
            msg += "\n  " + s;
        throw InputError(msg);
    }
    return PiecewiseLtvSystem(TimeGrid(desc.breakpoints), desc.a);
}

[[nodiscard]] inline UncertainPiecewiseLtvSystem make_uncertain_system(const SystemDescription& desc) {
    if (!desc.b)
        throw InputError("system has no B matrices; uncertainty analysis needs them");
    auto base = make_system(desc);
    return UncertainPiecewiseLtvSystem(std::move(base), *desc.b);
}

}  // namespace ltvcert
