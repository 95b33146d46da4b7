#pragma once

/**
 * @file analysis.hpp
 * @brief Checks that do not trust the LMI machinery: a direct eigenvalue
 *        oracle for certificates, RK4 simulation with Lyapunov monitoring,
 *        and frozen-time LTI margins for comparison.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "cert.hpp"
#include "model.hpp"

namespace ltvcert {

// ---------------------------------------------------------------- simulation

struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    double delta = 0.0;
    double h = 0.0;
    bool diverged = false;
};

struct SimulationOptions {
    double h = 1e-3;
    double divergence_bound = 1e12;
};

namespace detail {

inline void check_simulation_inputs(int n, const Vector& x0, double t0, double t1, const SimulationOptions& opts) {
    if (x0.size() != n)
        throw InputError("initial state has dimension " + std::to_string(x0.size()) + ", system has " +
                         std::to_string(n));
    if (!x0.allFinite() || !std::isfinite(t0) || !std::isfinite(t1))
        throw InputError("non-finite simulation input");
    if (!(t1 >= t0))
        throw InputError("simulation end time precedes start time");
    if (!(opts.h > 0.0) || !std::isfinite(opts.h))
        throw InputError("integration step must be positive");
}

/// Classical RK4 on xdot = a_of(t) x. Every knot inside (t0, t1) is a sample.
template <class AOfT>
Trajectory integrate(AOfT&& a_of, const std::vector<double>& knots, const Vector& x0, double t0, double t1,
                     const SimulationOptions& opts) {
    std::vector<double> marks{t0};
    for (double k : knots)
        if (k > t0 && k < t1)
            marks.push_back(k);
    if (t1 > t0)
        marks.push_back(t1);

    Trajectory tr;
    tr.h = opts.h;
    tr.times.push_back(t0);
    tr.states.push_back(x0);
    Vector x = x0;
    for (std::size_t s = 1; s < marks.size(); ++s) {
        const double a = marks[s - 1], b = marks[s];
        const auto steps = static_cast<long>(std::max(1.0, std::ceil((b - a) / opts.h - 1e-9)));
        const double h = (b - a) / static_cast<double>(steps);
        for (long i = 0; i < steps; ++i) {
            const double t = a + static_cast<double>(i) * h;
            const double tn = i + 1 == steps ? b : a + static_cast<double>(i + 1) * h;
            const double tm = t + 0.5 * h;
            const Matrix at = a_of(t), am = a_of(tm), an = a_of(tn);
            const Vector k1 = at * x;
            const Vector k2 = am * (x + 0.5 * h * k1);
            const Vector k3 = am * (x + 0.5 * h * k2);
            const Vector k4 = an * (x + h * k3);
            x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            tr.times.push_back(tn);
            tr.states.push_back(x);
            if (!x.allFinite() || x.norm() > opts.divergence_bound) {
                tr.diverged = true;
                return tr;
            }
        }
    }
    return tr;
}

}  // namespace detail

[[nodiscard]] inline Trajectory simulate(const PiecewiseLtvSystem& sys, const Vector& x0, double t0, double t1,
                                         const SimulationOptions& opts = {}) {
    detail::check_simulation_inputs(sys.state_dim(), x0, t0, t1, opts);
    return detail::integrate([&](double t) { return sys.eval_a(t); }, sys.grid().breakpoints(), x0, t0, t1, opts);
}

[[nodiscard]] inline Trajectory simulate(const UncertainPiecewiseLtvSystem& usys, double delta, const Vector& x0,
                                         double t0, double t1, const SimulationOptions& opts = {}) {
    if (!std::isfinite(delta))
        throw InputError("delta must be finite");
    detail::check_simulation_inputs(usys.state_dim(), x0, t0, t1, opts);
    auto tr = detail::integrate([&](double t) { return usys.eval_perturbed(t, delta); }, usys.grid().breakpoints(),
                                x0, t0, t1, opts);
    tr.delta = delta;
    return tr;
}

// ------------------------------------------------------- Lyapunov monitoring

struct LyapunovTrace {
    std::vector<double> times;
    std::vector<double> values;
    double epsilon_floor = 0.0;
    bool pass = true;
    std::size_t fail_index = 0;  // first sample violating the decay bound
    double worst_excess = -std::numeric_limits<double>::infinity();  // max log-ratio over the bound
};

/// P(t) from breakpoint matrices, held constant outside the grid.
[[nodiscard]] inline Matrix lyapunov_matrix(const TimeGrid& grid, const std::vector<Matrix>& p, double t) {
    return detail::interpolate(grid, p, t);
}

/**
 * @brief V(t) = x' P(t) x along a trajectory and the integrated decay test
 *        V(t_j) <= V(t_i) exp(-eps_min (t_j - t_i)) (1 + slack) for samples in [t_0, t_N].
 */
[[nodiscard]] inline LyapunovTrace lyapunov_monitor(const Trajectory& traj, const TimeGrid& grid,
                                                    const std::vector<Matrix>& p, const DecayRates& eps,
                                                    double slack = 1e-6) {
    if (p.size() != grid.size())
        throw InputError("certificate has " + std::to_string(p.size()) + " P matrices for " +
                         std::to_string(grid.size()) + " breakpoints");
    eps.check(grid.size());
    const auto n = p.front().rows();
    LyapunovTrace out;
    out.epsilon_floor = eps.min();
    out.times = traj.times;
    out.values.reserve(traj.states.size());
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const auto& x = traj.states[i];
        if (x.size() != n)
            throw InputError("trajectory state dimension does not match certificate");
        out.values.push_back(x.dot(lyapunov_matrix(grid, p, traj.times[i]) * x));
    }

    // ln V_j + eps t_j must not exceed min_{i<j}(ln V_i + eps t_i) + ln(1 + slack)
    const double allowance = std::log1p(slack);
    double running = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < out.values.size(); ++j) {
        const double t = out.times[j];
        if (t < grid.front() || t > grid.back())
            continue;
        const double v = out.values[j];
        if (v < 0.0 || std::isnan(v)) {
            if (out.pass) {
                out.pass = false;
                out.fail_index = j;
            }
            continue;
        }
        const double score = std::log(v) + out.epsilon_floor * (t - grid.front());
        if (running < std::numeric_limits<double>::infinity()) {
            const double excess = score - running;
            if (!std::isnan(excess))
                out.worst_excess = std::max(out.worst_excess, excess);
            if (excess > allowance && out.pass) {
                out.pass = false;
                out.fail_index = j;
            }
        }
        running = std::min(running, score);
    }
    return out;
}

template <class Certificate>
[[nodiscard]] LyapunovTrace lyapunov_monitor(const Trajectory& traj, const TimeGrid& grid, const Certificate& cert,
                                             double slack = 1e-6) {
    return lyapunov_monitor(traj, grid, cert.p, cert.epsilon, slack);
}

// ------------------------------------------------------- certificate oracle

struct GridReport {
    double max_eigenvalue = -std::numeric_limits<double>::infinity();
    int segment = 0;  // 0 for breakpoint-level checks
    double alpha = 0.0;
    double delta = 0.0;
    std::string role;
    std::size_t evaluations = 0;

    [[nodiscard]] bool confirmed() const { return max_eigenvalue < 0.0; }
};

struct GridOptions {
    int alpha_points = 101;
    int delta_points = 11;  // geometric in [1/Delta, Delta]; endpoints always included
};

namespace detail {

inline double largest_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(es.eigenvalues().size() - 1);
}

inline void record(GridReport& r, double value, int k, double alpha, double delta, const std::string& role) {
    ++r.evaluations;
    if (value > r.max_eigenvalue || std::isnan(value)) {
        r.max_eigenvalue = std::isnan(value) ? std::numeric_limits<double>::infinity() : value;
        r.segment = k;
        r.alpha = alpha;
        r.delta = delta;
        r.role = role;
    }
}

inline std::vector<double> delta_grid(double big_delta, int points) {
    if (big_delta == 1.0 || points < 2)
        return {1.0};
    std::vector<double> out;
    const double span = std::log(big_delta);
    for (int i = 0; i < points; ++i) {
        const double f = -1.0 + 2.0 * i / (points - 1);
        out.push_back(std::exp(f * span));
    }
    out.front() = 1.0 / big_delta;
    out.back() = big_delta;
    return out;
}

/// max eig of <P(alpha)(A(alpha) + delta B(alpha))>_S + gamma (P_k - P_{k-1}) + eps_k P(alpha) over the grids.
inline GridReport scan(const TimeGrid& grid, const std::vector<Matrix>& a, const std::vector<Matrix>* b,
                       const std::vector<Matrix>& p, const DecayRates& eps, const std::vector<double>& deltas,
                       bool boundary_vertices, const GridOptions& opts) {
    if (p.size() != grid.size() || a.size() != grid.size())
        throw InputError("certificate and system disagree on the number of breakpoints");
    eps.check(grid.size());
    GridReport r;
    const auto sym = [](const Matrix& m) { return Matrix(m + m.transpose()); };

    const auto last = p.size() - 1;
    for (std::size_t k : {std::size_t{0}, last}) {
        const std::string role = k == 0 ? "boundary t_0" : "boundary t_N";
        record(r, largest_eigenvalue(sym(p[k] * a[k]) + eps[k] * p[k]), static_cast<int>(k), 0.0, 0.0, role);
        if (boundary_vertices && b)
            for (double d : {deltas.front(), deltas.back()})
                record(r, largest_eigenvalue(sym(p[k] * (a[k] + d * (*b)[k])) + eps[k] * p[k]), static_cast<int>(k),
                       0.0, d, role + " at delta vertex");
        if (last == 0)
            break;
    }

    const int g = std::max(2, opts.alpha_points);
    for (int k = 1; k <= grid.segments(); ++k) {
        const auto ks = static_cast<std::size_t>(k);
        const Matrix dp = grid.gamma(k) * (p[ks] - p[ks - 1]);
        for (int i = 0; i < g; ++i) {
            const double al = static_cast<double>(i) / (g - 1);
            const Matrix pa = al * p[ks] + (1.0 - al) * p[ks - 1];
            const Matrix aa = al * a[ks] + (1.0 - al) * a[ks - 1];
            const Matrix base = sym(pa * aa) + dp + eps[ks] * pa;
            if (!b) {
                record(r, largest_eigenvalue(base), k, al, 0.0, "segment");
                continue;
            }
            const Matrix pb = sym(pa * (al * (*b)[ks] + (1.0 - al) * (*b)[ks - 1]));
            for (double d : deltas)
                record(r, largest_eigenvalue(base + d * pb), k, al, d, "segment");
        }
    }

    for (std::size_t k = 0; k < p.size(); ++k) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (p[k] + p[k].transpose()), Eigen::EigenvaluesOnly);
        record(r, -es.eigenvalues()(0), static_cast<int>(k), 0.0, 0.0, "P_" + std::to_string(k) + " positive definite");
    }

    return r;
}

}  // namespace detail

[[nodiscard]] inline GridReport verify_certificate_grid(const NominalCertificate& cert, const PiecewiseLtvSystem& sys,
                                                        const GridOptions& opts = {}) {
    return detail::scan(sys.grid(), sys.a(), nullptr, cert.p, cert.epsilon, {0.0}, false, opts);
}

[[nodiscard]] inline GridReport verify_certificate_grid(const RobustCertificate& cert,
                                                        const UncertainPiecewiseLtvSystem& usys,
                                                        const GridOptions& opts = {}) {
    return detail::scan(usys.grid(), usys.base().a(), &usys.b(), cert.p, cert.epsilon,
                        detail::delta_grid(cert.delta, opts.delta_points), cert.strict_boundary, opts);
}

// ---------------------------------------------------------------- frozen time

[[nodiscard]] inline double spectral_abscissa(const Matrix& a) {
    if (a.rows() != a.cols() || a.rows() == 0)
        throw InputError("spectral abscissa needs a non-empty square matrix");
    if (!a.allFinite())
        throw InputError("spectral abscissa of a non-finite matrix");
    Eigen::EigenSolver<Matrix> es(a, false);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("eigenvalue computation failed");
    return es.eigenvalues().real().maxCoeff();
}

struct FrozenOptions {
    double cap = 1e6;
    double tol = 1e-4;  // relative
    bool signed_search = false;
};

struct FrozenEntry {
    int k = 0;
    double t = 0.0;
    double abscissa = 0.0;  // of A_k
    double lower = 0.0;     // A_k + delta B_k Hurwitz for delta in (lower, upper)
    double upper = 0.0;
    bool lower_capped = false;
    bool upper_capped = false;
    bool empty = false;  // A_k + B_k not Hurwitz
};

struct FrozenTimeReport {
    std::vector<FrozenEntry> entries;
    double lower = 0.0;  // intersection over k
    double upper = 0.0;
    bool empty = false;
};

namespace detail {

/// Last stable point walking from `stable` toward `unstable`, to relative tolerance.
template <class Stable>
double bisect_boundary(Stable&& is_stable, double stable, double unstable, double tol) {
    while (std::abs(unstable - stable) > tol * std::max(std::abs(stable), std::abs(unstable))) {
        const double mid = 0.5 * (stable + unstable);
        if (is_stable(mid))
            stable = mid;
        else
            unstable = mid;
    }
    return stable;
}

}  // namespace detail

/**
 * @brief Per-breakpoint interval of delta around 1 keeping A_k + delta B_k Hurwitz.
 *
 * Upward search doubles from 2 up to the cap. Downward search halves toward
 * 1/cap (reported as lower = 0 when capped), or with signed_search walks
 * 1 - 2^j down to -cap.
 */
[[nodiscard]] inline FrozenTimeReport frozen_time_margins(const UncertainPiecewiseLtvSystem& usys,
                                                          const FrozenOptions& opts = {}) {
    if (!(opts.cap > 1.0) || !(opts.tol > 0.0))
        throw InputError("frozen-time options: need cap > 1 and tol > 0");
    FrozenTimeReport rep;
    rep.lower = -std::numeric_limits<double>::infinity();
    rep.upper = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= usys.segments(); ++k) {
        const auto& a = usys.base().a(k);
        const auto& b = usys.b(k);
        auto stable = [&](double d) { return spectral_abscissa(a + d * b) < 0.0; };
        FrozenEntry e;
        e.k = k;
        e.t = usys.grid()[static_cast<std::size_t>(k)];
        e.abscissa = spectral_abscissa(a);
        if (!stable(1.0)) {
            e.empty = true;
            e.lower = e.upper = 1.0;
            rep.entries.push_back(e);
            rep.empty = true;
            continue;
        }

        double last = 1.0;
        e.upper_capped = true;
        for (double d = 2.0;; d *= 2.0) {
            d = std::min(d, opts.cap);
            if (!stable(d)) {
                e.upper = detail::bisect_boundary(stable, last, d, opts.tol);
                e.upper_capped = false;
                break;
            }
            last = d;
            if (d >= opts.cap) {
                e.upper = opts.cap;
                break;
            }
        }

        last = 1.0;
        e.lower_capped = true;
        if (opts.signed_search) {
            for (double step = 1.0;; step *= 2.0) {
                const double d = std::max(1.0 - step, -opts.cap);
                if (!stable(d)) {
                    e.lower = detail::bisect_boundary(stable, last, d, opts.tol);
                    e.lower_capped = false;
                    break;
                }
                last = d;
                if (d <= -opts.cap) {
                    e.lower = -opts.cap;
                    break;
                }
            }
        } else {
            for (double d = 0.5;; d *= 0.5) {
                d = std::max(d, 1.0 / opts.cap);
                if (!stable(d)) {
                    e.lower = detail::bisect_boundary(stable, last, d, opts.tol);
                    e.lower_capped = false;
                    break;
                }
                last = d;
                if (d <= 1.0 / opts.cap) {
                    e.lower = 0.0;
                    break;
                }
            }
        }
        rep.lower = std::max(rep.lower, e.lower);
        rep.upper = std::min(rep.upper, e.upper);
        rep.entries.push_back(e);
    }
    if (rep.empty || rep.lower >= rep.upper) {
        rep.empty = true;
        rep.lower = rep.upper = 1.0;
    }
    return rep;
}

}  // namespace ltvcert
