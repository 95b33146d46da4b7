#pragma once

/**
 * @file cert.hpp
 * @brief Assembly of the stability LMIs for piecewise LTV systems and
 *        packaging of solver output into certificates.
 *
 * The Lyapunov candidate is V = x' P(t) x with P(t) interpolated between
 * breakpoint matrices P_k exactly like A(t). On segment k,
 *
 *     Vdot + eps_k V = x' (alpha^2 M_k + 2 alpha L_k + N_k) x,
 *
 * and negativity for every alpha in [0, 1] is relaxed by the S-procedure with
 * multiplier Gamma_k and skew slack S_k into one 2n x 2n LMI. The robust form
 * repeats the construction in delta (multiplier Gamma_k, slack S_{1,k}) and
 * then in alpha on the 2n-stacked variable (multiplier Psi_k, slack S_{2,k}),
 * giving one 4n x 4n LMI per segment.
 */

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lmi.hpp"
#include "model.hpp"
#include "sdp.hpp"

namespace ltvcert {

/// Exponential decay rates eps_0..eps_N, one per breakpoint.
struct DecayRates {
    std::vector<double> epsilon;

    static constexpr double default_rate = 0.01;

    [[nodiscard]] static DecayRates uniform(std::size_t count, double rate = default_rate) {
        return DecayRates{std::vector<double>(count, rate)};
    }

    [[nodiscard]] double operator[](std::size_t k) const { return epsilon[k]; }
    [[nodiscard]] std::size_t size() const { return epsilon.size(); }

    [[nodiscard]] double min() const {
        double m = epsilon.front();
        for (double e : epsilon)
            m = std::min(m, e);
        return m;
    }

    void check(std::size_t breakpoints) const {
        if (epsilon.size() != breakpoints)
            throw InputError("expected " + std::to_string(breakpoints) + " decay rates, got " +
                             std::to_string(epsilon.size()));
        for (std::size_t k = 0; k < epsilon.size(); ++k)
            if (!std::isfinite(epsilon[k]) || !(epsilon[k] > 0.0))
                throw InputError("decay rate eps_" + std::to_string(k) + " must be positive");
    }
};

/// beta = (Delta + 1/Delta) / 2
[[nodiscard]] inline double beta_of_delta(double delta) {
    if (!(delta >= 1.0) || !std::isfinite(delta))
        throw InputError("Delta must be a finite value >= 1");
    return 0.5 * (delta + 1.0 / delta);
}

/// Inverse of beta_of_delta on [1, inf): Delta = beta + sqrt(beta^2 - 1).
[[nodiscard]] inline double delta_of_beta(double beta) {
    if (!(beta >= 1.0) || !std::isfinite(beta))
        throw InputError("beta must be a finite value >= 1");
    // (beta - 1)(beta + 1) avoids cancellation near beta = 1
    return beta + std::sqrt((beta - 1.0) * (beta + 1.0));
}

struct CertOptions {
    double rho = 1e4;              // P_k <= rho I normalization (also applied to multipliers)
    bool strict_boundary = false;  // robust only: vertex boundary LMIs with B_0 / B_N
    sdp::SolverOptions solver{};
};

struct NominalVariables {
    std::vector<lmi::MatrixVariable> p, gamma, s;
};

struct RobustVariables {
    std::vector<lmi::MatrixVariable> p, gamma, psi, s1, s2;
};

struct NominalLmi {
    lmi::LmiProblem problem;
    NominalVariables vars;
};

struct RobustLmi {
    lmi::LmiProblem problem;
    RobustVariables vars;
    double delta = 1.0;
    double beta = 1.0;
};

namespace detail {

using lmi::AffineMatrixExpr;

inline AffineMatrixExpr var(const lmi::MatrixVariable& v) { return AffineMatrixExpr::of(v); }

/// Quadratic-in-alpha coefficients of <P(alpha) F(alpha)>_S, with F interpolated
/// between f_prev and f_next. Returns (alpha^2 coefficient, half the alpha
/// coefficient, constant).
struct QuadraticCoefficients {
    AffineMatrixExpr second, first, zeroth;
};

inline QuadraticCoefficients interpolated_product(const lmi::MatrixVariable& p_next, const lmi::MatrixVariable& p_prev,
                                                  const Matrix& f_next, const Matrix& f_prev) {
    const auto pk = var(p_next), pk1 = var(p_prev);
    const auto cross = pk * f_prev + pk1 * f_next;
    return QuadraticCoefficients{
        lmi::sym(pk * f_next - cross + pk1 * f_prev),
        lmi::sym(0.5 * cross - pk1 * f_prev),
        lmi::sym(pk1 * f_prev),
    };
}

/// M_k, L_k, N_k (nominal) or M_{2,k}, M_{1,k}, M_{0,k} (robust): the A-part with
/// the dP/dt and eps-weighted P(t) contributions folded in.
inline QuadraticCoefficients lyapunov_coefficients(const lmi::MatrixVariable& p_next,
                                                   const lmi::MatrixVariable& p_prev, const Matrix& a_next,
                                                   const Matrix& a_prev, double eps, double gamma) {
    auto q = interpolated_product(p_next, p_prev, a_next, a_prev);
    const auto dp = var(p_next) - var(p_prev);
    q.first += (0.5 * eps) * dp;
    q.zeroth += gamma * dp + eps * var(p_prev);
    return q;
}

inline AffineMatrixExpr boundary_expr(const lmi::MatrixVariable& p, const Matrix& a, double eps) {
    return lmi::sym(var(p) * a) + eps * var(p);
}

inline void add_bound(lmi::LmiProblem& problem, const lmi::MatrixVariable& v, double rho) {
    const auto d = v.dim;
    if (v.kind == lmi::VariableKind::symmetric) {
        problem.add_constraint(AffineMatrixExpr(rho * Matrix::Identity(d, d)) - var(v), lmi::Sense::bound,
                               v.name + " <= rho I");
    } else {
        const auto rho_i = AffineMatrixExpr(rho * Matrix::Identity(d, d));
        problem.add_constraint(lmi::block({{rho_i, var(v)}, {std::nullopt, rho_i}}), lmi::Sense::bound,
                               "|" + v.name + "| <= rho");
    }
}

inline std::string indexed(const char* name, int k) { return std::string(name) + "_" + std::to_string(k); }

inline void check_inputs(const PiecewiseLtvSystem& sys, const DecayRates& eps) {
    eps.check(sys.grid().size());
}

}  // namespace detail

/**
 * @brief Nominal stability LMIs for a piecewise LTV system.
 *
 * Variables P_0..P_N, Gamma_1..Gamma_N (symmetric) and S_1..S_N (skew).
 * Constraints: P_k > 0; boundary decrease at t_0 and t_N; for each segment
 * Gamma_k > 0 and [[M_k - Gamma_k, L_k + Gamma_k/2 + S_k], [*, N_k]] < 0.
 */
[[nodiscard]] inline NominalLmi build_nominal(const PiecewiseLtvSystem& sys, const DecayRates& eps,
                                              const CertOptions& opts = {}) {
    using detail::var;
    using lmi::Sense;
    detail::check_inputs(sys, eps);
    const int n = sys.state_dim();
    const int segs = sys.segments();

    NominalLmi out;
    auto& pr = out.problem;
    auto& v = out.vars;
    for (int k = 0; k <= segs; ++k)
        v.p.push_back(pr.add_variable(lmi::VariableKind::symmetric, n, detail::indexed("P", k)));
    for (int k = 1; k <= segs; ++k) {
        v.gamma.push_back(pr.add_variable(lmi::VariableKind::symmetric, n, detail::indexed("Gamma", k)));
        v.s.push_back(pr.add_variable(lmi::VariableKind::skew, n, detail::indexed("S", k)));
    }

    for (int k = 0; k <= segs; ++k)
        pr.add_constraint(var(v.p[k]), Sense::positive_definite, detail::indexed("P", k) + " positive definite", k);
    pr.add_constraint(detail::boundary_expr(v.p[0], sys.a(0), eps[0]), Sense::negative_definite,
                      "boundary t_0 decrease", 0);
    if (segs > 0)
        pr.add_constraint(detail::boundary_expr(v.p[segs], sys.a(segs), eps[segs]), Sense::negative_definite,
                          "boundary t_N decrease", segs);

    for (int k = 1; k <= segs; ++k) {
        const auto& gamma = v.gamma[k - 1];
        const auto q = detail::lyapunov_coefficients(v.p[k], v.p[k - 1], sys.a(k), sys.a(k - 1), eps[k],
                                                     sys.grid().gamma(k));
        pr.add_constraint(var(gamma), Sense::positive_definite, detail::indexed("Gamma", k) + " positive definite", k);
        auto blk = lmi::block({{q.second - var(gamma), q.first + 0.5 * var(gamma) + var(v.s[k - 1])},
                               {std::nullopt, q.zeroth}});
        pr.add_constraint(std::move(blk), Sense::negative_definite,
                          "segment " + std::to_string(k) + ", nominal 2n block", k);
    }

    for (const auto& x : pr.variables())
        detail::add_bound(pr, x, opts.rho);
    return out;
}

/**
 * @brief Robust stability LMIs for delta in [1/Delta, Delta].
 *
 * Per segment the 4n x 4n block is ordered as the stacked vector
 * [alpha delta x; alpha x; delta x; x]:
 *
 *     R_k = [[Q2 - Psi,  Q1 + Psi/2 + S2],
 *            [   *    ,  Q0            ]]
 *
 * where Q(alpha) = alpha^2 Q2 + 2 alpha Q1 + Q0 is the delta-S-procedure matrix
 * [[-Gamma, Nc(alpha)/2 + beta Gamma + S1], [*, Mc(alpha) - Gamma]] (Gamma and
 * S1 only in Q0), Q2 = [[0, N2/2], [*, M2]], Q1 = [[0, N1/2], [*, M1]].
 */
[[nodiscard]] inline RobustLmi build_robust(const UncertainPiecewiseLtvSystem& usys, const DecayRates& eps,
                                            double delta, const CertOptions& opts = {}) {
    using detail::var;
    using lmi::AffineMatrixExpr;
    using lmi::Sense;
    const auto& sys = usys.base();
    detail::check_inputs(sys, eps);
    const double beta = beta_of_delta(delta);
    const int n = sys.state_dim();
    const int segs = sys.segments();

    RobustLmi out;
    out.delta = delta;
    out.beta = beta;
    auto& pr = out.problem;
    auto& v = out.vars;
    for (int k = 0; k <= segs; ++k)
        v.p.push_back(pr.add_variable(lmi::VariableKind::symmetric, n, detail::indexed("P", k)));
    for (int k = 1; k <= segs; ++k) {
        v.gamma.push_back(pr.add_variable(lmi::VariableKind::symmetric, n, detail::indexed("Gamma", k)));
        v.psi.push_back(pr.add_variable(lmi::VariableKind::symmetric, 2 * n, detail::indexed("Psi", k)));
        v.s1.push_back(pr.add_variable(lmi::VariableKind::skew, n, detail::indexed("S1", k)));
        v.s2.push_back(pr.add_variable(lmi::VariableKind::skew, 2 * n, detail::indexed("S2", k)));
    }

    for (int k = 0; k <= segs; ++k)
        pr.add_constraint(var(v.p[k]), Sense::positive_definite, detail::indexed("P", k) + " positive definite", k);

    auto add_boundary = [&](int k, const char* where) {
        pr.add_constraint(detail::boundary_expr(v.p[k], sys.a(k), eps[k]), Sense::negative_definite,
                          std::string("boundary ") + where + " decrease", k);
        if (!opts.strict_boundary)
            return;
        for (double d : {1.0 / delta, delta})
            pr.add_constraint(detail::boundary_expr(v.p[k], sys.a(k) + d * usys.b(k), eps[k]),
                              Sense::negative_definite,
                              std::string("boundary ") + where + " decrease at delta vertex", k);
    };
    add_boundary(0, "t_0");
    if (segs > 0)
        add_boundary(segs, "t_N");

    const Matrix zero_n = Matrix::Zero(n, n);
    for (int k = 1; k <= segs; ++k) {
        const auto& gamma = v.gamma[k - 1];
        const auto& psi = v.psi[k - 1];
        const auto m = detail::lyapunov_coefficients(v.p[k], v.p[k - 1], sys.a(k), sys.a(k - 1), eps[k],
                                                     sys.grid().gamma(k));
        const auto nq = detail::interpolated_product(v.p[k], v.p[k - 1], usys.b(k), usys.b(k - 1));

        const auto z = AffineMatrixExpr(zero_n);
        const auto q2 = lmi::block({{z, 0.5 * nq.second}, {std::nullopt, m.second}});
        const auto q1 = lmi::block({{z, 0.5 * nq.first}, {std::nullopt, m.first}});
        const auto q0 = lmi::block({{-var(gamma), 0.5 * nq.zeroth + beta * var(gamma) + var(v.s1[k - 1])},
                                    {std::nullopt, m.zeroth - var(gamma)}});
        auto blk = lmi::block({{q2 - var(psi), q1 + 0.5 * var(psi) + var(v.s2[k - 1])}, {std::nullopt, q0}});

        pr.add_constraint(var(gamma), Sense::positive_definite, detail::indexed("Gamma", k) + " positive definite", k);
        pr.add_constraint(var(psi), Sense::positive_definite, detail::indexed("Psi", k) + " positive definite", k);
        pr.add_constraint(std::move(blk), Sense::negative_definite,
                          "segment " + std::to_string(k) + ", robust 4n block", k);
    }

    for (const auto& x : pr.variables())
        detail::add_bound(pr, x, opts.rho);
    return out;
}

/// Smallest eigenvalue over all non-bound constraints, sign-normalized.
struct ConstraintCheck {
    double margin = 0.0;
    std::size_t worst = 0;  // constraint index
    std::vector<double> min_eigenvalues;
};

[[nodiscard]] inline ConstraintCheck check_constraints(const lmi::LmiProblem& problem,
                                                       const lmi::Assignment& values) {
    ConstraintCheck out;
    out.margin = std::numeric_limits<double>::infinity();
    const auto& cs = problem.constraints();
    out.min_eigenvalues.resize(cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) {
        const Matrix v = lmi::normalized_value(cs[i], values);
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (v + v.transpose()), Eigen::EigenvaluesOnly);
        out.min_eigenvalues[i] = es.eigenvalues()(0);
        if (cs[i].sense != lmi::Sense::bound && out.min_eigenvalues[i] < out.margin) {
            out.margin = out.min_eigenvalues[i];
            out.worst = i;
        }
    }
    return out;
}

struct SolverSummary {
    std::string status;
    int iterations = 0;
    bool converged = false;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double relative_gap = 0.0;
    double seconds = 0.0;
    std::string message;
};

[[nodiscard]] inline SolverSummary summarize(const sdp::FeasibilityResult& r) {
    return SolverSummary{sdp::to_string(r.status), r.stats.iterations,   r.stats.converged,
                         r.stats.primal_objective, r.stats.dual_objective, r.stats.relative_gap,
                         r.stats.seconds,          r.stats.message};
}

struct NominalCertificate {
    std::vector<Matrix> p;      // N + 1
    std::vector<Matrix> gamma;  // N
    std::vector<Matrix> s;      // N, skew
    DecayRates epsilon;
    double mu_star = 0.0;
    SolverSummary solver;
};

struct RobustCertificate {
    std::vector<Matrix> p;      // N + 1, n x n
    std::vector<Matrix> gamma;  // N, n x n
    std::vector<Matrix> psi;    // N, 2n x 2n
    std::vector<Matrix> s1;     // N, n x n skew
    std::vector<Matrix> s2;     // N, 2n x 2n skew
    DecayRates epsilon;
    double delta = 1.0;
    double beta = 1.0;
    double mu_star = 0.0;
    bool strict_boundary = false;
    SolverSummary solver;
};

template <class Certificate>
struct CertifyOutcome {
    sdp::Status status = sdp::Status::inconclusive;
    std::optional<Certificate> certificate;
    double mu_star = 0.0;
    std::string most_violated;  // label of the constraint with the smallest margin
    int most_violated_segment = -1;
    SolverSummary solver;
};

[[nodiscard]] inline lmi::Assignment assignment_of(const NominalLmi& lmi, const NominalCertificate& c) {
    lmi::Assignment a;
    for (std::size_t k = 0; k < lmi.vars.p.size(); ++k)
        a[lmi.vars.p[k].id] = c.p.at(k);
    for (std::size_t k = 0; k < lmi.vars.gamma.size(); ++k) {
        a[lmi.vars.gamma[k].id] = c.gamma.at(k);
        a[lmi.vars.s[k].id] = c.s.at(k);
    }
    return a;
}

[[nodiscard]] inline lmi::Assignment assignment_of(const RobustLmi& lmi, const RobustCertificate& c) {
    lmi::Assignment a;
    for (std::size_t k = 0; k < lmi.vars.p.size(); ++k)
        a[lmi.vars.p[k].id] = c.p.at(k);
    for (std::size_t k = 0; k < lmi.vars.gamma.size(); ++k) {
        a[lmi.vars.gamma[k].id] = c.gamma.at(k);
        a[lmi.vars.psi[k].id] = c.psi.at(k);
        a[lmi.vars.s1[k].id] = c.s1.at(k);
        a[lmi.vars.s2[k].id] = c.s2.at(k);
    }
    return a;
}

namespace detail {

template <class Lmi, class Certificate, class Pack>
CertifyOutcome<Certificate> run(const Lmi& lmi, const CertOptions& opts, Pack&& pack) {
    const auto form = lmi::lower(lmi.problem, true);
    const auto res = sdp::solve(form, opts.solver);

    CertifyOutcome<Certificate> out;
    out.status = res.status;
    out.solver = summarize(res);
    const auto values = lmi.problem.unstack(res.y);
    const auto check = check_constraints(lmi.problem, values);
    const auto& worst = lmi.problem.constraints()[check.worst];
    out.most_violated = worst.label;
    out.most_violated_segment = worst.segment;
    out.mu_star = res.status == sdp::Status::feasible ? check.margin : res.mu_star;

    if (res.status == sdp::Status::feasible) {
        // re-established from the matrices, not from the solver's numbers
        if (!(check.margin > opts.solver.tau_feas)) {
            out.status = sdp::Status::inconclusive;
            out.solver.message = "solver point failed re-evaluation";
            return out;
        }
        Certificate c = pack(values);
        c.mu_star = check.margin;
        c.solver = out.solver;
        out.certificate = std::move(c);
    }
    return out;
}

inline std::vector<Matrix> collect(const lmi::Assignment& values, const std::vector<lmi::MatrixVariable>& vars) {
    std::vector<Matrix> out;
    out.reserve(vars.size());
    for (const auto& v : vars)
        out.push_back(values.at(v.id));
    return out;
}

}  // namespace detail

/// Solves the nominal LMIs; a returned certificate has been re-checked constraint by constraint.
[[nodiscard]] inline CertifyOutcome<NominalCertificate> solve_nominal(const PiecewiseLtvSystem& sys,
                                                                      const DecayRates& eps,
                                                                      const CertOptions& opts = {}) {
    const auto lmi = build_nominal(sys, eps, opts);
    return detail::run<NominalLmi, NominalCertificate>(lmi, opts, [&](const lmi::Assignment& values) {
        NominalCertificate c;
        c.p = detail::collect(values, lmi.vars.p);
        c.gamma = detail::collect(values, lmi.vars.gamma);
        c.s = detail::collect(values, lmi.vars.s);
        c.epsilon = eps;
        return c;
    });
}

[[nodiscard]] inline CertifyOutcome<RobustCertificate> solve_robust(const UncertainPiecewiseLtvSystem& usys,
                                                                    const DecayRates& eps, double delta,
                                                                    const CertOptions& opts = {}) {
    const auto lmi = build_robust(usys, eps, delta, opts);
    return detail::run<RobustLmi, RobustCertificate>(lmi, opts, [&](const lmi::Assignment& values) {
        RobustCertificate c;
        c.p = detail::collect(values, lmi.vars.p);
        c.gamma = detail::collect(values, lmi.vars.gamma);
        c.psi = detail::collect(values, lmi.vars.psi);
        c.s1 = detail::collect(values, lmi.vars.s1);
        c.s2 = detail::collect(values, lmi.vars.s2);
        c.epsilon = eps;
        c.delta = lmi.delta;
        c.beta = lmi.beta;
        c.strict_boundary = opts.strict_boundary;
        return c;
    });
}

/// Re-evaluates a stored certificate against its LMIs (multipliers included).
[[nodiscard]] inline ConstraintCheck recheck(const PiecewiseLtvSystem& sys, const NominalCertificate& c,
                                             const CertOptions& opts = {}) {
    const auto lmi = build_nominal(sys, c.epsilon, opts);
    return check_constraints(lmi.problem, assignment_of(lmi, c));
}

[[nodiscard]] inline ConstraintCheck recheck(const UncertainPiecewiseLtvSystem& usys, const RobustCertificate& c,
                                             CertOptions opts = {}) {
    opts.strict_boundary = c.strict_boundary;
    const auto lmi = build_robust(usys, c.epsilon, c.delta, opts);
    return check_constraints(lmi.problem, assignment_of(lmi, c));
}

}  // namespace ltvcert
