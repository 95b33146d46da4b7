#pragma once

/**
 * @file sdp.hpp
 * @brief Primal-dual interior-point solver for the maximize-margin form.
 *
 * The standard form is solved as the dual of a block-diagonal SDP
 *
 *     max  b'y   s.t.  Z = C - sum_i y_i A_i  >= 0
 *     min  <C,X> s.t.  <A_i, X> = b_i,  X >= 0
 *
 * with y = (decision scalars, mu) and b = e_mu. Iterates follow an infeasible
 * path-following scheme with Nesterov-Todd scaling and a Mehrotra
 * predictor-corrector. The solver's own numbers are never the verdict: every
 * returned point is re-evaluated by direct eigenvalue computation.
 */

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "conic.hpp"

namespace ltvcert::sdp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Status { feasible, infeasible, inconclusive };

[[nodiscard]] inline const char* to_string(Status s) {
    switch (s) {
        case Status::feasible: return "feasible";
        case Status::infeasible: return "infeasible";
        case Status::inconclusive: return "inconclusive";
    }
    return "?";
}

struct SolverOptions {
    double tau_feas = 1e-7;       // strict-feasibility threshold on mu
    double gap_tolerance = 1e-9;  // relative duality gap
    double infeasibility_tolerance = 1e-9;
    int max_iterations = 200;
    double step_fraction = 0.95;
};

struct SolverStats {
    int iterations = 0;
    bool converged = false;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double relative_gap = std::numeric_limits<double>::infinity();
    double primal_infeasibility = std::numeric_limits<double>::infinity();
    double dual_infeasibility = std::numeric_limits<double>::infinity();
    double seconds = 0.0;
    std::string message;
};

struct FeasibilityResult {
    Status status = Status::inconclusive;
    double mu_star = -std::numeric_limits<double>::infinity();
    Vector y;                                 // decision scalars (without mu)
    std::vector<double> block_min_eigenvalues;  // re-evaluated, scaled units, mu excluded
    std::size_t worst_block = 0;              // shifted block with the smallest eigenvalue
    SolverStats stats;
};

namespace detail {

struct Block {
    int dim = 0;
    double scale = 1.0;
    bool shifted = true;
    Matrix c;
    std::vector<std::pair<int, Matrix>> a;  // (index into y, A_i), sorted by index
};

struct Factors {
    Matrix g, g_inv, w;
    Vector d;
};

inline double inner(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Largest step in (0, inf] keeping x + step * dx positive semidefinite.
inline double max_step(const Eigen::LLT<Matrix>& chol, const Matrix& dx) {
    const Matrix& l = chol.matrixL();
    Matrix t = l.triangularView<Eigen::Lower>().solve(dx);
    t = l.triangularView<Eigen::Lower>().solve(t.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(t), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0);
    return lmin < 0.0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/**
 * @brief Solves the maximize-margin problem and classifies the result.
 *
 * feasible: re-evaluated margin > tau_feas (sound whatever the convergence
 * state). infeasible: the method converged and the optimal margin is below
 * tau_feas. Anything else, including numerical breakdown, is inconclusive.
 */
[[nodiscard]] inline FeasibilityResult solve(const StandardConicForm& form, const SolverOptions& opts = {}) {
    using detail::inner;
    using detail::symmetrize;
    const auto start = std::chrono::steady_clock::now();
    form.check();

    const int m = form.num_scalars;
    const int mu_index = m;
    const int ny = form.has_margin ? m + 1 : m;

    std::vector<detail::Block> blocks;
    blocks.reserve(form.blocks.size());
    for (const auto& fb : form.blocks) {
        detail::Block b;
        b.dim = fb.dim;
        b.shifted = fb.shifted;
        b.c = smat(fb.constant);
        b.scale = block_scale(fb);
        b.c /= b.scale;
        for (const auto& [j, coef] : fb.coefficients)
            b.a.emplace_back(j, -smat(coef) / b.scale);
        if (form.has_margin && fb.shifted)
            b.a.emplace_back(mu_index, Matrix::Identity(fb.dim, fb.dim));
        blocks.push_back(std::move(b));
    }
    const std::size_t nb = blocks.size();

    Vector bvec = Vector::Zero(ny);
    if (form.has_margin)
        bvec[mu_index] = 1.0;

    auto a_op = [&](const std::vector<Matrix>& x) {
        Vector r = Vector::Zero(ny);
        for (std::size_t l = 0; l < nb; ++l)
            for (const auto& [i, ai] : blocks[l].a)
                r[i] += inner(ai, x[l]);
        return r;
    };
    auto a_adj = [&](const Vector& y, std::size_t l) {
        Matrix out = Matrix::Zero(blocks[l].dim, blocks[l].dim);
        for (const auto& [i, ai] : blocks[l].a)
            out += y[i] * ai;
        return out;
    };

    // starting point
    std::vector<Matrix> x(nb), z(nb);
    double total_dim = 0.0;
    for (std::size_t l = 0; l < nb; ++l) {
        const auto& b = blocks[l];
        const double sd = std::sqrt(static_cast<double>(b.dim));
        double xi = std::max(10.0, sd), zeta = std::max({10.0, sd, b.c.norm()});
        for (const auto& [i, ai] : b.a) {
            const double an = ai.norm();
            xi = std::max(xi, sd * (1.0 + std::abs(bvec[i])) / (1.0 + an));
            zeta = std::max(zeta, an);
        }
        x[l] = xi * Matrix::Identity(b.dim, b.dim);
        z[l] = zeta * Matrix::Identity(b.dim, b.dim);
        total_dim += b.dim;
    }
    Vector y = Vector::Zero(ny);

    double c_norm = 0.0;
    for (const auto& b : blocks)
        c_norm += b.c.squaredNorm();
    c_norm = std::sqrt(c_norm);

    FeasibilityResult result;
    SolverStats& st = result.stats;
    std::vector<detail::Factors> fac(nb);
    std::vector<Eigen::LLT<Matrix>> chol_x(nb), chol_z(nb);
    std::vector<Matrix> rd(nb);
    int stall = 0;

    for (int iter = 0;; ++iter) {
        st.iterations = iter;
        // residuals
        const Vector rp = bvec - a_op(x);
        double rd_norm = 0.0, gap = 0.0, pobj = 0.0;
        for (std::size_t l = 0; l < nb; ++l) {
            rd[l] = blocks[l].c - z[l] - a_adj(y, l);
            rd_norm += rd[l].squaredNorm();
            gap += inner(x[l], z[l]);
            pobj += inner(blocks[l].c, x[l]);
        }
        rd_norm = std::sqrt(rd_norm);
        const double dobj = bvec.dot(y);
        st.primal_objective = pobj;
        st.dual_objective = dobj;
        st.relative_gap = gap / (1.0 + std::abs(pobj) + std::abs(dobj));
        st.primal_infeasibility = rp.norm() / (1.0 + bvec.norm());
        st.dual_infeasibility = rd_norm / (1.0 + c_norm);

        if (st.relative_gap <= opts.gap_tolerance && st.primal_infeasibility <= opts.infeasibility_tolerance &&
            st.dual_infeasibility <= opts.infeasibility_tolerance) {
            st.converged = true;
            st.message = "converged";
            break;
        }
        if (iter >= opts.max_iterations) {
            st.message = "iteration limit";
            break;
        }
        const double mu = gap / total_dim;

        // Nesterov-Todd scaling per block
        bool breakdown = false;
        for (std::size_t l = 0; l < nb && !breakdown; ++l) {
            chol_x[l].compute(x[l]);
            chol_z[l].compute(z[l]);
            if (chol_x[l].info() != Eigen::Success || chol_z[l].info() != Eigen::Success) {
                breakdown = true;
                break;
            }
            const Matrix lx = chol_x[l].matrixL();
            const Matrix lz = chol_z[l].matrixL();
            Eigen::JacobiSVD<Matrix> svd(lz.transpose() * lx, Eigen::ComputeFullU | Eigen::ComputeFullV);
            const Vector s = svd.singularValues();
            if (s.minCoeff() <= 0.0) {
                breakdown = true;
                break;
            }
            auto& f = fac[l];
            f.d = s;
            f.g = lx * svd.matrixV() * s.cwiseSqrt().cwiseInverse().asDiagonal();
            const Matrix lx_inv = lx.triangularView<Eigen::Lower>().solve(Matrix::Identity(lx.rows(), lx.cols()));
            f.g_inv = s.cwiseSqrt().asDiagonal() * svd.matrixV().transpose() * lx_inv;
            f.w = symmetrize(f.g * f.g.transpose());
        }
        if (breakdown) {
            st.message = "numerical breakdown (lost positive definiteness)";
            break;
        }

        // Schur complement M_ij = sum_l <A_i, W A_j W>
        std::vector<Eigen::Triplet<double>> trip;
        for (std::size_t l = 0; l < nb; ++l) {
            const auto& b = blocks[l];
            const auto& w = fac[l].w;
            std::vector<Matrix> wajw;
            wajw.reserve(b.a.size());
            for (const auto& [j, aj] : b.a)
                wajw.push_back(w * aj * w);
            for (std::size_t q = 0; q < b.a.size(); ++q)
                for (std::size_t p = 0; p <= q; ++p) {
                    const double v = inner(b.a[p].second, wajw[q]);
                    const int i = b.a[p].first, j = b.a[q].first;
                    trip.emplace_back(std::max(i, j), std::min(i, j), v);
                }
        }
        Eigen::SparseMatrix<double> schur(ny, ny);
        schur.setFromTriplets(trip.begin(), trip.end());
        Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower> llt;
        llt.compute(schur);
        if (llt.info() != Eigen::Success) {
            double dmax = 0.0;
            for (int i = 0; i < ny; ++i)
                dmax = std::max(dmax, schur.coeff(i, i));
            for (double reg : {1e-14, 1e-12, 1e-10}) {
                Eigen::SparseMatrix<double> shifted = schur;
                for (int i = 0; i < ny; ++i)
                    shifted.coeffRef(i, i) += reg * std::max(1.0, dmax);
                llt.compute(shifted);
                if (llt.info() == Eigen::Success)
                    break;
            }
            if (llt.info() != Eigen::Success) {
                st.message = "numerical breakdown (Schur complement not positive definite)";
                break;
            }
        }

        std::vector<Matrix> w_rd_w(nb);
        for (std::size_t l = 0; l < nb; ++l)
            w_rd_w[l] = fac[l].w * rd[l] * fac[l].w;
        const Vector a_wrdw = a_op(w_rd_w);

        auto direction = [&](const std::vector<Matrix>& rc, std::vector<Matrix>& dx, Vector& dy,
                             std::vector<Matrix>& dz) {
            const Vector rhs = rp - a_op(rc) + a_wrdw;
            dy = llt.solve(rhs);
            for (std::size_t l = 0; l < nb; ++l) {
                dz[l] = symmetrize(rd[l] - a_adj(dy, l));
                dx[l] = symmetrize(rc[l] - fac[l].w * dz[l] * fac[l].w);
            }
        };
        auto steps = [&](const std::vector<Matrix>& dx, const std::vector<Matrix>& dz) {
            double ap = std::numeric_limits<double>::infinity(), ad = ap;
            for (std::size_t l = 0; l < nb; ++l) {
                ap = std::min(ap, detail::max_step(chol_x[l], dx[l]));
                ad = std::min(ad, detail::max_step(chol_z[l], dz[l]));
            }
            return std::pair{ap, ad};
        };

        // predictor
        std::vector<Matrix> rc(nb), dx(nb), dz(nb);
        Vector dy;
        for (std::size_t l = 0; l < nb; ++l)
            rc[l] = -x[l];
        direction(rc, dx, dy, dz);
        auto [ap_max, ad_max] = steps(dx, dz);
        const double ap_aff = std::min(1.0, ap_max), ad_aff = std::min(1.0, ad_max);
        double gap_aff = 0.0;
        for (std::size_t l = 0; l < nb; ++l)
            gap_aff += inner(x[l] + ap_aff * dx[l], z[l] + ad_aff * dz[l]);
        const double mu_aff = gap_aff / total_dim;
        const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

        // corrector
        for (std::size_t l = 0; l < nb; ++l) {
            const auto& f = fac[l];
            const Matrix dxs = f.g_inv * dx[l] * f.g_inv.transpose();
            const Matrix dzs = f.g.transpose() * dz[l] * f.g;
            Matrix rs = -(dxs * dzs + dzs * dxs);
            rs.diagonal().array() += 2.0 * sigma * mu;
            rs.diagonal() -= 2.0 * f.d.cwiseAbs2();
            for (int i = 0; i < rs.rows(); ++i)
                for (int j = 0; j < rs.cols(); ++j)
                    rs(i, j) /= (f.d[i] + f.d[j]);
            rc[l] = symmetrize(f.g * rs * f.g.transpose());
        }
        direction(rc, dx, dy, dz);
        std::tie(ap_max, ad_max) = steps(dx, dz);
        const double ap = std::min(1.0, opts.step_fraction * ap_max);
        const double ad = std::min(1.0, opts.step_fraction * ad_max);

        for (std::size_t l = 0; l < nb; ++l) {
            x[l] = symmetrize(x[l] + ap * dx[l]);
            z[l] = symmetrize(z[l] + ad * dz[l]);
        }
        y += ad * dy;

        stall = (ap < 1e-8 && ad < 1e-8) ? stall + 1 : 0;
        if (stall >= 5) {
            st.iterations = iter + 1;
            st.message = "stalled";
            break;
        }
    }

    // re-validation from the returned point
    result.y = y.head(m);
    const double mu_iter = form.has_margin ? y[mu_index] : 0.0;
    double true_margin = std::numeric_limits<double>::infinity();
    result.block_min_eigenvalues.resize(nb);
    for (std::size_t l = 0; l < nb; ++l) {
        const Matrix v = form.block_value(l, result.y, 0.0) / blocks[l].scale;
        Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(v), Eigen::EigenvaluesOnly);
        const double lmin = es.eigenvalues()(0);
        result.block_min_eigenvalues[l] = lmin;
        if (blocks[l].shifted && lmin < true_margin) {
            true_margin = lmin;
            result.worst_block = l;
        }
    }
    if (!std::isfinite(true_margin))
        true_margin = std::numeric_limits<double>::infinity();  // no shifted blocks

    if (y.allFinite() && true_margin > opts.tau_feas) {
        result.status = Status::feasible;
        result.mu_star = true_margin;
    } else if (form.has_margin && st.converged && std::max(mu_iter, st.primal_objective) < opts.tau_feas) {
        result.status = Status::infeasible;
        result.mu_star = mu_iter;
    } else {
        result.status = Status::inconclusive;
        result.mu_star = form.has_margin ? mu_iter : true_margin;
        if (st.converged)
            st.message = "converged but margin is within tolerance of the feasibility threshold";
    }
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace ltvcert::sdp
