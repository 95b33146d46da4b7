#pragma once

/**
 * @file margin.hpp
 * @brief Largest certified uncertainty interval [1/Delta, Delta].
 *
 * Feasibility of the robust LMIs is monotone in Delta, so the search brackets
 * by doubling and then bisects. Every probe is recorded.
 */

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cert.hpp"

namespace ltvcert {

[[nodiscard]] inline CertOptions strict_cert_options() {
    CertOptions c;
    c.strict_boundary = true;
    return c;
}

struct MarginOptions {
    double delta_max = 1e6;
    double tol_bis = 1e-3;  // relative bracket width
    double eta = 1e-6;      // first probe at 1 + eta
    bool verify = true;
    // vertex boundary LMIs on by default
    CertOptions cert = strict_cert_options();
};

struct Probe {
    double delta = 1.0;
    double beta = 1.0;
    sdp::Status status = sdp::Status::inconclusive;
    double mu_star = 0.0;
    double seconds = 0.0;
    std::string phase;  // initial, bracket, bisect, verify
    bool flagged = false;  // inconclusive, counted as infeasible
};

struct MarginResult {
    double delta_star = 1.0;
    double beta_star = 1.0;
    RobustCertificate certificate;
    std::vector<Probe> probes;
    bool uncertainty_inactive = false;
    bool capped = false;         // bracket reached delta_max
    bool verified = false;       // both post-bisection re-solves agree
    bool any_inconclusive = false;
    std::string note;

    [[nodiscard]] double lower() const { return 1.0 / delta_star; }
    [[nodiscard]] double upper() const { return delta_star; }
};

/// True when no feasible probe lies above an infeasible one (slack `tol` relative).
[[nodiscard]] inline bool monotone_consistent(const std::vector<Probe>& probes, double tol = 0.0) {
    double best_feasible = 0.0;
    double first_infeasible = std::numeric_limits<double>::infinity();
    for (const auto& p : probes) {
        if (p.status == sdp::Status::feasible)
            best_feasible = std::max(best_feasible, p.delta);
        else if (p.status == sdp::Status::infeasible)
            first_infeasible = std::min(first_infeasible, p.delta);
    }
    return best_feasible <= first_infeasible * (1.0 + tol);
}

/**
 * @brief Maximizes Delta subject to the robust LMIs.
 *
 * Returns nothing when Delta = 1 + eta is not certified. When B vanishes the
 * search is skipped: Delta* = delta_max with the 1 + eta certificate relabelled.
 */
[[nodiscard]] inline std::optional<MarginResult> max_uncertainty(const UncertainPiecewiseLtvSystem& usys,
                                                                 const DecayRates& eps,
                                                                 const MarginOptions& opts = {}) {
    if (!(opts.delta_max > 1.0) || !(opts.tol_bis > 0.0) || !(opts.eta > 0.0))
        throw InputError("margin options: need delta_max > 1, tol_bis > 0, eta > 0");

    MarginResult out;
    std::optional<RobustCertificate> best;

    auto probe = [&](double delta, const char* phase) {
        const auto r = solve_robust(usys, eps, delta, opts.cert);
        Probe p;
        p.delta = delta;
        p.beta = beta_of_delta(delta);
        p.status = r.status;
        p.mu_star = r.mu_star;
        p.seconds = r.solver.seconds;
        p.phase = phase;
        p.flagged = r.status == sdp::Status::inconclusive;
        out.any_inconclusive = out.any_inconclusive || p.flagged;
        out.probes.push_back(p);
        if (r.status == sdp::Status::feasible) {
            if (!best || delta > best->delta)
                best = *r.certificate;
            return true;
        }
        return false;
    };

    if (!probe(1.0 + opts.eta, "initial"))
        return std::nullopt;

    if (usys.uncertainty_inactive()) {
        out.uncertainty_inactive = true;
        out.capped = true;
        out.verified = true;
        out.delta_star = opts.delta_max;
        out.beta_star = beta_of_delta(opts.delta_max);
        out.certificate = *best;
        out.certificate.delta = out.delta_star;
        out.certificate.beta = out.beta_star;
        out.note = "uncertainty inactive: B is zero, every delta is certified";
        return out;
    }

    double lo = 1.0 + opts.eta;
    double hi = 0.0;
    for (double d = 2.0;; d *= 2.0) {
        d = std::min(d, opts.delta_max);
        if (probe(d, "bracket")) {
            lo = d;
            if (d >= opts.delta_max) {
                out.capped = true;
                break;
            }
        } else {
            hi = d;
            break;
        }
    }

    if (!out.capped) {
        while ((hi - lo) > opts.tol_bis * lo) {
            const double mid = 0.5 * (lo + hi);
            if (probe(mid, "bisect"))
                lo = mid;
            else
                hi = mid;
        }
    }

    out.delta_star = best->delta;
    out.beta_star = beta_of_delta(out.delta_star);
    out.certificate = *best;

    if (opts.verify) {
        const double below = std::max(1.0, out.delta_star * (1.0 - opts.tol_bis));
        const double above = out.delta_star * (1.0 + 4.0 * opts.tol_bis);
        // the re-solves must not move delta_star
        const auto keep = best;
        const bool below_ok = probe(below, "verify");
        bool above_ok = true;
        if (!out.capped && above <= opts.delta_max)
            above_ok = !probe(above, "verify");
        best = keep;
        out.verified = below_ok && above_ok;
        if (!below_ok)
            out.note = "verification: re-solve below delta* was not feasible";
        else if (!above_ok)
            out.note = "verification: re-solve above delta* was feasible";
    }
    if (out.capped && out.note.empty())
        out.note = "bracket reached delta_max";
    return out;
}

}  // namespace ltvcert
