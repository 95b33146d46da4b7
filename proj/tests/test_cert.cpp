#include <random>

#include <gtest/gtest.h>

#include <ltvcert/cert.hpp>

#include "support/oracles.hpp"

using namespace ltvcert;
using oracle::Matrix;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

PiecewiseLtvSystem scalar_system(std::vector<double> t, std::vector<double> a) {
    std::vector<Matrix> am;
    for (double v : a)
        am.push_back(scalar(v));
    return make_system({std::move(t), std::move(am), std::nullopt, std::nullopt});
}

UncertainPiecewiseLtvSystem scalar_uncertain(double a, double b) {
    return make_uncertain_system({{0.0, 1.0}, {scalar(a), scalar(a)}, std::vector<Matrix>{scalar(b), scalar(b)},
                                  std::nullopt});
}

UncertainPiecewiseLtvSystem random_uncertain(std::mt19937_64& rng, int n, int segs) {
    std::vector<double> t{0.0};
    std::uniform_real_distribution<double> width(0.3, 2.0);
    std::vector<Matrix> a, b;
    for (int k = 0; k <= segs; ++k) {
        if (k > 0)
            t.push_back(t.back() + width(rng));
        a.push_back(oracle::random_matrix(rng, n, n));
        b.push_back(oracle::random_matrix(rng, n, n));
    }
    return make_uncertain_system({t, a, b, std::nullopt});
}

lmi::Assignment random_assignment(const lmi::LmiProblem& pr, std::mt19937_64& rng) {
    lmi::Assignment a;
    for (const auto& v : pr.variables())
        a[v.id] = v.kind == lmi::VariableKind::symmetric ? oracle::random_symmetric(rng, v.dim)
                                                         : oracle::random_skew(rng, v.dim);
    return a;
}

Matrix stack2(const Matrix& tl, const Matrix& tr, const Matrix& br) {
    const auto n = tl.rows();
    Matrix m(2 * n, 2 * n);
    m << tl, tr, tr.transpose(), br;
    return m;
}

}  // namespace

TEST(BetaDelta, KnownValues) {
    EXPECT_EQ(beta_of_delta(1.0), 1.0);
    EXPECT_EQ(delta_of_beta(1.0), 1.0);
    EXPECT_NEAR(delta_of_beta(1.25), 2.0, 1e-15);
    EXPECT_NEAR(beta_of_delta(4.5956), 2.40659, 1e-5);
    EXPECT_NEAR(1.0 / 4.5956, 0.2176, 5e-5);
    for (double d : {1.0, 1.01, 2.0, 4.5956, 100.0})
        EXPECT_NEAR(delta_of_beta(beta_of_delta(d)), d, 1e-12 * d);
    EXPECT_THROW((void)beta_of_delta(0.5), InputError);
    EXPECT_THROW((void)delta_of_beta(0.99), InputError);
}

TEST(BetaDelta, StrictlyIncreasing) {
    double prev = 0.0;
    for (double d = 1.0; d < 50.0; d *= 1.3) {
        const double b = beta_of_delta(d);
        EXPECT_GT(b, prev);
        prev = b;
    }
}

TEST(BuildNominal, SingleBreakpointWitness) {
    const auto sys = make_system({{0.0}, {-Matrix::Identity(2, 2)}, std::nullopt, std::nullopt});
    const auto lmi = build_nominal(sys, DecayRates::uniform(1, 1.0));
    const auto& v = lmi.vars;
    ASSERT_EQ(v.p.size(), 1u);
    EXPECT_TRUE(v.gamma.empty());
    const lmi::Assignment witness{{v.p[0].id, Matrix::Identity(2, 2)}};
    const auto& boundary = oracle::find_constraint(lmi.problem, "boundary t_0 decrease");
    EXPECT_TRUE(boundary.expr.evaluate(witness).isApprox(-Matrix::Identity(2, 2)));
    EXPECT_THROW((void)oracle::find_constraint(lmi.problem, "boundary t_N decrease"), std::out_of_range);
    EXPECT_NEAR(check_constraints(lmi.problem, witness).margin, 1.0, 1e-15);
}

TEST(BuildNominal, RejectsBadInputs) {
    const auto sys = scalar_system({0.0, 1.0}, {-1.0, -2.0});
    EXPECT_THROW((void)build_nominal(sys, DecayRates::uniform(3)), InputError);
    EXPECT_THROW((void)build_nominal(sys, DecayRates{{0.1, -0.1}}), InputError);
}

TEST(BuildRobust, RejectsBadInputs) {
    const auto usys = scalar_uncertain(-1.0, 0.5);
    EXPECT_THROW((void)build_robust(usys, DecayRates::uniform(2), 0.9), InputError);
    EXPECT_THROW((void)make_uncertain_system({{0.0}, {scalar(-1.0)}, std::nullopt, std::nullopt}), InputError);
}

TEST(AssemblyFidelity, NominalBlockMatchesHandComputed) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + trial % 4;
        const auto usys = random_uncertain(rng, n, 1 + trial % 3);
        const auto& sys = usys.base();
        DecayRates eps;
        for (std::size_t k = 0; k < sys.grid().size(); ++k)
            eps.epsilon.push_back(0.01 + 0.1 * k);
        const auto lmi = build_nominal(sys, eps);
        const auto vals = random_assignment(lmi.problem, rng);
        for (int k = 1; k <= sys.segments(); ++k) {
            const auto& pk = vals.at(lmi.vars.p[k].id);
            const auto& pk1 = vals.at(lmi.vars.p[k - 1].id);
            const auto& g = vals.at(lmi.vars.gamma[k - 1].id);
            const auto& s = vals.at(lmi.vars.s[k - 1].id);
            const auto t = oracle::nominal_terms(pk1, pk, sys.a(k - 1), sys.a(k), eps[k], sys.grid().gamma(k));
            const Matrix expected = stack2(t.m - g, t.l + 0.5 * g + s, t.n);
            const auto& c = oracle::find_constraint(lmi.problem, "segment " + std::to_string(k) + ", nominal 2n block");
            const Matrix got = c.expr.evaluate(vals);
            EXPECT_LE((got - expected).norm(), 1e-12 * (1.0 + expected.norm()));
        }
    }
}

TEST(AssemblyFidelity, RobustBlockMatchesHandComputed) {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 1 + trial % 3;
        const auto usys = random_uncertain(rng, n, 1 + trial % 2);
        const auto& sys = usys.base();
        const auto eps = DecayRates::uniform(sys.grid().size(), 0.05);
        const double delta = 1.0 + trial * 0.37;
        const double beta = beta_of_delta(delta);
        const auto lmi = build_robust(usys, eps, delta);
        const auto vals = random_assignment(lmi.problem, rng);
        for (int k = 1; k <= sys.segments(); ++k) {
            const auto& pk = vals.at(lmi.vars.p[k].id);
            const auto& pk1 = vals.at(lmi.vars.p[k - 1].id);
            const auto& g = vals.at(lmi.vars.gamma[k - 1].id);
            const auto& psi = vals.at(lmi.vars.psi[k - 1].id);
            const auto& s1 = vals.at(lmi.vars.s1[k - 1].id);
            const auto& s2 = vals.at(lmi.vars.s2[k - 1].id);
            const auto m = oracle::nominal_terms(pk1, pk, sys.a(k - 1), sys.a(k), eps[k], sys.grid().gamma(k));
            // B-part has no dP/dt or eps terms
            const auto nb = oracle::nominal_terms(pk1, pk, usys.b(k - 1), usys.b(k), 0.0, 0.0);
            const Matrix z = Matrix::Zero(n, n);
            const Matrix q2 = stack2(z, 0.5 * nb.m, m.m);
            const Matrix q1 = stack2(z, 0.5 * nb.l, m.l);
            const Matrix q0 = stack2(-g, 0.5 * nb.n + beta * g + s1, m.n - g);
            const Matrix expected = stack2(q2 - psi, q1 + 0.5 * psi + s2, q0);
            const auto& c = oracle::find_constraint(lmi.problem, "segment " + std::to_string(k) + ", robust 4n block");
            const Matrix got = c.expr.evaluate(vals);
            EXPECT_LE((got - expected).norm(), 1e-12 * (1.0 + expected.norm()));
        }
    }
}

TEST(QuadraticForm, NominalStackedIdentity) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> ua(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 4;
        const auto usys = random_uncertain(rng, n, 1);
        const auto& sys = usys.base();
        const auto eps = DecayRates{{0.2, 0.3}};
        auto lmi = build_nominal(sys, eps);
        auto vals = random_assignment(lmi.problem, rng);
        vals[lmi.vars.gamma[0].id].setZero();
        vals[lmi.vars.s[0].id].setZero();
        const Matrix r = oracle::find_constraint(lmi.problem, "segment 1, nominal 2n block").expr.evaluate(vals);
        const double alpha = ua(rng);
        const auto x = oracle::random_vector(rng, n);
        Eigen::VectorXd z(2 * n);
        z << alpha * x, x;
        const Matrix q = oracle::decay_matrix(vals.at(lmi.vars.p[0].id), vals.at(lmi.vars.p[1].id), sys.a(0), sys.a(1),
                                              Matrix::Zero(n, n), Matrix::Zero(n, n), 0.3, sys.grid().gamma(1), alpha,
                                              0.0);
        const double lhs = x.dot(q * x), rhs = z.dot(r * z);
        EXPECT_NEAR(lhs, rhs, 1e-10 * (1.0 + std::abs(lhs)));
    }
}

TEST(QuadraticForm, RobustStackedIdentityAndMultiplierSign) {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> ua(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 3;
        const auto usys = random_uncertain(rng, n, 1);
        const auto& sys = usys.base();
        const auto eps = DecayRates{{0.2, 0.3}};
        const double big_delta = 1.0 + 3.0 * ua(rng);
        const auto lmi = build_robust(usys, eps, big_delta);
        const auto& label = "segment 1, robust 4n block";
        const auto& c = oracle::find_constraint(lmi.problem, label);

        auto vals = random_assignment(lmi.problem, rng);
        // multipliers drawn positive definite for the sign check
        vals[lmi.vars.gamma[0].id] = oracle::random_spd(rng, n);
        vals[lmi.vars.psi[0].id] = oracle::random_spd(rng, 2 * n);
        auto bare = vals;
        bare[lmi.vars.gamma[0].id].setZero();
        bare[lmi.vars.psi[0].id].setZero();
        bare[lmi.vars.s1[0].id].setZero();
        bare[lmi.vars.s2[0].id].setZero();

        const double alpha = ua(rng);
        const double delta = std::exp(std::log(big_delta) * (2.0 * ua(rng) - 1.0));
        const auto x = oracle::random_vector(rng, n);
        Eigen::VectorXd z(4 * n);
        z << alpha * delta * x, alpha * x, delta * x, x;

        const auto& p0 = vals.at(lmi.vars.p[0].id);
        const auto& p1 = vals.at(lmi.vars.p[1].id);
        const Matrix q = oracle::decay_matrix(p0, p1, sys.a(0), sys.a(1), usys.b(0), usys.b(1), 0.3,
                                              sys.grid().gamma(1), alpha, delta);
        const double lhs = x.dot(q * x);
        const double stacked = z.dot(c.expr.evaluate(bare) * z);
        EXPECT_NEAR(lhs, stacked, 1e-10 * (1.0 + std::abs(lhs)));

        // full form minus bare form = exactly the S-procedure terms
        const auto& g = vals.at(lmi.vars.gamma[0].id);
        const auto& psi = vals.at(lmi.vars.psi[0].id);
        Eigen::VectorXd u(2 * n);
        u << delta * x, x;
        const double expected = (delta - 1.0 / big_delta) * (big_delta - delta) * x.dot(g * x) +
                                alpha * (1.0 - alpha) * u.dot(psi * u);
        const double extra = z.dot(c.expr.evaluate(vals) * z) - stacked;
        EXPECT_NEAR(extra, expected, 1e-9 * (1.0 + std::abs(expected) + std::abs(stacked)));
        EXPECT_GE(expected, 0.0);
    }
}

TEST(SolveNominal, SingleBreakpointStable) {
    const auto sys = make_system({{0.0}, {-Matrix::Identity(2, 2)}, std::nullopt, std::nullopt});
    const auto out = solve_nominal(sys, DecayRates::uniform(1, 1.0));
    ASSERT_EQ(out.status, sdp::Status::feasible) << out.solver.message;
    ASSERT_TRUE(out.certificate);
    EXPECT_GT(out.certificate->mu_star, 1e-7);
}

TEST(SolveNominal, ScalarUnstableIsInfeasible) {
    const auto out = solve_nominal(scalar_system({0.0}, {1.0}), DecayRates::uniform(1, 0.1));
    EXPECT_EQ(out.status, sdp::Status::infeasible) << out.solver.message;
    EXPECT_FALSE(out.certificate);
    EXPECT_FALSE(out.most_violated.empty());
}

TEST(SolveNominal, ScalarPiecewiseCertifiesAndOracleAgrees) {
    const auto sys = scalar_system({0.0, 1.0}, {-1.0, -2.0});
    const auto eps = DecayRates::uniform(2, 0.1);
    const auto out = solve_nominal(sys, eps);
    ASSERT_EQ(out.status, sdp::Status::feasible) << out.solver.message;
    const auto& c = *out.certificate;
    EXPECT_GT(c.p[0](0, 0), 0.0);
    EXPECT_GT(c.p[1](0, 0), 0.0);
    EXPECT_GT(c.gamma[0](0, 0), 0.0);
    EXPECT_EQ(c.s[0](0, 0), 0.0);
    const Matrix z = Matrix::Zero(1, 1);
    EXPECT_LT(oracle::scan_segment(c.p[0], c.p[1], sys.a(0), sys.a(1), z, z, 0.1, 1.0, 0.0, 0.0, 1001), 0.0);
    EXPECT_GE(recheck(sys, c).margin, c.mu_star - 1e-12);
}

TEST(SolveRobust, ScalarKnownAnswers) {
    const auto usys = scalar_uncertain(-1.0, 0.5);
    const auto eps = DecayRates::uniform(2, 0.01);
    const auto ok = solve_robust(usys, eps, 1.5);
    ASSERT_EQ(ok.status, sdp::Status::feasible) << ok.solver.message;
    const auto& c = *ok.certificate;
    EXPECT_EQ(c.delta, 1.5);
    EXPECT_NEAR(c.beta, 0.5 * (1.5 + 1.0 / 1.5), 1e-12);
    EXPECT_LT(oracle::scan_segment(c.p[0], c.p[1], usys.base().a(0), usys.base().a(1), usys.b(0), usys.b(1), 0.01,
                                   1.0, 1.0 / 1.5, 1.5),
              0.0);
    EXPECT_GT(recheck(usys, c).margin, 0.0);

    const auto bad = solve_robust(usys, eps, 3.0);
    EXPECT_EQ(bad.status, sdp::Status::infeasible) << bad.solver.message;
}

TEST(SolveRobust, ZeroUncertaintyMatchesNominal) {
    std::vector<std::pair<std::vector<double>, std::vector<double>>> cases = {
        {{0.0, 1.0}, {-1.0, -2.0}}, {{0.0}, {1.0}}, {{0.0, 1.0, 2.0}, {-1.0, 2.0, -1.0}}, {{0.0, 1.0, 2.0}, {-1.0, -0.2, -1.0}}, {{0.0, 2.0}, {0.2, 0.3}}};
    for (const auto& [t, a] : cases) {
        const auto sys = scalar_system(t, a);
        const auto eps = DecayRates::uniform(t.size(), 0.1);
        std::vector<Matrix> b(t.size(), Matrix::Zero(1, 1));
        const UncertainPiecewiseLtvSystem usys(sys, b);
        const auto nominal = solve_nominal(sys, eps);
        const auto robust = solve_robust(usys, eps, 1.0);
        EXPECT_NE(nominal.status, sdp::Status::inconclusive);
        EXPECT_EQ(nominal.status, robust.status) << a.size() << " " << nominal.mu_star << " " << robust.mu_star << " " << robust.solver.message << " | " << nominal.solver.message;
    }
}

TEST(SolveRobust, StrictBoundaryAddsVertexConditions) {
    const auto usys = scalar_uncertain(-1.0, 0.5);
    CertOptions opts;
    opts.strict_boundary = true;
    const auto lmi = build_robust(usys, DecayRates::uniform(2), 1.5, opts);
    int vertex = 0;
    for (const auto& c : lmi.problem.constraints())
        vertex += c.label.find("delta vertex") != std::string::npos;
    EXPECT_EQ(vertex, 4);
    const auto out = solve_robust(usys, DecayRates::uniform(2), 1.5, opts);
    ASSERT_EQ(out.status, sdp::Status::feasible) << out.solver.message;
    EXPECT_TRUE(out.certificate->strict_boundary);
}
