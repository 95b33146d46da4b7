#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include <ltvcert/conic.hpp>
#include <ltvcert/sdp.hpp>

using namespace ltvcert;

namespace {

Eigen::VectorXd scalar_svec(double v) { return Eigen::VectorXd::Constant(1, v); }

ConeBlock bound_block(int scalar, double rho, double sign) {
    // rho - sign * y_scalar >= 0, not shifted
    ConeBlock b;
    b.dim = 1;
    b.constant = scalar_svec(rho);
    b.coefficients.emplace_back(scalar, scalar_svec(-sign));
    b.shifted = false;
    b.label = "bound";
    return b;
}

Eigen::MatrixXd random_symmetric(std::mt19937_64& rng, int d) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            m(i, j) = nd(rng);
    return 0.5 * (m + m.transpose());
}

// Feasible problem with known interior point y0: every block equals a PD
// matrix with smallest eigenvalue `margin` at y0.
StandardConicForm planted_problem(std::mt19937_64& rng, int scalars, int blocks, double margin) {
    std::normal_distribution<double> nd;
    std::uniform_int_distribution<int> dim_dist(1, 4);
    Eigen::VectorXd y0(scalars);
    for (int j = 0; j < scalars; ++j)
        y0[j] = nd(rng);

    StandardConicForm form;
    form.num_scalars = scalars;
    for (int l = 0; l < blocks; ++l) {
        const int d = dim_dist(rng);
        Eigen::MatrixXd target = random_symmetric(rng, d);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(target);
        Eigen::VectorXd ev = es.eigenvalues().cwiseAbs();
        ev[0] = 0.0;
        ev.array() += margin;
        target = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();

        ConeBlock b;
        b.dim = d;
        Eigen::MatrixXd c = target;
        for (int j = 0; j < scalars; ++j) {
            Eigen::MatrixXd f = random_symmetric(rng, d);
            c -= y0[j] * f;
            b.coefficients.emplace_back(j, svec(f));
        }
        b.constant = svec(c);
        b.label = "planted " + std::to_string(l);
        form.blocks.push_back(std::move(b));
    }
    for (int j = 0; j < scalars; ++j) {
        form.blocks.push_back(bound_block(j, 10.0 + std::abs(y0[j]), 1.0));
        form.blocks.push_back(bound_block(j, 10.0 + std::abs(y0[j]), -1.0));
    }
    return form;
}

}  // namespace

TEST(Svec, InnerProductMatchesTrace) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = random_symmetric(rng, 3);
        const auto y = random_symmetric(rng, 3);
        EXPECT_NEAR(svec(x).dot(svec(y)), (x * y).trace(), 1e-12);
    }
}

TEST(Svec, KnownValuesAndDimension) {
    Eigen::Matrix2d x;
    x << 1, 2, 2, 3;
    const auto v = svec(x);
    ASSERT_EQ(v.size(), 3);
    EXPECT_EQ(v[0], 1.0);
    EXPECT_DOUBLE_EQ(v[1], 2.0 * std::sqrt(2.0));
    EXPECT_EQ(v[2], 3.0);
    EXPECT_EQ(svec_dim(4), 10);
    EXPECT_EQ(svec(Eigen::Matrix4d::Identity()).size(), 10);
}

TEST(Svec, RoundTripDyadic) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> num(-64, 64);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 1 + trial % 6;
        Eigen::MatrixXd x(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j <= i; ++j)
                x(i, j) = x(j, i) = num(rng) / 8.0;
        EXPECT_EQ(smat(svec(x)), x);
    }
}

TEST(Sdp, SingleBlockReachesBound) {
    const double rho = 1e4;
    StandardConicForm form;
    form.num_scalars = 1;
    ConeBlock b;
    b.dim = 2;
    b.constant = Eigen::VectorXd::Zero(3);
    b.coefficients.emplace_back(0, svec(Eigen::Matrix2d::Identity()));
    b.label = "x I >= mu I";
    form.blocks.push_back(b);
    form.blocks.push_back(bound_block(0, rho, 1.0));

    const auto r = sdp::solve(form);
    ASSERT_EQ(r.status, sdp::Status::feasible) << r.stats.message;
    EXPECT_NEAR(r.mu_star, rho, 1e-6 * rho);
    EXPECT_NEAR(r.y[0], rho, 1e-6 * rho);
}

TEST(Sdp, ContradictoryScalarsAreInfeasible) {
    StandardConicForm form;
    form.num_scalars = 1;
    for (double sign : {1.0, -1.0}) {
        ConeBlock b;
        b.dim = 1;
        b.constant = scalar_svec(0.0);
        b.coefficients.emplace_back(0, scalar_svec(sign));
        b.label = sign > 0 ? "x >= mu" : "-x >= mu";
        form.blocks.push_back(b);
    }
    const auto r = sdp::solve(form);
    EXPECT_EQ(r.status, sdp::Status::infeasible) << r.stats.message;
    EXPECT_TRUE(r.stats.converged);
    EXPECT_LT(std::abs(r.mu_star), 1e-7);
}

TEST(Sdp, PlantedInteriorPointIsFound) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 10; ++trial) {
        const double margin = 0.05 + 0.1 * trial;
        const auto form = planted_problem(rng, 2 + trial % 4, 3 + trial % 3, margin);
        const auto r = sdp::solve(form);
        ASSERT_EQ(r.status, sdp::Status::feasible) << "trial " << trial << ": " << r.stats.message;
        // the planted point has margin / scale in every (scaled) block
        double planted = std::numeric_limits<double>::infinity();
        for (const auto& b : form.blocks)
            if (b.shifted)
                planted = std::min(planted, margin / block_scale(b));
        EXPECT_GE(r.mu_star, planted - 1e-8);
        // verdict soundness: recompute each shifted block independently
        for (std::size_t l = 0; l < form.blocks.size(); ++l) {
            if (!form.blocks[l].shifted)
                continue;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(form.block_value(l, r.y, 0.0));
            EXPECT_GE(es.eigenvalues()(0) / block_scale(form.blocks[l]), r.mu_star - 1e-8);
        }
    }
}

TEST(Sdp, DeterministicAcrossRuns) {
    std::mt19937_64 rng(5);
    const auto form = planted_problem(rng, 4, 4, 0.2);
    const auto a = sdp::solve(form);
    const auto b = sdp::solve(form);
    EXPECT_EQ(a.status, b.status);
    EXPECT_EQ(a.mu_star, b.mu_star);
    EXPECT_EQ(a.stats.iterations, b.stats.iterations);
    EXPECT_EQ(a.y, b.y);
}

TEST(ConicDump, RoundTripPreservesProblem) {
    std::mt19937_64 rng(9);
    const auto form = planted_problem(rng, 3, 2, 0.3);
    std::stringstream first;
    dump(first, form);
    std::stringstream in(first.str());
    const auto loaded = load(in);
    std::stringstream second;
    dump(second, loaded);
    EXPECT_EQ(first.str(), second.str());
    const auto r1 = sdp::solve(form), r2 = sdp::solve(loaded);
    EXPECT_EQ(r1.mu_star, r2.mu_star);
}

TEST(ConicDump, RejectsGarbage) {
    std::stringstream in("not a dump\n");
    EXPECT_THROW((void)load(in), std::runtime_error);
}
