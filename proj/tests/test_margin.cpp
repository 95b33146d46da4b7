#include <gtest/gtest.h>

#include <ltvcert/analysis.hpp>
#include <ltvcert/margin.hpp>

using namespace ltvcert;
using Matrix = Eigen::MatrixXd;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

UncertainPiecewiseLtvSystem scalar_uncertain(double a, double b) {
    return make_uncertain_system({{0.0, 1.0}, {scalar(a), scalar(a)}, std::vector<Matrix>{scalar(b), scalar(b)},
                                  std::nullopt});
}

}  // namespace

TEST(MaxUncertainty, ScalarBoundary) {
    const auto usys = scalar_uncertain(-1.0, 0.5);
    const auto r = max_uncertainty(usys, DecayRates::uniform(2, 0.01));
    ASSERT_TRUE(r);
    EXPECT_GE(r->delta_star, 1.90);
    EXPECT_LE(r->delta_star, 2.00);
    EXPECT_EQ(r->certificate.delta, r->delta_star);
    EXPECT_NEAR(r->beta_star, 0.5 * (r->delta_star + 1.0 / r->delta_star), 1e-12);
    EXPECT_NEAR(r->lower() * r->upper(), 1.0, 1e-12);
    EXPECT_TRUE(r->verified) << r->note;
    EXPECT_FALSE(r->capped);
    EXPECT_TRUE(monotone_consistent(r->probes, 4e-3));
    EXPECT_EQ(r->probes.front().phase, "initial");
    EXPECT_TRUE(verify_certificate_grid(r->certificate, usys).confirmed());
}

TEST(MaxUncertainty, NeverExceedsAnalyticBoundary) {
    // a + b delta < 0 exactly for delta < -a / b
    for (auto [a, b] : {std::pair{-1.0, 0.25}, std::pair{-2.0, 0.5}, std::pair{-0.5, 0.1}}) {
        MarginOptions opts;
        opts.verify = false;
        const auto r = max_uncertainty(scalar_uncertain(a, b), DecayRates::uniform(2, 0.01), opts);
        ASSERT_TRUE(r);
        EXPECT_LT(r->delta_star, -a / b);
        EXPECT_GT(r->delta_star, 0.9 * (-a / b));
    }
}

TEST(MaxUncertainty, ZeroBIsInactive) {
    const auto r = max_uncertainty(scalar_uncertain(-1.0, 0.0), DecayRates::uniform(2, 0.01));
    ASSERT_TRUE(r);
    EXPECT_TRUE(r->uncertainty_inactive);
    EXPECT_EQ(r->delta_star, 1e6);
    EXPECT_EQ(r->certificate.delta, 1e6);
    EXPECT_NEAR(r->beta_star, beta_of_delta(1e6), 1e-12 * r->beta_star);
    const auto usys = scalar_uncertain(-1.0, 0.0);
    EXPECT_TRUE(verify_certificate_grid(r->certificate, usys).confirmed());
}

TEST(MaxUncertainty, UnstableNominalGivesNothing) {
    const auto r = max_uncertainty(scalar_uncertain(1.0, 0.5), DecayRates::uniform(2, 0.01));
    EXPECT_FALSE(r);
}

TEST(MaxUncertainty, LargeMarginCapped) {
    // a + b delta stays negative for every positive delta
    MarginOptions opts;
    opts.delta_max = 64.0;
    const auto r = max_uncertainty(scalar_uncertain(-1.0, -0.5), DecayRates::uniform(2, 0.01), opts);
    ASSERT_TRUE(r);
    EXPECT_TRUE(r->capped);
    EXPECT_EQ(r->delta_star, 64.0);
}

TEST(MaxUncertainty, RejectsBadOptions) {
    MarginOptions opts;
    opts.tol_bis = 0.0;
    EXPECT_THROW((void)max_uncertainty(scalar_uncertain(-1.0, 0.5), DecayRates::uniform(2), opts), InputError);
}

TEST(MonotoneConsistent, DetectsInversions) {
    std::vector<Probe> probes(2);
    probes[0].delta = 3.0;
    probes[0].status = sdp::Status::feasible;
    probes[1].delta = 2.0;
    probes[1].status = sdp::Status::infeasible;
    EXPECT_FALSE(monotone_consistent(probes));
    probes[1].status = sdp::Status::inconclusive;
    EXPECT_TRUE(monotone_consistent(probes));
}

TEST(MaxUncertainty, PrintedBoundaryCoversOnlyTheWindow) {
    // without B in the boundary LMIs, linear P(t) can absorb growth up to rate 1 / width on [t_0, t_N]
    MarginOptions opts;
    opts.cert.strict_boundary = false;
    const auto usys = scalar_uncertain(-1.0, 0.5);
    const auto r = max_uncertainty(usys, DecayRates::uniform(2, 0.01), opts);
    ASSERT_TRUE(r);
    EXPECT_GT(r->delta_star, 2.5);
    EXPECT_LT(r->delta_star, 2.99);
    EXPECT_FALSE(r->certificate.strict_boundary);
    EXPECT_TRUE(verify_certificate_grid(r->certificate, usys).confirmed());
}
