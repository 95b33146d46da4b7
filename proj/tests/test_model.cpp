#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <ltvcert/model.hpp>

#include "support/oracles.hpp"

using namespace ltvcert;
using oracle::Matrix;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

bool mentions(const std::vector<std::string>& issues, const std::string& what) {
    for (const auto& s : issues)
        if (s.find(what) != std::string::npos)
            return true;
    return false;
}

}  // namespace

TEST(TimeGrid, RejectsBadGrids) {
    EXPECT_THROW(TimeGrid(std::vector<double>{}), InputError);
    EXPECT_THROW(TimeGrid({0.0, 0.0}), InputError);
    EXPECT_THROW(TimeGrid({0.0, 2.0, 1.0}), InputError);
    EXPECT_THROW(TimeGrid({0.0, NAN}), InputError);
    EXPECT_NO_THROW(TimeGrid({0.0}));
}

TEST(TimeGrid, SegmentsAreRightClosed) {
    const TimeGrid g({0.0, 1.0, 3.0});
    EXPECT_EQ(g.segments(), 2);
    EXPECT_EQ(g.segment_of(-1.0), 0);
    EXPECT_EQ(g.segment_of(0.0), 0);
    EXPECT_EQ(g.segment_of(0.5), 1);
    EXPECT_EQ(g.segment_of(1.0), 1);
    EXPECT_EQ(g.segment_of(1.0000001), 2);
    EXPECT_EQ(g.segment_of(3.0), 2);
    EXPECT_EQ(g.segment_of(3.5), 3);
    EXPECT_DOUBLE_EQ(g.gamma(2), 0.5);
}

TEST(Alpha, MapsSegmentToUnitInterval) {
    const TimeGrid g({0.0, 1.0, 3.0});
    EXPECT_EQ(alpha(g, 2, 1.0), 0.0);
    EXPECT_EQ(alpha(g, 2, 3.0), 1.0);
    EXPECT_DOUBLE_EQ(alpha(g, 2, 2.0), 0.5);
    EXPECT_THROW((void)alpha(g, 2, 0.5), DomainError);
    EXPECT_THROW((void)alpha(g, 3, 3.5), std::exception);
}

TEST(EvalA, InterpolatesAndHoldsOutsideGrid) {
    const auto sys = make_system({{0.0, 1.0}, {scalar(-1.0), scalar(-3.0)}, std::nullopt, std::nullopt});
    EXPECT_EQ(sys.eval_a(0.0)(0, 0), -1.0);
    EXPECT_EQ(sys.eval_a(1.0)(0, 0), -3.0);
    EXPECT_DOUBLE_EQ(sys.eval_a(0.25)(0, 0), -1.5);
    EXPECT_EQ(sys.eval_a(-10.0)(0, 0), -1.0);
    EXPECT_EQ(sys.eval_a(10.0)(0, 0), -3.0);
}

TEST(EvalA, ExactAtKnotsAndContinuous) {
    std::mt19937_64 rng(5);
    std::vector<double> t{0.0, 0.7, 1.1, 2.9, 3.0};
    std::vector<Matrix> a;
    for (std::size_t k = 0; k < t.size(); ++k)
        a.push_back(oracle::random_matrix(rng, 3, 3));
    const auto sys = make_system({t, a, std::nullopt, std::nullopt});
    for (std::size_t k = 0; k < t.size(); ++k) {
        EXPECT_EQ(sys.eval_a(t[k]), a[k]);
        const double h = 1e-9;
        EXPECT_LE((sys.eval_a(t[k] - h) - a[k]).norm(), 1e-6);
        EXPECT_LE((sys.eval_a(t[k] + h) - a[k]).norm(), 1e-6);
    }
}

TEST(EvalPerturbed, DeltaZeroIsBaseAndLinearInDelta) {
    std::mt19937_64 rng(6);
    const std::vector<double> t{0.0, 1.0, 2.5};
    std::vector<Matrix> a, b;
    for (int k = 0; k < 3; ++k) {
        a.push_back(oracle::random_matrix(rng, 2, 2));
        b.push_back(oracle::random_matrix(rng, 2, 2));
    }
    const auto usys = make_uncertain_system({t, a, b, std::nullopt});
    for (double s : {-1.0, 0.3, 1.0, 2.2, 4.0}) {
        EXPECT_EQ(usys.eval_perturbed(s, 0.0), usys.eval_a(s));
        const Matrix expected = usys.eval_a(s) + 1.7 * usys.eval_b(s);
        EXPECT_TRUE(usys.eval_perturbed(s, 1.7).isApprox(expected, 1e-15));
    }
    EXPECT_THROW((void)usys.eval_perturbed(0.5, NAN), InputError);
    EXPECT_FALSE(usys.uncertainty_inactive());
    const UncertainPiecewiseLtvSystem zero(usys.base(), std::vector<Matrix>(3, Matrix::Zero(2, 2)));
    EXPECT_TRUE(zero.uncertainty_inactive());
}

TEST(Validate, ReportsEveryProblem) {
    SystemDescription d;
    d.breakpoints = {0.0, 1.0, 1.0};
    d.a = {Matrix::Identity(2, 2), Matrix::Identity(3, 3)};
    d.epsilon = std::vector<double>{0.1, -1.0, 0.1};
    const auto issues = validate(d);
    EXPECT_TRUE(mentions(issues, "non-increasing grid at index 2"));
    EXPECT_TRUE(mentions(issues, "length mismatch"));
    EXPECT_TRUE(mentions(issues, "dimension mismatch at A_1"));
    EXPECT_TRUE(mentions(issues, "epsilon_1"));
    EXPECT_THROW((void)make_system(d), InputError);
}

TEST(Validate, NonFiniteEntries) {
    Matrix bad = Matrix::Identity(2, 2);
    bad(0, 1) = INFINITY;
    SystemDescription d{{0.0, 1.0}, {Matrix::Identity(2, 2), bad}, std::nullopt, std::nullopt};
    EXPECT_TRUE(mentions(validate(d), "non-finite entry in A_1"));
    d.a[1] = Matrix::Identity(2, 2);
    EXPECT_TRUE(validate(d).empty());
    d.b = std::vector<Matrix>{Matrix::Identity(2, 2)};
    EXPECT_TRUE(mentions(validate(d), "length mismatch"));
}

TEST(MakeUncertain, NeedsB) {
    const SystemDescription d{{0.0}, {scalar(-1.0)}, std::nullopt, std::nullopt};
    try {
        (void)make_uncertain_system(d);
        FAIL() << "expected InputError";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("no B matrices"), std::string::npos);
    }
}
