#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "nctorus/experiments.hpp"
#include "nctorus/periodize.hpp"
#include "nctorus/quadrature.hpp"
#include "support.hpp"

using namespace nctorus;
using nctorus::oracle::pt;

namespace {

constexpr double kPi = std::numbers::pi;

Gaussian anisotropic() {
    Eigen::MatrixXd A(2, 2);
    A << 3.2, 0.6, 0.6, 2.1;
    Eigen::VectorXd mu(2);
    mu << 0.3, -0.2;
    Polynomial P = Polynomial::constant(2, 1.0) + Complex(0.5, -0.25) * Polynomial::variable(2, 0) +
                   Complex(-0.4, 0.0) * (Polynomial::variable(2, 1) * Polynomial::variable(2, 1));
    return Gaussian::centered(A, mu, P, 1.0);
}

// F f(u) = int f(t) exp(-2 pi i t.u) dt by tensor trapezoid quadrature.
Complex ft_by_quadrature(const Gaussian& f, std::span<const double> u) {
    const std::vector<double> uu(u.begin(), u.end());
    const auto q = integrate_gaussian_like(
        [&](std::span<const double> t) {
            double phase = 0.0;
            for (std::size_t i = 0; i < t.size(); ++i) phase += t[i] * uu[i];
            return f(t) * std::polar(1.0, -2.0 * kPi * phase);
        },
        f.dim(), 9.0, 1e-13, 32, 512);
    return q.value;
}

// sum_{v in Z^d, |v| <= reach} g(x + m v), written out with no library help.
template <class G>
Complex lattice_sum(const G& g, std::span<const double> x, std::int64_t m, std::int64_t reach = 6) {
    Complex s{};
    std::vector<double> y(x.size());
    for (const auto& v : window_sum(reach, x.size())) {
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + static_cast<double>(m * v[i]);
        s += g(std::span<const double>(y));
    }
    return s;
}

const SkewMatrix kTwoJ = SkewMatrix::symplectic(1, Rational(2));

} // namespace

TEST(GaussianFt, StandardIsFixedPoint) {
    const Gaussian f = Gaussian::standard(2);
    const Gaussian F = gaussian_ft(f);
    for (const auto& u : {std::vector<double>{0.0, 0.0}, {0.4, -1.1}, {2.0, 0.5}})
        EXPECT_NEAR(std::abs(F(u) - std::exp(-kPi * (u[0] * u[0] + u[1] * u[1]))), 0.0, 1e-15);
}

TEST(GaussianFt, TranslateBecomesModulationAgainstQuadrature) {
    const Gaussian f = Gaussian::standard(2);
    const std::vector<double> delta{0.7, -0.3};
    const Gaussian F = gaussian_ft(f.translate(delta));
    const std::vector<std::vector<double>> samples{{0.0, 0.0}, {0.25, 0.5}, {-0.6, 0.1}, {1.0, -1.0}, {0.3, 0.9}};
    for (const auto& u : samples) {
        const Complex want = std::polar(1.0, 2.0 * kPi * (delta[0] * u[0] + delta[1] * u[1])) *
                             std::exp(-kPi * (u[0] * u[0] + u[1] * u[1]));
        EXPECT_NEAR(std::abs(F(u) - want), 0.0, 1e-14);
        EXPECT_NEAR(std::abs(F(u) - ft_by_quadrature(f.translate(delta), u)), 0.0, 1e-9);
    }
}

TEST(GaussianFt, PolynomialPrefactorAgainstQuadrature) {
    const Gaussian f = anisotropic();
    const Gaussian F = gaussian_ft(f);
    EXPECT_EQ(F.poly().degree(), f.poly().degree());
    const std::vector<std::vector<double>> samples{{0.0, 0.0}, {0.2, -0.4}, {-0.7, 0.3}, {0.5, 0.5}, {1.1, -0.2}};
    for (const auto& u : samples) EXPECT_NEAR(std::abs(F(u) - ft_by_quadrature(f, u)), 0.0, 1e-9);
}

TEST(GaussianFt, InverseUndoesTransform) {
    const Gaussian f = anisotropic();
    const Gaussian back = gaussian_ift(gaussian_ft(f));
    for (const auto& x : {std::vector<double>{0.0, 0.0}, {0.4, -0.9}, {-1.2, 0.3}})
        EXPECT_NEAR(std::abs(back(x) - f(x)), 0.0, 1e-13);
}

TEST(GaussianFt, NonPositiveDefiniteThrows) {
    Eigen::MatrixXd A(2, 2);
    A << 1.0, 0.0, 0.0, -1.0;
    EXPECT_THROW(Gaussian::centered(A, Eigen::VectorXd::Zero(2), Polynomial::constant(2, 1.0), 1.0), DomainError);
}

TEST(Periodize, CenterCoefficientOfStandardGaussian) {
    const auto a = periodize(Gaussian::standard(2), 1, 2, 1e-16);
    // c_0 = F f(0) / m^{2N} with N = 1, m = 2
    EXPECT_NEAR(a.coeffs.coeff(pt({0, 0})).real(), 0.25, 1e-16);
    EXPECT_EQ(a.m, 2);
    EXPECT_EQ(a.level, 1u);
    EXPECT_EQ(a.coeffs.theta(), kTwoJ.divided_by(4));
}

TEST(Periodize, SymmetricFunctionHasSymmetricCoefficients) {
    Eigen::MatrixXd A(2, 2);
    A << 2.0, 0.5, 0.5, 1.5;
    const Gaussian f = Gaussian::centered(A, Eigen::VectorXd::Zero(2), Polynomial::constant(2, 1.0), 1.0);
    const auto a = periodize(f, 1, 3, 1e-16);
    for (const auto& [k, c] : a.coeffs.coeffs()) EXPECT_NEAR(std::abs(c - a.coeffs.coeff(-k)), 0.0, 1e-17);
}

TEST(Periodize, UnitRefinementGivesLatticeSamplesOfTransform) {
    const Gaussian f = anisotropic();
    const auto a = periodize(f, 0, 1, 1e-16);
    for (const auto& k : window_sum(1, 2)) {
        const std::vector<double> u{static_cast<double>(k[0]), static_cast<double>(k[1])};
        EXPECT_NEAR(std::abs(a.coeffs.coeff(k) - ft_by_quadrature(f, u)), 0.0, 1e-12);
    }
}

TEST(Periodize, WaveSumMatchesDirectTranslateSum) {
    const Gaussian f = anisotropic();
    const auto a = periodize(f, 1, 2, 1e-16);
    // the function written out by hand, independent of the Gaussian class
    auto g = [](std::span<const double> y) {
        const double x0 = y[0] - 0.3, x1 = y[1] + 0.2;
        const Complex P = 1.0 + Complex(0.5, -0.25) * y[0] - 0.4 * y[1] * y[1];
        return P * std::exp(-(3.2 * x0 * x0 + 1.2 * x0 * x1 + 2.1 * x1 * x1));
    };
    for (double s : {0.0, 0.13, 0.5, 0.77, 1.4, 1.9})
        for (double t : {0.0, 0.31, 1.0, 1.62}) {
            const std::vector<double> x{s, t};
            EXPECT_NEAR(std::abs(a.value_at(x) - lattice_sum(g, x, 2)), 0.0, 1e-7);
        }
}

TEST(Periodize, ReportedTailBoundsTheDiscardedMass) {
    const Gaussian f = anisotropic();
    for (double tol : {1e-3, 1e-6, 1e-9}) {
        const auto loose = periodize(f, 1, 4, tol);
        const auto tight = periodize(f, 1, 4, 1e-22);
        EXPECT_LE(loose.tail, tol);
        double dropped = 0.0;
        for (const auto& [k, c] : tight.coeffs.coeffs())
            if (loose.coeffs.coeff(k) == Complex{}) dropped += std::abs(c);
        EXPECT_LE(dropped, loose.tail);
        EXPECT_GT(dropped, 0.0);
    }
}

TEST(Periodize, Preconditions) {
    EXPECT_THROW(periodize(Gaussian::standard(2), 1, 2, 0.0), DomainError);
    EXPECT_THROW(periodize(Gaussian::standard(3), 1, 2, 1e-9), DimensionError);
    EXPECT_TRUE(periodize(Gaussian::zero(2), 1, 2, 1e-9).coeffs.empty());
}

TEST(LevelStar, SingleWavesCarryRefinedPhase) {
    const std::int64_t m = 3;
    auto wave = [&](const LatticePoint& k) {
        LevelElement e = empty_level(1, m, Rational(2), 1);
        e.coeffs.add(k, 1.0);
        return e;
    };
    const auto k = pt({2, -1}), l = pt({1, 4});
    const auto prod = level_star(wave(k), wave(l));
    // e^{-pi i (k/m).(2J)(l/m)}, with k.Jl = k_0 l_1 - k_1 l_0
    const double form = 2.0 * static_cast<double>(k[0] * l[1] - k[1] * l[0]) / static_cast<double>(m * m);
    EXPECT_NEAR(std::abs(prod.coeffs.coeff(k + l) - std::polar(1.0, -kPi * form)), 0.0, 1e-15);
    EXPECT_EQ(prod.coeffs.size(), 1u);
}

TEST(LevelStar, MismatchedLevelsThrow) {
    const auto a = periodize(Gaussian::standard(2), 1, 2, 1e-9);
    const auto b = periodize(Gaussian::standard(2), 2, 4, 1e-9);
    EXPECT_THROW(level_star(a, b), LevelMismatch);
}

TEST(LevelStar, ZeroThetaIsCommutative) {
    std::mt19937_64 rng(81);
    LevelElement a = empty_level(1, 2, Rational(0), 1), b = a;
    a.coeffs = oracle::random_element(a.coeffs.theta(), 3, rng);
    b.coeffs = oracle::random_element(b.coeffs.theta(), 3, rng);
    EXPECT_LE(oracle::l1_distance(level_star(a, b).coeffs, level_star(b, a).coeffs), 1e-13);
}

TEST(LevelStar, RandomElementsAgainstDoubleLoop) {
    std::mt19937_64 rng(82);
    LevelElement a = empty_level(2, 6, Rational(1, 5), 1), b = a;
    for (int trial = 0; trial < 20; ++trial) {
        a.coeffs = oracle::random_element(a.coeffs.theta(), 3, rng);
        b.coeffs = oracle::random_element(b.coeffs.theta(), 3, rng);
        EXPECT_LE(oracle::l1_distance(level_star(a, b).coeffs, oracle::naive_star(a.coeffs, b.coeffs)), 1e-12);
    }
}

TEST(LevelStar, PeriodizationIsMultiplicativeOnceTranslatesSeparate) {
    const Gaussian f = Gaussian::standard(2);
    const Gaussian g = f.translate(std::vector<double>{0.2, -0.1});
    const double tol = 1e-18;
    auto defect = [&](std::int64_t m) {
        const auto lhs = level_star(periodize(f, 1, m, tol), periodize(g, 1, m, tol));
        const auto rhs = periodize(moyal_product(f, g, kTwoJ), 1, m, tol);
        return std::pair{oracle::l1_distance(lhs.coeffs, rhs.coeffs), lhs.tail + rhs.tail};
    };
    // m = 2: neighbouring translates still overlap, so the two sides differ visibly
    EXPECT_GT(defect(2).first, 1e-4);
    // m = 8: the cross terms are below e^{-80}; only tails and rounding remain
    const auto [d8, tails8] = defect(8);
    EXPECT_LE(d8, tails8 + 1e-14);
}

TEST(RankOne, ProjectionAndMultiples) {
    const auto r = rank_one_test(f00_gaussian(1, 2.0), kTwoJ);
    EXPECT_TRUE(r.rank_one);
    EXPECT_NEAR(r.lambda, 1.0, 1e-12);
    const auto half = rank_one_test(Gaussian::standard(2), kTwoJ);
    EXPECT_TRUE(half.rank_one);
    EXPECT_NEAR(half.lambda, 0.5, 1e-12);
    // the f00 projection for another theta
    const auto r5 = rank_one_test(f00_gaussian(1, 5.0), SkewMatrix::symplectic(1, Rational(5)));
    EXPECT_TRUE(r5.rank_one);
    EXPECT_NEAR(r5.lambda, 1.0, 1e-12);

    Eigen::MatrixXd A(2, 2);
    A << kPi, 0.0, 0.0, 3.0 * kPi;
    const Gaussian mixed = Gaussian::centered(A, Eigen::VectorXd::Zero(2), Polynomial::constant(2, 1.0), 1.0);
    EXPECT_FALSE(rank_one_test(mixed, kTwoJ).rank_one);
}

TEST(PartialSums, ProjectionWithUnitZ) {
    const TowerSpec tower{Rational(2), {2, 2}, 1};
    const Gaussian f = f00_gaussian(1, 2.0);
    for (std::size_t j : {1u, 2u}) {
        const auto ps = partial_sums(f, tower, j, std::nullopt, {1e-3, 1e-18, true});
        EXPECT_LE(oracle::l1_distance(ps.b.coeffs, ps.a.coeffs), 1e-15);
        EXPECT_NEAR(ps.s, 1.0, 1e-12);
        // independent route: periodize the closed-form square
        const auto sq = periodize(moyal_product(f, f, kTwoJ), j, tower.m(j), 1e-18);
        EXPECT_LE(oracle::l1_distance(ps.c.coeffs, sq.coeffs), 1e-12);
        ASSERT_TRUE(ps.d.has_value());
        EXPECT_NEAR(ps.kprime, 1.0 - 1e-3, 1e-15);
    }
}

TEST(PartialSums, ConjugationByGeneratorIsTranslation) {
    // U_k f U_k* = f(. + Theta k) on the plane-wave side
    const TowerSpec tower{Rational(2), {2, 2}, 1};
    const Gaussian f = f00_gaussian(1, 2.0);
    const auto z = TorusElement::basis(tower.level_theta(0), pt({1, 0}));
    const auto ps = partial_sums(f, tower, 2, z, {1e-3, 1e-18, false});
    const Gaussian moved = f.translate(std::vector<double>{0.0, -2.0});
    const auto want = periodize(moved, 2, 4, 1e-18);
    EXPECT_LE(oracle::l1_distance(ps.b.coeffs, want.coeffs), 1e-12);
    EXPECT_LE(oracle::l1_distance(ps.c.coeffs, periodize(moyal_product(moved, moved, kTwoJ), 2, 4, 1e-18).coeffs), 1e-12);
}

TEST(PartialSums, ZeroZGivesZero) {
    const TowerSpec tower{Rational(2), {2}, 1};
    const auto ps = partial_sums(f00_gaussian(1, 2.0), tower, 1, TorusElement(tower.level_theta(0)), {1e-3, 1e-18, true});
    EXPECT_TRUE(ps.b.coeffs.empty());
    EXPECT_TRUE(ps.c.coeffs.empty());
    ASSERT_TRUE(ps.d.has_value());
    EXPECT_TRUE(ps.d->coeffs.empty());
}

TEST(PartialSums, NonRankOneIsRejectedWhenDRequested) {
    Eigen::MatrixXd A(2, 2);
    A << kPi, 0.0, 0.0, 3.0 * kPi;
    const Gaussian mixed = Gaussian::centered(A, Eigen::VectorXd::Zero(2), Polynomial::constant(2, 1.0), 1.0);
    const TowerSpec tower{Rational(2), {2}, 1};
    EXPECT_THROW(partial_sums(mixed, tower, 1, std::nullopt, {1e-3, 1e-18, true}), UnsupportedCandidate);
    // without d_j and with z = 1 the square is still available in closed form
    const auto ps = partial_sums(mixed, tower, 1, std::nullopt, {1e-3, 1e-18, false});
    EXPECT_FALSE(ps.c.coeffs.empty());
    const auto z = TorusElement::generator(tower.level_theta(0), 0);
    EXPECT_THROW(partial_sums(mixed, tower, 1, z, {1e-3, 1e-18, false}), UnsupportedCandidate);
}

TEST(PartialSums, LevelOneAgainstGridSummation) {
    const TowerSpec tower{Rational(2), {2}, 1};
    const Gaussian f = f00_gaussian(1, 2.0);
    const auto ps = partial_sums(f, tower, 1, std::nullopt, {1e-3, 1e-18, false});
    auto g = [](std::span<const double> y) { return Complex(2.0 * std::exp(-kPi * (y[0] * y[0] + y[1] * y[1])), 0.0); };
    for (double s : {0.0, 0.4, 1.1})
        for (double t : {0.0, 0.7, 1.5}) {
            const std::vector<double> x{s, t};
            EXPECT_NEAR(std::abs(ps.a.value_at(x) - lattice_sum(g, x, 2)), 0.0, 1e-7);
        }
}

TEST(SquareCondition, ProjectionTableDecreasesBelowEps) {
    const auto t = square_condition(f00_gaussian(1, 2.0), std::nullopt, TowerSpec{Rational(2), {2, 2, 2}, 1}, 1e-3);
    ASSERT_EQ(t.rows.size(), 3u);
    EXPECT_TRUE(t.strictly_decreasing);
    EXPECT_TRUE(t.pass);
    EXPECT_LT(t.rows.back().bound, 1e-3);
    for (const auto& r : t.rows) EXPECT_GE(r.bound, r.value);
}

TEST(SquareCondition, LargeEpsPassesAtFirstLevel) {
    const auto t = square_condition(f00_gaussian(1, 2.0), std::nullopt, TowerSpec{Rational(2), {2}, 1}, 10.0);
    EXPECT_TRUE(t.pass);
    EXPECT_LT(t.rows.front().bound, 10.0);
}

TEST(SquareCondition, SuperposedZStillConverges) {
    const TowerSpec tower{Rational(2), {2, 2, 2}, 1};
    TorusElement z(tower.level_theta(0));
    z.add(pt({0, 0}), 1.0 / std::sqrt(2.0));
    z.add(pt({1, 0}), 1.0 / std::sqrt(2.0));
    const auto t = square_condition(f00_gaussian(1, 2.0), z, tower, 1e-3);
    EXPECT_TRUE(t.strictly_decreasing);
    EXPECT_TRUE(t.pass);
}

TEST(SquareCondition, CommutativeDefectIsTheOverlapSum) {
    // Theta = 0: b^2 - c = sum_{v != w} f(x + m v) f(x + m w) pointwise
    const TowerSpec tower{Rational(0), {2}, 1};
    const Gaussian f = Gaussian::standard(2);
    const auto ps = partial_sums(f, tower, 1, std::nullopt, {1e-3, 1e-20, false});
    EXPECT_TRUE(ps.commutative);
    const auto defect = level_sub(level_star(ps.b, ps.b), ps.c);
    auto g = [](std::span<const double> y) { return std::exp(-kPi * (y[0] * y[0] + y[1] * y[1])); };
    for (double s : {0.0, 0.5, 1.0, 1.3})
        for (double t : {0.0, 0.9, 1.7}) {
            const std::vector<double> x{s, t};
            double sum = 0.0;
            std::vector<double> y(2), w(2);
            for (const auto& v : window_sum(5, 2))
                for (const auto& u : window_sum(5, 2)) {
                    if (u == v) continue;
                    for (int i = 0; i < 2; ++i) {
                        y[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + 2.0 * static_cast<double>(v[static_cast<std::size_t>(i)]);
                        w[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + 2.0 * static_cast<double>(u[static_cast<std::size_t>(i)]);
                    }
                    sum += g(y) * g(w);
                }
            EXPECT_NEAR(std::abs(defect.value_at(x) - sum), 0.0, 1e-12);
        }
    EXPECT_THROW(partial_sums(f, tower, 1, std::nullopt, {1e-3, 1e-20, true}), UnsupportedCandidate);
}

TEST(Decay, TranslateMatchesCoherentStateOverlap) {
    // At theta = 2 the standard Gaussian is half the vacuum projection, so
    // ||a_D a|| / ||a a|| = |<alpha|0>| = exp(-pi |D|^2 / 4).
    std::vector<std::vector<double>> grid;
    for (int i = 0; i <= 12; ++i) grid.push_back({0.6 * i, -0.25 * i});
    const Gaussian a = Gaussian::standard(2);
    const auto t = decay_translate(a, a, grid, {4}, kTwoJ);
    ASSERT_EQ(t.rows.size(), grid.size());
    EXPECT_NEAR(t.rows[0].log_value, log_l2_norm(moyal_product(a, a, kTwoJ)), 1e-14);
    for (const auto& r : t.rows)
        EXPECT_NEAR(r.log_value - t.rows[0].log_value, -kPi * r.delta_norm * r.delta_norm / 4.0,
                    1e-9 * (1.0 + r.delta_norm * r.delta_norm));
}

TEST(Decay, ZeroPartnerGivesZeroNorms) {
    const auto t = decay_translate(Gaussian::standard(2), Gaussian::zero(2), {{0.0, 0.0}, {5.0, 0.0}}, {4}, kTwoJ);
    for (const auto& r : t.rows) EXPECT_EQ(std::exp(r.log_value), 0.0);
}

TEST(Decay, LatticeBoundBaselineAndSteepeningSlopes) {
    std::vector<std::vector<double>> grid;
    for (int i = 0; i <= 32; ++i) grid.push_back({static_cast<double>(i), 0.0});
    const auto t = lattice_sum_decay(Gaussian::standard(2), grid, 4, kTwoJ, {4});
    EXPECT_TRUE(std::isfinite(t.rows[0].log_value));
    EXPECT_LE(t.fit.slope, -4.0);
    const auto slopes = windowed_slopes(t, 5);
    for (std::size_t i = 1; i < slopes.size(); ++i) EXPECT_LE(slopes[i], slopes[i - 1] + 1e-9);
}

TEST(Fit, RecoversExactLine) {
    const std::vector<double> x{0.0, 1.0, 2.0, 3.5}, y{3.0, -1.0, -5.0, -11.0};
    const auto f = fit_line(x, y);
    EXPECT_NEAR(f.slope, -4.0, 1e-14);
    EXPECT_NEAR(f.intercept, 3.0, 1e-14);
    EXPECT_NEAR(f.r2, 1.0, 1e-14);
    EXPECT_THROW(fit_line(std::vector<double>{1.0}, std::vector<double>{1.0}), DomainError);
}
