#include <gtest/gtest.h>

#include "nctorus/covering.hpp"
#include "support.hpp"

using namespace nctorus;
using nctorus::oracle::l1_distance;
using nctorus::oracle::pt;
using nctorus::oracle::random_element;

namespace {

CoveringMap fifth_by_two() {
    return {SkewMatrix::planar(Rational(1, 5)), SkewMatrix::planar(Rational(1, 20)), {2, 2}};
}

// theta~ k_1 k_2 = theta mod 1: 1/5 = theta~ * 6 mod 1, take theta~ = 1/30.
CoveringMap fifth_by_two_three() {
    return {SkewMatrix::planar(Rational(1, 5)), SkewMatrix::planar(Rational(1, 30)), {2, 3}};
}

// Direct sum over every group element, no character shortcut.
TorusElement brute_average(const CoveringMap& cov, const TorusElement& a) {
    TorusElement s(a.theta());
    for (const auto& g : cov.group()) s += act(g, a);
    return s;
}

Complex cis_pi(double x) { return std::polar(1.0, -std::numbers::pi * x); }

} // namespace

TEST(OrderedPhase, SingleGeneratorsHavePhaseOne) {
    const auto theta = SkewMatrix::from_upper(3, {Rational(1, 3), 0.3, Rational(2, 7)});
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(ordered_phase(LatticePoint::unit(3, j), theta), Complex(1.0, 0.0));
        EXPECT_EQ(ordered_phase(-LatticePoint::unit(3, j), theta), Complex(1.0, 0.0));
    }
}

TEST(OrderedPhase, HandValues) {
    const auto theta = SkewMatrix::planar(Rational(1, 3));
    EXPECT_NEAR(std::abs(ordered_phase(pt({1, 1}), theta) - cis_pi(1.0 / 3.0)), 0.0, 1e-15);
    // u1 u1 u2: U_(2,0) U_(0,1) = e^{-2 pi i/3} U_(2,1)
    EXPECT_NEAR(std::abs(ordered_phase(pt({2, 1}), theta) - cis_pi(2.0 / 3.0)), 0.0, 1e-15);
}

TEST(OrderedPhase, AgreesWithIteratedProducts) {
    for (const auto& theta : {SkewMatrix::planar(Rational(1, 3)), SkewMatrix::planar(0.2718281828),
                              SkewMatrix::from_upper(3, {Rational(1, 3), 0.3, Rational(-2, 7)})}) {
        for (const auto& p : window_sum(3, theta.dim())) {
            const auto mono = ordered_monomial(theta, p);
            ASSERT_EQ(mono.size(), 1u);
            EXPECT_NEAR(std::abs(mono.coeff(p) - ordered_phase(p, theta)), 0.0, 1e-13) << p.str();
        }
    }
}

TEST(Covering, CongruenceIsValidated) {
    EXPECT_NO_THROW(fifth_by_two());
    EXPECT_NO_THROW(fifth_by_two_three());
    EXPECT_THROW(CoveringMap(SkewMatrix::planar(Rational(1, 5)), SkewMatrix::planar(Rational(1, 10)), {2, 2}),
                 ConfigError);
    // 1/20 + 1/4 also solves the congruence for k = (2,2)
    EXPECT_NO_THROW(CoveringMap(SkewMatrix::planar(Rational(1, 5)), SkewMatrix::planar(Rational(3, 10)), {2, 2}));
    EXPECT_NO_THROW(CoveringMap(SkewMatrix::planar(0.2), SkewMatrix::planar(0.05), {2, 2}));
    EXPECT_THROW(CoveringMap(SkewMatrix::planar(0.2), SkewMatrix::planar(0.05), {2, 2, 1}), DimensionError);
    EXPECT_THROW(CoveringMap(SkewMatrix::planar(0.2), SkewMatrix::planar(0.2), {0, 1}), ConfigError);
    EXPECT_EQ(fifth_by_two_three().group_order(), 6);
    EXPECT_LT(fifth_by_two().congruence_residual(), 1e-12);
}

TEST(Lift, GeneratorsAndUnit) {
    const auto cov = fifth_by_two();
    const auto& tb = cov.theta_base();
    const auto& tc = cov.theta_cover();
    EXPECT_EQ(lift(cov, TorusElement::identity(tb)), TorusElement::identity(tc));
    EXPECT_EQ(lift(cov, TorusElement::generator(tb, 0)), TorusElement::basis(tc, pt({2, 0})));
    EXPECT_EQ(lift(cov, TorusElement::generator(tb, 1)), TorusElement::basis(tc, pt({0, 2})));
}

TEST(Lift, PhaseAtDiagonalPoint) {
    // phi_base(1,1) = e^{-i pi/5}, phi_cover(2,2) = e^{-i pi 4/20}: they cancel.
    const auto cov = fifth_by_two();
    const auto img = lift(cov, TorusElement::basis(cov.theta_base(), pt({1, 1})));
    ASSERT_EQ(img.size(), 1u);
    EXPECT_NEAR(std::abs(img.coeff(pt({2, 2})) - Complex(1.0, 0.0)), 0.0, 1e-15);
    // The same value from the two ordered-monomial computations.
    const Complex via_monomials = ordered_monomial(cov.theta_cover(), pt({2, 2})).coeff(pt({2, 2})) /
                                  ordered_monomial(cov.theta_base(), pt({1, 1})).coeff(pt({1, 1}));
    EXPECT_NEAR(std::abs(img.coeff(pt({2, 2})) - via_monomials), 0.0, 1e-15);
}

TEST(Lift, HomomorphismOnRandomPairs) {
    std::mt19937_64 rng(21);
    for (const auto& cov : {fifth_by_two(), fifth_by_two_three(),
                            CoveringMap(SkewMatrix::planar(0.3), SkewMatrix::planar(0.3 / 6.0), {2, 3})}) {
        for (int trial = 0; trial < 40; ++trial) {
            const auto a = random_element(cov.theta_base(), 3, rng);
            const auto b = random_element(cov.theta_base(), 3, rng);
            EXPECT_LE(l1_distance(lift(cov, a * b), lift(cov, a) * lift(cov, b)), 1e-12 * l1_bound(a) * l1_bound(b));
            EXPECT_LE(l1_distance(lift(cov, involution(a)), involution(lift(cov, a))), 1e-13 * l1_bound(a));
        }
    }
}

TEST(Lift, WrongAlgebraThrows) {
    const auto cov = fifth_by_two();
    EXPECT_THROW(lift(cov, TorusElement::identity(cov.theta_cover())), AlgebraMismatch);
}

TEST(Lift, CommutativeCircleIsDilation) {
    const CoveringMap cov(SkewMatrix::zero(1), SkewMatrix::zero(1), {3});
    std::mt19937_64 rng(22);
    const auto a = random_element(cov.theta_base(), 6, rng);
    const auto img = lift(cov, a);
    EXPECT_EQ(img.size(), a.size());
    for (const auto& [p, c] : a.coeffs()) EXPECT_EQ(img.coeff(pt({3 * p[0]})), c);
}

TEST(Act, IdentitySignAndGroupLaw) {
    const auto cov = fifth_by_two_three();
    const auto& tc = cov.theta_cover();
    std::mt19937_64 rng(23);
    const auto a = random_element(tc, 3, rng);
    EXPECT_EQ(act(CoveringGroupElement::identity(cov.mult()), a), a);

    const CoveringGroupElement g({1, 0}, cov.mult());
    const auto flipped = act(g, TorusElement::basis(tc, pt({1, 0})));
    EXPECT_NEAR(std::abs(flipped.coeff(pt({1, 0})) + 1.0), 0.0, 1e-15);

    const auto b = random_element(tc, 3, rng);
    for (const auto& h : cov.group()) {
        EXPECT_LE(l1_distance(act(h, a * b), act(h, a) * act(h, b)), 1e-12);
        EXPECT_LE(l1_distance(act(h, involution(a)), involution(act(h, a))), 1e-13);
        EXPECT_LE(l1_distance(act(g + h, a), act(g, act(h, a))), 1e-13);
    }
    EXPECT_THROW(act(CoveringGroupElement({1}, {2}), a), DimensionError);
}

TEST(Average, MatchesDirectGroupSum) {
    std::mt19937_64 rng(24);
    for (const auto& cov : {fifth_by_two(), fifth_by_two_three()}) {
        const auto a = random_element(cov.theta_cover(), 5, rng);
        EXPECT_LE(l1_distance(average(cov, a), brute_average(cov, a)), 1e-13 * l1_bound(a));
        const auto avg = average(cov, a);
        for (const auto& [l, c] : avg.coeffs()) EXPECT_TRUE(cov.on_sublattice(l));
    }
}

TEST(Average, InvariantsAndOrthogonality) {
    const auto cov = fifth_by_two_three();
    const auto& tc = cov.theta_cover();
    const auto on = TorusElement::basis(tc, pt({4, -3}));
    EXPECT_EQ(average(cov, on), 6.0 * on);
    const auto off = TorusElement::basis(tc, pt({1, 3}));
    EXPECT_TRUE(average(cov, off).empty());
    // the direct sum vanishes by character orthogonality, up to rounding
    EXPECT_LE(l1_bound(brute_average(cov, off)), 1e-14);

    std::mt19937_64 rng(25);
    const auto b = random_element(cov.theta_base(), 3, rng);
    const auto lb = lift(cov, b);
    EXPECT_LE(l1_distance(average(cov, lb), 6.0 * lb), 1e-14 * l1_bound(lb));
    EXPECT_LE(l1_distance(brute_average(cov, lb), 6.0 * lb), 1e-13 * l1_bound(lb));
}

TEST(HilbertInner, GeneratorValues) {
    for (const auto& cov : {fifth_by_two(), fifth_by_two_three()}) {
        const auto& tc = cov.theta_cover();
        const auto order = static_cast<double>(cov.group_order());
        for (std::size_t j = 0; j < 2; ++j) {
            const auto v = TorusElement::generator(tc, j);
            EXPECT_EQ(hilbert_inner(cov, v, v), order * TorusElement::identity(cov.theta_base()));
        }
        EXPECT_TRUE(hilbert_inner(cov, TorusElement::generator(tc, 0), TorusElement::generator(tc, 1)).empty());
    }
}

TEST(HilbertInner, SesquilinearPositiveAndSublattice) {
    std::mt19937_64 rng(26);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto cov = fifth_by_two_three();
    const auto& tc = cov.theta_cover();
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_element(tc, 3, rng);
        const auto b = random_element(tc, 3, rng);
        const auto c = random_element(tc, 3, rng);
        const Complex s(u(rng), u(rng));
        EXPECT_LE(l1_distance(hilbert_inner(cov, a, b + s * c), hilbert_inner(cov, a, b) + s * hilbert_inner(cov, a, c)),
                  1e-12 * 100);
        EXPECT_LE(l1_distance(hilbert_inner(cov, s * a, b), std::conj(s) * hilbert_inner(cov, a, b)), 1e-11);
        EXPECT_LE(l1_distance(hilbert_inner(cov, b, a), involution(hilbert_inner(cov, a, b))), 1e-11);

        const auto aa = hilbert_inner_detailed(cov, a, a);
        EXPECT_LE(aa.off_sublattice, 1e-14);
        EXPECT_GE(trace(aa.value).real(), 0.0);
        EXPECT_LE(l1_distance(aa.value, involution(aa.value)), 1e-12);
    }
}

TEST(HilbertInner, RecoversZeroComponent) {
    std::mt19937_64 rng(27);
    for (const auto& cov : {fifth_by_two(), fifth_by_two_three()}) {
        for (int trial = 0; trial < 10; ++trial) {
            const auto x = random_element(cov.theta_base(), 2, rng);
            const auto a = random_element(cov.theta_cover(), 4, rng);
            const auto parts = module_decompose(cov, a);
            const LatticePoint zero(2);
            const auto b0 = parts.contains(zero) ? parts.at(zero) : TorusElement(cov.theta_base());
            const auto lhs = hilbert_inner(cov, lift(cov, x), a);
            const auto rhs = static_cast<double>(cov.group_order()) * (involution(x) * b0);
            EXPECT_LE(l1_distance(lhs, rhs), 1e-12 * std::max(1.0, l1_bound(rhs)));
        }
    }
}

TEST(ModuleDecompose, Examples) {
    const auto cov = fifth_by_two_three();
    std::mt19937_64 rng(28);
    const auto b = random_element(cov.theta_base(), 3, rng);
    const auto parts = module_decompose(cov, lift(cov, b));
    ASSERT_EQ(parts.size(), 1u);
    EXPECT_EQ(parts.begin()->first, LatticePoint(2));
    EXPECT_LE(l1_distance(parts.begin()->second, b), 1e-14);

    const auto v1 = module_decompose(cov, TorusElement::generator(cov.theta_cover(), 0));
    ASSERT_EQ(v1.size(), 1u);
    EXPECT_EQ(v1.begin()->first, pt({1, 0}));
    EXPECT_EQ(v1.begin()->second, TorusElement::identity(cov.theta_base()));
}

TEST(ModuleDecompose, RoundTrip) {
    std::mt19937_64 rng(29);
    for (const auto& cov : {fifth_by_two(), fifth_by_two_three(),
                            CoveringMap(SkewMatrix::from_upper(3, {Rational(1, 5), Rational(1, 7), Rational(1, 3)}),
                                        SkewMatrix::from_upper(3, {Rational(1, 10), Rational(1, 28), Rational(1, 6)}),
                                        {2, 1, 2})}) {
        for (int trial = 0; trial < 10; ++trial) {
            const auto a = random_element(cov.theta_cover(), 3, rng);
            const auto parts = module_decompose(cov, a);
            for (const auto& [r, b] : parts)
                for (std::size_t j = 0; j < r.size(); ++j) {
                    EXPECT_GE(r[j], 0);
                    EXPECT_LT(r[j], cov.mult()[j]);
                }
            EXPECT_LE(l1_distance(module_reconstruct(cov, parts), a), 1e-12 * l1_bound(a));
        }
    }
}

TEST(Tower, SingleLevelExample) {
    const TowerSpec spec{Rational(1, 5), {2}, 1};
    const auto maps = build_tower(spec);
    ASSERT_EQ(maps.size(), 1u);
    EXPECT_EQ(maps[0].theta_cover(), SkewMatrix::planar(Rational(1, 20)));
    EXPECT_EQ(maps[0].mult(), (std::vector<std::int64_t>{2, 2}));
}

TEST(Tower, GroupOrdersMultiply) {
    const TowerSpec spec{Rational(1, 5), {2, 3, 2}, 1};
    EXPECT_EQ(tower_map(spec, 0, 2).group_order(), 36);
    const std::vector<std::int64_t> expect{1, 4, 36, 144};
    for (std::size_t j = 0; j <= 3; ++j) EXPECT_EQ(spec.group_order(0, j), expect[j]);
    for (std::size_t k = 0; k <= 3; ++k)
        for (std::size_t l = k; l <= 3; ++l)
            for (std::size_t m = l; m <= 3; ++m)
                EXPECT_EQ(spec.group_order(k, m), spec.group_order(k, l) * spec.group_order(l, m));
    const TowerSpec two{Rational(1, 5), {2, 3}, 2};
    EXPECT_EQ(tower_map(two, 0, 2).group_order(), 1296);
}

TEST(Tower, CompositeLiftMatchesComposedLifts) {
    std::mt19937_64 rng(30);
    for (const TowerSpec& spec : {TowerSpec{Rational(1, 5), {2, 3}, 1}, TowerSpec{0.7, {2, 3, 2}, 1}}) {
        const auto maps = build_tower(spec);
        for (int trial = 0; trial < 10; ++trial) {
            const auto a = random_element(spec.level_theta(0), 3, rng);
            TorusElement step = a;
            for (const auto& m : maps) step = lift(m, step);
            const auto direct = lift(tower_map(spec, 0, spec.levels()), a);
            EXPECT_LE(l1_distance(step, direct), 1e-12 * l1_bound(a));
        }
    }
}

TEST(Tower, InvalidFactorThrows) {
    EXPECT_THROW(build_tower(TowerSpec{Rational(1, 5), {2, 1}, 1}), ConfigError);
    EXPECT_THROW(build_tower(TowerSpec{Rational(1, 5), {2}, 0}), ConfigError);
}

TEST(InducedInner, Examples) {
    const auto cov = fifth_by_two_three();
    const auto xi0 = GnsVector::basis(2, LatticePoint(2));
    const auto v0 = TorusElement::identity(cov.theta_cover());
    EXPECT_EQ(induced_inner(v0, xi0, v0, xi0, cov), Complex(6.0, 0.0));

    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_element(cov.theta_cover(), 2, rng);
        const auto b = random_element(cov.theta_cover(), 2, rng);
        const auto xi = GnsVector::from_element(random_element(cov.theta_base(), 2, rng));
        const auto eta = GnsVector::from_element(random_element(cov.theta_base(), 2, rng));
        const Complex aa = induced_inner(a, xi, a, xi, cov);
        EXPECT_GE(aa.real(), -1e-12);
        EXPECT_NEAR(aa.imag(), 0.0, 1e-10);
        const Complex s(u(rng), u(rng));
        EXPECT_NEAR(std::abs(induced_inner(a, xi, s * b, eta, cov) - s * induced_inner(a, xi, b, eta, cov)), 0.0,
                    1e-10);
        EXPECT_NEAR(std::abs(induced_inner(b, eta, a, xi, cov) - std::conj(induced_inner(a, xi, b, eta, cov))), 0.0,
                    1e-10);
    }
    EXPECT_THROW(induced_inner(v0, GnsVector::basis(3, LatticePoint(3)), v0, xi0, cov), AlgebraMismatch);
}
