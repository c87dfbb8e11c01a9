#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fml/measure.hpp"

using namespace fml;

namespace {

Box mkbox(double a, double b, double c = 0.0, double d = 0.0, int q = 1) {
    Box box;
    box.q = q;
    box.lo = {a, c};
    box.hi = {b, d};
    return box;
}

double u01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

CubeSystem base7(int depth) {
    return build_adic_system(SpaceModel::line(), std::vector<long>(depth, 7), depth);
}

}  // namespace

TEST_CASE("1D power-distance integrals (closed form)") {
    CHECK(power_distance_integral(mkbox(0.4, 0.6), Point{0.5, 0.0}, 1.0) ==
          doctest::Approx(0.01).epsilon(1e-13));
    CHECK(power_distance_integral(mkbox(0.4, 0.6), Point{0.5, 0.0}, 0.0) ==
          doctest::Approx(0.2).epsilon(1e-15));
    // center off the box
    CHECK(power_distance_integral(mkbox(0.0, 1.0), Point{2.0, 0.0}, 1.0) ==
          doctest::Approx(1.5).epsilon(1e-13));
    CHECK_THROWS_AS(power_distance_integral(mkbox(0.0, 1.0), Point{0.5, 0.0}, -1.0),
                    std::invalid_argument);
}

TEST_CASE("2D power-distance integrals against analytic values") {
    Box unit = mkbox(0.0, 1.0, 0.0, 1.0, 2);
    const Point c{0.5, 0.5};
    CHECK(power_distance_integral(unit, c, 0.0) == 1.0);
    // |y-c|^2 integrates to 1/6 by symmetry
    CHECK(power_distance_integral(unit, c, 2.0) == doctest::Approx(1.0 / 6.0).epsilon(1e-10));
    // corner-singular 1/|y|: 2 ln(1 + sqrt 2)
    CHECK(power_distance_integral(unit, Point{0.0, 0.0}, -1.0) ==
          doctest::Approx(2.0 * std::log(1.0 + std::numbers::sqrt2)).epsilon(1e-8));
    CHECK_THROWS_AS(power_distance_integral(unit, c, -2.0), std::invalid_argument);
}

TEST_CASE("2D integrals: additivity and quadrature tolerance behavior") {
    // Richardson-style: halving tau moves the value by at most 10 tau
    Box b = mkbox(0.1, 0.45, 0.2, 0.55, 2);
    const Point c{0.5, 0.5};
    for (double rho : {-0.5, 1.3}) {
        const double a1 = power_distance_integral(b, c, rho, 1e-6);
        const double a2 = power_distance_integral(b, c, rho, 5e-7);
        CHECK(std::abs(a1 - a2) / std::abs(a2) <= 10.0 * 1e-6);
    }
    // splitting a box in four conserves the integral
    std::mt19937_64 rng(5);
    for (int it = 0; it < 20; ++it) {
        Box box = mkbox(0.2 * u01(rng), 0.5 + 0.4 * u01(rng), 0.2 * u01(rng),
                        0.5 + 0.4 * u01(rng), 2);
        const Point cc{u01(rng), u01(rng)};
        const double rho = -1.5 + 3.0 * u01(rng);
        const double whole = power_distance_integral(box, cc, rho);
        const Point m = box.center();
        double parts = 0.0;
        for (int iy = 0; iy < 2; ++iy)
            for (int ix = 0; ix < 2; ++ix) {
                Box sub = box;
                if (ix == 0) sub.hi[0] = m[0]; else sub.lo[0] = m[0];
                if (iy == 0) sub.hi[1] = m[1]; else sub.lo[1] = m[1];
                parts += power_distance_integral(sub, cc, rho);
            }
        CHECK(whole == doctest::Approx(parts).epsilon(1e-7));
    }
}

TEST_CASE("I-sets") {
    CubeSystem s7 = base7(1);
    const ISet i7 = iset(s7, s7.root());
    CHECK(i7.in_slots == std::vector<int>{2, 3, 4});

    CubeSystem s3 = build_adic_system(SpaceModel::line(), {3}, 1);
    const ISet i3 = iset(s3, s3.root());
    CHECK(i3.in_slots == std::vector<int>{1});

    // half-openness decides boundary-touching children: 4 children of [0,1)
    // against the ball (0.25, 0.75): [0.25,0.5) contains its corner 0.25 and
    // is excluded; [0.5,0.75) is included.
    std::vector<std::vector<ExplicitCube>> levels(2);
    ExplicitCube root;
    root.region = region_of(mkbox(0.0, 1.0));
    root.center = Point{0.5, 0.0};
    root.radius = 0.5;
    root.center_child = 2;
    for (std::uint32_t k = 0; k < 4; ++k) {
        ExplicitCube ch;
        ch.region = region_of(mkbox(0.25 * k, 0.25 * (k + 1)));
        ch.center = Point{0.25 * k + 0.125, 0.0};
        ch.radius = 0.125;
        ch.parent = 0;
        root.children.push_back(k);
        levels[1].push_back(ch);
    }
    levels[0].push_back(root);
    CubeSystem ex = make_explicit_system(SpaceModel::line(), std::nullopt, Constants{}, levels);
    const ISet ie = iset(ex, ex.root());
    CHECK(ie.in_slots == std::vector<int>{2});
}

TEST_CASE("coefficient A") {
    CubeSystem s7 = base7(1);
    CHECK(*coefficient_A(s7, s7.root(), 1.0) == doctest::Approx(28.0 / 3.0).epsilon(1e-13));
    CHECK(*coefficient_A(s7, s7.root(), 0.0) == 1.0);

    CubeSystem s5 = build_adic_system(SpaceModel::line(), {5}, 1);
    CHECK(*coefficient_A(s5, s5.root(), 1.0) == doctest::Approx(20.0).epsilon(1e-13));

    // I empty: subsampled b=2 root has no child inside the half-radius ball
    CubeSystem sg = build_subsampled_dyadic(SpaceModel::line(), 2,
                                            AlphaSequence(SequenceSpec::geometric(0.5)), 2);
    CHECK_FALSE(coefficient_A(sg, sg.root(), 1.0).has_value());
}

TEST_CASE("child weights") {
    CubeSystem s7 = base7(1);
    const Cube root = s7.root();
    CHECK(child_weight_t(s7, root, 3, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
    CHECK(child_weight_t(s7, root, 2, 1.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-13));
    CHECK(child_weight_t(s7, root, 4, 1.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-13));
    CHECK(child_weight_t(s7, root, 0, 1.0) == 1.0);
    CHECK(child_weight_t(s7, root, 3, -0.5) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-13));
    CHECK(child_weight_t(s7, root, 2, -0.5) ==
          doctest::Approx((3.0 - std::sqrt(3.0)) / 2.0).epsilon(1e-13));

    // single-child I: the averaged weight is exactly 1
    CubeSystem s5 = build_adic_system(SpaceModel::line(), {5}, 1);
    CHECK(child_weight_t(s5, s5.root(), 2, 1.0) == 1.0);
    CHECK(child_weight_t(s5, s5.root(), 2, -0.25) == 1.0);
}

TEST_CASE("theta normalization: weights conserve volume per cube") {
    std::mt19937_64 rng(17);
    for (int it = 0; it < 8; ++it) {
        const double rho = -0.9 + 3.0 * u01(rng);
        CubeSystem s7 = base7(2);
        const WeightRecord w = compute_weights(s7, s7.root(), rho);
        double sum = 0.0;
        for (int s = 0; s < 7; ++s) sum += w.t[s] * s7.child_cube(s7.root(), s).region.volume();
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("choose_n0") {
    const N0Result r7 = choose_n0(base7(3), 1.0, 3);
    REQUIRE(r7.basic.has_value());
    CHECK(*r7.basic == 1);
    REQUIRE(r7.nontrivial.has_value());
    CHECK(*r7.nontrivial == 1);
    CHECK_FALSE(r7.trivial_flag);

    CubeSystem s3 = build_adic_system(SpaceModel::line(), {3, 3, 3}, 3);
    const N0Result r3 = choose_n0(s3, 1.0, 3);
    REQUIRE(r3.basic.has_value());
    CHECK(*r3.basic == 1);
    CHECK(r3.trivial_flag);  // single-child I everywhere

    CubeSystem mixed = build_adic_system(SpaceModel::line(), {3, 5, 7, 9, 11}, 5);
    const N0Result rm = choose_n0(mixed, 1.0, 5);
    REQUIRE(rm.nontrivial.has_value());
    CHECK(*rm.nontrivial == 3);
    CHECK(*rm.basic == 1);
}

TEST_CASE("rho = 0 reproduces volumes bitwise") {
    CubeSystem sg = build_subsampled_dyadic(SpaceModel::line(), 2,
                                            AlphaSequence(SequenceSpec::geometric(0.5)), 4);
    MeasureTree tree(sg, 0.0, 1, 4);
    for (int L = 0; L <= 4; ++L)
        for (std::uint64_t i = 0; i < sg.level_cube_count(L); ++i) {
            const CubeId id{L, i};
            CHECK(tree.cube_mass(id) == sg.cube(id).region.volume());  // bitwise
            CHECK(tree.cube_K(id) == 1.0);
        }
}

TEST_CASE("measure masses for base 7") {
    CubeSystem s7 = base7(2);
    MeasureTree tree(s7, 1.0, 1, 2);
    CHECK(tree.cube_mass(CubeId{0, 0}) == 1.0);
    CHECK(tree.cube_mass(CubeId{1, 3}) == doctest::Approx(1.0 / 21.0).epsilon(1e-13));
    CHECK(tree.cube_mass(CubeId{1, 2}) == doctest::Approx(4.0 / 21.0).epsilon(1e-13));
    CHECK(tree.cube_mass(CubeId{1, 0}) == doctest::Approx(1.0 / 7.0).epsilon(1e-13));
    // grandchild masses conserve within each child
    for (std::uint64_t ci = 0; ci < 7; ++ci) {
        double sum = 0.0;
        for (std::uint64_t gi = 0; gi < 7; ++gi) sum += tree.cube_mass(CubeId{2, ci * 7 + gi});
        CHECK(sum == doctest::Approx(tree.cube_mass(CubeId{1, ci})).epsilon(1e-12));
    }
}

TEST_CASE("conservation audit") {
    CubeSystem s7 = base7(4);
    for (double rho : {1.0, -0.5}) {
        MeasureTree tree(s7, rho, 1, 4);
        const ConservationReport rep = audit_conservation(tree, 1e-12);
        CHECK(rep.parents_checked == 1 + 7 + 49 + 343);
        CHECK(rep.violations.empty());
        CHECK(rep.max_rel_err <= 1e-12);
    }
    // 2D with quadrature-backed weights
    CubeSystem sq = build_adic_system(SpaceModel::square(), std::vector<long>(2, 7), 2);
    MeasureTree tq(sq, 1.0, 1, 2);
    const ConservationReport rq = audit_conservation(tq, 1e-6);
    CHECK(rq.parents_checked == 1 + 49);
    CHECK(rq.violations.empty());
    CHECK(rq.max_rel_err <= 1e-12);  // shared child integrals make this near-exact
}

TEST_CASE("ball masses") {
    // Lebesgue: interval overlap
    CubeSystem s7 = base7(3);
    MeasureTree leb(s7, 0.0, 1, 3);
    CHECK(leb.ball_mass(Point{0.5, 0.0}, 0.25).value == doctest::Approx(0.5).epsilon(1e-15));

    // weighted: the ball (0.5 - 1/14, 0.5 + 1/14) is the center child
    for (int depth = 1; depth <= 3; ++depth) {
        MeasureTree tree(base7(depth), 1.0, 1, depth);
        const double m = tree.ball_mass(Point{0.5, 0.0}, 1.0 / 14.0).value;
        CHECK(m == doctest::Approx(1.0 / 21.0).epsilon(1e-12));
    }
}

TEST_CASE("bracketing: inner <= exact <= outer") {
    std::mt19937_64 rng(23);
    CubeSystem s7 = base7(4);
    MeasureTree t1(s7, 1.0, 1, 4);
    CubeSystem sq = build_adic_system(SpaceModel::square(), {7, 7}, 2);
    MeasureTree t2(sq, -0.5, 1, 2);
    for (int it = 0; it < 400; ++it) {
        const Point x{u01(rng), u01(rng)};
        const double r = 0.001 + 0.4 * u01(rng);
        for (const MeasureTree* t : {&t1, &t2}) {
            const BallMass m = t->ball_mass(x, r);
            CHECK(m.inner <= m.value);
            CHECK(m.value <= m.outer);
            CHECK(m.value > 0.0);
        }
    }
}

TEST_CASE("2D exact mode cross-checked against the subdivision bracket") {
    CubeSystem sq = build_adic_system(SpaceModel::square(), {5, 5}, 2);
    MeasureTree a(sq, 1.0, 1, 2);
    MeasureTree b(sq, 1.0, 1, 2);
    b.set_bracket_subdivision(true, 12);
    std::mt19937_64 rng(29);
    for (int it = 0; it < 60; ++it) {
        const Point x{u01(rng), u01(rng)};
        const double r = 0.02 + 0.3 * u01(rng);
        const BallMass ma = a.ball_mass(x, r);
        const BallMass mb = b.ball_mass(x, r);
        CHECK(mb.bracket > 0.0);
        CHECK(std::abs(ma.value - mb.value) <= 0.5 * mb.bracket + 1e-12);
        CHECK(ma.value >= mb.inner - 1e-12);
        CHECK(ma.value <= mb.outer + 1e-12);
    }
}

TEST_CASE("build_measure n0 policies") {
    CubeSystem mixed = build_adic_system(SpaceModel::line(), {3, 5, 7, 9}, 4);
    MeasureBuildInfo info;
    MeasureTree auto_tree = build_measure(mixed, 1.0, std::nullopt, 4, 1e-8, &info);
    CHECK(auto_tree.n0() == 3);
    CHECK_FALSE(info.identity);
    MeasureTree fixed = build_measure(mixed, 1.0, 2, 4);
    CHECK(fixed.n0() == 2);
    // levels below n0 carry t = 1: level-1 cube masses equal volumes
    CHECK(auto_tree.cube_mass(CubeId{1, 1}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("theta tree weights a single transition") {
    CubeSystem s7 = base7(3);
    MeasureTree theta = make_theta_tree(s7, 1, 1.0);  // weights child level 2 only
    CHECK(theta.cube_mass(CubeId{1, 3}) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
    const double m = theta.cube_mass(CubeId{2, 3 * 7 + 3});
    CHECK(m == doctest::Approx((1.0 / 3.0) / 49.0).epsilon(1e-12));
}
