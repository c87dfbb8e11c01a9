// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Tolerances are pinned in the assertions below; runtimes are
// reported so budget regressions show up in the log.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fml/fatthin.hpp"
#include "fml/serialize.hpp"
#include "fml/validate.hpp"

using namespace fml;

namespace {

int g_failures = 0;
int g_checks = 0;
std::vector<std::string> g_notes;

void expect(bool ok, const std::string& what) {
    ++g_checks;
    if (!ok) {
        ++g_failures;
        g_notes.push_back(what);
    }
}

struct Criterion {
    const char* name;
    int fail_before = 0;
    std::chrono::steady_clock::time_point t0;
    explicit Criterion(const char* n) : name(n), fail_before(g_failures) {
        t0 = std::chrono::steady_clock::now();
        g_notes.clear();
    }
    void finish() const {
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (g_failures == fail_before) {
            std::printf("[PASS] %s (%.2fs)\n", name, dt);
        } else {
            std::printf("[FAIL] %s (%.2fs)\n", name, dt);
            for (const auto& n : g_notes) std::printf("       %s\n", n.c_str());
        }
        std::fflush(stdout);
    }
};

CubeSystem base7_line(int depth) {
    return build_adic_system(SpaceModel::line(), std::vector<long>(depth, 7), depth);
}

std::vector<long> odd_bases(int depth) {
    std::vector<long> b;
    for (int n = 1; n <= depth; ++n) b.push_back(2L * n + 1L);
    return b;
}

bool close_abs(double a, double b, double tol) { return std::abs(a - b) <= tol; }

double u01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// criterion 1: closed-form weights on the base-7 root
void criterion_1() {
    Criterion c("criterion 1: closed-form weights, base 7, rho in {1, -1/2}");
    CubeSystem sys = base7_line(1);
    const Cube root = sys.root();
    expect(close_abs(*coefficient_A(sys, root, 1.0), 28.0 / 3.0, 1e-12), "A_root != 28/3");
    expect(close_abs(child_weight_t(sys, root, 3, 1.0), 1.0 / 3.0, 1e-12), "t_center != 1/3");
    expect(close_abs(child_weight_t(sys, root, 2, 1.0), 4.0 / 3.0, 1e-12), "t_side != 4/3");
    expect(close_abs(child_weight_t(sys, root, 4, 1.0), 4.0 / 3.0, 1e-12), "t_side != 4/3");
    expect(close_abs(child_weight_t(sys, root, 3, -0.5), std::sqrt(3.0), 1e-12),
           "t_center != sqrt 3");
    expect(close_abs(child_weight_t(sys, root, 2, -0.5), (3.0 - std::sqrt(3.0)) / 2.0, 1e-12),
           "t_side != (3 - sqrt 3)/2");
    c.finish();
}

// criterion 2: mass conservation at every weighted cube
void criterion_2() {
    Criterion c("criterion 2: conservation audits (1D depth 10 @1e-12, 2D @1e-6, tau 1e-8)");
    {
        MeasureTree tree(base7_line(10), 1.0, 1, 10);
        const ConservationReport rep = audit_conservation(tree, 1e-12, resolve_threads(0));
        expect(rep.violations.empty(), "1D base 7 depth 10: conservation violation");
        expect(rep.parents_checked == 47079208ull, "1D parent count off");
    }
    {
        CubeSystem sys = build_adic_system(SpaceModel::square(), odd_bases(4), 4, true, "odd:2n+1");
        MeasureTree tree = build_measure(sys, 1.0, std::nullopt, 4, 1e-8);
        const ConservationReport rep = audit_conservation(tree, 1e-6, resolve_threads(0));
        expect(rep.violations.empty(), "2D 2n+1 depth 4: conservation violation");
        expect(rep.parents_checked > 0, "2D audit checked nothing");
    }
    {
        CubeSystem sys = build_adic_system(SpaceModel::square(), std::vector<long>(3, 7), 3);
        MeasureTree tree(sys, -0.5, 1, 3);
        const ConservationReport rep = audit_conservation(tree, 1e-6, resolve_threads(0));
        expect(rep.violations.empty(), "2D base 7 rho=-1/2: conservation violation");
    }
    c.finish();
}

// criterion 3: rho = 0 reproduces the reference volumes bitwise
void criterion_3() {
    Criterion c("criterion 3: rho = 0 identity (bitwise cube volumes)");
    std::vector<CubeSystem> systems;
    systems.push_back(build_subsampled_dyadic(SpaceModel::line(), 2,
                                              AlphaSequence(SequenceSpec::geometric(0.5)), 4));
    systems.push_back(base7_line(5));
    systems.push_back(build_adic_system(SpaceModel::square(), {3, 5}, 2));
    for (const CubeSystem& sys : systems) {
        MeasureTree tree(sys, 0.0, 1, sys.depth());
        bool all_bitwise = true;
        for (int L = 0; L <= sys.depth(); ++L)
            for (std::uint64_t i = 0; i < sys.level_cube_count(L); ++i) {
                const CubeId id{L, i};
                all_bitwise =
                    all_bitwise && tree.cube_mass(id) == sys.cube(id).region.volume();
            }
        expect(all_bitwise, "rho=0 mass differs from volume");
    }
    c.finish();
}

// criterion 4: survivor-product law for constant base 7
void criterion_4() {
    Criterion c("criterion 4: survivor products (20/21)^n and (1 - sqrt3/7)^n, n <= 10 @1e-10");
    CubeSystem sys = base7_line(10);
    for (double rho : {1.0, -0.5}) {
        MeasureTree tree(sys, rho, 1, 10);
        const double frac = rho > 0.0 ? 1.0 / 21.0 : std::sqrt(3.0) / 7.0;
        for (int n = 0; n <= 10; ++n) {
            const double expected = std::pow(1.0 - frac, n);
            expect(close_abs(survivor_mass(tree, n), expected, 1e-10), "product law (fast path)");
        }
        // independent route: full survivor recursion at moderate depth
        for (int n = 0; n <= 7; ++n) {
            const double expected = std::pow(1.0 - frac, n);
            expect(close_abs(survivor_mass_brute(tree, n), expected, 1e-10),
                   "product law (brute recursion)");
        }
    }
    c.finish();
}

// criterion 5: Wallis fat experiment
void criterion_5() {
    Criterion c("criterion 5: 2D 2n+1 rho=0 survivor masses @1e-10; tail vs pi/4 @1e-3");
    CubeSystem sys = build_adic_system(SpaceModel::square(), odd_bases(5), 5, true, "odd:2n+1");
    MeasureTree tree(sys, 0.0, 1, 5);
    double prod = 1.0;
    for (int n = 1; n <= 5; ++n) {
        const double an = 1.0 / (2.0 * n + 1.0);
        prod *= 1.0 - an * an;
        expect(close_abs(survivor_mass(tree, n), prod, 1e-10), "survivor mass != partial product");
    }
    expect(close_abs(survivor_mass_brute(tree, 3, resolve_threads(0)),
                     (8.0 / 9.0) * (24.0 / 25.0) * (48.0 / 49.0), 1e-10),
           "brute recursion disagrees at n=3");
    const ProductBound pb =
        product_lower_bound(AlphaSequence(SequenceSpec::reciprocal_odd_rule()), 0.0, 2, 1.0, 1.0,
                            1, 5);
    expect(close_abs(pb.truncated, prod, 1e-12), "truncated product mismatch");
    expect(close_abs(pb.with_tail, std::numbers::pi / 4.0, 1e-3), "tail extrapolation off pi/4");
    c.finish();
}

// criterion 6: center-ratio bound with a stable fitted constant
void criterion_6() {
    Criterion c("criterion 6: nu(center)/nu(parent) <= CEC alpha^{(q+rho)d}, CEC stable 4->8");
    auto fitted_cec = [](const CubeSystem& sys, double rho, int depth) {
        MeasureTree tree(sys, rho, 1, depth);
        const double e = (sys.q() + rho) * sys.constants().d;
        double cec = 0.0;
        for (int n = 0; n < depth; ++n)
            cec = std::max(cec, center_child_ratio(tree, n).implied_cec);
        // the fitted constant must dominate every level by construction
        for (int n = 0; n < depth; ++n) {
            const CenterRatio r = center_child_ratio(tree, n);
            const double bound = cec * std::pow(sys.subdivision_alpha(n), e);
            if (!(r.max_ratio <= bound * (1.0 + 1e-12))) return -1.0;
        }
        return cec;
    };
    for (double rho : {1.0, -0.5}) {
        const double c4 = fitted_cec(base7_line(4), rho, 4);
        const double c8 = fitted_cec(base7_line(8), rho, 8);
        expect(c4 > 0.0 && c8 > 0.0, "bound violated at fitted CEC");
        expect(std::abs(c8 - c4) <= 0.05 * c4, "fitted CEC unstable across depths");
    }
    CubeSystem wal = build_adic_system(SpaceModel::square(), odd_bases(4), 4, true, "odd:2n+1");
    const double cw = fitted_cec(wal, 0.0, 4);
    expect(close_abs(cw, 1.0, 1e-9), "2D rho=0 implied constant != 1");
    c.finish();
}

// criterion 7: A-coefficient band and the 1D closed form
void criterion_7() {
    Criterion c("criterion 7: A in [r^-rho/C4, C4 r^-rho]; 1D closed form @1e-12");
    struct Config {
        CubeSystem sys;
        double rho;
    };
    std::vector<Config> configs;
    configs.push_back({base7_line(6), 1.0});
    configs.push_back({base7_line(6), -0.5});
    configs.push_back({build_adic_system(SpaceModel::line(), {3, 5, 7, 9, 11, 13}, 6), 1.0});
    configs.push_back({build_adic_system(SpaceModel::square(), std::vector<long>(3, 7), 3), 1.0});
    for (const auto& cfg : configs) {
        double c4 = 1.0;
        bool closed_ok = true;
        for (int L = 0; L < cfg.sys.depth(); ++L) {
            for (const CubeId id : cfg.sys.reps_for_level(L).ids) {
                const Cube cube = cfg.sys.cube(id);
                const auto A = coefficient_A(cfg.sys, cube, cfg.rho);
                if (!A) continue;
                const double m = *A * std::pow(cube.radius, cfg.rho);
                c4 = std::max({c4, m, 1.0 / m});
                if (cfg.sys.q() == 1) {
                    const WeightRecord w = compute_weights(cfg.sys, cube, cfg.rho);
                    const double closed =
                        (cfg.rho + 1.0) * std::pow(2.0, cfg.rho) * std::pow(w.H_I, -cfg.rho);
                    closed_ok = closed_ok && close_abs(*A, closed, 1e-12 * std::abs(closed));
                }
            }
        }
        expect(std::isfinite(c4) && c4 < 1e6, "fitted C4 blew up");
        expect(cfg.sys.q() == 2 || closed_ok, "1D closed form (rho+1) 2^rho h^-rho violated");
        // every A lies in the fitted band by construction of c4; re-check
        for (int L = 0; L < cfg.sys.depth(); ++L) {
            for (const CubeId id : cfg.sys.reps_for_level(L).ids) {
                const Cube cube = cfg.sys.cube(id);
                const auto A = coefficient_A(cfg.sys, cube, cfg.rho);
                if (!A) continue;
                const double lo = std::pow(cube.radius, -cfg.rho) / c4;
                const double hi = c4 * std::pow(cube.radius, -cfg.rho);
                expect(*A >= lo * (1.0 - 1e-12) && *A <= hi * (1.0 + 1e-12),
                       "A outside fitted band");
            }
        }
    }
    c.finish();
}

// criterion 8: doubling-scan stability between depths 8 and 10
void criterion_8() {
    Criterion c("criterion 8: scan stability 8->10 within 5%, 10^3 queries, ratios finite >= 1");
    for (double rho : {1.0, -0.5}) {
        double max8 = 0.0, max10 = 0.0;
        for (int depth : {8, 10}) {
            MeasureTree tree(base7_line(depth), rho, 1, depth);
            SamplingSpec spec;
            spec.source = SamplingSpec::Source::UniformRandom;
            spec.count = 125;
            spec.seed = 2024;
            spec.rmin = 1.0 / 1024.0;
            spec.rmax = 1.0 / 8.0;  // 8 dyadic radii -> 1000 samples
            const DoublingReport rep = doubling_scan(tree, spec, resolve_threads(0));
            expect(rep.samples.size() == 1000, "sample count != 1000");
            bool ok = true;
            for (const auto& s : rep.samples)
                ok = ok && std::isfinite(s.ratio) && s.ratio >= 1.0;
            expect(ok, "non-finite or sub-1 ratio");
            (depth == 8 ? max8 : max10) = rep.max_ratio;
        }
        expect(std::abs(max10 - max8) <= 0.05 * max8, "max ratio drifts more than 5%");
    }
    c.finish();
}

// criterion 9: the distorted carpet's restricted ratios decay
void criterion_9() {
    Criterion c("criterion 9: distorted-carpet restricted decay, lambda > 0; plain within 2x");
    CubeSystem dist = build_distorted_carpet(odd_bases(5), 5, "odd:2n+1");
    MeasureTree tree(dist, 0.0, 1, 5);
    SamplingSpec spec;
    const RestrictedScanReport rep = restricted_doubling_scan(tree, 5, spec, 6.0, 3);
    expect(rep.samples.size() == 4, "expected one probe per distorted level");
    bool decreasing = true;
    for (std::size_t i = 0; i + 1 < rep.samples.size(); ++i)
        if (rep.samples[i].level >= 3 || rep.samples[i + 1].level >= 3)
            decreasing = decreasing && rep.samples[i].ratio > rep.samples[i + 1].ratio;
    expect(decreasing, "restricted ratios not strictly decreasing for n >= 3");
    expect(rep.lambda > 0.0, "log-log slope lambda <= 0");
    std::printf("       lambda = %.3f, residual = %.3g (fit over %d probes)\n", rep.lambda,
                rep.residual, rep.fit_points);

    CubeSystem plain =
        build_adic_system(SpaceModel::square(), odd_bases(5), 5, true, "odd:2n+1");
    MeasureTree ptree(plain, 0.0, 1, 5);
    std::vector<double> ratios;
    for (const auto& e : dist.distortions()) {
        if (e.hole_level < 3) continue;
        const Cube nb = plain.cube(CubeId{e.hole_level, e.neighbor_index});
        const long m = plain.bases()[e.hole_level];
        const Cube probe = plain.child_cube(nb, static_cast<int>(m * ((m - 1) / 2)));
        const double r = (3.0 / 16.0) * nb.bbox.side(0);
        const double num = restricted_ball_mass(ptree, 5, probe.center, r);
        const double den = restricted_ball_mass(ptree, 5, probe.center, 6.0 * r);
        if (den > 0.0) ratios.push_back(num / den);
    }
    expect(ratios.size() == 2, "plain-carpet probes incomplete");
    if (ratios.size() == 2) {
        const double hi = std::max(ratios[0], ratios[1]);
        const double lo = std::min(ratios[0], ratios[1]);
        expect(hi / lo <= 2.0, "plain-carpet ratios vary by more than 2x");
    }
    c.finish();
}

// criterion 10: pushforward invariance
void criterion_10() {
    Criterion c("criterion 10: x^(1/2) image validates; beta = 1 is the identity");
    CubeSystem sys = build_adic_system(SpaceModel::line(), std::vector<long>(6, 3), 6);
    CubeSystem img = pushforward_power(sys, 0.5);
    const ValidationReport rep = validate(img, 6, {2.0, 4.0, 8.0});
    expect(rep.pass(), "axioms I-V fail on the beta = 1/2 image");
    expect(std::isfinite(rep.fitted_C1) && rep.fitted_C1 > 1.0, "fitted C1 not finite/sane");
    expect(std::isfinite(rep.fitted_C2), "fitted C2 not finite");
    for (const auto& [T, c3] : rep.fitted_C3)
        expect(std::isfinite(c3) && c3 >= 1.0, "fitted C3 not finite");

    CubeSystem same = pushforward_power(sys, 1.0);
    bool identical = true;
    for (int L = 0; L <= 6; ++L)
        for (std::uint64_t i = 0; i < sys.level_cube_count(L); ++i) {
            const Cube a = sys.cube(CubeId{L, i});
            const Cube b = same.cube(CubeId{L, i});
            identical = identical && a.bbox.lo[0] == b.bbox.lo[0] &&
                        a.bbox.hi[0] == b.bbox.hi[0] && a.center[0] == b.center[0] &&
                        a.radius == b.radius;
        }
    expect(identical, "beta = 1 image differs from the source");
    c.finish();
}

// criterion 11: axiom validation and injected-violation detection
void criterion_11() {
    Criterion c("criterion 11: axioms pass on adic/subsampled; corruption detected with witness");
    {
        const ValidationReport rep =
            validate(build_adic_system(SpaceModel::line(), std::vector<long>(6, 3), 6), 6,
                     {2.0, 4.0, 8.0});
        expect(rep.pass(), "1D base-3 depth-6 axioms fail");
        for (const auto& [T, c3] : rep.fitted_C3) expect(c3 == 1.0, "uniform C3 != 1");
    }
    {
        const ValidationReport rep = validate(
            build_adic_system(SpaceModel::square(), std::vector<long>(4, 3), 4), 4, {2.0, 8.0});
        expect(rep.pass(), "2D base-3 depth-4 axioms fail");
        for (const auto& [T, c3] : rep.fitted_C3) expect(c3 == 1.0, "uniform C3 != 1");
    }
    {
        CubeSystem sg = build_subsampled_dyadic(
            SpaceModel::line(), 2, AlphaSequence(SequenceSpec::geometric(0.5)), 5);
        const ValidationReport rep = validate(sg, 5, {2.0, 4.0, 8.0});
        expect(rep.pass(), "subsampled dyadic axioms fail");
        expect(rep.fitted_C2 <= 2.0 + 1e-12, "subsampled C2 exceeds b");
    }
    {
        CubeSystem eager = build_adic_system(SpaceModel::line(), {3, 3}, 2, false);
        json j = system_to_json(eager, true);
        j["builder"] = json{{"kind", "explicit"}};
        for (auto& e : j["cubes"])
            if (e["path"] == json::array({2, 0})) e["radius"] = 3.0 * e["radius"].get<double>();
        const CubeSystem bad = system_from_json(j);
        const ValidationReport rep = validate(bad, 2, {2.0});
        expect(!rep.pass(), "corrupted radius not detected");
        bool witnessed = false;
        for (const auto& w : rep.ball_sandwich.witnesses)
            if (bad.path_of(w.id) == std::vector<std::uint32_t>{2, 0}) witnessed = true;
        expect(witnessed, "no witness naming the corrupted cube");
    }
    c.finish();
}

// criterion 12: certified bracketing of ball masses
void criterion_12() {
    Criterion c("criterion 12: inner <= exact <= outer on 10^3 seeded queries per system");
    struct Config {
        CubeSystem sys;
        double rho;
        int depth;
    };
    std::vector<Config> configs;
    configs.push_back({base7_line(6), 1.0, 6});
    configs.push_back({build_adic_system(SpaceModel::square(), std::vector<long>(3, 7), 3), -0.5, 3});
    configs.push_back(
        {build_adic_system(SpaceModel::square(), odd_bases(4), 4, true, "odd:2n+1"), 0.0, 4});
    configs.push_back({build_subsampled_dyadic(SpaceModel::line(), 2,
                                               AlphaSequence(SequenceSpec::geometric(0.5)), 6),
                       1.0, 6});
    for (const auto& cfg : configs) {
        MeasureTree tree = build_measure(cfg.sys, cfg.rho, std::nullopt, cfg.depth);
        std::mt19937_64 rng(808);
        bool ok = true;
        for (int it = 0; it < 1000; ++it) {
            const Point x{u01(rng), cfg.sys.q() == 2 ? u01(rng) : 0.0};
            const double r = std::pow(2.0, -10.0 * u01(rng));
            const BallMass m = tree.ball_mass(x, r);
            ok = ok && m.inner <= m.value && m.value <= m.outer && m.outer > 0.0;
        }
        expect(ok, "bracketing violated");
    }
    c.finish();
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11();
    criterion_12();
    std::printf("%d checks, %d failures\n", g_checks, g_failures);
    return g_failures == 0 ? 0 : 1;
}
