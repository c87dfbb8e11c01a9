#include "fml/fatthin.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fml {

namespace {

// Removal fraction creating level j (mass of the center child of a level-(j-1)
// parent relative to the parent), for one representative parent.
double removal_fraction(const MeasureTree& tree, const Cube& parent) {
    const CubeSystem& sys = tree.system();
    const Cube cc = sys.child_cube(parent, parent.center_child);
    double t = 1.0;
    if (tree.transition_weighted(parent.id.level + 1) && tree.rho() != 0.0) {
        const WeightRecord w = tree.weights_for(parent);
        t = w.t[parent.center_child];
    }
    return t * cc.region.volume() / parent.region.volume();
}

struct SurvivorSumCtx {
    const MeasureTree& tree;
    int n;
    std::vector<SlotCubes> pool;
};

double survivor_sum_rec(SurvivorSumCtx& ctx, const Cube& c, double K) {
    if (c.id.level == ctx.n) return K * c.region.volume();
    const CubeSystem& sys = ctx.tree.system();
    // pool is pre-sized; entries stay put while deeper frames hold references
    SlotCubes& children = ctx.pool[c.id.level];
    collect_children(sys, c, children);
    const bool weighted =
        ctx.tree.transition_weighted(c.id.level + 1) && ctx.tree.rho() != 0.0;
    WeightRecord w;
    if (weighted) w = compute_weights_children(c, children, ctx.tree.rho(), ctx.tree.tau());
    double sum = 0.0;
    const int cc = c.center_child;
    for (std::size_t i = 0; i < children.size(); ++i) {
        const auto& [slot, child] = ctx.pool[c.id.level][i];
        if (slot == cc) continue;
        sum += survivor_sum_rec(ctx, child, weighted ? K * w.t[slot] : K);
    }
    return sum;
}

}  // namespace

double survivor_mass_brute(const MeasureTree& tree, int n, int threads) {
    if (n < 0 || n > tree.depth())
        throw std::out_of_range("survivor_mass: level beyond weighted depth");
    if (n == 0) return tree.system().root().region.volume();
    const CubeSystem& sys = tree.system();
    // split the survivor forest at a shallow level for the parallel loop
    int split = 0;
    std::vector<std::pair<Cube, double>> roots{{sys.root(), 1.0}};
    while (split < n && roots.size() < 64) {
        std::vector<std::pair<Cube, double>> next;
        for (auto& [c, K] : roots) {
            const bool weighted = tree.transition_weighted(c.id.level + 1) && tree.rho() != 0.0;
            WeightRecord w;
            if (weighted) w = tree.weights_for(c);
            for (int s = 0; s < c.child_count; ++s) {
                if (s == c.center_child || !sys.slot_present(c, s)) continue;
                next.push_back({sys.child_cube(c, s), weighted ? K * w.t[s] : K});
            }
        }
        roots = std::move(next);
        ++split;
    }
    if (split == n) {
        double total = 0.0;
        for (auto& [c, K] : roots) total += K * c.region.volume();
        return total;
    }
    std::vector<double> parts(roots.size(), 0.0);
    const int nt = resolve_threads(threads);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(nt)
#endif
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(roots.size()); ++i) {
        SurvivorSumCtx ctx{tree, n, {}};
        ctx.pool.resize(static_cast<std::size_t>(n) + 1);
        parts[i] = survivor_sum_rec(ctx, roots[i].first, roots[i].second);
    }
    (void)nt;
    double total = 0.0;
    for (double p : parts) total += p;  // fixed order: thread count cannot change the sum
    return total;
}

double survivor_mass(const MeasureTree& tree, int n, int threads) {
    if (n < 0 || n > tree.depth())
        throw std::out_of_range("survivor_mass: level beyond weighted depth");
    const CubeSystem& sys = tree.system();
    if (!sys.uniform_levels()) return survivor_mass_brute(tree, n, threads);
    double mass = sys.root().region.volume();
    Cube parent = sys.root();
    for (int j = 1; j <= n; ++j) {
        mass *= 1.0 - removal_fraction(tree, parent);
        // stay on a survivor branch: slot 0 is never the center child
        parent = sys.child_cube(parent, 0);
    }
    return mass;
}

CenterRatio center_child_ratio(const MeasureTree& tree, int n) {
    if (n < 0 || n >= tree.depth())
        throw std::out_of_range("center_child_ratio: level n+1 not materialized/weighted");
    const CubeSystem& sys = tree.system();
    CenterRatio out;
    const auto reps = sys.reps_for_level(n);
    for (const CubeId id : reps.ids) {
        if (!sys.is_survivor(id)) continue;
        const double f = removal_fraction(tree, sys.cube(id));
        out.max_ratio = std::max(out.max_ratio, f);
    }
    const double e = (sys.q() + tree.rho()) * sys.constants().d;
    out.implied_cec = out.max_ratio / std::pow(sys.subdivision_alpha(n), e);
    return out;
}

ProductBound product_lower_bound(const AlphaSequence& alpha, double rho, int q, double d,
                                 double cec, std::uint64_t n1, std::uint64_t N) {
    if (n1 < 1 || N < n1) throw std::invalid_argument("product_lower_bound: need 1 <= n1 <= N");
    ProductBound pb;
    const double e = (static_cast<double>(q) + rho) * d;
    for (std::uint64_t j = n1; j <= N; ++j) {
        const double f = 1.0 - cec * std::pow(alpha.value(j), e);
        if (!(f > 0.0)) {
            pb.vacuous = true;
            pb.vacuous_at = j;
            pb.truncated = 0.0;
            pb.with_tail = 0.0;
            return pb;
        }
        pb.truncated *= f;
    }
    pb.with_tail = pb.truncated;

    const SeqKind kind = alpha.kind();
    if (kind == SeqKind::ExplicitList ||
        (kind == SeqKind::ReciprocalOdd && alpha.spec().odd_rule == OddRule::List)) {
        pb.tail_known = false;
        return pb;
    }
    // divergent-sum families: the infinite product vanishes
    const bool divergent =
        kind == SeqKind::Constant ||
        (kind == SeqKind::ReciprocalOdd && alpha.spec().odd_rule == OddRule::Constant) ||
        (kind == SeqKind::PowerDecay && alpha.spec().s * e <= 1.0) ||
        (kind == SeqKind::ReciprocalOdd && alpha.spec().odd_rule == OddRule::TwoNPlusOne &&
         e <= 1.0);
    if (divergent) {
        pb.with_tail = 0.0;
        return pb;
    }
    // extend numerically, then close with an integral-remainder estimate
    double log_tail = 0.0;
    std::uint64_t j = N + 1;
    const std::uint64_t j_cap = N + 2'000'000;
    double x = cec * std::pow(alpha.value(j), e);
    while (x >= 1e-12 && j < j_cap) {
        if (!(1.0 - x > 0.0)) {
            pb.vacuous = true;
            pb.vacuous_at = j;
            pb.with_tail = 0.0;
            return pb;
        }
        log_tail += std::log1p(-x);
        ++j;
        x = cec * std::pow(alpha.value(j), e);
    }
    double remainder = 0.0;  // sum of cec * alpha_m^e for m >= j
    const double M = static_cast<double>(j);
    switch (kind) {
        case SeqKind::Geometric: {
            const double ce = std::pow(alpha.spec().c, e);
            remainder = cec * std::pow(alpha.spec().c, e * M) / (1.0 - ce);
            break;
        }
        case SeqKind::PowerDecay: {
            const double se = alpha.spec().s * e;
            remainder = cec * std::pow(alpha.spec().c, e) * std::pow(M, 1.0 - se) / (se - 1.0);
            break;
        }
        case SeqKind::ExpSqrt: {
            const double a = alpha.spec().s * e;
            remainder = cec * 2.0 * (std::sqrt(M) + 1.0 / a) * std::exp(-a * std::sqrt(M)) / a;
            break;
        }
        case SeqKind::ReciprocalOdd: {
            remainder = cec * std::pow(2.0 * M + 1.0, 1.0 - e) / (2.0 * (e - 1.0));
            break;
        }
        default:
            break;
    }
    pb.with_tail = pb.truncated * std::exp(log_tail - remainder);
    return pb;
}

FatThinReport fat_thin_experiment(const CubeSystem& sys, const FatThinConfig& cfg) {
    FatThinReport rep;
    rep.q = sys.q();
    rep.d = sys.constants().d;
    const ClassReport cls = classify_family(sys.alpha().spec());
    rep.prediction = cls.prediction;

    double rho = cfg.rho;
    switch (cfg.policy) {
        case FatThinConfig::RhoPolicy::Fixed:
            rep.branch = rho < 0.0 ? "thin" : "fat";
            break;
        case FatThinConfig::RhoPolicy::FatAuto: {
            rep.branch = "fat";
            if (cls.membership == Membership::Ell0) {
                rho = 1.0;
            } else if (cls.membership == Membership::EllInfinityNotEll0) {
                rho = std::max(*cls.witness_p / rep.d - rep.q, 0.0) + 0.5;
            } else {
                throw std::invalid_argument(
                    "fat_thin_experiment: no admissible fat-branch rho for this family");
            }
            break;
        }
        case FatThinConfig::RhoPolicy::ThinAuto: {
            rep.branch = "thin";
            if (cls.membership == Membership::Ell0)
                throw std::invalid_argument(
                    "fat_thin_experiment: every negative-rho sum converges for an ell0 family");
            rho = -0.5 * rep.q;
            break;
        }
    }
    if (!(rho > -static_cast<double>(rep.q)))
        throw std::invalid_argument("fat_thin_experiment: inadmissible rho <= -q");
    rep.rho = rho;

    MeasureBuildInfo info;
    MeasureTree tree = build_measure(sys, rho, cfg.n0, cfg.depth, cfg.tau, &info);
    rep.n0_used = info.n0_used;

    const double e = (rep.q + rho) * rep.d;
    // at rho = 0 the weights are identically 1, so every level obeys the
    // center-mass bound and the fit starts at 1; otherwise it starts where
    // the mass redistribution does
    const int fit_start = rho == 0.0 ? 1 : rep.n0_used;
    rep.rows.resize(cfg.depth);
    for (int n = 1; n <= cfg.depth; ++n) {
        FatThinRow& row = rep.rows[n - 1];
        row.n = n;
        row.alpha = sys.alpha().value(n);
        const CenterRatio cr = center_child_ratio(tree, n - 1);
        row.center_ratio = cr.max_ratio;
        row.implied_cec = row.center_ratio / std::pow(row.alpha, e);
        row.survivor_mass = survivor_mass(tree, n, cfg.threads);
        if (n >= fit_start) rep.fitted_cec = std::max(rep.fitted_cec, row.implied_cec);
    }

    for (int n = fit_start; n <= cfg.depth; ++n) {
        if (1.0 - rep.fitted_cec * std::pow(sys.alpha().value(n), e) > 0.0) {
            rep.n1 = n;
            break;
        }
    }
    double prod = 1.0;
    rep.bound_respected = true;
    if (rep.n1) {
        const double mass_n1 = rep.rows[*rep.n1 - 1].survivor_mass;
        for (int n = 1; n <= cfg.depth; ++n) {
            FatThinRow& row = rep.rows[n - 1];
            if (n < *rep.n1) {
                row.product_bound = 1.0;
                continue;
            }
            if (n > *rep.n1)
                prod *= 1.0 - rep.fitted_cec * std::pow(row.alpha, e);
            row.product_bound = prod;
            if (row.survivor_mass < prod * mass_n1 * (1.0 - 1e-9)) rep.bound_respected = false;
        }
        const ProductBound pb = product_lower_bound(sys.alpha(), rho, rep.q, rep.d, rep.fitted_cec,
                                                    *rep.n1, cfg.depth);
        rep.product_tail = pb.with_tail;
    }

    const bool positive = rep.n1 && rep.product_tail > 0.0 && rep.bound_respected;
    bool collapsing = true;
    for (int n = 1; n <= cfg.depth; ++n) {
        const double prev = n == 1 ? 1.0 : rep.rows[n - 2].survivor_mass;
        if (rep.rows[n - 1].survivor_mass > prev * (1.0 - 1e-6)) collapsing = false;
    }
    if (positive)
        rep.verdict = "mass-stays-above-positive-bound";
    else if (collapsing && rep.product_tail == 0.0)
        rep.verdict = "mass-collapses-geometrically";
    else
        rep.verdict = "inconclusive";

    if (rep.branch == "fat")
        rep.consistent = (rep.prediction == "fat" ||
                          rep.prediction == "positive-for-some-doubling-measure")
                             ? rep.verdict == "mass-stays-above-positive-bound"
                             : rep.verdict != "mass-stays-above-positive-bound";
    else
        rep.consistent = (rep.prediction == "thin")
                             ? rep.verdict == "mass-collapses-geometrically"
                             : true;
    return rep;
}

double restricted_ball_mass(const MeasureTree& tree, int n, const Point& x, double r) {
    return tree.restricted_ball_mass(n, x, r).value;
}

namespace {

void fit_loglog(RestrictedScanReport& rep) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (const auto& s : rep.samples) {
        if (s.level < rep.fit_from || s.zero_denominator || !(s.ratio > 0.0)) continue;
        const double lx = std::log(s.alpha), ly = std::log(s.ratio);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++m;
    }
    rep.fit_points = m;
    if (m < 2) return;
    const double denom = m * sxx - sx * sx;
    if (denom == 0.0) return;
    rep.lambda = (m * sxy - sx * sy) / denom;
    rep.intercept = (sy - rep.lambda * sx) / m;
    double ss = 0.0;
    for (const auto& s : rep.samples) {
        if (s.level < rep.fit_from || s.zero_denominator || !(s.ratio > 0.0)) continue;
        const double pred = rep.lambda * std::log(s.alpha) + rep.intercept;
        const double d = std::log(s.ratio) - pred;
        ss += d * d;
    }
    rep.residual = std::sqrt(ss / m);
}

}  // namespace

RestrictedScanReport restricted_doubling_scan(const MeasureTree& tree, int n,
                                              const SamplingSpec& sampling, double factor,
                                              int fit_from) {
    const CubeSystem& sys = tree.system();
    RestrictedScanReport rep;
    rep.factor = factor;
    rep.fit_from = fit_from;

    if (!sys.distortions().empty()) {
        for (const auto& e : sys.distortions()) {
            const Cube hole = sys.cube(CubeId{e.hole_level, e.hole_index});
            const Cube box = sys.cube(CubeId{e.hole_level + 1, e.detached_index});
            RestrictedSample s;
            s.level = e.hole_level;
            s.alpha = sys.subdivision_alpha(e.hole_level);
            s.x = box.center;
            // a fixed fraction of the hole side stays under the survivor gap
            // for every base >= 5, so the probe scale is uniform across levels
            s.r = (3.0 / 16.0) * hole.bbox.side(0);
            s.mass_r = restricted_ball_mass(tree, n, s.x, s.r);
            s.mass_fr = restricted_ball_mass(tree, n, s.x, factor * s.r);
            if (s.mass_fr > 0.0)
                s.ratio = s.mass_r / s.mass_fr;
            else
                s.zero_denominator = true;
            rep.samples.push_back(s);
        }
        fit_loglog(rep);
        return rep;
    }

    // generic mode: seeded survivor-cube centers at level n
    SamplingSpec spec = sampling;
    spec.source = SamplingSpec::Source::SurvivorPoints;
    spec.level = n;
    const auto pts = sample_points(tree, spec);
    const auto rs = radius_grid(spec);
    for (const Point& x : pts) {
        for (double r : rs) {
            RestrictedSample s;
            s.level = n;
            s.alpha = sys.subdivision_alpha(n - 1);
            s.x = x;
            s.r = r;
            s.mass_r = restricted_ball_mass(tree, n, x, r);
            s.mass_fr = restricted_ball_mass(tree, n, x, factor * r);
            if (s.mass_fr > 0.0)
                s.ratio = s.mass_r / s.mass_fr;
            else
                s.zero_denominator = true;
            rep.samples.push_back(s);
        }
    }
    fit_loglog(rep);
    return rep;
}

namespace {

// first level n <= n_max with a survivor cube inside B(x, R); the descent
// walks survivor branches only, so every node reached is a survivor
void first_fit_rec(const CubeSystem& sys, const Cube& c, const Point& x, double R, int n_max,
                   std::optional<int>& best) {
    if (best && c.id.level >= *best) return;
    if (!c.region.meets_ball(x, R)) return;
    if (c.region.in_ball(x, R)) {
        best = c.id.level;
        return;
    }
    if (c.id.level >= n_max) return;
    for (int s = 0; s < c.child_count; ++s) {
        if (s == c.center_child || !sys.slot_present(c, s)) continue;
        first_fit_rec(sys, sys.child_cube(c, s), x, R, n_max, best);
    }
}

// collect survivor cubes at level n meeting the ball
void survivors_in_ball(const CubeSystem& sys, const Cube& c, const Point& x, double R, int n,
                       std::vector<Cube>& out) {
    if (!c.region.meets_ball(x, R)) return;
    if (c.id.level == n) {
        out.push_back(c);
        return;
    }
    for (int s = 0; s < c.child_count; ++s) {
        if (s == c.center_child || !sys.slot_present(c, s)) continue;
        survivors_in_ball(sys, sys.child_cube(c, s), x, R, n, out);
    }
}

}  // namespace

PlumpnessReport relative_plumpness_probe(const CubeSystem& sys, int n_max,
                                         const std::vector<PlumpnessProbe>& probes) {
    PlumpnessReport rep;
    std::map<int, double> min_b;
    for (const auto& probe : probes) {
        PlumpnessRow row;
        row.x = probe.x;
        row.R = probe.R;
        std::optional<int> first;
        first_fit_rec(sys, sys.root(), probe.x, probe.R, n_max, first);
        row.first_n = first;
        if (first) {
            std::vector<Cube> cand;
            survivors_in_ball(sys, sys.root(), probe.x, probe.R, *first, cand);
            for (const Cube& c : cand) {
                // witness ball at the cube center, limited by the cube inradius
                // and by containment in B(x, R)
                double w = c.bbox.inradius_at(c.center);
                const double slack = probe.R - dist(probe.x, c.center, sys.q());
                w = std::min(w, slack);
                if (w > row.b) {
                    row.b = w;
                    row.witness_y = c.center;
                    row.witness_r = w;
                }
            }
            row.b /= probe.R;
            row.witness_r = row.b * probe.R;
            auto it = min_b.find(*first);
            if (it == min_b.end() || row.b < it->second) min_b[*first] = row.b;
        }
        rep.rows.push_back(row);
    }
    rep.min_b_per_level.assign(min_b.begin(), min_b.end());
    return rep;
}

std::vector<PlumpnessProbe> distorted_plumpness_probes(const CubeSystem& sys) {
    std::vector<PlumpnessProbe> probes;
    for (const auto& e : sys.distortions()) {
        const Cube hole = sys.cube(CubeId{e.hole_level, e.hole_index});
        const Cube box = sys.cube(CubeId{e.hole_level + 1, e.detached_index});
        probes.push_back({box.center, (3.0 / 16.0) * hole.bbox.side(0)});
    }
    return probes;
}

}  // namespace fml
