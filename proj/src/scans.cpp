#include "fml/scans.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fml {

int resolve_threads(int requested) {
    int hw = 1;
#ifdef _OPENMP
    hw = omp_get_max_threads();
#endif
    int n = requested > 0 ? requested : hw;
    if (const char* env = std::getenv("FML_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap > 0) n = std::min<long>(n, cap);
    }
    return std::max(n, 1);
}

namespace {

inline double u01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::vector<Point> sample_points(const MeasureTree& tree, const SamplingSpec& spec) {
    const CubeSystem& sys = tree.system();
    const int level = spec.level >= 0 ? spec.level : tree.depth();
    std::mt19937_64 rng(spec.seed);
    std::vector<Point> pts;
    pts.reserve(spec.count);
    switch (spec.source) {
        case SamplingSpec::Source::UniformRandom: {
            for (std::uint64_t i = 0; i < spec.count; ++i) {
                Point p{u01(rng), 0.0};
                if (sys.q() == 2) p[1] = u01(rng);
                pts.push_back(p);
            }
            break;
        }
        case SamplingSpec::Source::CubeCenters: {
            const std::uint64_t n = sys.level_cube_count(level);
            for (std::uint64_t i = 0; i < spec.count; ++i) {
                const std::uint64_t idx = n <= spec.count ? (i % n) : rng() % n;
                pts.push_back(sys.cube(CubeId{level, idx}).center);
            }
            break;
        }
        case SamplingSpec::Source::SurvivorPoints: {
            // random survivor cube by descending through non-center slots
            for (std::uint64_t i = 0; i < spec.count; ++i) {
                Cube c = sys.root();
                while (c.id.level < level) {
                    std::vector<int> slots;
                    slots.reserve(c.child_count);
                    for (int s = 0; s < c.child_count; ++s)
                        if (s != c.center_child && sys.slot_present(c, s)) slots.push_back(s);
                    c = sys.child_cube(c, slots[rng() % slots.size()]);
                }
                pts.push_back(c.center);
            }
            break;
        }
    }
    return pts;
}

std::vector<double> radius_grid(const SamplingSpec& spec) {
    std::vector<double> rs;
    for (double r = spec.rmax; r >= spec.rmin * (1.0 - 1e-12); r *= 0.5) rs.push_back(r);
    if (rs.empty()) rs.push_back(spec.rmax);
    return rs;
}

namespace {

DoublingReport finish_report(std::vector<DoublingSample> samples, const SamplingSpec& spec) {
    DoublingReport rep;
    rep.samples = std::move(samples);
    rep.spec = spec;
    rep.max_ratio = 0.0;
    rep.min_ratio = rep.samples.empty() ? 0.0 : rep.samples.front().ratio;
    for (const auto& s : rep.samples) {
        rep.max_ratio = std::max(rep.max_ratio, s.ratio);
        rep.min_ratio = std::min(rep.min_ratio, s.ratio);
    }
    return rep;
}

inline DoublingSample eval_sample(const MeasureTree& tree, const Point& x, double r) {
    DoublingSample s;
    s.x = x;
    s.r = r;
    s.nu_r = tree.ball_mass(x, r).value;
    s.nu_2r = tree.ball_mass(x, 2.0 * r).value;
    s.ratio = s.nu_2r / s.nu_r;
    return s;
}

}  // namespace

DoublingReport doubling_scan_serial(const MeasureTree& tree, const SamplingSpec& spec) {
    const auto pts = sample_points(tree, spec);
    const auto rs = radius_grid(spec);
    std::vector<DoublingSample> samples(pts.size() * rs.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = 0; j < rs.size(); ++j)
            samples[i * rs.size() + j] = eval_sample(tree, pts[i], rs[j]);
    return finish_report(std::move(samples), spec);
}

DoublingReport doubling_scan(const MeasureTree& tree, const SamplingSpec& spec, int threads) {
    const auto pts = sample_points(tree, spec);
    const auto rs = radius_grid(spec);
    std::vector<DoublingSample> samples(pts.size() * rs.size());
    const std::int64_t total = static_cast<std::int64_t>(samples.size());
    const int nt = resolve_threads(threads);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nt)
#endif
    for (std::int64_t k = 0; k < total; ++k) {
        const std::size_t i = static_cast<std::size_t>(k) / rs.size();
        const std::size_t j = static_cast<std::size_t>(k) % rs.size();
        samples[k] = eval_sample(tree, pts[i], rs[j]);
    }
    (void)nt;
    return finish_report(std::move(samples), spec);
}

ComparabilityReport weight_comparability_probe(const MeasureTree& tree, int n, double T) {
    const CubeSystem& sys = tree.system();
    if (n < 1 || n > tree.depth())
        throw std::invalid_argument("weight_comparability_probe: level not weighted");
    ComparabilityReport rep;
    rep.level = n;
    rep.T = T > 1.0 ? T : 8.0 * sys.constants().C1;

    // anchors: corner cube, middle cube, and any override-affected cubes
    std::vector<CubeId> anchors;
    anchors.push_back(CubeId{n, 0});
    anchors.push_back(CubeId{n, sys.level_cube_count(n) / 2});
    for (const auto& e : sys.distortions()) {
        if (e.hole_level == n) {
            anchors.push_back(CubeId{n, e.hole_index});
            anchors.push_back(CubeId{n, e.neighbor_index});
        }
        if (e.hole_level + 1 == n) anchors.push_back(CubeId{n, e.detached_index});
    }
    for (const auto& g : sys.designations())
        if (g.id.level == n) anchors.push_back(g.id);

    const bool weighted = tree.transition_weighted(n);
    auto t_of = [&](CubeId id) {
        if (!weighted || tree.rho() == 0.0) return 1.0;
        const Cube parent = sys.cube(sys.parent_id(id));
        const WeightRecord w = tree.weights_for(parent);
        return w.t[sys.slot_in_parent(id)];
    };

    for (const CubeId a : anchors) {
        const Cube ac = sys.cube(a);
        const InCover ic = in_cover(sys, ac.center, rep.T * ac.radius, n);
        double tmin = std::numeric_limits<double>::infinity(), tmax = 0.0;
        double pmin = std::numeric_limits<double>::infinity(), pmax = 0.0;
        for (const CubeId id : ic.cov) {
            const double t = t_of(id);
            tmin = std::min(tmin, t);
            tmax = std::max(tmax, t);
            if (n >= 2) {
                const double tp = [&] {
                    const CubeId p = sys.parent_id(id);
                    if (!tree.transition_weighted(n - 1) || tree.rho() == 0.0) return 1.0;
                    const Cube gp = sys.cube(sys.parent_id(p));
                    const WeightRecord w = tree.weights_for(gp);
                    return w.t[sys.slot_in_parent(p)];
                }();
                pmin = std::min(pmin, tp);
                pmax = std::max(pmax, tp);
            }
        }
        if (tmax > 0.0) rep.C7 = std::max(rep.C7, tmax / tmin);
        if (n >= 2 && pmax > 0.0) rep.C8 = std::max(rep.C8, pmax / pmin);
        rep.anchors += 1;
    }
    return rep;
}

}  // namespace fml
