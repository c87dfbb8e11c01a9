#include "fml/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fml {

namespace {

// sign(t) |t|^{rho+1} / (rho+1), antiderivative of |t|^rho. Valid for rho > -1.
inline double antider_1d(double t, double rho) {
    const double a = std::abs(t);
    double p;
    if (rho == 1.0) p = a * a;
    else if (rho == 0.0) p = a;
    else if (rho == -0.5) p = std::sqrt(a);
    else p = std::pow(a, rho + 1.0);
    return (t < 0.0 ? -p : p) / (rho + 1.0);
}

// --- adaptive 1D Gauss-Legendre (15 nodes), for the polar corner pieces ---

constexpr int kGL = 15;
constexpr double kGLx[kGL] = {
    -0.9879925180204854, -0.9372733924007060, -0.8482065834104272, -0.7244177313601700,
    -0.5709721726085388, -0.3941513470775634, -0.2011940939974345, 0.0,
    0.2011940939974345,  0.3941513470775634,  0.5709721726085388,  0.7244177313601700,
    0.8482065834104272,  0.9372733924007060,  0.9879925180204854};
constexpr double kGLw[kGL] = {
    0.0307532419961173, 0.0703660474881081, 0.1071592204671719, 0.1395706779261543,
    0.1662692058169939, 0.1861610000155622, 0.1984314853271116, 0.2025782419255613,
    0.1984314853271116, 0.1861610000155622, 0.1662692058169939, 0.1395706779261543,
    0.1071592204671719, 0.0703660474881081, 0.0307532419961173};

template <typename F>
double gl15(const F& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < kGL; ++i) s += kGLw[i] * f(c + h * kGLx[i]);
    return s * h;
}

template <typename F>
double adaptive_gl(const F& f, double a, double b, double tol_abs, int depth = 0) {
    const double whole = gl15(f, a, b);
    const double m = 0.5 * (a + b);
    const double halves = gl15(f, a, m) + gl15(f, m, b);
    if (std::abs(whole - halves) <= tol_abs || depth >= 28) return halves;
    return adaptive_gl(f, a, m, 0.5 * tol_abs, depth + 1) +
           adaptive_gl(f, m, b, 0.5 * tol_abs, depth + 1);
}

// integral of |y|^rho over [0,W] x [0,H] (singular corner at the origin),
// radial direction integrated exactly in polar form.
double corner_power_integral(double W, double H, double rho, double tau) {
    if (W <= 0.0 || H <= 0.0) return 0.0;
    const double e = rho + 2.0;
    const double theta_split = std::atan2(H, W);
    const auto f1 = [&](double th) { return std::pow(W / std::cos(th), e); };
    const auto f2 = [&](double th) { return std::pow(H / std::sin(th), e); };
    const double rough = std::pow(std::max(W, H), e);
    const double tol = std::max(tau * rough, 1e-300);
    double s = 0.0;
    if (theta_split > 0.0) s += adaptive_gl(f1, 0.0, theta_split, tol);
    if (theta_split < std::numbers::pi / 2) s += adaptive_gl(f2, theta_split, std::numbers::pi / 2, tol);
    return s / e;
}

// adaptive 2D tensor Gauss panels for boxes strictly away from the center
constexpr int kG7 = 7;
constexpr double kG7x[kG7] = {-0.9491079123427585, -0.7415311855993945, -0.4058451513773972,
                              0.0, 0.4058451513773972, 0.7415311855993945, 0.9491079123427585};
constexpr double kG7w[kG7] = {0.1294849661688697, 0.2797053914892766, 0.3818300505051189,
                              0.4179591836734694, 0.3818300505051189, 0.2797053914892766,
                              0.1294849661688697};

double tensor_g7(const Box& b, const Point& c, double rho) {
    const double cx = 0.5 * (b.lo[0] + b.hi[0]), hx = 0.5 * (b.hi[0] - b.lo[0]);
    const double cy = 0.5 * (b.lo[1] + b.hi[1]), hy = 0.5 * (b.hi[1] - b.lo[1]);
    double s = 0.0;
    for (int i = 0; i < kG7; ++i) {
        const double x = cx + hx * kG7x[i];
        const double dx = x - c[0];
        double row = 0.0;
        for (int j = 0; j < kG7; ++j) {
            const double y = cy + hy * kG7x[j];
            const double dy = y - c[1];
            row += kG7w[j] * std::pow(dx * dx + dy * dy, 0.5 * rho);
        }
        s += kG7w[i] * row;
    }
    return s * hx * hy;
}

double smooth_box_integral(const Box& b, const Point& c, double rho, double tol_abs, int depth = 0) {
    const double whole = tensor_g7(b, c, rho);
    const Point mid = b.center();
    double quads = 0.0;
    Box sub = b;
    for (int iy = 0; iy < 2; ++iy) {
        for (int ix = 0; ix < 2; ++ix) {
            sub = b;
            if (ix == 0) sub.hi[0] = mid[0]; else sub.lo[0] = mid[0];
            if (iy == 0) sub.hi[1] = mid[1]; else sub.lo[1] = mid[1];
            quads += tensor_g7(sub, c, rho);
        }
    }
    if (std::abs(whole - quads) <= tol_abs || depth >= 24) return quads;
    const Point m = b.center();
    double s = 0.0;
    for (int iy = 0; iy < 2; ++iy) {
        for (int ix = 0; ix < 2; ++ix) {
            sub = b;
            if (ix == 0) sub.hi[0] = m[0]; else sub.lo[0] = m[0];
            if (iy == 0) sub.hi[1] = m[1]; else sub.lo[1] = m[1];
            s += smooth_box_integral(sub, c, rho, 0.25 * tol_abs, depth + 1);
        }
    }
    return s;
}

double integral_2d(const Box& box, const Point& c, double rho, double tau) {
    if (box.empty()) return 0.0;
    const bool touches = box_min_dist2(box, c) == 0.0;
    if (touches) {
        // split at the center; each nonempty piece has c at one corner
        double s = 0.0;
        const double xs[3] = {box.lo[0], std::clamp(c[0], box.lo[0], box.hi[0]), box.hi[0]};
        const double ys[3] = {box.lo[1], std::clamp(c[1], box.lo[1], box.hi[1]), box.hi[1]};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                s += corner_power_integral(xs[i + 1] - xs[i], ys[j + 1] - ys[j], rho, tau);
        return s;
    }
    const double d2 = box_min_dist2(box, c);
    const double diam2 = 2.0 * std::max(box.side(0), box.side(1)) * std::max(box.side(0), box.side(1));
    if (d2 >= diam2) {
        // far box: integrand smooth and flat; tensor panels converge fast
        const double rough = std::pow(d2, 0.5 * rho) * box.volume();
        return smooth_box_integral(box, c, rho, std::max(tau * std::abs(rough), 1e-300));
    }
    // near box: corner-decompose against the projected center to keep the
    // peaked face resolved exactly in the radial direction
    const Point proj{std::clamp(c[0], box.lo[0], box.hi[0]), std::clamp(c[1], box.lo[1], box.hi[1])};
    double s = 0.0;
    const double xs[3] = {box.lo[0], proj[0], box.hi[0]};
    const double ys[3] = {box.lo[1], proj[1], box.hi[1]};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            Box piece;
            piece.q = 2;
            piece.lo = {std::min(xs[i], xs[i + 1]), std::min(ys[j], ys[j + 1])};
            piece.hi = {std::max(xs[i], xs[i + 1]), std::max(ys[j], ys[j + 1])};
            if (piece.empty()) continue;
            const double rough = std::pow(std::max(box_min_dist2(piece, c), 1e-300), 0.5 * rho) *
                                 piece.volume();
            s += smooth_box_integral(piece, c, rho, std::max(tau * std::abs(rough), 1e-300));
        }
    }
    return s;
}

}  // namespace

double power_distance_integral(const Box& box, const Point& center, double rho, double tau) {
    const int q = box.q;
    if (rho <= -static_cast<double>(q))
        throw std::invalid_argument("power_distance_integral: rho <= -q diverges");
    if (box.empty()) return 0.0;
    if (rho == 0.0) return box.volume();
    if (q == 1) return antider_1d(box.hi[0] - center[0], rho) - antider_1d(box.lo[0] - center[0], rho);
    return integral_2d(box, center, rho, tau);
}

void collect_children(const CubeSystem& sys, const Cube& parent, SlotCubes& out) {
    out.clear();
    for (int slot = 0; slot < parent.child_count; ++slot) {
        if (!sys.slot_present(parent, slot)) continue;
        out.emplace_back(slot, sys.child_cube(parent, slot));
    }
}

ISet iset(const CubeSystem& sys, const Cube& cube) {
    ISet s;
    const double half_r = 0.5 * cube.radius;
    for (int slot = 0; slot < cube.child_count; ++slot) {
        if (!sys.slot_present(cube, slot)) continue;
        const Cube ch = sys.child_cube(cube, slot);
        if (ch.region.in_ball(cube.center, half_r))
            s.in_slots.push_back(slot);
        else
            s.out_slots.push_back(slot);
    }
    return s;
}

WeightRecord compute_weights_children(const Cube& parent, const SlotCubes& children, double rho,
                                      double tau) {
    WeightRecord w;
    const double half_r = 0.5 * parent.radius;
    w.t.assign(parent.child_count, 1.0);
    for (const auto& [slot, ch] : children) {
        if (ch.region.in_ball(parent.center, half_r))
            w.is.in_slots.push_back(slot);
        else
            w.is.out_slots.push_back(slot);
    }
    w.trivial = w.is.in_slots.size() <= 1;
    if (w.is.in_slots.empty() || rho == 0.0) {
        w.A_defined = rho == 0.0 && !w.is.in_slots.empty();
        return w;
    }
    double H_I = 0.0, S = 0.0;
    std::vector<double> child_int(w.is.in_slots.size(), 0.0);
    std::vector<double> child_vol(w.is.in_slots.size(), 0.0);
    std::size_t k = 0;
    for (const auto& [slot, ch] : children) {
        if (std::find(w.is.in_slots.begin(), w.is.in_slots.end(), slot) == w.is.in_slots.end())
            continue;
        double integ = 0.0;
        for (const Box& b : ch.region.boxes)
            integ += power_distance_integral(b, parent.center, rho, tau);
        child_int[k] = integ;
        child_vol[k] = ch.region.volume();
        H_I += child_vol[k];
        S += integ;
        ++k;
    }
    w.A = H_I / S;
    w.A_defined = true;
    w.H_I = H_I;
    w.integral_I = S;
    if (w.is.in_slots.size() == 1) {
        // A normalizes a single child exactly; the averaged weight is 1.
        w.t[w.is.in_slots.front()] = 1.0;
        return w;
    }
    for (std::size_t i = 0; i < w.is.in_slots.size(); ++i)
        w.t[w.is.in_slots[i]] = w.A * child_int[i] / child_vol[i];
    return w;
}

WeightRecord compute_weights(const CubeSystem& sys, const Cube& parent, double rho, double tau) {
    SlotCubes children;
    collect_children(sys, parent, children);
    return compute_weights_children(parent, children, rho, tau);
}

std::optional<double> coefficient_A(const CubeSystem& sys, const Cube& cube, double rho,
                                    double tau) {
    if (rho == 0.0) {
        ISet s = iset(sys, cube);
        if (s.in_slots.empty()) return std::nullopt;
        return 1.0;
    }
    WeightRecord w = compute_weights(sys, cube, rho, tau);
    if (!w.A_defined) return std::nullopt;
    return w.A;
}

double child_weight_t(const CubeSystem& sys, const Cube& cube, int child_slot, double rho,
                      double tau) {
    WeightRecord w = compute_weights(sys, cube, rho, tau);
    if (child_slot < 0 || child_slot >= static_cast<int>(w.t.size()))
        throw std::out_of_range("child_weight_t: bad slot");
    return w.t[child_slot];
}

N0Result choose_n0(const CubeSystem& sys, double rho, int max_level, double tau) {
    (void)rho;
    (void)tau;
    N0Result res;
    if (max_level < 1) return res;
    const int parents = std::min(max_level, sys.depth());
    std::vector<bool> basic(parents, false), nontrivial(parents, false);
    for (int p = 0; p < parents; ++p) {
        bool b_ok = true, nt_ok = true;
        const auto reps = sys.reps_for_level(p);
        for (const CubeId id : reps.ids) {
            const Cube c = sys.cube(id);
            const ISet s = iset(sys, c);
            if (s.in_slots.empty()) {
                b_ok = false;
                nt_ok = false;
                break;
            }
            if (s.in_slots.size() < 2) nt_ok = false;
            // B(x, r/16) inside the I union <=> it misses every I^c child
            const double rr = c.radius / 16.0;
            for (int slot : s.out_slots) {
                const Cube ch = sys.child_cube(c, slot);
                if (ch.region.meets_ball(c.center, rr)) {
                    b_ok = false;
                    nt_ok = false;
                    break;
                }
            }
            if (!b_ok) break;
        }
        basic[p] = b_ok;
        nontrivial[p] = b_ok && nt_ok;
    }
    // first parent level from which the condition holds for every deeper level
    auto suffix_start = [&](const std::vector<bool>& good) -> std::optional<int> {
        int start = -1;
        for (int p = parents - 1; p >= 0; --p) {
            if (good[p]) start = p;
            else break;
        }
        if (start < 0) return std::nullopt;
        return start + 1;  // child level
    };
    res.basic = suffix_start(basic);
    res.nontrivial = suffix_start(nontrivial);
    res.trivial_flag = !res.nontrivial.has_value();
    return res;
}

// MeasureTree ----------------------------------------------------------------

MeasureTree::MeasureTree(CubeSystem sys, double rho, int n0, int depth, double tau,
                         int theta_child_level)
    : sys_(std::move(sys)), rho_(rho), n0_(n0), depth_(depth), tau_(tau),
      theta_child_level_(theta_child_level) {
    if (rho_ <= -static_cast<double>(sys_.q()))
        throw std::invalid_argument("MeasureTree: rho must exceed -q");
    if (depth_ < 0 || depth_ > sys_.depth())
        throw std::invalid_argument("MeasureTree: depth exceeds system depth");
    if (n0_ < 1) throw std::invalid_argument("MeasureTree: n0 must be >= 1");
}

WeightRecord MeasureTree::weights_for(const Cube& parent) const {
    return compute_weights(sys_, parent, rho_, tau_);
}

double MeasureTree::cube_K(CubeId id) const {
    const auto path = sys_.path_of(id);
    Cube c = sys_.root();
    double K = 1.0;
    for (std::uint32_t slot : path) {
        if (transition_weighted(c.id.level + 1) && rho_ != 0.0) {
            const WeightRecord w = weights_for(c);
            K *= w.t[slot];
        }
        c = sys_.child_cube(c, static_cast<int>(slot));
    }
    return K;
}

double MeasureTree::cube_mass(CubeId id) const {
    const Cube c = sys_.cube(id);
    return cube_K(id) * c.region.volume();
}

void MeasureTree::mass_rec(const Cube& c, double K, const Point& x, double r, int survivor_level,
                           Acc& acc) const {
    const bool restricted = c.id.level < survivor_level;
    if (!c.region.meets_ball(x, r)) return;
    if (!restricted && c.region.in_ball(x, r)) {
        acc.full += K * c.region.volume();
        return;
    }
    if (c.id.level == depth_) {
        if (restricted) return;  // depth reached before the survivor level: nothing to restrict
        double lo = 0.0, hi = 0.0;
        double full = 0.0;
        for (const Box& b : c.region.boxes) {
            full += b.volume();
            if (bracket_subdivision_ && sys_.q() == 2) {
                const auto br = box_ball_area_bracket(b, x, r, bracket_gens_);
                lo += br[0];
                hi += br[1];
            } else {
                double ov = box_ball_volume(b, x, r);
                ov = std::min(ov, b.volume());
                lo += ov;
                hi += ov;
            }
        }
        acc.partial_exact += K * (0.5 * (lo + hi));
        acc.partial_full += K * full;
        acc.bracket += K * (hi - lo);
        return;
    }
    const bool weighted = transition_weighted(c.id.level + 1) && rho_ != 0.0;
    std::optional<WeightRecord> w;
    std::optional<ISet> is;
    for (int slot = 0; slot < c.child_count; ++slot) {
        if (restricted && slot == c.center_child) continue;
        if (!sys_.slot_present(c, slot)) continue;
        const Cube ch = sys_.child_cube(c, slot);
        if (!ch.region.meets_ball(x, r)) continue;
        double t = 1.0;
        if (weighted) {
            if (!is) is = iset(sys_, c);
            const bool in_I =
                std::find(is->in_slots.begin(), is->in_slots.end(), slot) != is->in_slots.end();
            if (in_I) {
                if (!w) w = weights_for(c);
                t = w->t[slot];
            }
        }
        mass_rec(ch, K * t, x, r, survivor_level, acc);
    }
}

BallMass MeasureTree::ball_mass(const Point& x, double r) const {
    if (!(r > 0.0)) throw std::invalid_argument("ball_mass: radius must be positive");
    Acc acc;
    mass_rec(sys_.root(), 1.0, x, r, -1, acc);
    BallMass m;
    m.inner = acc.full;
    m.value = acc.full + acc.partial_exact;
    m.outer = acc.full + acc.partial_full;
    m.bracket = acc.bracket;
    return m;
}

BallMass MeasureTree::restricted_ball_mass(int n, const Point& x, double r) const {
    if (n < 0 || n > sys_.depth()) throw std::out_of_range("restricted_ball_mass: level");
    Acc acc;
    mass_rec(sys_.root(), 1.0, x, r, n, acc);
    BallMass m;
    m.inner = acc.full;
    m.value = acc.full + acc.partial_exact;
    m.outer = acc.full + acc.partial_full;
    m.bracket = acc.bracket;
    return m;
}

MeasureTree build_measure(const CubeSystem& sys, double rho, std::optional<int> n0_policy,
                          int depth, double tau, MeasureBuildInfo* info) {
    if (depth < 0 || depth > sys.depth())
        throw std::invalid_argument("build_measure: depth exceeds system depth");
    MeasureBuildInfo bi;
    bi.n0r = choose_n0(sys, rho, depth, tau);
    if (n0_policy) {
        bi.n0_used = *n0_policy;
        if (bi.n0_used < 1) throw std::invalid_argument("build_measure: n0 must be >= 1");
    } else if (bi.n0r.nontrivial && *bi.n0r.nontrivial <= depth) {
        bi.n0_used = *bi.n0r.nontrivial;
    } else if (bi.n0r.basic && *bi.n0r.basic <= depth) {
        bi.n0_used = *bi.n0r.basic;
    } else {
        bi.n0_used = depth + 1;  // identity weighting
        bi.identity = true;
    }
    MeasureTree tree(sys, rho, bi.n0_used, depth, tau);
    tree.set_identity_flag(bi.identity);
    if (info) *info = bi;
    return tree;
}

MeasureTree make_theta_tree(const CubeSystem& sys, int parent_level, double rho, double tau) {
    if (parent_level < 0 || parent_level >= sys.depth())
        throw std::invalid_argument("make_theta_tree: parent level out of range");
    return MeasureTree(sys, rho, 1, sys.depth(), tau, parent_level + 1);
}

namespace {

// Child lists are reused per recursion depth to keep the audit allocation-free.
struct AuditCtx {
    const MeasureTree& tree;
    double rel_threshold;
    ConservationReport rep;
    std::vector<SlotCubes> pool;
};

void audit_rec(AuditCtx& ctx, const Cube& c) {
    const MeasureTree& tree = ctx.tree;
    const CubeSystem& sys = tree.system();
    if (c.id.level >= tree.depth()) return;
    // ctx.pool is pre-sized to the full depth: entries never move while
    // recursion below holds references into them
    SlotCubes& children = ctx.pool[c.id.level];
    collect_children(sys, c, children);
    if (tree.transition_weighted(c.id.level + 1)) {
        const WeightRecord w =
            compute_weights_children(c, children, tree.rho(), tree.tau());
        double sum = 0.0;
        for (const auto& [slot, ch] : children) sum += w.t[slot] * ch.region.volume();
        const double H = c.region.volume();
        const double rel = std::abs(sum - H) / H;
        ctx.rep.parents_checked += 1;
        if (rel > ctx.rep.max_rel_err) {
            ctx.rep.max_rel_err = rel;
            ctx.rep.worst = c.id;
        }
        if (rel > ctx.rel_threshold) ctx.rep.violations.push_back({c.id, rel});
    }
    for (std::size_t i = 0; i < children.size(); ++i) {
        // the pool entry is invalidated by deeper calls only above this level
        audit_rec(ctx, ctx.pool[c.id.level][i].second);
    }
}

}  // namespace

ConservationReport audit_conservation(const MeasureTree& tree, double rel_threshold, int threads) {
    const CubeSystem& sys = tree.system();
    // split at a shallow level so the subtree list stays small and ordered
    int split = 0;
    while (split < tree.depth() && sys.level_cube_count(split) < 64) ++split;
    struct Job {
        Cube cube;
    };
    std::vector<Cube> roots;
    std::vector<ConservationReport> shallow(1);
    {  // handle levels above the split serially (they are few)
        std::vector<Cube> frontier{sys.root()};
        for (int L = 0; L < split; ++L) {
            std::vector<Cube> next;
            for (const Cube& c : frontier) {
                if (tree.transition_weighted(L + 1)) {
                    const WeightRecord w = tree.weights_for(c);
                    double sum = 0.0;
                    for (int slot = 0; slot < c.child_count; ++slot) {
                        if (!sys.slot_present(c, slot)) continue;
                        sum += w.t[slot] * sys.child_cube(c, slot).region.volume();
                    }
                    const double H = c.region.volume();
                    const double rel = std::abs(sum - H) / H;
                    shallow[0].parents_checked += 1;
                    if (rel > shallow[0].max_rel_err) {
                        shallow[0].max_rel_err = rel;
                        shallow[0].worst = c.id;
                    }
                    if (rel > rel_threshold) shallow[0].violations.push_back({c.id, rel});
                }
                for (int slot = 0; slot < c.child_count; ++slot) {
                    if (!sys.slot_present(c, slot)) continue;
                    next.push_back(sys.child_cube(c, slot));
                }
            }
            frontier = std::move(next);
        }
        roots = std::move(frontier);
    }

    std::vector<ConservationReport> parts(roots.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(std::max(threads, 1))
#endif
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(roots.size()); ++i) {
        AuditCtx ctx{tree, rel_threshold, {}, {}};
        ctx.pool.resize(tree.depth() + 1);
        audit_rec(ctx, roots[i]);
        parts[i] = std::move(ctx.rep);
    }

    ConservationReport out = shallow[0];
    for (const auto& p : parts) {
        out.parents_checked += p.parents_checked;
        if (p.max_rel_err > out.max_rel_err) {
            out.max_rel_err = p.max_rel_err;
            out.worst = p.worst;
        }
        out.violations.insert(out.violations.end(), p.violations.begin(), p.violations.end());
    }
    return out;
}

}  // namespace fml
