#include "fml/cube_system.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fml {

SpaceModel SpaceModel::line() { return SpaceModel{1, 2.0, 2.0}; }
SpaceModel SpaceModel::square() { return SpaceModel{2, std::numbers::pi, 2.0}; }

namespace {

void fill_axis_caches(SystemData& d) {
    d.axis_children_cache.clear();
    d.axis_size_cache.clear();
    d.axis_size_cache.push_back(1);
    for (int L = 0; L < d.depth; ++L) {
        long m = 0;
        if (d.kind == BuilderKind::Adic) {
            m = d.bases.at(L);
        } else if (d.kind == BuilderKind::SubsampledDyadic) {
            m = 1;
            for (int k = 0; k < d.gen_delta.at(L); ++k) m *= d.dyadic_base;
        }
        d.axis_children_cache.push_back(m);
        d.axis_size_cache.push_back(d.axis_size_cache.back() * static_cast<std::uint64_t>(m));
    }
}

Box child_box(const Box& parent, long m, long dx, long dy) {
    Box c = parent;
    const long digs[2] = {dx, dy};
    for (int i = 0; i < parent.q; ++i) {
        const double w = (parent.hi[i] - parent.lo[i]) / static_cast<double>(m);
        const long dg = digs[i];
        c.lo[i] = dg == 0 ? parent.lo[i] : parent.lo[i] + static_cast<double>(dg) * w;
        c.hi[i] = dg == m - 1 ? parent.hi[i] : parent.lo[i] + static_cast<double>(dg + 1) * w;
    }
    return c;
}

double transform_pow(double x, double beta) { return std::pow(x, beta); }

}  // namespace

// Accessors --------------------------------------------------------------

int CubeSystem::q() const { return d_->space.q; }
int CubeSystem::depth() const { return d_->depth; }
bool CubeSystem::lazy() const { return d_->lazy; }
const SpaceModel& CubeSystem::space() const { return d_->space; }
const AlphaSequence& CubeSystem::alpha() const {
    if (!d_->alpha) throw std::logic_error("system carries no alpha sequence");
    return *d_->alpha;
}
const Constants& CubeSystem::constants() const { return d_->constants; }
BuilderKind CubeSystem::kind() const { return d_->kind; }
const std::vector<DistortionEntry>& CubeSystem::distortions() const { return d_->distortions; }
const std::vector<Designation>& CubeSystem::designations() const { return d_->designations; }
const std::vector<long>& CubeSystem::bases() const { return d_->bases; }
const std::string& CubeSystem::base_rule() const { return d_->base_rule; }
long CubeSystem::dyadic_base() const { return d_->dyadic_base; }
const std::vector<long long>& CubeSystem::generations() const { return d_->gens; }
double CubeSystem::beta() const { return d_->beta; }
std::shared_ptr<const SystemData> CubeSystem::inner_data() const { return d_->inner; }

double CubeSystem::subdivision_alpha(int level) const {
    if (level < 0 || level >= d_->depth) throw std::out_of_range("subdivision_alpha: level");
    if (d_->kind == BuilderKind::Pushforward)
        return CubeSystem(d_->inner).subdivision_alpha(level);
    return alpha().value(static_cast<std::uint64_t>(level) + 1);
}

long CubeSystem::axis_children(int level) const {
    if (d_->kind == BuilderKind::Pushforward) return CubeSystem(d_->inner).axis_children(level);
    if (d_->kind == BuilderKind::Explicit)
        throw std::logic_error("explicit systems have no grid structure");
    return d_->axis_children_cache.at(level);
}

std::uint64_t CubeSystem::axis_size(int level) const {
    if (d_->kind == BuilderKind::Pushforward) return CubeSystem(d_->inner).axis_size(level);
    return d_->axis_size_cache.at(level);
}

std::uint64_t CubeSystem::level_cube_count(int level) const {
    if (level < 0 || level > depth()) throw std::out_of_range("level_cube_count");
    if (d_->kind == BuilderKind::Explicit) return d_->levels.at(level).size();
    if (d_->kind == BuilderKind::Pushforward) return CubeSystem(d_->inner).level_cube_count(level);
    const std::uint64_t m = axis_size(level);
    return q() == 1 ? m : m * m;
}

bool CubeSystem::uniform_levels() const {
    return (d_->kind == BuilderKind::Adic || d_->kind == BuilderKind::SubsampledDyadic) &&
           d_->distortions.empty() && d_->designations.empty();
}

const DistortionEntry* CubeSystem::find_hole(int level, std::uint64_t index) const {
    for (const auto& e : d_->distortions)
        if (e.hole_level == level && e.hole_index == index) return &e;
    return nullptr;
}
const DistortionEntry* CubeSystem::find_neighbor(int level, std::uint64_t index) const {
    for (const auto& e : d_->distortions)
        if (e.hole_level == level && e.neighbor_index == index) return &e;
    return nullptr;
}
const DistortionEntry* CubeSystem::find_detached(int level, std::uint64_t index) const {
    for (const auto& e : d_->distortions)
        if (e.hole_level + 1 == level && e.detached_index == index) return &e;
    return nullptr;
}
const Designation* CubeSystem::find_designation(CubeId id) const {
    for (const auto& g : d_->designations)
        if (g.id == id) return &g;
    return nullptr;
}

// Geometry ---------------------------------------------------------------

Box CubeSystem::grid_box(CubeId id) const {
    // Descend from the root so shared edges come out bit-identical.
    Box box = d_->space.domain();
    if (id.level == 0) return box;
    const int qq = q();
    std::uint64_t cx = id.index, cy = 0;
    if (qq == 2) {
        const std::uint64_t M = axis_size(id.level);
        cx = id.index % M;
        cy = id.index / M;
    }
    std::vector<long> dx(id.level), dy(id.level);
    for (int L = id.level - 1; L >= 0; --L) {
        const long m = axis_children(L);
        dx[L] = static_cast<long>(cx % static_cast<std::uint64_t>(m));
        cx /= static_cast<std::uint64_t>(m);
        if (qq == 2) {
            dy[L] = static_cast<long>(cy % static_cast<std::uint64_t>(m));
            cy /= static_cast<std::uint64_t>(m);
        }
    }
    for (int L = 0; L < id.level; ++L)
        box = child_box(box, axis_children(L), dx[L], qq == 2 ? dy[L] : 0);
    return box;
}

Cube CubeSystem::root() const {
    if (d_->kind == BuilderKind::Explicit) return cube(CubeId{0, 0});
    return cube(CubeId{0, 0});
}

Cube CubeSystem::cube(CubeId id) const {
    if (id.level < 0 || id.level > depth()) throw std::out_of_range("cube: level out of range");
    if (d_->kind == BuilderKind::Explicit) {
        const auto& rec = d_->levels.at(id.level).at(id.index);
        Cube c;
        c.id = id;
        c.region = rec.region;
        c.bbox = rec.region.boxes.front();
        c.center = rec.center;
        c.radius = rec.radius;
        c.child_count = static_cast<int>(rec.children.size());
        c.center_child = rec.center_child;
        return c;
    }
    if (d_->kind == BuilderKind::Pushforward) {
        const CubeSystem inner(d_->inner);
        Cube c = inner.cube(id);
        if (d_->beta == 1.0) return c;
        const double fa = transform_pow(c.bbox.lo[0], d_->beta);
        const double fb = transform_pow(c.bbox.hi[0], d_->beta);
        const double fx = transform_pow(c.center[0], d_->beta);
        c.bbox.lo[0] = fa;
        c.bbox.hi[0] = fb;
        c.region = region_of(c.bbox);
        c.center = Point{fx, 0.0};
        c.radius = std::min(fx - fa, fb - fx);
        return c;
    }

    Cube c;
    c.id = id;
    c.bbox = grid_box(id);
    c.region = region_of(c.bbox);
    c.center = c.bbox.center();
    c.radius = 0.5 * c.bbox.side(0);

    const long m = id.level < depth() ? axis_children(id.level) : 0;
    const long grid_children = id.level < depth() ? (q() == 1 ? m : m * m) : 0;
    c.child_count = static_cast<int>(grid_children);
    if (id.level < depth()) {
        const long mid = (m % 2 == 1) ? (m - 1) / 2 : m / 2;
        c.center_child = static_cast<int>(q() == 1 ? mid : mid + m * mid);
    }

    if (const DistortionEntry* e = find_hole(id.level, id.index)) {
        const Box cut = grid_box(CubeId{id.level + 1, e->detached_index});
        c.region = box_minus_box(c.bbox, cut);
        c.radius = e->hole_radius;
    } else if (const DistortionEntry* e2 = find_neighbor(id.level, id.index)) {
        const Box extra = grid_box(CubeId{id.level + 1, e2->detached_index});
        c.region.boxes.push_back(extra);
        c.child_count += 1;  // extra slot for the detached child
    }
    if (const Designation* g = find_designation(id)) {
        c.center = g->center;
        c.radius = g->radius;
        c.center_child = g->center_child;
    }
    return c;
}

bool CubeSystem::slot_present(const Cube& parent, int slot) const {
    if (d_->kind == BuilderKind::Explicit) return true;
    if (d_->kind == BuilderKind::Pushforward)
        return CubeSystem(d_->inner).slot_present(parent, slot);
    if (d_->distortions.empty()) return true;
    const DistortionEntry* e = find_hole(parent.id.level, parent.id.index);
    if (!e) return true;
    const long m = axis_children(parent.id.level);
    const long sx = slot % m;
    const long sy = q() == 2 ? slot / m : 0;
    std::uint64_t cx = parent.id.index, cy = 0;
    if (q() == 2) {
        const std::uint64_t Mp = axis_size(parent.id.level);
        cx = parent.id.index % Mp;
        cy = parent.id.index / Mp;
    }
    const std::uint64_t ix = cx * m + sx, iy = cy * m + sy;
    const std::uint64_t Mc = axis_size(parent.id.level + 1);
    const std::uint64_t child_index = q() == 1 ? ix : iy * Mc + ix;
    return child_index != e->detached_index;
}

Cube CubeSystem::child_cube(const Cube& parent, int slot) const {
    if (parent.id.level >= depth()) throw std::out_of_range("child_cube: already at depth");
    if (d_->kind == BuilderKind::Explicit) {
        const auto& rec = d_->levels.at(parent.id.level).at(parent.id.index);
        return cube(CubeId{parent.id.level + 1, rec.children.at(slot)});
    }
    if (d_->kind == BuilderKind::Pushforward) {
        const CubeSystem inner(d_->inner);
        Cube ic = inner.cube(parent.id);
        Cube cc = inner.child_cube(ic, slot);
        return cube(cc.id);  // re-applies the transform
    }
    const long m = axis_children(parent.id.level);
    const long grid_children = q() == 1 ? m : m * m;
    if (slot == grid_children) {
        const DistortionEntry* e = find_neighbor(parent.id.level, parent.id.index);
        if (!e) throw std::out_of_range("child_cube: no detached slot here");
        return cube(CubeId{parent.id.level + 1, e->detached_index});
    }
    if (slot < 0 || slot >= grid_children) throw std::out_of_range("child_cube: bad slot");
    if (!slot_present(parent, slot)) throw std::invalid_argument("child_cube: absent slot (detached)");

    const long sx = slot % m, sy = q() == 2 ? slot / m : 0;
    std::uint64_t cx = parent.id.index, cy = 0;
    if (q() == 2) {
        const std::uint64_t M = axis_size(parent.id.level);
        cx = parent.id.index % M;
        cy = parent.id.index / M;
    }
    const std::uint64_t ix = cx * m + sx, iy = cy * m + sy;
    const std::uint64_t Mc = axis_size(parent.id.level + 1);
    CubeId cid{parent.id.level + 1, q() == 1 ? ix : iy * Mc + ix};

    // Fast path: plain grid cube built from the parent box without a root
    // descent (bit-identical to grid_box by construction).
    Cube c;
    c.id = cid;
    c.bbox = child_box(parent.bbox, m, sx, sy);
    c.region = region_of(c.bbox);
    c.center = c.bbox.center();
    c.radius = 0.5 * c.bbox.side(0);
    if (cid.level < depth()) {
        const long mc = axis_children(cid.level);
        const long mid = (mc % 2 == 1) ? (mc - 1) / 2 : mc / 2;
        c.center_child = static_cast<int>(q() == 1 ? mid : mid + mc * mid);
        c.child_count = static_cast<int>(q() == 1 ? mc : mc * mc);
    }
    if (!d_->distortions.empty()) {
        if (const DistortionEntry* e = find_hole(cid.level, cid.index)) {
            const Box cut = grid_box(CubeId{cid.level + 1, e->detached_index});
            c.region = box_minus_box(c.bbox, cut);
            c.radius = e->hole_radius;
        } else if (const DistortionEntry* e2 = find_neighbor(cid.level, cid.index)) {
            const Box extra = grid_box(CubeId{cid.level + 1, e2->detached_index});
            c.region.boxes.push_back(extra);
            c.child_count += 1;
        }
    }
    if (!d_->designations.empty()) {
        if (const Designation* g = find_designation(cid)) {
            c.center = g->center;
            c.radius = g->radius;
            c.center_child = g->center_child;
        }
    }
    return c;
}

CubeId CubeSystem::parent_id(CubeId id) const {
    if (id.level == 0) throw std::out_of_range("root has no parent");
    if (d_->kind == BuilderKind::Explicit)
        return CubeId{id.level - 1, d_->levels.at(id.level).at(id.index).parent};
    if (d_->kind == BuilderKind::Pushforward) return CubeSystem(d_->inner).parent_id(id);
    if (const DistortionEntry* e = find_detached(id.level, id.index))
        return CubeId{e->hole_level, e->neighbor_index};
    const long m = axis_children(id.level - 1);
    if (q() == 1) return CubeId{id.level - 1, id.index / static_cast<std::uint64_t>(m)};
    const std::uint64_t M = axis_size(id.level);
    const std::uint64_t cx = id.index % M, cy = id.index / M;
    const std::uint64_t Mp = axis_size(id.level - 1);
    return CubeId{id.level - 1, (cy / m) * Mp + (cx / m)};
}

int CubeSystem::slot_in_parent(CubeId id) const {
    if (id.level == 0) throw std::out_of_range("root has no parent");
    if (d_->kind == BuilderKind::Explicit) {
        const auto& parent = d_->levels.at(id.level - 1).at(d_->levels.at(id.level).at(id.index).parent);
        for (std::size_t i = 0; i < parent.children.size(); ++i)
            if (parent.children[i] == id.index) return static_cast<int>(i);
        throw std::logic_error("explicit system: broken child link");
    }
    if (d_->kind == BuilderKind::Pushforward) return CubeSystem(d_->inner).slot_in_parent(id);
    const long m = axis_children(id.level - 1);
    if (const DistortionEntry* e = find_detached(id.level, id.index)) {
        (void)e;
        return static_cast<int>(q() == 1 ? m : m * m);  // the extra slot
    }
    if (q() == 1) return static_cast<int>(id.index % static_cast<std::uint64_t>(m));
    const std::uint64_t M = axis_size(id.level);
    const std::uint64_t cx = id.index % M, cy = id.index / M;
    return static_cast<int>((cx % m) + m * (cy % m));
}

int CubeSystem::center_child_slot(CubeId id) const {
    if (d_->kind == BuilderKind::Explicit) return d_->levels.at(id.level).at(id.index).center_child;
    if (d_->kind == BuilderKind::Pushforward) return CubeSystem(d_->inner).center_child_slot(id);
    if (const Designation* g = find_designation(id)) return g->center_child;
    const long m = axis_children(id.level);
    const long mid = (m % 2 == 1) ? (m - 1) / 2 : m / 2;
    return static_cast<int>(q() == 1 ? mid : mid + m * mid);
}

bool CubeSystem::is_survivor(CubeId id) const {
    CubeId cur = id;
    while (cur.level > 0) {
        const int slot = slot_in_parent(cur);
        const CubeId p = parent_id(cur);
        if (slot == center_child_slot(p)) return false;
        cur = p;
    }
    return true;
}

std::vector<std::uint32_t> CubeSystem::path_of(CubeId id) const {
    std::vector<std::uint32_t> path(id.level);
    CubeId cur = id;
    for (int L = id.level; L > 0; --L) {
        path[L - 1] = static_cast<std::uint32_t>(slot_in_parent(cur));
        cur = parent_id(cur);
    }
    return path;
}

CubeId CubeSystem::id_of_path(const std::vector<std::uint32_t>& path) const {
    Cube c = root();
    for (std::uint32_t slot : path) c = child_cube(c, static_cast<int>(slot));
    return c.id;
}

CubeId CubeSystem::locate(int level, const Point& p) const {
    if (!space().domain().contains(p)) throw std::invalid_argument("locate: point outside domain");
    Cube c = root();
    while (c.id.level < level) {
        bool found = false;
        const int n = c.child_count;
        for (int s = 0; s < n; ++s) {
            if (!slot_present(c, s)) continue;
            Cube ch = child_cube(c, s);
            if (ch.region.contains(p)) {
                c = ch;
                found = true;
                break;
            }
        }
        if (!found) throw std::logic_error("locate: no child contains point (partition broken)");
    }
    return c.id;
}

CubeSystem::LevelReps CubeSystem::reps_for_level(int level, std::uint64_t budget) const {
    LevelReps r;
    if (uniform_levels()) {
        r.ids.push_back(CubeId{level, 0});
        return r;
    }
    if (d_->kind == BuilderKind::Adic && d_->designations.empty()) {
        // distorted carpet: corner cube + the override-affected cubes
        r.ids.push_back(CubeId{level, 0});
        for (const auto& e : d_->distortions) {
            if (e.hole_level == level) {
                r.ids.push_back(CubeId{level, e.hole_index});
                r.ids.push_back(CubeId{level, e.neighbor_index});
            }
            if (e.hole_level + 1 == level) r.ids.push_back(CubeId{level, e.detached_index});
        }
        return r;
    }
    const std::uint64_t n = level_cube_count(level);
    if (n > budget) throw std::length_error("reps_for_level: level too large to enumerate");
    r.exhaustive = true;
    r.ids.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) r.ids.push_back(CubeId{level, i});
    return r;
}

void CubeSystem::for_each_child(const Cube& parent,
                                const std::function<void(const Cube&, int)>& fn) const {
    for (int s = 0; s < parent.child_count; ++s) {
        if (!slot_present(parent, s)) continue;
        fn(child_cube(parent, s), s);
    }
}

// Builders ----------------------------------------------------------------

CubeSystem build_adic_system(const SpaceModel& space, const std::vector<long>& bases, int depth,
                             bool lazy, const std::string& base_rule) {
    if (depth < 0) throw std::invalid_argument("build_adic_system: negative depth");
    if (static_cast<int>(bases.size()) < depth)
        throw std::invalid_argument("build_adic_system: need one base per level");
    for (int i = 0; i < depth; ++i)
        if (bases[i] < 3 || bases[i] % 2 == 0)
            throw std::invalid_argument("build_adic_system: bases must be odd and >= 3");
    if (!lazy) {
        // eager cube counts explode with growing bases; refuse absurd requests
        double total = 1.0;
        for (int i = 0; i < depth; ++i) total *= std::pow(static_cast<double>(bases[i]), space.q);
        if (total > 5e7)
            throw std::invalid_argument("build_adic_system: eager depth exceeds cube budget; use lazy");
    }

    auto d = std::make_shared<SystemData>();
    d->space = space;
    d->kind = BuilderKind::Adic;
    d->depth = depth;
    d->lazy = lazy;
    d->bases.assign(bases.begin(), bases.begin() + depth);
    d->base_rule = base_rule;
    // attach the analytic family when the bases follow one, so downstream
    // classification sees the asymptotics rather than a finite list
    const bool all_equal =
        depth > 0 && std::all_of(d->bases.begin(), d->bases.end(),
                                 [&](long b) { return b == d->bases.front(); });
    bool is_2np1 = depth > 0;
    for (int i = 0; i < depth; ++i) is_2np1 = is_2np1 && d->bases[i] == 2L * (i + 1) + 1;
    if (base_rule == "odd:2n+1" || (is_2np1 && !all_equal))
        d->alpha = AlphaSequence(SequenceSpec::reciprocal_odd_rule());
    else if (all_equal)
        d->alpha = AlphaSequence(SequenceSpec::reciprocal_odd_constant(d->bases.front()));
    else if (depth == 0)
        d->alpha = AlphaSequence(SequenceSpec::reciprocal_odd_constant(3));
    else
        d->alpha = AlphaSequence(SequenceSpec::reciprocal_odd_list(d->bases));
    d->constants.d = 1.0;
    d->constants.C1 = 2.0 * std::sqrt(static_cast<double>(space.q));
    d->constants.C2 = 1.0;
    fill_axis_caches(*d);
    return CubeSystem(std::move(d));
}

CubeSystem build_subsampled_dyadic(const SpaceModel& space, long b, const AlphaSequence& alpha,
                                   int depth) {
    if (b < 2) throw std::invalid_argument("build_subsampled_dyadic: base must be >= 2");
    if (depth < 0) throw std::invalid_argument("build_subsampled_dyadic: negative depth");
    if (alpha.kind() == SeqKind::Constant && alpha.spec().c >= 1.0 / static_cast<double>(b))
        throw std::invalid_argument(
            "build_subsampled_dyadic: constant alpha >= 1/b leaves no subsampling gap");
    if (alpha.first_valid_index() > 1)
        throw std::invalid_argument("build_subsampled_dyadic: alpha must lie strictly inside (0,1)");

    auto d = std::make_shared<SystemData>();
    d->space = space;
    d->kind = BuilderKind::SubsampledDyadic;
    d->depth = depth;
    d->lazy = true;
    d->dyadic_base = b;
    d->alpha = alpha;
    d->gens.push_back(0);
    const double logb = std::log(static_cast<double>(b));
    for (int L = 0; L < depth; ++L) {
        const double a = alpha.value(static_cast<std::uint64_t>(L) + 1);
        // ceil(log_{1/b} alpha) with an exactness nudge for representable powers
        double z = -std::log(a) / logb;
        long delta = static_cast<long>(std::ceil(z - 1e-12));
        if (delta < 1) delta = 1;
        d->gen_delta.push_back(static_cast<int>(delta));
        d->gens.push_back(d->gens.back() + delta);
    }
    d->constants.d = 1.0;
    d->constants.C1 = 2.0 * std::sqrt(static_cast<double>(space.q));
    d->constants.C2 = static_cast<double>(b);
    // certified-from level per the renumbering rule D*C1*C2*alpha_n < 1
    const double bound = 1.0 / (space.perfectness_D * d->constants.C1 * d->constants.C2);
    std::uint64_t cert = 1;
    for (int L = depth; L >= 1; --L) {
        if (alpha.value(static_cast<std::uint64_t>(L)) >= bound) {
            cert = static_cast<std::uint64_t>(L) + 1;
            break;
        }
    }
    d->certified_from = cert;
    fill_axis_caches(*d);
    return CubeSystem(std::move(d));
}

CubeSystem designate_center_child(const CubeSystem& sys, CubeId cube_id, int child_slot) {
    if (sys.kind() == BuilderKind::Pushforward)
        throw std::invalid_argument("designate_center_child: designate the inner system first");
    Cube parent = sys.cube(cube_id);  // throws on bad id
    if (child_slot < 0 || child_slot >= parent.child_count || !sys.slot_present(parent, child_slot))
        throw std::invalid_argument("designate_center_child: unknown child id");
    Cube child = sys.child_cube(parent, child_slot);

    Designation g;
    g.id = cube_id;
    g.center = child.center;
    g.center_child = child_slot;

    // Largest r with B(x', r) /\ domain inside the region; domain-boundary
    // sides are unconstrained.
    const Box dom = sys.space().domain();
    double feasible = std::numeric_limits<double>::infinity();
    const Box& rb = parent.bbox;
    for (int i = 0; i < sys.q(); ++i) {
        if (rb.lo[i] > dom.lo[i]) feasible = std::min(feasible, g.center[i] - rb.lo[i]);
        if (rb.hi[i] < dom.hi[i]) feasible = std::min(feasible, rb.hi[i] - g.center[i]);
    }
    const double want = std::max(parent.radius / 3.0, 0.5 * child.bbox.inradius());
    g.radius = std::min(want, feasible);

    auto d = std::make_shared<SystemData>(*sys.data());
    bool replaced = false;
    for (auto& old : d->designations)
        if (old.id == cube_id) {
            old = g;
            replaced = true;
        }
    if (!replaced) d->designations.push_back(g);
    d->constants.C1 = 3.0 * d->constants.C1;
    // the shrunk radius moves the center-child ratio band as well
    CubeSystem out(std::make_shared<SystemData>(*d));
    double c2 = d->constants.C2;
    {
        const Cube pc = out.cube(cube_id);
        const Cube cc = out.child_cube(pc, pc.center_child);
        const double ratio = cc.radius / pc.radius;
        const double a = out.subdivision_alpha(cube_id.level);
        c2 = std::max({c2, ratio / a, a / ratio});
        if (cube_id.level > 0) {
            const CubeId pid = out.parent_id(cube_id);
            if (out.slot_in_parent(cube_id) == out.center_child_slot(pid)) {
                const double pr = g.radius / out.cube(pid).radius;
                const double pa = out.subdivision_alpha(cube_id.level - 1);
                c2 = std::max({c2, pr / pa, pa / pr});
            }
        }
    }
    d->constants.C2 = c2;
    return CubeSystem(std::move(d));
}

CubeSystem build_distorted_carpet(const std::vector<long>& bases, int depth,
                                  const std::string& base_rule) {
    CubeSystem base = build_adic_system(SpaceModel::square(), bases, depth, true, base_rule);
    if (depth < 2) return base;  // nothing to distort

    auto d = std::make_shared<SystemData>(*base.data());
    CubeSystem sys(d);

    // Anchor walk: hole(m) = center child of the previous adoptive neighbor,
    // neighbor(m) = its grid-right sibling, detached(m) = the hole's child
    // containing the point 3/4 of the way from the hole's left edge.
    Cube anchor = sys.root();
    for (int m = 1; m + 1 <= depth; ++m) {
        const long ac = d->bases[m];      // base subdividing level m
        const int cc = sys.center_child_slot(anchor.id);
        Cube hole = sys.child_cube(anchor, cc);
        Cube neighbor = sys.child_cube(anchor, cc + 1);  // grid-right of the middle, a >= 3

        const long dx = (3 * ac) / 4;          // child column containing x = 3/4
        const long dy = (ac - 1) / 2;          // middle row

        const std::uint64_t Ms = d->axis_size_cache.at(m);
        const std::uint64_t hx = hole.id.index % Ms, hy = hole.id.index / Ms;
        const std::uint64_t Mc = d->axis_size_cache.at(m + 1);
        const std::uint64_t ix = hx * ac + dx, iy = hy * ac + dy;
        DistortionEntry e;
        e.hole_level = m;
        e.hole_index = hole.id.index;
        e.neighbor_index = neighbor.id.index;
        e.detached_index = iy * Mc + ix;

        const Box cut = child_box(hole.bbox, ac, dx, dy);
        const double s = hole.bbox.side(0);
        e.gap = hole.bbox.hi[0] - cut.hi[0];
        e.hole_radius = std::min(s / 6.0, cut.lo[0] - hole.center[0]);
        d->distortions.push_back(e);

        anchor = sys.cube(neighbor.id);
    }
    // The shrunk hole radii cost one factor 3 in C1 and widen the admissible
    // child/parent radius ratio band.
    d->constants.C1 = 3.0 * d->constants.C1;
    double c2 = d->constants.C2;
    for (const auto& e : d->distortions) {
        const double s_child =
            0.5 / static_cast<double>(d->axis_size_cache.at(e.hole_level + 1));
        const double ratio = s_child / e.hole_radius;
        const double a = 1.0 / static_cast<double>(d->bases.at(e.hole_level));
        c2 = std::max({c2, ratio / a, a / ratio});
    }
    d->constants.C2 = c2;
    return CubeSystem(std::move(d));
}

CubeSystem pushforward_power(const CubeSystem& sys, double beta) {
    if (!(beta > 0.0 && beta <= 1.0))
        throw std::invalid_argument("pushforward_power: beta must lie in (0,1]");
    if (sys.q() != 1) throw std::invalid_argument("pushforward_power: 1D systems only");
    if (sys.kind() == BuilderKind::Pushforward || sys.kind() == BuilderKind::Explicit)
        throw std::invalid_argument("pushforward_power: source must be an adic or subsampled system");
    auto d = std::make_shared<SystemData>();
    d->space = sys.space();
    d->kind = BuilderKind::Pushforward;
    d->depth = sys.depth();
    d->lazy = sys.lazy();
    d->alpha = sys.alpha();
    d->beta = beta;
    d->inner = sys.data();
    d->constants = sys.constants();
    if (beta == 1.0) return CubeSystem(std::move(d));  // exact identity

    // Fit the enlarged constants over the materializable levels. The image
    // distortion is worst at the leftmost cube of each level, which repeats
    // with the same ratios at every depth, so a budgeted sweep is enough.
    CubeSystem out(std::make_shared<SystemData>(*d));
    double c1 = 1.0, c2 = 1.0;
    for (int L = 0; L <= d->depth; ++L) {
        if (out.level_cube_count(L) > 200'000) break;
        for (std::uint64_t i = 0; i < out.level_cube_count(L); ++i) {
            const Cube c = out.cube(CubeId{L, i});
            c1 = std::max(c1, c.region.max_dist(c.center) / c.radius);
            if (L < d->depth) {
                const Cube cc = out.child_cube(c, c.center_child);
                const double ratio = cc.radius / c.radius;
                const double a = out.subdivision_alpha(L);
                c2 = std::max({c2, ratio / a, a / ratio});
            }
        }
    }
    d->constants.C1 = c1 * (1.0 + 1e-9);
    d->constants.C2 = c2 * (1.0 + 1e-9);
    return CubeSystem(std::move(d));
}

CubeSystem make_explicit_system(const SpaceModel& space, std::optional<AlphaSequence> alpha,
                                Constants constants, std::vector<std::vector<ExplicitCube>> levels) {
    if (levels.empty() || levels.front().size() != 1)
        throw std::invalid_argument("explicit system needs a single root");
    auto d = std::make_shared<SystemData>();
    d->space = space;
    d->kind = BuilderKind::Explicit;
    d->depth = static_cast<int>(levels.size()) - 1;
    d->lazy = false;
    d->alpha = std::move(alpha);
    d->constants = std::move(constants);
    d->levels = std::move(levels);
    return CubeSystem(std::move(d));
}

// Queries -------------------------------------------------------------------

namespace {

void collect_survivors(const CubeSystem& sys, const Cube& c, int n, std::vector<Cube>& out,
                       std::uint64_t budget) {
    if (c.id.level == n) {
        if (out.size() >= budget) throw std::length_error("survivors: budget exceeded");
        out.push_back(c);
        return;
    }
    const int cc = c.center_child;
    for (int s = 0; s < c.child_count; ++s) {
        if (s == cc) continue;
        if (!sys.slot_present(c, s)) continue;
        collect_survivors(sys, sys.child_cube(c, s), n, out, budget);
    }
}

void collect_in_cover(const CubeSystem& sys, const Cube& c, const Point& x, double r, int n,
                      InCover& out) {
    if (!c.region.meets_ball(x, r)) return;
    if (c.id.level == n) {
        out.cov.push_back(c.id);
        if (c.region.in_ball(x, r)) out.in.push_back(c.id);
        return;
    }
    for (int s = 0; s < c.child_count; ++s) {
        if (!sys.slot_present(c, s)) continue;
        collect_in_cover(sys, sys.child_cube(c, s), x, r, n, out);
    }
}

}  // namespace

std::vector<Cube> survivors(const CubeSystem& sys, int n, std::uint64_t budget) {
    if (n < 0 || n > sys.depth()) throw std::out_of_range("survivors: level out of range");
    std::vector<Cube> out;
    collect_survivors(sys, sys.root(), n, out, budget);
    return out;
}

InCover in_cover(const CubeSystem& sys, const Point& x, double r, int n) {
    if (n < 0 || n > sys.depth()) throw std::out_of_range("in_cover: level out of range");
    if (!(r > 0.0)) throw std::invalid_argument("in_cover: radius must be positive");
    InCover out;
    collect_in_cover(sys, sys.root(), x, r, n, out);
    std::sort(out.in.begin(), out.in.end());
    std::sort(out.cov.begin(), out.cov.end());
    return out;
}

}  // namespace fml
