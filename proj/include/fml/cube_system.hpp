#ifndef FML_CUBE_SYSTEM_HPP
#define FML_CUBE_SYSTEM_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fml/geometry.hpp"
#include "fml/sequence.hpp"

namespace fml {

// Ambient Ahlfors-regular model: the half-open unit box [0,1)^q with the
// q-dimensional volume as reference measure H.
struct SpaceModel {
    int q = 1;
    double ahlfors_C = 2.0;
    double perfectness_D = 2.0;

    static SpaceModel line();    // q = 1, C = 2
    static SpaceModel square();  // q = 2, C = pi

    Box domain() const {
        Box b;
        b.q = q;
        for (int i = 0; i < q; ++i) { b.lo[i] = 0.0; b.hi[i] = 1.0; }
        return b;
    }
};

struct CubeId {
    int level = 0;
    std::uint64_t index = 0;  // row-major grid index within the level

    bool operator==(const CubeId& o) const { return level == o.level && index == o.index; }
    bool operator<(const CubeId& o) const {
        return level != o.level ? level < o.level : index < o.index;
    }
};

struct Constants {
    double d = 1.0;
    double C1 = 2.0;
    double C2 = 1.0;
    std::map<double, double> C3;  // fitted per T, filled by validate
};

// One materialized cube. `bbox` is the grid footprint; `region` is the actual
// point set (they differ only for distortion-affected cubes).
struct Cube {
    CubeId id;
    Box bbox;
    Region region;
    Point center{0.0, 0.0};
    double radius = 0.0;
    int child_count = 0;      // child slots, including absent ones
    int center_child = -1;    // slot of the child containing `center`; -1 at depth
};

// Reparented grid box per the distorted-carpet construction: `detached` (a
// level hole_level+1 grid box interior to the hole) becomes a child of
// `neighbor`; the hole keeps its box minus the detached box and a shrunk
// designated radius.
struct DistortionEntry {
    int hole_level = 0;
    std::uint64_t hole_index = 0;
    std::uint64_t neighbor_index = 0;
    std::uint64_t detached_index = 0;
    double hole_radius = 0.0;
    double gap = 0.0;  // distance from the detached box to the hole/neighbor shared edge
};

// Center designation override (designate_center_child).
struct Designation {
    CubeId id;
    Point center{0.0, 0.0};
    double radius = 0.0;
    int center_child = 0;
};

struct ExplicitCube {
    Region region;
    Point center{0.0, 0.0};
    double radius = 0.0;
    int center_child = -1;
    std::uint32_t parent = 0;
    std::vector<std::uint32_t> children;
};

enum class BuilderKind { Adic, SubsampledDyadic, Pushforward, Explicit };

struct SystemData;

// Immutable (alpha_n)-regular cube hierarchy on [0,1)^q. Geometry is computed
// on demand from the builder description, so deep systems cost nothing to
// hold; eager materialization only matters for serialization.
class CubeSystem {
  public:
    explicit CubeSystem(std::shared_ptr<const SystemData> d) : d_(std::move(d)) {}

    int q() const;
    int depth() const;
    bool lazy() const;
    const SpaceModel& space() const;
    const AlphaSequence& alpha() const;
    const Constants& constants() const;
    BuilderKind kind() const;
    const std::vector<DistortionEntry>& distortions() const;
    const std::vector<Designation>& designations() const;
    const std::vector<long>& bases() const;
    const std::string& base_rule() const;
    long dyadic_base() const;
    const std::vector<long long>& generations() const;
    double beta() const;
    std::shared_ptr<const SystemData> data() const { return d_; }
    std::shared_ptr<const SystemData> inner_data() const;

    // Subdivision factor governing the transition level -> level+1; equals
    // alpha_{level+1} in the 1-based sequence indexing.
    double subdivision_alpha(int level) const;

    std::uint64_t level_cube_count(int level) const;
    // All same-level cubes are translates of one another (grid systems with
    // no overrides); per-level representatives then suffice for fitting.
    bool uniform_levels() const;

    Cube root() const;
    Cube cube(CubeId id) const;
    Cube child_cube(const Cube& parent, int slot) const;
    bool slot_present(const Cube& parent, int slot) const;
    CubeId parent_id(CubeId id) const;
    int slot_in_parent(CubeId id) const;
    int center_child_slot(CubeId id) const;
    bool is_survivor(CubeId id) const;
    std::vector<std::uint32_t> path_of(CubeId id) const;
    CubeId id_of_path(const std::vector<std::uint32_t>& path) const;

    // Level-n cube whose region contains the point.
    CubeId locate(int level, const Point& p) const;

    // Representatives whose local geometry covers the whole level: a corner
    // cube plus every override-affected cube. `exhaustive` is set when the
    // list is literally every cube of the level.
    struct LevelReps {
        std::vector<CubeId> ids;
        bool exhaustive = false;
    };
    LevelReps reps_for_level(int level, std::uint64_t budget = 2'000'000) const;

    void for_each_child(const Cube& parent, const std::function<void(const Cube&, int)>& fn) const;

  private:
    std::shared_ptr<const SystemData> d_;

    long axis_children(int level) const;
    std::uint64_t axis_size(int level) const;
    const DistortionEntry* find_hole(int level, std::uint64_t index) const;
    const DistortionEntry* find_neighbor(int level, std::uint64_t index) const;
    const DistortionEntry* find_detached(int level, std::uint64_t index) const;
    const Designation* find_designation(CubeId id) const;
    Box grid_box(CubeId id) const;

    friend CubeSystem pushforward_power(const CubeSystem&, double);
};

struct SystemData {
    SpaceModel space;
    std::optional<AlphaSequence> alpha;
    BuilderKind kind = BuilderKind::Adic;
    int depth = 0;
    bool lazy = true;
    Constants constants;

    std::vector<long> bases;  // adic: bases[L] subdivides level L
    std::string base_rule;    // "odd:2n+1", "constant:7", "" for explicit lists

    long dyadic_base = 2;             // subsampled
    std::vector<int> gen_delta;       // subsampled: generations added per transition
    std::vector<long long> gens;      // cumulative generation of each level

    std::vector<DistortionEntry> distortions;
    std::vector<Designation> designations;

    double beta = 1.0;                          // pushforward exponent
    std::shared_ptr<const SystemData> inner;    // pushforward source

    std::vector<std::vector<ExplicitCube>> levels;  // explicit systems

    std::uint64_t certified_from = 1;

    std::vector<long> axis_children_cache;
    std::vector<std::uint64_t> axis_size_cache;
};

// Builders -------------------------------------------------------------

// a_1 a_2 ... a_n - adic half-open boxes; bases odd and >= 3; alpha_n = 1/a_n.
CubeSystem build_adic_system(const SpaceModel& space, const std::vector<long>& bases, int depth,
                             bool lazy = true, const std::string& base_rule = std::string());

// The subsampled b-adic construction: level n keeps only generation g_n with
// g_{n+1} = g_n + ceil(log_{1/b} alpha_n').
CubeSystem build_subsampled_dyadic(const SpaceModel& space, long b, const AlphaSequence& alpha,
                                   int depth);

// Move the designation (x, r) of `cube` into the named child; the child
// becomes the removed piece of that cube.
CubeSystem designate_center_child(const CubeSystem& sys, CubeId cube, int child_slot);

// 2D carpet with one reparented cube per level reproducing the non-doubling
// restriction example; see DistortionEntry.
CubeSystem build_distorted_carpet(const std::vector<long>& bases, int depth,
                                  const std::string& base_rule = std::string());

// Image system under f(x) = x^beta on [0,1); radii follow the
// inf_{y not in Q} |f(x) - f(y)| rule. beta == 1 is the exact identity.
CubeSystem pushforward_power(const CubeSystem& sys, double beta);

CubeSystem make_explicit_system(const SpaceModel& space, std::optional<AlphaSequence> alpha,
                                Constants constants, std::vector<std::vector<ExplicitCube>> levels);

// Queries ---------------------------------------------------------------

// Level-n cubes whose ancestry never passes through a center child.
std::vector<Cube> survivors(const CubeSystem& sys, int n, std::uint64_t budget = 50'000'000);

struct InCover {
    std::vector<CubeId> in;   // cubes inside the open ball
    std::vector<CubeId> cov;  // cubes meeting the open ball
};
InCover in_cover(const CubeSystem& sys, const Point& x, double r, int n);

}  // namespace fml

#endif
