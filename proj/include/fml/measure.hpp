#ifndef FML_MEASURE_HPP
#define FML_MEASURE_HPP

#include <optional>
#include <vector>

#include "fml/cube_system.hpp"
#include "fml/geometry.hpp"

namespace fml {

// Integral of d(center, y)^rho over the half-open box, with respect to volume.
// 1D uses the closed-form antiderivative; 2D splits the box at the center and
// evaluates corner pieces in polar form (exact in the radial direction, which
// absorbs the rho < 0 singularity), smooth pieces by adaptive Gauss panels to
// relative tolerance tau. Throws for rho <= -q.
double power_distance_integral(const Box& box, const Point& center, double rho,
                               double tau = 1e-8);

// Children split by containment in B(x_{n,j}, r_{n,j}/2): slots of I and I^c.
struct ISet {
    std::vector<int> in_slots;
    std::vector<int> out_slots;
};
ISet iset(const CubeSystem& sys, const Cube& cube);

// Per-parent weight data for the transition cube.level -> cube.level + 1.
struct WeightRecord {
    ISet is;
    bool A_defined = false;  // false when I is empty (weights default to 1)
    double A = 1.0;
    double H_I = 0.0;        // total volume of the I children
    double integral_I = 0.0; // integral of d(x,.)^rho over the I children
    std::vector<double> t;   // per slot; absent slots carry 1
    bool trivial = false;    // |I| <= 1 makes the weighting the identity
};

WeightRecord compute_weights(const CubeSystem& sys, const Cube& parent, double rho,
                             double tau = 1e-8);

// Variant taking pre-materialized (slot, child) pairs; hot paths reuse the
// child list for the weight computation, the conservation sum and recursion.
using SlotCubes = std::vector<std::pair<int, Cube>>;
void collect_children(const CubeSystem& sys, const Cube& parent, SlotCubes& out);
WeightRecord compute_weights_children(const Cube& parent, const SlotCubes& children, double rho,
                                      double tau = 1e-8);

// A_{n,j} = H(I) / integral_I d(x,.)^rho dH; nullopt when I is empty.
std::optional<double> coefficient_A(const CubeSystem& sys, const Cube& cube, double rho,
                                    double tau = 1e-8);

// t on one child: 1 on I^c, the averaged radial weight on I.
double child_weight_t(const CubeSystem& sys, const Cube& cube, int child_slot, double rho,
                      double tau = 1e-8);

// Decidable surrogates of the paper's level-fixing lemma, evaluated per parent
// level: (a) B(x, r/16) inside the union of I children, (b) I nonempty, and
// the stricter |I| >= 2 variant that makes the weighting nontrivial.
struct N0Result {
    std::optional<int> basic;       // first child level from which (a) and (b) hold onward
    std::optional<int> nontrivial;  // additionally |I| >= 2 onward
    bool trivial_flag = false;      // no level yields a nontrivial I
};
N0Result choose_n0(const CubeSystem& sys, double rho, int max_level, double tau = 1e-8);

struct BallMass {
    double inner = 0.0;   // certified lower bound: full cubes only
    double value = 0.0;   // exact mode
    double outer = 0.0;   // certified upper bound: covering cubes
    double bracket = 0.0; // width of the boundary bracket (0 for closed forms)
};

// Finite-depth Riesz-product style measure nu on a cube system: weights t_m
// act on child levels n0..depth, density is the constant cumulative weight K
// inside each depth-level cube.
class MeasureTree {
  public:
    MeasureTree(CubeSystem sys, double rho, int n0, int depth, double tau = 1e-8,
                int theta_child_level = -1);

    const CubeSystem& system() const { return sys_; }
    double rho() const { return rho_; }
    int n0() const { return n0_; }
    int depth() const { return depth_; }
    double tau() const { return tau_; }
    bool identity_flagged() const { return identity_flagged_; }
    void set_identity_flag(bool f) { identity_flagged_ = f; }

    // Use quadtree bracketing instead of the closed-form overlap for 2D
    // boundary cubes (cross-check path; widens BallMass.bracket).
    void set_bracket_subdivision(bool on, int max_gen = 12) {
        bracket_subdivision_ = on;
        bracket_gens_ = max_gen;
    }

    bool transition_weighted(int child_level) const {
        if (theta_child_level_ >= 0) return child_level == theta_child_level_;
        return child_level >= n0_ && child_level <= depth_;
    }

    WeightRecord weights_for(const Cube& parent) const;

    double cube_K(CubeId id) const;
    double cube_mass(CubeId id) const;

    BallMass ball_mass(const Point& x, double r) const;
    // nu-mass of B(x, r) intersected with the union of level-n survivor cubes.
    BallMass restricted_ball_mass(int n, const Point& x, double r) const;

  private:
    CubeSystem sys_;
    double rho_;
    int n0_;
    int depth_;
    double tau_;
    int theta_child_level_ = -1;
    bool identity_flagged_ = false;
    bool bracket_subdivision_ = false;
    int bracket_gens_ = 12;

    struct Acc {
        double full = 0.0;
        double partial_exact = 0.0;
        double partial_full = 0.0;
        double bracket = 0.0;
    };
    void mass_rec(const Cube& c, double K, const Point& x, double r, int survivor_level,
                  Acc& acc) const;
};

struct MeasureBuildInfo {
    N0Result n0r;
    int n0_used = 1;
    bool identity = false;  // no usable n0 up to depth; weights are all 1
};

// n0_policy: nullopt = auto (nontrivial level if reachable, else basic, else
// identity weighting with a flag).
MeasureTree build_measure(const CubeSystem& sys, double rho, std::optional<int> n0_policy,
                          int depth, double tau = 1e-8, MeasureBuildInfo* info = nullptr);

// Single-level theta_p surrogate: only the transition p -> p+1 is weighted.
MeasureTree make_theta_tree(const CubeSystem& sys, int parent_level, double rho,
                            double tau = 1e-8);

struct ConservationViolation {
    CubeId parent;
    double rel_err;
};
struct ConservationReport {
    double max_rel_err = 0.0;
    CubeId worst{};
    std::uint64_t parents_checked = 0;
    std::vector<ConservationViolation> violations;
};

// Streams every parent of a weighted transition and checks
// sum_children t * H(child) == H(parent) to the given relative threshold.
ConservationReport audit_conservation(const MeasureTree& tree, double rel_threshold,
                                      int threads = 1);

}  // namespace fml

#endif
