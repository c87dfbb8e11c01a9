#ifndef FML_FATTHIN_HPP
#define FML_FATTHIN_HPP

#include <optional>
#include <string>
#include <vector>

#include "fml/measure.hpp"
#include "fml/scans.hpp"

namespace fml {

// nu-mass of the union of level-n survivor cubes. Translation-uniform systems
// use the per-level product of retained fractions (exact by self-similarity);
// everything else falls back to the survivor recursion.
double survivor_mass(const MeasureTree& tree, int n, int threads = 1);
// Recursion over every survivor cube, kept as the independent route for
// cross-checking the product fast path.
double survivor_mass_brute(const MeasureTree& tree, int n, int threads = 1);

struct CenterRatio {
    double max_ratio = 0.0;   // max over survivor cubes of nu(center child)/nu(cube)
    double implied_cec = 0.0; // max_ratio / alpha_{n+1}^{(q+rho) d}
};
CenterRatio center_child_ratio(const MeasureTree& tree, int n);

struct ProductBound {
    double truncated = 1.0;  // product of (1 - CEC alpha_j^{(q+rho)d}), j = n1..N
    double with_tail = 1.0;  // extended toward the infinite product
    bool vacuous = false;    // some factor <= 0
    std::uint64_t vacuous_at = 0;
    bool tail_known = true;  // false for list-backed sequences
};
ProductBound product_lower_bound(const AlphaSequence& alpha, double rho, int q, double d,
                                 double cec, std::uint64_t n1, std::uint64_t N);

struct FatThinRow {
    int n = 0;
    double alpha = 0.0;
    double center_ratio = 0.0;  // removal fraction creating level n
    double implied_cec = 0.0;
    double survivor_mass = 0.0;
    double product_bound = 0.0;  // cumulative from n1; 1 below n1
};

struct FatThinReport {
    double rho = 0.0;
    int q = 1;
    double d = 1.0;
    std::string branch;  // "fat", "thin", "fixed"
    int n0_used = 1;
    double fitted_cec = 0.0;  // over weighted levels
    std::optional<int> n1;
    std::vector<FatThinRow> rows;
    double product_tail = 0.0;  // full product estimate from n1
    std::string verdict;        // "mass-stays-above-positive-bound", "mass-collapses-geometrically", "inconclusive"
    std::string prediction;     // from classify_family via the dichotomy
    bool consistent = false;
    bool bound_respected = false;  // survivor masses dominate the product bound from n1
};

struct FatThinConfig {
    enum class RhoPolicy { Fixed, FatAuto, ThinAuto };
    RhoPolicy policy = RhoPolicy::Fixed;
    double rho = 0.0;
    int depth = 4;
    double tau = 1e-8;
    std::optional<int> n0;
    int threads = 1;
};

FatThinReport fat_thin_experiment(const CubeSystem& sys, const FatThinConfig& cfg);

// nu(B(x,r) /\ level-n survivors), exact mode.
double restricted_ball_mass(const MeasureTree& tree, int n, const Point& x, double r);

struct RestrictedSample {
    int level = 0;       // hole level for distorted probes; survivor level otherwise
    double alpha = 0.0;  // size factor of the probed child
    Point x{0.0, 0.0};
    double r = 0.0;
    double mass_r = 0.0;
    double mass_fr = 0.0;  // at factor * r
    double ratio = 0.0;    // mass_r / mass_fr
    bool zero_denominator = false;
};

struct RestrictedScanReport {
    std::vector<RestrictedSample> samples;
    double factor = 6.0;
    // log(ratio) = lambda * log(alpha) + c fitted over probes with level >= fit_from
    double lambda = 0.0;
    double intercept = 0.0;
    double residual = 0.0;
    int fit_from = 3;
    int fit_points = 0;
};

// Distorted systems probe the relocated (detached) child of every manifest
// level with r just under the survivor gap; plain systems probe seeded
// survivor-cube centers at level n.
RestrictedScanReport restricted_doubling_scan(const MeasureTree& tree, int n,
                                              const SamplingSpec& sampling, double factor = 6.0,
                                              int fit_from = 3);

struct PlumpnessProbe {
    Point x{0.0, 0.0};
    double R = 0.0;
};
struct PlumpnessRow {
    Point x{0.0, 0.0};
    double R = 0.0;
    std::optional<int> first_n;
    double b = 0.0;
    Point witness_y{0.0, 0.0};
    double witness_r = 0.0;
};
struct PlumpnessReport {
    std::vector<PlumpnessRow> rows;
    // min b among probes resolved at each level
    std::vector<std::pair<int, double>> min_b_per_level;
};

PlumpnessReport relative_plumpness_probe(const CubeSystem& sys, int n_max,
                                         const std::vector<PlumpnessProbe>& probes);

// Default probes for a distorted system: detached-box centers with R just
// under the gap to the rest of the survivor set.
std::vector<PlumpnessProbe> distorted_plumpness_probes(const CubeSystem& sys);

}  // namespace fml

#endif
