#ifndef FML_SCANS_HPP
#define FML_SCANS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fml/measure.hpp"

namespace fml {

// env FML_THREADS caps parallel width; requested <= 0 picks the OpenMP default.
int resolve_threads(int requested = 0);

struct SamplingSpec {
    enum class Source { CubeCenters, SurvivorPoints, UniformRandom };
    Source source = Source::UniformRandom;
    int level = -1;             // for centers / survivor points; -1 = tree depth
    std::uint64_t count = 100;  // number of sample points
    std::uint64_t seed = 1;
    double rmin = 1e-3;
    double rmax = 0.25;         // radius grid: rmax, rmax/2, ... >= rmin
};

struct DoublingSample {
    Point x{0.0, 0.0};
    double r = 0.0;
    double nu_r = 0.0;
    double nu_2r = 0.0;
    double ratio = 0.0;
};

struct DoublingReport {
    std::vector<DoublingSample> samples;
    double max_ratio = 0.0;
    double min_ratio = 0.0;
    SamplingSpec spec;
};

// Deterministic point generation for a sampling spec (used by both the
// parallel kernel and the serial reference).
std::vector<Point> sample_points(const MeasureTree& tree, const SamplingSpec& spec);
std::vector<double> radius_grid(const SamplingSpec& spec);

// nu(B(x,2r)) / nu(B(x,r)) over the sample grid, exact-mode masses. Results
// are bit-identical for a fixed seed regardless of the thread count.
DoublingReport doubling_scan(const MeasureTree& tree, const SamplingSpec& spec, int threads = 0);

// Plain-loop reference implementation the parallel kernel is tested against.
DoublingReport doubling_scan_serial(const MeasureTree& tree, const SamplingSpec& spec);

struct ComparabilityReport {
    int level = 0;
    double T = 0.0;
    double C7 = 1.0;  // max t ratio among level-n cubes meeting a common ball
    double C8 = 1.0;  // same over the parents' weights
    std::uint64_t anchors = 0;
};

// Empirical weight-comparability constants over balls B(x_{n,k}, T r_{n,k});
// T <= 0 means the default 8 * C1.
ComparabilityReport weight_comparability_probe(const MeasureTree& tree, int n, double T = -1.0);

}  // namespace fml

#endif
