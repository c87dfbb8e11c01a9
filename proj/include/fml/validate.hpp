#ifndef FML_VALIDATE_HPP
#define FML_VALIDATE_HPP

#include <map>
#include <string>
#include <vector>

#include "fml/cube_system.hpp"

namespace fml {

struct Witness {
    CubeId id;
    std::string what;
    double expected = 0.0;
    double actual = 0.0;
};

struct AxiomCheck {
    bool pass = true;
    std::uint64_t checked = 0;
    std::vector<Witness> witnesses;
};

struct ValidationReport {
    AxiomCheck partition;          // (I)  levels tile the domain
    AxiomCheck nesting;            // (II) children sit inside their parent
    AxiomCheck ball_sandwich;      // (III) B(x,r) within Q within B(x, C1 r)
    AxiomCheck radius_ratio;       // (IV) center-child radius band + nonempty difference
    AxiomCheck comparable_radius;  // (V)  same-level radii comparable near any center

    double fitted_C1 = 0.0;             // smallest feasible C1 observed
    double fitted_C2 = 1.0;             // smallest feasible C2 at d = 1
    double fitted_d = 1.0;              // largest feasible d at the stored C2
    std::map<double, double> fitted_C3; // per requested T

    int deepest_level = 0;
    std::uint64_t certified_from = 1;   // renumbering level D*C1*C2*alpha_n < 1
    std::vector<int> levels_skipped;    // too large for the cube budget

    bool pass() const {
        return partition.pass && nesting.pass && ball_sandwich.pass && radius_ratio.pass &&
               comparable_radius.pass;
    }
};

ValidationReport validate(const CubeSystem& sys, int depth, const std::vector<double>& T_list,
                          std::uint64_t budget = 2'000'000);

}  // namespace fml

#endif
