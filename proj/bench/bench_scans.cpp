// Compares the serial reference kernels against the OpenMP ones and checks
// that outputs agree bit for bit at every thread count.
//
//   ./bench_scans [points] [depth]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "fml/fatthin.hpp"

using namespace fml;
using Clock = std::chrono::steady_clock;

namespace {

double run_ms(const std::function<void()>& f) {
    const auto t0 = Clock::now();
    f();
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

bool same(const DoublingReport& a, const DoublingReport& b) {
    if (a.samples.size() != b.samples.size()) return false;
    for (std::size_t i = 0; i < a.samples.size(); ++i)
        if (a.samples[i].nu_r != b.samples[i].nu_r || a.samples[i].nu_2r != b.samples[i].nu_2r)
            return false;
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    const std::uint64_t points = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 400;
    const int depth = argc > 2 ? std::atoi(argv[2]) : 8;

    CubeSystem sys =
        build_adic_system(SpaceModel::line(), std::vector<long>(depth, 7), depth);
    MeasureTree tree(sys, 1.0, 1, depth);
    SamplingSpec spec;
    spec.count = points;
    spec.seed = 99;
    spec.rmin = 1.0 / 1024.0;
    spec.rmax = 0.125;

    std::printf("doubling scan: base 7, depth %d, %llu points x %zu radii\n", depth,
                static_cast<unsigned long long>(points), radius_grid(spec).size());

    DoublingReport ref;
    const double t_serial = run_ms([&] { ref = doubling_scan_serial(tree, spec); });
    std::printf("  %-22s %9.1f ms   max_ratio=%.6f\n", "serial reference", t_serial,
                ref.max_ratio);

    for (int threads : {1, 2, 4, 8}) {
        DoublingReport par;
        const double t = run_ms([&] { par = doubling_scan(tree, spec, threads); });
        std::printf("  %-19s %2dT %9.1f ms   speedup=%.2fx   identical=%s\n", "openmp kernel",
                    threads, t, t_serial / t, same(ref, par) ? "yes" : "NO");
        if (!same(ref, par)) return 1;
    }

    std::printf("conservation audit: base 7, depth %d\n", std::min(depth, 8));
    CubeSystem asys =
        build_adic_system(SpaceModel::line(), std::vector<long>(std::min(depth, 8), 7),
                          std::min(depth, 8));
    MeasureTree atree(asys, 1.0, 1, asys.depth());
    ConservationReport serial_rep, par_rep;
    const double a_serial = run_ms([&] { serial_rep = audit_conservation(atree, 1e-12, 1); });
    std::printf("  %-22s %9.1f ms   parents=%llu\n", "serial reference", a_serial,
                static_cast<unsigned long long>(serial_rep.parents_checked));
    for (int threads : {2, 4, 8}) {
        const double t = run_ms([&] { par_rep = audit_conservation(atree, 1e-12, threads); });
        const bool ok = par_rep.parents_checked == serial_rep.parents_checked &&
                        par_rep.max_rel_err == serial_rep.max_rel_err;
        std::printf("  %-19s %2dT %9.1f ms   speedup=%.2fx   identical=%s\n", "openmp kernel",
                    threads, t, a_serial / t, ok ? "yes" : "NO");
        if (!ok) return 1;
    }

    std::printf("survivor mass: base 7, depth %d, brute recursion vs product fast path\n",
                std::min(depth, 9));
    CubeSystem ssys =
        build_adic_system(SpaceModel::line(), std::vector<long>(std::min(depth, 9), 7),
                          std::min(depth, 9));
    MeasureTree stree(ssys, 1.0, 1, ssys.depth());
    double brute = 0.0, fast = 0.0;
    const double b_ms =
        run_ms([&] { brute = survivor_mass_brute(stree, ssys.depth(), resolve_threads(0)); });
    const double f_ms = run_ms([&] { fast = survivor_mass(stree, ssys.depth()); });
    std::printf("  brute %9.1f ms, product %9.3f ms, |diff| = %.3g\n", b_ms, f_ms,
                std::abs(brute - fast));
    return std::abs(brute - fast) <= 1e-10 ? 0 : 1;
}
