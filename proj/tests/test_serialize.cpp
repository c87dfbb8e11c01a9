#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include "fml/serialize.hpp"

using namespace fml;

namespace {

std::string tmp_path(const std::string& name) { return "/tmp/fml_test_" + name; }

void dump(const std::string& path, const json& j) {
    std::ofstream f(path);
    f << j.dump(2) << "\n";
}

json slurp(const std::string& path) {
    std::ifstream f(path);
    json j;
    f >> j;
    return j;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FML_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("double formatting round-trips") {
    for (double v : {1.0 / 3.0, 0.1, 1e-17, 123456.789, 28.0 / 3.0}) {
        const std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
}

TEST_CASE("sequence specs round-trip") {
    for (const SequenceSpec& spec :
         {SequenceSpec::constant(0.25), SequenceSpec::geometric(0.5),
          SequenceSpec::power_decay(1.5, 0.8), SequenceSpec::exp_sqrt(2.0),
          SequenceSpec::reciprocal_odd_rule(), SequenceSpec::reciprocal_odd_constant(9),
          SequenceSpec::reciprocal_odd_list({3, 5, 7}),
          SequenceSpec::explicit_list({0.5, 0.25})}) {
        const SequenceSpec back = sequence_from_json(sequence_to_json(spec));
        AlphaSequence a(spec), b(back);
        const std::uint64_t n_max = spec.length_limit ? *spec.length_limit : 16;
        for (std::uint64_t n = 1; n <= n_max; ++n) CHECK(a.value(n) == b.value(n));
    }
    CHECK(sequence_from_string("geometric:0.5").kind == SeqKind::Geometric);
    CHECK(sequence_from_string("recip-odd:7").odd_base == 7);
    CHECK(sequence_from_string("list:0.5,0.25").values.size() == 2);
    CHECK_THROWS(sequence_from_string("bogus:1"));
}

TEST_CASE("builder systems round-trip through JSON") {
    std::vector<CubeSystem> systems;
    systems.push_back(build_adic_system(SpaceModel::square(), {3, 5}, 2));
    systems.push_back(build_subsampled_dyadic(SpaceModel::line(), 2,
                                              AlphaSequence(SequenceSpec::geometric(0.5)), 3));
    systems.push_back(pushforward_power(build_adic_system(SpaceModel::line(), {3, 3}, 2), 0.5));
    systems.push_back(build_distorted_carpet({3, 5, 7}, 3));
    for (const CubeSystem& sys : systems) {
        const CubeSystem back = system_from_json(system_to_json(sys));
        CHECK(back.q() == sys.q());
        CHECK(back.depth() == sys.depth());
        CHECK(back.distortions().size() == sys.distortions().size());
        for (int L = 0; L <= sys.depth(); ++L) {
            REQUIRE(back.level_cube_count(L) == sys.level_cube_count(L));
            const std::uint64_t step = std::max<std::uint64_t>(sys.level_cube_count(L) / 7, 1);
            for (std::uint64_t i = 0; i < sys.level_cube_count(L); i += step) {
                const Cube a = sys.cube(CubeId{L, i});
                const Cube b = back.cube(CubeId{L, i});
                CHECK(a.bbox.lo[0] == b.bbox.lo[0]);
                CHECK(a.center[0] == b.center[0]);
                CHECK(a.radius == b.radius);
                CHECK(a.region.volume() == b.region.volume());
            }
        }
    }
}

TEST_CASE("designations survive serialization") {
    CubeSystem sys = build_adic_system(SpaceModel::square(), {3, 3}, 2);
    CubeSystem d = designate_center_child(sys, CubeId{0, 0}, 5);
    const CubeSystem back = system_from_json(system_to_json(d));
    CHECK(back.root().center_child == 5);
    CHECK(back.root().radius == d.root().radius);
    CHECK(back.constants().C1 == d.constants().C1);
}

TEST_CASE("explicit systems load from eager dumps and expose corruption") {
    CubeSystem sys = build_adic_system(SpaceModel::line(), {3, 3}, 2, false);
    json j = system_to_json(sys, true);
    j["builder"] = json{{"kind", "explicit"}};
    const CubeSystem ex = system_from_json(j);
    CHECK(ex.kind() == BuilderKind::Explicit);
    CHECK(ex.depth() == 2);
    for (std::uint64_t i = 0; i < 9; ++i) {
        CHECK(ex.cube(CubeId{2, i}).bbox.lo[0] == sys.cube(CubeId{2, i}).bbox.lo[0]);
        CHECK(ex.cube(CubeId{2, i}).radius == sys.cube(CubeId{2, i}).radius);
    }
    const ValidationReport ok = validate(ex, 2, {2.0});
    CHECK(ok.pass());

    // hand-corrupt one radius: validation must fail with that cube as witness
    json bad = j;
    for (auto& e : bad["cubes"]) {
        if (e["path"].size() == 2 && e["path"][0] == 0 && e["path"][1] == 1) {
            e["radius"] = 3.0 * e["radius"].get<double>();
            break;
        }
    }
    const CubeSystem corrupted = system_from_json(bad);
    const ValidationReport rep = validate(corrupted, 2, {2.0});
    CHECK_FALSE(rep.pass());
    CHECK_FALSE(rep.ball_sandwich.pass);
    bool witnessed = false;
    for (const auto& w : rep.ball_sandwich.witnesses)
        if (w.id.level == 2 && corrupted.path_of(w.id) == std::vector<std::uint32_t>{0, 1})
            witnessed = true;
    CHECK(witnessed);
}

TEST_CASE("measure trees round-trip") {
    CubeSystem sys = build_adic_system(SpaceModel::line(), {7, 7, 7}, 3);
    MeasureTree tree(sys, 1.0, 1, 3);
    const MeasureTree back = measure_from_json(measure_to_json(tree));
    CHECK(back.rho() == 1.0);
    CHECK(back.n0() == 1);
    CHECK(back.depth() == 3);
    for (std::uint64_t i = 0; i < 7; ++i)
        CHECK(back.cube_mass(CubeId{1, i}) == tree.cube_mass(CubeId{1, i}));
}

TEST_CASE("csv column contracts") {
    DoublingReport rep;
    rep.samples.push_back({Point{0.5, 0.25}, 0.1, 1.0, 2.0, 2.0});
    CHECK(doubling_to_csv(rep, 1).rfind("x,r,nu_r,nu_2r,ratio\n", 0) == 0);
    CHECK(doubling_to_csv(rep, 2).rfind("x0,x1,r,nu_r,nu_2r,ratio\n", 0) == 0);

    FatThinReport ft;
    ft.rows.push_back({1, 0.2, 0.04, 1.0, 0.96, 0.9});
    const std::string csv = fatthin_to_csv(ft);
    CHECK(csv.rfind("n,alpha_n,center_ratio,survivor_mass,product_bound\n", 0) == 0);
    CHECK(csv.find("1,0.2,0.04,0.96,0.9\n") != std::string::npos);
}

TEST_CASE("cli: build, validate, measure, scans run end to end") {
    const std::string sys = tmp_path("sys.json");
    const std::string m = tmp_path("m.json");
    CHECK(run_cli("build --space 1d --bases 7 --depth 3 --out " + sys) == 0);
    CHECK(run_cli("validate --system " + sys + " --depth 3 --T 2,4,8 --json " +
                  tmp_path("v.json")) == 0);
    CHECK(run_cli("measure --system " + sys + " --rho 1.0 --n0 auto --depth 3 --out " + m) == 0);
    CHECK(run_cli("scan-doubling --measure " + m + " --samples 20 --seed 5 --rmin 0.001 "
                  "--rmax 0.2 --csv " + tmp_path("scan.csv") + " --json " + tmp_path("scan.json")) ==
          0);
    CHECK(run_cli("fat-thin --system " + sys + " --rho 1.0 --depth 3 --csv " +
                  tmp_path("levels.csv")) == 0);
    CHECK(run_cli("distort --bases odd:2n+1 --depth 4 --out " + tmp_path("dist.json")) == 0);
    CHECK(run_cli("restrict-scan --system " + tmp_path("dist.json") + " --rho 0 --depth 4 " +
                  "--factor 6 --csv " + tmp_path("rs.csv")) == 0);
    CHECK(run_cli("plumpness --system " + tmp_path("dist.json") + " --nmax 4 --json " +
                  tmp_path("pl.json")) == 0);
    CHECK(run_cli("pushforward --system " + sys + " --beta 0.5 --out " + tmp_path("pf.json")) == 0);
    CHECK(run_cli("validate --system " + tmp_path("pf.json") + " --depth 3 --T 2") == 0);

    // determinism: identical config + seed give byte-identical outputs
    CHECK(run_cli("scan-doubling --measure " + m + " --samples 20 --seed 5 --rmin 0.001 "
                  "--rmax 0.2 --threads 3 --csv " + tmp_path("scan2.csv")) == 0);
    CHECK(slurp(tmp_path("scan.json")) ==
          json::parse(std::ifstream(tmp_path("scan.json"))));
    std::ifstream a(tmp_path("scan.csv")), b(tmp_path("scan2.csv"));
    const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);

    // usage errors exit 1
    CHECK(run_cli("bogus-subcommand") == 1);
    CHECK(run_cli("validate") == 1);

    // invariant violations exit 2 with a witness file
    json bad = slurp(sys);
    bad["builder"] = json{{"kind", "explicit"}};
    json eager = system_to_json(build_adic_system(SpaceModel::line(), {7, 7, 7}, 3, false), true);
    eager["builder"] = json{{"kind", "explicit"}};
    eager["cubes"][1]["radius"] = 0.9;
    dump(tmp_path("bad.json"), eager);
    CHECK(run_cli("validate --system " + tmp_path("bad.json") + " --depth 1 --T 2 --witness-out " +
                  tmp_path("w.json")) == 2);
    CHECK(slurp(tmp_path("w.json")).contains("ball_sandwich"));
}
