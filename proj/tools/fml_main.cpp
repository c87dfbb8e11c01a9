// fml: build (alpha_n)-regular cube systems on [0,1)^q, construct the
// Riesz-product style measures on them, and run the doubling / fat-thin /
// restricted-measure experiments. See README.md and docs/formats.md.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fml/fatthin.hpp"
#include "fml/serialize.hpp"
#include "fml/validate.hpp"

namespace {

using namespace fml;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInvariant = 2;

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << content;
}

void write_json(const std::string& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

json read_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    json j;
    f >> j;
    return j;
}

std::vector<long> parse_bases(const std::string& spec, int depth) {
    std::vector<long> bases;
    if (spec.rfind("odd:2n+1", 0) == 0) {
        for (int n = 1; n <= depth; ++n) bases.push_back(2L * n + 1L);
        return bases;
    }
    if (spec.find(',') == std::string::npos) {
        const long b = std::stol(spec);
        bases.assign(depth, b);
        return bases;
    }
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) bases.push_back(std::stol(tok));
    return bases;
}

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
    return v;
}

struct Options {
    std::string space = "1d";
    std::string bases = "3";
    std::string alpha;
    std::string system_path;
    std::string measure_path;
    std::string out;
    std::string csv;
    std::string json_out;
    std::string witness_out = "witness.json";
    std::string n0 = "auto";
    std::string source = "random";
    std::string branch = "fixed";
    std::string T = "2,4,8";
    std::string probes;
    bool lazy = true;
    bool eager = false;
    bool subsampled = false;
    long base = 2;
    int depth = 3;
    int level = -1;
    double rho = 0.0;
    double beta = 1.0;
    double tau = 1e-8;
    double conservation_eps = 1e-6;
    double factor = 6.0;
    double rmin = 1e-3;
    double rmax = 0.25;
    std::uint64_t samples = 100;
    std::uint64_t seed = 1;
    int threads = 0;
    int nmax = 5;
    int fit_from = 3;
    int theta_level = -1;
    int comparability_level = 0;
};

CubeSystem load_system(const Options& o) {
    if (o.system_path.empty()) throw std::runtime_error("--system is required");
    return system_from_json(read_json(o.system_path));
}

MeasureTree load_measure(const Options& o) {
    if (!o.measure_path.empty()) return measure_from_json(read_json(o.measure_path));
    CubeSystem sys = load_system(o);
    std::optional<int> n0;
    if (o.n0 != "auto") n0 = std::stoi(o.n0);
    return build_measure(sys, o.rho, n0, std::min(o.depth, sys.depth()), o.tau);
}

int cmd_build(const Options& o) {
    const int q = o.space == "2d" ? 2 : 1;
    const SpaceModel space = q == 2 ? SpaceModel::square() : SpaceModel::line();
    CubeSystem sys = [&] {
        if (o.subsampled) {
            AlphaSequence alpha(sequence_from_string(o.alpha));
            return build_subsampled_dyadic(space, o.base, alpha, o.depth);
        }
        const auto bases = parse_bases(o.bases, o.depth);
        const std::string rule = o.bases.rfind("odd:", 0) == 0 ? o.bases : std::string();
        return build_adic_system(space, bases, o.depth, !o.eager, rule);
    }();
    write_json(o.out.empty() ? "system.json" : o.out, system_to_json(sys, o.eager));
    return kExitOk;
}

int cmd_distort(const Options& o) {
    const auto bases = parse_bases(o.bases, o.depth);
    const std::string rule = o.bases.rfind("odd:", 0) == 0 ? o.bases : std::string();
    CubeSystem sys = build_distorted_carpet(bases, o.depth, rule);
    write_json(o.out.empty() ? "distorted.json" : o.out, system_to_json(sys, false));
    return kExitOk;
}

int cmd_validate(const Options& o) {
    CubeSystem sys = load_system(o);
    const int depth = std::min(o.depth, sys.depth());
    ValidationReport rep = validate(sys, depth, parse_doubles(o.T));
    const json rj = validation_to_json(rep);
    if (!o.json_out.empty()) write_json(o.json_out, rj);
    std::cout << rj.dump(2) << "\n";
    if (!rep.pass()) {
        write_json(o.witness_out, rj);
        return kExitInvariant;
    }
    return kExitOk;
}

int cmd_measure(const Options& o) {
    CubeSystem sys = load_system(o);
    std::optional<int> n0;
    if (o.n0 != "auto") n0 = std::stoi(o.n0);
    MeasureBuildInfo info;
    MeasureTree tree = build_measure(sys, o.rho, n0, std::min(o.depth, sys.depth()), o.tau, &info);
    const ConservationReport audit =
        audit_conservation(tree, o.conservation_eps, resolve_threads(o.threads));
    json out = measure_to_json(tree);
    out["conservation"] = conservation_to_json(audit);
    if (info.n0r.basic) out["n0_basic"] = *info.n0r.basic;
    if (info.n0r.nontrivial) out["n0_nontrivial"] = *info.n0r.nontrivial;
    out["n0_trivial_flag"] = info.n0r.trivial_flag;
    write_json(o.out.empty() ? "measure.json" : o.out, out);
    if (!audit.violations.empty()) {
        write_json(o.witness_out, conservation_to_json(audit));
        return kExitInvariant;
    }
    return kExitOk;
}

int cmd_scan_doubling(const Options& o) {
    MeasureTree tree = load_measure(o);
    if (o.theta_level >= 0) tree = make_theta_tree(tree.system(), o.theta_level, tree.rho(), o.tau);
    SamplingSpec spec;
    spec.count = o.samples;
    spec.seed = o.seed;
    spec.rmin = o.rmin;
    spec.rmax = o.rmax;
    spec.level = o.level;
    if (o.source == "centers") spec.source = SamplingSpec::Source::CubeCenters;
    else if (o.source == "survivors") spec.source = SamplingSpec::Source::SurvivorPoints;
    else spec.source = SamplingSpec::Source::UniformRandom;
    const DoublingReport rep = doubling_scan(tree, spec, resolve_threads(o.threads));
    if (!o.csv.empty()) write_file(o.csv, doubling_to_csv(rep, tree.system().q()));
    json j = doubling_to_json(rep);
    if (o.comparability_level > 0) {
        const ComparabilityReport cr = weight_comparability_probe(tree, o.comparability_level);
        j["fitted_constants"]["C7"] = cr.C7;
        j["fitted_constants"]["C8"] = cr.C8;
        j["fitted_constants"]["T"] = cr.T;
    }
    if (!o.json_out.empty()) write_json(o.json_out, j);
    std::cout << j.dump(2) << "\n";
    for (const auto& s : rep.samples)
        if (!(s.ratio >= 1.0) || !std::isfinite(s.ratio)) {
            write_json(o.witness_out,
                       json{{"x", s.x[0]}, {"y", s.x[1]}, {"r", s.r}, {"ratio", s.ratio}});
            return kExitInvariant;
        }
    return kExitOk;
}

int cmd_fat_thin(const Options& o) {
    CubeSystem sys = load_system(o);
    FatThinConfig cfg;
    cfg.depth = std::min(o.depth, sys.depth());
    cfg.tau = o.tau;
    cfg.rho = o.rho;
    cfg.threads = resolve_threads(o.threads);
    if (o.n0 != "auto") cfg.n0 = std::stoi(o.n0);
    if (o.branch == "fat") cfg.policy = FatThinConfig::RhoPolicy::FatAuto;
    else if (o.branch == "thin") cfg.policy = FatThinConfig::RhoPolicy::ThinAuto;
    else cfg.policy = FatThinConfig::RhoPolicy::Fixed;
    const FatThinReport rep = fat_thin_experiment(sys, cfg);
    if (!o.csv.empty()) write_file(o.csv, fatthin_to_csv(rep));
    const json j = fatthin_to_json(rep);
    if (!o.json_out.empty()) write_json(o.json_out, j);
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_restrict_scan(const Options& o) {
    MeasureTree tree = load_measure(o);
    SamplingSpec spec;
    spec.count = o.samples;
    spec.seed = o.seed;
    spec.rmin = o.rmin;
    spec.rmax = o.rmax;
    const int n = o.level >= 0 ? o.level : tree.depth();
    const RestrictedScanReport rep = restricted_doubling_scan(tree, n, spec, o.factor, o.fit_from);
    if (!o.csv.empty()) write_file(o.csv, restricted_to_csv(rep));
    const json j = restricted_to_json(rep);
    if (!o.json_out.empty()) write_json(o.json_out, j);
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_plumpness(const Options& o) {
    CubeSystem sys = load_system(o);
    std::vector<PlumpnessProbe> probes;
    if (!o.probes.empty()) {
        // "x[,y],R;x[,y],R;..."
        std::stringstream ss(o.probes);
        std::string tok;
        while (std::getline(ss, tok, ';')) {
            const auto vals = parse_doubles(tok);
            PlumpnessProbe p;
            if (sys.q() == 2 && vals.size() >= 3) {
                p.x = Point{vals[0], vals[1]};
                p.R = vals[2];
            } else if (vals.size() >= 2) {
                p.x = Point{vals[0], 0.0};
                p.R = vals[1];
            } else {
                throw std::runtime_error("bad probe: " + tok);
            }
            probes.push_back(p);
        }
    } else if (!sys.distortions().empty()) {
        probes = distorted_plumpness_probes(sys);
    } else {
        throw std::runtime_error("plumpness: give --probes or use a distorted system");
    }
    const PlumpnessReport rep =
        relative_plumpness_probe(sys, std::min(o.nmax, sys.depth()), probes);
    if (!o.csv.empty()) write_file(o.csv, plumpness_to_csv(rep));
    const json j = plumpness_to_json(rep);
    if (!o.json_out.empty()) write_json(o.json_out, j);
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_pushforward(const Options& o) {
    CubeSystem sys = load_system(o);
    CubeSystem img = pushforward_power(sys, o.beta);
    write_json(o.out.empty() ? "pushforward.json" : o.out, system_to_json(img, o.eager));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"(alpha_n)-regular cube hierarchies and doubling-measure experiments"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* c) {
        c->add_option("--threads", o.threads, "parallel width cap (also FML_THREADS)");
        c->add_option("--witness-out", o.witness_out, "violation witness file");
    };

    CLI::App* build = app.add_subcommand("build", "build an adic or subsampled-dyadic system");
    build->add_option("--space", o.space, "1d or 2d");
    build->add_option("--bases", o.bases, "odd:2n+1 | constant base | comma list");
    build->add_option("--depth", o.depth);
    build->add_flag("--lazy", o.lazy, "lazy materialization (default)");
    build->add_flag("--eager", o.eager, "materialize and serialize the cube table");
    build->add_flag("--subsampled", o.subsampled, "subsampled b-adic construction");
    build->add_option("--base", o.base, "subsampled base b >= 2");
    build->add_option("--alpha", o.alpha, "sequence spec, e.g. geometric:0.5");
    build->add_option("--out", o.out);
    add_common(build);

    CLI::App* distort = app.add_subcommand("distort", "build the distorted 2D carpet");
    distort->add_option("--bases", o.bases);
    distort->add_option("--depth", o.depth);
    distort->add_option("--out", o.out);
    add_common(distort);

    CLI::App* val = app.add_subcommand("validate", "check axioms and fit constants");
    val->add_option("--system", o.system_path)->required();
    val->add_option("--depth", o.depth);
    val->add_option("--T", o.T, "comma list of T values > 1");
    val->add_option("--json", o.json_out);
    add_common(val);

    CLI::App* meas = app.add_subcommand("measure", "build the measure tree + conservation audit");
    meas->add_option("--system", o.system_path)->required();
    meas->add_option("--rho", o.rho)->required();
    meas->add_option("--n0", o.n0, "auto or a fixed child level");
    meas->add_option("--depth", o.depth);
    meas->add_option("--tau", o.tau);
    meas->add_option("--conservation-eps", o.conservation_eps);
    meas->add_option("--out", o.out);
    add_common(meas);

    CLI::App* scan = app.add_subcommand("scan-doubling", "nu(B(x,2r))/nu(B(x,r)) sample scan");
    scan->add_option("--measure", o.measure_path);
    scan->add_option("--system", o.system_path);
    scan->add_option("--rho", o.rho);
    scan->add_option("--depth", o.depth);
    scan->add_option("--n0", o.n0);
    scan->add_option("--samples", o.samples);
    scan->add_option("--seed", o.seed);
    scan->add_option("--rmin", o.rmin);
    scan->add_option("--rmax", o.rmax);
    scan->add_option("--source", o.source, "random | centers | survivors");
    scan->add_option("--level", o.level, "level for centers/survivor sources");
    scan->add_option("--theta-level", o.theta_level, "probe single-level theta_p");
    scan->add_option("--probe-comparability", o.comparability_level,
                     "also fit C7/C8 at this weighted level");
    scan->add_option("--csv", o.csv);
    scan->add_option("--json", o.json_out);
    add_common(scan);

    CLI::App* ft = app.add_subcommand("fat-thin", "survivor masses vs the product bound");
    ft->add_option("--system", o.system_path)->required();
    ft->add_option("--rho", o.rho);
    ft->add_option("--branch", o.branch, "fixed | fat | thin");
    ft->add_option("--depth", o.depth);
    ft->add_option("--n0", o.n0);
    ft->add_option("--tau", o.tau);
    ft->add_option("--csv", o.csv);
    ft->add_option("--json", o.json_out);
    add_common(ft);

    CLI::App* rs = app.add_subcommand("restrict-scan", "doubling ratios of nu restricted to E");
    rs->add_option("--measure", o.measure_path);
    rs->add_option("--system", o.system_path);
    rs->add_option("--rho", o.rho);
    rs->add_option("--depth", o.depth);
    rs->add_option("--n0", o.n0);
    rs->add_option("--level", o.level, "survivor level (default: tree depth)");
    rs->add_option("--factor", o.factor);
    rs->add_option("--fit-from", o.fit_from);
    rs->add_option("--samples", o.samples);
    rs->add_option("--seed", o.seed);
    rs->add_option("--rmin", o.rmin);
    rs->add_option("--rmax", o.rmax);
    rs->add_option("--csv", o.csv);
    rs->add_option("--json", o.json_out);
    add_common(rs);

    CLI::App* pl = app.add_subcommand("plumpness", "relative plumpness witness search");
    pl->add_option("--system", o.system_path)->required();
    pl->add_option("--nmax", o.nmax);
    pl->add_option("--probes", o.probes, "x[,y],R;... (default: distorted-system probes)");
    pl->add_option("--csv", o.csv);
    pl->add_option("--json", o.json_out);
    add_common(pl);

    CLI::App* pf = app.add_subcommand("pushforward", "image system under x -> x^beta");
    pf->add_option("--system", o.system_path)->required();
    pf->add_option("--beta", o.beta)->required();
    pf->add_flag("--eager", o.eager);
    pf->add_option("--out", o.out);
    add_common(pf);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (build->parsed()) return cmd_build(o);
        if (distort->parsed()) return cmd_distort(o);
        if (val->parsed()) return cmd_validate(o);
        if (meas->parsed()) return cmd_measure(o);
        if (scan->parsed()) return cmd_scan_doubling(o);
        if (ft->parsed()) return cmd_fat_thin(o);
        if (rs->parsed()) return cmd_restrict_scan(o);
        if (pl->parsed()) return cmd_plumpness(o);
        if (pf->parsed()) return cmd_pushforward(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
