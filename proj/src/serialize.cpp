#include "fml/serialize.hpp"

#include <charconv>
#include <sstream>

namespace fml {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

json point_to_json(const Point& p, int q) {
    json a = json::array();
    for (int i = 0; i < q; ++i) a.push_back(p[i]);
    return a;
}

Point point_from_json(const json& j) {
    Point p{0.0, 0.0};
    for (std::size_t i = 0; i < j.size() && i < 2; ++i) p[i] = j[i].get<double>();
    return p;
}

json box_to_json(const Box& b) {
    return json{point_to_json(b.lo, b.q), point_to_json(b.hi, b.q)};
}

Box box_from_json(const json& j, int q) {
    Box b;
    b.q = q;
    b.lo = point_from_json(j[0]);
    b.hi = point_from_json(j[1]);
    return b;
}

json cube_entry(const CubeSystem& sys, const Cube& c) {
    json e;
    e["path"] = sys.path_of(c.id);
    e["box"] = box_to_json(c.bbox);
    if (!c.region.single_box()) {
        json boxes = json::array();
        for (const Box& b : c.region.boxes) boxes.push_back(box_to_json(b));
        e["boxes"] = boxes;
    }
    e["center"] = point_to_json(c.center, sys.q());
    e["radius"] = c.radius;
    if (c.center_child >= 0) e["center_child"] = c.center_child;
    return e;
}

}  // namespace

json sequence_to_json(const SequenceSpec& spec) {
    json p;
    switch (spec.kind) {
        case SeqKind::Constant: p["c"] = spec.c; break;
        case SeqKind::Geometric: p["c"] = spec.c; break;
        case SeqKind::PowerDecay:
            p["s"] = spec.s;
            p["c"] = spec.c;
            break;
        case SeqKind::ExpSqrt: p["s"] = spec.s; break;
        case SeqKind::ReciprocalOdd:
            switch (spec.odd_rule) {
                case OddRule::TwoNPlusOne: p["rule"] = "2n+1"; break;
                case OddRule::Constant:
                    p["rule"] = "constant";
                    p["a"] = spec.odd_base;
                    break;
                case OddRule::List:
                    p["rule"] = "list";
                    p["list"] = spec.odd_list;
                    break;
            }
            break;
        case SeqKind::ExplicitList: p["values"] = spec.values; break;
    }
    json j;
    j["kind"] = to_string(spec.kind);
    j["params"] = p;
    if (spec.length_limit) j["length_limit"] = *spec.length_limit;
    return j;
}

SequenceSpec sequence_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const json& p = j.at("params");
    SequenceSpec s;
    if (kind == "constant") {
        s = SequenceSpec::constant(p.at("c").get<double>());
    } else if (kind == "geometric") {
        s = SequenceSpec::geometric(p.at("c").get<double>());
    } else if (kind == "power-decay") {
        s = SequenceSpec::power_decay(p.at("s").get<double>(),
                                      p.value("c", 1.0));
    } else if (kind == "exp-sqrt") {
        s = SequenceSpec::exp_sqrt(p.at("s").get<double>());
    } else if (kind == "reciprocal-odd") {
        const std::string rule = p.value("rule", "2n+1");
        if (rule == "2n+1")
            s = SequenceSpec::reciprocal_odd_rule();
        else if (rule == "constant")
            s = SequenceSpec::reciprocal_odd_constant(p.at("a").get<long>());
        else if (rule == "list")
            s = SequenceSpec::reciprocal_odd_list(p.at("list").get<std::vector<long>>());
        else
            throw std::invalid_argument("sequence_from_json: unknown reciprocal-odd rule");
    } else if (kind == "explicit-list") {
        s = SequenceSpec::explicit_list(p.at("values").get<std::vector<double>>());
    } else {
        throw std::invalid_argument("sequence_from_json: unknown kind " + kind);
    }
    if (j.contains("length_limit")) s.length_limit = j["length_limit"].get<std::uint64_t>();
    return s;
}

SequenceSpec sequence_from_string(const std::string& str) {
    const auto colon = str.find(':');
    const std::string kind = str.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : str.substr(colon + 1);
    if (kind == "constant") return SequenceSpec::constant(std::stod(arg));
    if (kind == "geometric") return SequenceSpec::geometric(std::stod(arg));
    if (kind == "power") return SequenceSpec::power_decay(std::stod(arg));
    if (kind == "exp-sqrt") return SequenceSpec::exp_sqrt(std::stod(arg));
    if (kind == "recip-odd") {
        if (arg.empty() || arg == "2n+1") return SequenceSpec::reciprocal_odd_rule();
        return SequenceSpec::reciprocal_odd_constant(std::stol(arg));
    }
    if (kind == "list") {
        std::vector<double> vals;
        std::stringstream ss(arg);
        std::string tok;
        while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
        return SequenceSpec::explicit_list(std::move(vals));
    }
    throw std::invalid_argument("unknown sequence spec: " + str);
}

json system_to_json(const CubeSystem& sys, bool include_cubes, std::uint64_t cube_budget) {
    json j;
    j["space"] = {{"q", sys.q()},
                  {"ahlfors_C", sys.space().ahlfors_C},
                  {"perfectness_D", sys.space().perfectness_D}};
    j["alpha"] = sequence_to_json(sys.alpha().spec());
    json c3 = json::object();
    for (const auto& [T, v] : sys.constants().C3) c3[format_double(T)] = v;
    j["constants"] = {{"d", sys.constants().d},
                      {"C1", sys.constants().C1},
                      {"C2", sys.constants().C2},
                      {"C3", c3}};
    j["depth"] = sys.depth();
    j["lazy"] = sys.lazy();

    json b;
    switch (sys.kind()) {
        case BuilderKind::Adic:
            b["kind"] = "adic";
            b["bases"] = sys.bases();
            if (!sys.base_rule().empty()) b["base_rule"] = sys.base_rule();
            break;
        case BuilderKind::SubsampledDyadic:
            b["kind"] = "subsampled-dyadic";
            b["b"] = sys.dyadic_base();
            b["generations"] = sys.generations();
            break;
        case BuilderKind::Pushforward:
            b["kind"] = "pushforward";
            b["beta"] = sys.beta();
            b["inner"] = system_to_json(CubeSystem(sys.inner_data()), false);
            break;
        case BuilderKind::Explicit:
            b["kind"] = "explicit";
            break;
    }
    j["builder"] = b;

    if (!sys.distortions().empty()) {
        json ds = json::array();
        for (const auto& e : sys.distortions()) {
            // grid paths of hole and neighbor for cross-referencing; indices
            // carry the manifest (the detached cube's adoptive path cannot be
            // replayed on a plain rebuild)
            ds.push_back({{"level", e.hole_level},
                          {"hole", sys.path_of(CubeId{e.hole_level, e.hole_index})},
                          {"neighbor", sys.path_of(CubeId{e.hole_level, e.neighbor_index})},
                          {"hole_index", e.hole_index},
                          {"neighbor_index", e.neighbor_index},
                          {"detached_index", e.detached_index},
                          {"hole_radius", e.hole_radius},
                          {"gap", e.gap}});
        }
        j["distortions"] = ds;
    }
    if (!sys.designations().empty()) {
        json gs = json::array();
        for (const auto& g : sys.designations()) {
            gs.push_back({{"path", sys.path_of(g.id)},
                          {"center", point_to_json(g.center, sys.q())},
                          {"radius", g.radius},
                          {"center_child", g.center_child}});
        }
        j["designations"] = gs;
    }

    if (include_cubes || sys.kind() == BuilderKind::Explicit) {
        json cubes = json::array();
        for (int L = 0; L <= sys.depth(); ++L) {
            if (sys.level_cube_count(L) > cube_budget) break;
            const std::uint64_t n = sys.level_cube_count(L);
            for (std::uint64_t i = 0; i < n; ++i)
                cubes.push_back(cube_entry(sys, sys.cube(CubeId{L, i})));
        }
        j["cubes"] = cubes;
    }
    return j;
}

namespace {

CubeSystem explicit_from_json(const json& j) {
    SpaceModel space;
    space.q = j.at("space").at("q").get<int>();
    space.ahlfors_C = j.at("space").at("ahlfors_C").get<double>();
    space.perfectness_D = j.at("space").at("perfectness_D").get<double>();
    Constants cst;
    cst.d = j.at("constants").at("d").get<double>();
    cst.C1 = j.at("constants").at("C1").get<double>();
    cst.C2 = j.at("constants").at("C2").get<double>();
    std::optional<AlphaSequence> alpha;
    if (j.contains("alpha")) alpha = AlphaSequence(sequence_from_json(j["alpha"]));

    // group cube entries by level (path length), then wire up parent links
    std::vector<std::vector<json>> by_level;
    for (const auto& e : j.at("cubes")) {
        const std::size_t L = e.at("path").size();
        if (by_level.size() <= L) by_level.resize(L + 1);
        by_level[L].push_back(e);
    }
    std::vector<std::vector<ExplicitCube>> levels(by_level.size());
    std::map<std::vector<std::uint32_t>, std::uint32_t> index_of;
    for (std::size_t L = 0; L < by_level.size(); ++L) {
        for (const auto& e : by_level[L]) {
            ExplicitCube c;
            const int q = space.q;
            if (e.contains("boxes"))
                for (const auto& bj : e["boxes"]) c.region.boxes.push_back(box_from_json(bj, q));
            else
                c.region.boxes.push_back(box_from_json(e.at("box"), q));
            c.center = point_from_json(e.at("center"));
            c.radius = e.at("radius").get<double>();
            c.center_child = e.value("center_child", -1);
            const auto path = e.at("path").get<std::vector<std::uint32_t>>();
            const std::uint32_t idx = static_cast<std::uint32_t>(levels[L].size());
            index_of[path] = idx;
            if (L > 0) {
                auto parent_path = path;
                parent_path.pop_back();
                const auto it = index_of.find(parent_path);
                if (it == index_of.end())
                    throw std::invalid_argument("explicit system: orphan cube in file");
                c.parent = it->second;
                auto& pc = levels[L - 1][it->second];
                if (pc.children.size() <= path.back()) pc.children.resize(path.back() + 1);
                pc.children[path.back()] = idx;
            }
            levels[L].push_back(std::move(c));
        }
    }
    return make_explicit_system(space, std::move(alpha), std::move(cst), std::move(levels));
}

}  // namespace

CubeSystem system_from_json(const json& j) {
    const std::string kind = j.at("builder").at("kind").get<std::string>();
    SpaceModel space;
    space.q = j.at("space").at("q").get<int>();
    space.ahlfors_C = j.at("space").at("ahlfors_C").get<double>();
    space.perfectness_D = j.at("space").at("perfectness_D").get<double>();
    const int depth = j.at("depth").get<int>();

    if (kind == "explicit") return explicit_from_json(j);
    if (kind == "adic") {
        auto bases = j["builder"].at("bases").get<std::vector<long>>();
        const std::string rule = j["builder"].value("base_rule", "");
        CubeSystem sys = build_adic_system(space, bases, depth, j.value("lazy", true), rule);
        if (j.contains("distortions") || j.contains("designations")) {
            auto d = std::make_shared<SystemData>(*sys.data());
            if (j.contains("distortions")) {
                for (const auto& ej : j["distortions"]) {
                    DistortionEntry e;
                    e.hole_level = ej.at("level").get<int>();
                    e.hole_index = ej.at("hole_index").get<std::uint64_t>();
                    e.neighbor_index = ej.at("neighbor_index").get<std::uint64_t>();
                    e.detached_index = ej.at("detached_index").get<std::uint64_t>();
                    e.hole_radius = ej.at("hole_radius").get<double>();
                    e.gap = ej.at("gap").get<double>();
                    d->distortions.push_back(e);
                }
            }
            if (j.contains("designations")) {
                for (const auto& gj : j["designations"]) {
                    Designation g;
                    g.id = sys.id_of_path(gj.at("path").get<std::vector<std::uint32_t>>());
                    g.center = point_from_json(gj.at("center"));
                    g.radius = gj.at("radius").get<double>();
                    g.center_child = gj.at("center_child").get<int>();
                    d->designations.push_back(g);
                }
            }
            d->constants.C1 = j.at("constants").at("C1").get<double>();
            d->constants.C2 = j.at("constants").at("C2").get<double>();
            sys = CubeSystem(std::move(d));
        }
        return sys;
    }
    if (kind == "subsampled-dyadic") {
        AlphaSequence alpha(sequence_from_json(j.at("alpha")));
        return build_subsampled_dyadic(space, j["builder"].at("b").get<long>(), alpha, depth);
    }
    if (kind == "pushforward") {
        CubeSystem inner = system_from_json(j["builder"].at("inner"));
        return pushforward_power(inner, j["builder"].at("beta").get<double>());
    }
    throw std::invalid_argument("system_from_json: unknown builder kind " + kind);
}

json measure_to_json(const MeasureTree& tree, std::uint64_t k_budget) {
    const CubeSystem& sys = tree.system();
    json j;
    j["system"] = system_to_json(sys, false);
    j["rho"] = tree.rho();
    j["n0"] = tree.n0();
    j["depth"] = tree.depth();
    j["tau"] = tree.tau();
    j["identity_flagged"] = tree.identity_flagged();
    json K = json::array();
    for (int L = 0; L <= tree.depth(); ++L) {
        if (sys.level_cube_count(L) > k_budget) break;
        const std::uint64_t n = sys.level_cube_count(L);
        for (std::uint64_t i = 0; i < n; ++i) {
            const CubeId id{L, i};
            K.push_back({{"path", sys.path_of(id)},
                         {"K", tree.cube_K(id)},
                         {"nu", tree.cube_mass(id)}});
        }
    }
    j["K"] = K;
    return j;
}

MeasureTree measure_from_json(const json& j) {
    CubeSystem sys = system_from_json(j.at("system"));
    MeasureTree tree(sys, j.at("rho").get<double>(), j.at("n0").get<int>(),
                     j.at("depth").get<int>(), j.value("tau", 1e-8));
    tree.set_identity_flag(j.value("identity_flagged", false));
    return tree;
}

json validation_to_json(const ValidationReport& rep) {
    auto check = [](const AxiomCheck& c) {
        json w = json::array();
        for (const auto& x : c.witnesses)
            w.push_back({{"level", x.id.level},
                         {"index", x.id.index},
                         {"what", x.what},
                         {"expected", x.expected},
                         {"actual", x.actual}});
        return json{{"pass", c.pass}, {"checked", c.checked}, {"witnesses", w}};
    };
    json c3 = json::object();
    for (const auto& [T, v] : rep.fitted_C3) c3[format_double(T)] = v;
    return json{{"partition", check(rep.partition)},
                {"nesting", check(rep.nesting)},
                {"ball_sandwich", check(rep.ball_sandwich)},
                {"radius_ratio", check(rep.radius_ratio)},
                {"comparable_radius", check(rep.comparable_radius)},
                {"fitted_C1", rep.fitted_C1},
                {"fitted_C2", rep.fitted_C2},
                {"fitted_d", rep.fitted_d},
                {"fitted_C3", c3},
                {"deepest_level", rep.deepest_level},
                {"certified_from", rep.certified_from},
                {"levels_skipped", rep.levels_skipped},
                {"pass", rep.pass()}};
}

json doubling_to_json(const DoublingReport& rep) {
    return json{{"max_ratio", rep.max_ratio},
                {"min_ratio", rep.min_ratio},
                {"samples", rep.samples.size()},
                {"seed", rep.spec.seed},
                {"fitted_constants", {{"C_nu", rep.max_ratio}}}};
}

json fatthin_to_json(const FatThinReport& rep) {
    json rows = json::array();
    for (const auto& r : rep.rows)
        rows.push_back({{"n", r.n},
                        {"alpha", r.alpha},
                        {"center_ratio", r.center_ratio},
                        {"implied_cec", r.implied_cec},
                        {"survivor_mass", r.survivor_mass},
                        {"product_bound", r.product_bound}});
    json j{{"rho", rep.rho},
           {"q", rep.q},
           {"d", rep.d},
           {"branch", rep.branch},
           {"n0_used", rep.n0_used},
           {"fitted_cec", rep.fitted_cec},
           {"rows", rows},
           {"product_tail", rep.product_tail},
           {"verdict", rep.verdict},
           {"prediction", rep.prediction},
           {"consistent", rep.consistent},
           {"bound_respected", rep.bound_respected}};
    if (rep.n1) j["n1"] = *rep.n1;
    return j;
}

json restricted_to_json(const RestrictedScanReport& rep) {
    json rows = json::array();
    for (const auto& s : rep.samples)
        rows.push_back({{"level", s.level},
                        {"alpha", s.alpha},
                        {"r", s.r},
                        {"mass_r", s.mass_r},
                        {"mass_fr", s.mass_fr},
                        {"ratio", s.ratio},
                        {"zero_denominator", s.zero_denominator}});
    return json{{"factor", rep.factor}, {"samples", rows},      {"lambda", rep.lambda},
                {"intercept", rep.intercept}, {"residual", rep.residual}, {"fit_from", rep.fit_from},
                {"fit_points", rep.fit_points}};
}

json plumpness_to_json(const PlumpnessReport& rep) {
    json rows = json::array();
    for (const auto& r : rep.rows) {
        json e{{"R", r.R}, {"b", r.b}, {"witness_r", r.witness_r}};
        if (r.first_n) e["first_n"] = *r.first_n;
        rows.push_back(e);
    }
    json mb = json::array();
    for (const auto& [n, b] : rep.min_b_per_level) mb.push_back({{"n", n}, {"min_b", b}});
    return json{{"rows", rows}, {"min_b_per_level", mb}};
}

json comparability_to_json(const ComparabilityReport& rep) {
    return json{{"level", rep.level}, {"T", rep.T}, {"C7", rep.C7}, {"C8", rep.C8},
                {"anchors", rep.anchors}};
}

json conservation_to_json(const ConservationReport& rep) {
    json v = json::array();
    for (const auto& x : rep.violations)
        v.push_back({{"level", x.parent.level}, {"index", x.parent.index}, {"rel_err", x.rel_err}});
    return json{{"max_rel_err", rep.max_rel_err},
                {"parents_checked", rep.parents_checked},
                {"violations", v}};
}

std::string doubling_to_csv(const DoublingReport& rep, int q) {
    std::string out = q == 1 ? "x,r,nu_r,nu_2r,ratio\n" : "x0,x1,r,nu_r,nu_2r,ratio\n";
    for (const auto& s : rep.samples) {
        out += format_double(s.x[0]);
        if (q == 2) out += "," + format_double(s.x[1]);
        out += "," + format_double(s.r) + "," + format_double(s.nu_r) + "," +
               format_double(s.nu_2r) + "," + format_double(s.ratio) + "\n";
    }
    return out;
}

std::string fatthin_to_csv(const FatThinReport& rep) {
    std::string out = "n,alpha_n,center_ratio,survivor_mass,product_bound\n";
    for (const auto& r : rep.rows)
        out += std::to_string(r.n) + "," + format_double(r.alpha) + "," +
               format_double(r.center_ratio) + "," + format_double(r.survivor_mass) + "," +
               format_double(r.product_bound) + "\n";
    return out;
}

std::string restricted_to_csv(const RestrictedScanReport& rep) {
    std::string out = "level,alpha_n,x0,x1,r,mass_r,mass_fr,ratio\n";
    for (const auto& s : rep.samples)
        out += std::to_string(s.level) + "," + format_double(s.alpha) + "," +
               format_double(s.x[0]) + "," + format_double(s.x[1]) + "," + format_double(s.r) +
               "," + format_double(s.mass_r) + "," + format_double(s.mass_fr) + "," +
               (s.zero_denominator ? std::string("nan") : format_double(s.ratio)) + "\n";
    return out;
}

std::string plumpness_to_csv(const PlumpnessReport& rep) {
    std::string out = "x0,x1,R,first_n,b,witness_y0,witness_y1,witness_r\n";
    for (const auto& r : rep.rows) {
        out += format_double(r.x[0]) + "," + format_double(r.x[1]) + "," + format_double(r.R) +
               "," + (r.first_n ? std::to_string(*r.first_n) : std::string("none")) + "," +
               format_double(r.b) + "," + format_double(r.witness_y[0]) + "," +
               format_double(r.witness_y[1]) + "," + format_double(r.witness_r) + "\n";
    }
    return out;
}

}  // namespace fml
