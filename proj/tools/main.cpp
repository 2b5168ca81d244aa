// finsler2d — evaluate, verify, and classify two-dimensional
// direction-dependent metrics and their anisotropic rescalings.
//
// Subcommands:
//   eval      print every frame/spray/curvature scalar at chosen points
//   verify    run the equation suites over a deterministic sample
//   classify  run verification plus the metric-property checks
//   example   run a bundled metric definition by name
//
// Exit codes: 0 success, 1 an equation check failed, 2 bad input
// (arguments, metric file, domain), 3 numeric failure (degree budget
// exhausted, degenerate data).

#include <array>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "finsler/classify.hpp"
#include "finsler/errors.hpp"

namespace {

using namespace finsler;
using ordered_json = nlohmann::ordered_json;

// ---- bundled example definitions (verbatim copies of configs/) ------------

const std::map<std::string, const char*>& bundled_examples() {
    static const std::map<std::string, const char*> m = {
        {"funk", R"TOML(
# Projectively flat metric on the unit disk, rescaled by the length of its
# own projective factor.  The rescaled spray coincides with the base spray.
name = "funk"

F   = "ay*zz/(1 + ax)^2"
phi = "zz"

[params]
a1 = 0.1
a2 = 0.2

[let]
ax = "a1*x1 + a2*x2"
ay = "a1*y1 + a2*y2"
z1 = "((1 + ax)*y1 - ay*x1)/ay"
z2 = "((1 + ax)*y2 - ay*x2)/ay"
zz = "sqrt(z1^2 + z2^2)"

[domain]
require = ["ay > 0", "1 + ax > 0", "1 - x1^2 - x2^2 > 0"]

[box]
x1 = [-0.25, 0.25]
x2 = [-0.25, 0.25]
y1 = [0.2, 1.2]
y2 = [0.2, 1.2]
)TOML"},
        {"berwald-rund", R"TOML(
# Indefinite-signature metric whose rescaled partner is Berwald but provably
# not the rescaling of any Riemannian metric.
name = "berwald-rund"

F   = "sqrt(2*y1*y2*x2^2 + c*y2^2)/x2"
phi = "1.5*ln(u/(x2^2*y2))"

[let]
c = "1 - 2*x1*x2 + sqrt(1 - 4*x1*x2)"
u = "2*x2^2*y1 + c*y2"

[domain]
require = ["1 - 4*x1*x2 > 0", "x2 > 0", "y2 > 0", "u > 0", "2*y1*y2*x2^2 + c*y2^2 > 0"]

[box]
x1 = [0.05, 0.25]
x2 = [0.2, 0.6]
y1 = [0.3, 1.2]
y2 = [0.3, 1.2]
)TOML"},
    };
    return m;
}

// ---- small input helpers ---------------------------------------------------

std::vector<double> parse_csv_doubles(const std::string& text, std::size_t expect,
                                      const std::string& what) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            vals.push_back(std::stod(item, &used));
            while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used])))
                ++used;
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error(what + ": cannot parse \"" + item + "\" as a number");
        }
    }
    if (vals.size() != expect)
        throw Error(what + ": expected " + std::to_string(expect) +
                    " comma-separated numbers, got " + std::to_string(vals.size()));
    return vals;
}

Point4 parse_point(const std::string& text) {
    std::vector<double> v = parse_csv_doubles(text, 4, "--point");
    return {v[0], v[1], v[2], v[3]};
}

std::array<std::array<double, 2>, 4> parse_box(const std::string& text) {
    std::vector<double> v = parse_csv_doubles(text, 8, "--box");
    std::array<std::array<double, 2>, 4> box{};
    for (int i = 0; i < 4; ++i) {
        box[i][0] = v[2 * i];
        box[i][1] = v[2 * i + 1];
        if (!(box[i][0] < box[i][1]))
            throw Error("--box: interval " + std::to_string(i + 1) + " is empty");
    }
    return box;
}

std::string slurp_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open metric file \"" + path + "\"");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw Error("cannot open output file \"" + out_path + "\"");
    out << text;
}

// ---- eval ------------------------------------------------------------------

ordered_json arr2(const std::array<double, 2>& a) { return ordered_json{a[0], a[1]}; }

ordered_json mat2(const double (&m)[2][2]) {
    return ordered_json{{m[0][0], m[0][1]}, {m[1][0], m[1][1]}};
}

ordered_json ten3(const double (&t)[2][2][2]) {
    ordered_json j = ordered_json::array();
    for (int i = 0; i < 2; ++i) j.push_back(mat2(t[i]));
    return j;
}

ordered_json ten4(const double (&t)[2][2][2][2]) {
    ordered_json j = ordered_json::array();
    for (int i = 0; i < 2; ++i) j.push_back(ten3(t[i]));
    return j;
}

ordered_json point_json(const Surface& S, const Conformal* C, const Point4& p,
                        int degree) {
    ordered_json j;
    j["point"] = ordered_json{p[0], p[1], p[2], p[3]};
    FrameSample fr = S.frame_at(p, degree);
    SpraySample sp = S.spray_at(p, degree);
    GaussSample ga = S.gauss_at(p, degree);
    ordered_json base;
    base["F"] = field_value(S.F(), p, degree);
    base["eps"] = fr.eps;
    base["g"] = ordered_json{{fr.g11, fr.g12}, {fr.g12, fr.g22}};
    base["det_g"] = fr.det_g;
    base["ell_lo"] = arr2(fr.ell_lo);
    base["ell_hi"] = arr2(fr.ell_hi);
    base["m_lo"] = arr2(fr.m_lo);
    base["m_hi"] = arr2(fr.m_hi);
    base["main_scalar"] = fr.main_scalar;
    base["G"] = arr2(sp.G);
    base["Gj"] = mat2(sp.Gj);
    base["Gjk"] = ten3(sp.Gjk);
    base["B"] = ten4(sp.B);
    base["landsberg_scalar"] = sp.J;
    base["gauss_curvature"] = ga.R;
    base["I_v1"] = sp.I_v1;
    base["I_v2"] = sp.I_v2;
    base["I_h1"] = sp.I_h1;
    base["I_h2"] = sp.I_h2;
    base["I_two"] = sp.I_two;
    j["base"] = base;
    if (C) {
        RescaleSample rs = C->data_at(p, degree);
        BarFrameSample bf = C->frame_at(p, degree);
        BarSpraySample bs = C->spray_at(p, degree);
        BarDerivSample bd = C->derivs_at(p, degree);
        ordered_json bar;
        bar["phi"] = rs.phi;
        bar["phi2"] = rs.phi2;
        bar["phi22"] = rs.phi22;
        bar["sigma"] = rs.sigma;
        bar["rho"] = rs.rho;
        bar["s"] = rs.s;
        bar["admissibility"] = rs.admissibility;
        bar["P"] = rs.P;
        bar["Q"] = rs.Q;
        bar["F"] = bf.F_bar;
        bar["ell_lo"] = arr2(bf.ell_lo);
        bar["ell_hi"] = arr2(bf.ell_hi);
        bar["m_lo"] = arr2(bf.m_lo);
        bar["m_hi"] = arr2(bf.m_hi);
        bar["main_scalar"] = bf.I_bar;
        bar["G"] = arr2(bs.G);
        bar["Gj"] = mat2(bs.Gj);
        bar["Gjk"] = ten3(bs.Gjk);
        bar["B"] = ten4(bs.B);
        bar["I_h1"] = bd.Ia;
        bar["I_h2"] = bd.Ib;
        bar["I_v2"] = bd.T_vb;
        bar["I_two"] = bd.Id;
        bar["landsberg_scalar"] = bd.J_bar;
        j["rescaled"] = bar;
    }
    return j;
}

void append_tensor_lines(std::ostringstream& os, const std::string& label,
                         const ordered_json& block) {
    for (auto it = block.begin(); it != block.end(); ++it) {
        const ordered_json& v = it.value();
        os << "    " << label << it.key();
        for (std::size_t pad = it.key().size(); pad < 16; ++pad) os << ' ';
        if (v.is_array())
            os << " " << v.dump();
        else
            os << " " << v.dump();
        os << "\n";
    }
}

std::string eval_text(const std::string& metric, const ordered_json& points) {
    std::ostringstream os;
    os << "finsler2d " << kToolVersion << " — eval of \"" << metric << "\"\n";
    for (const auto& entry : points) {
        const auto& p = entry["point"];
        os << "\npoint (" << p[0].dump() << ", " << p[1].dump() << ", " << p[2].dump()
           << ", " << p[3].dump() << ")\n";
        os << "  base\n";
        append_tensor_lines(os, "", entry["base"]);
        if (entry.contains("rescaled")) {
            os << "  rescaled\n";
            append_tensor_lines(os, "", entry["rescaled"]);
        }
    }
    return os.str();
}

struct RunOptions {
    std::string metric_path;
    std::vector<std::string> point_args;
    int count = -1;  // -1 = subcommand default
    std::uint64_t seed = 1;
    std::string box_arg;
    int degree = kDefaultBudget;
    double threshold = 0;
    std::string format = "text";
    std::string out_path;
};

SamplePlan plan_from(const RunOptions& opt, const MetricDef& def, int default_count) {
    SamplePlan plan;
    plan.box = opt.box_arg.empty() ? box_for(def) : parse_box(opt.box_arg);
    plan.count = opt.count > 0 ? opt.count : default_count;
    plan.seed = opt.seed;
    return plan;
}

int cmd_eval(const RunOptions& opt, const MetricDef& def) {
    MetricDef::Lowered low = def.lower();
    auto surf = std::make_shared<Surface>(low.F, low.domain,
                                          def.name.empty() ? "F" : def.name);
    std::unique_ptr<Conformal> conf;
    if (low.phi) conf = std::make_unique<Conformal>(surf, low.phi);

    std::vector<Point4> pts;
    if (!opt.point_args.empty()) {
        for (const auto& s : opt.point_args) {
            Point4 p = parse_point(s);
            if (!surf->in_domain(p, opt.degree))
                throw OutsideCone("point (" + s + ") violates the metric's domain");
            pts.push_back(p);
        }
    } else {
        SamplePlan plan = plan_from(opt, def, /*default_count=*/1);
        pts = sample_points(*surf, conf.get(), low, plan, nullptr, opt.degree);
    }

    ordered_json entries = ordered_json::array();
    for (const Point4& p : pts)
        entries.push_back(point_json(*surf, conf.get(), p, opt.degree));

    if (opt.format == "json") {
        ordered_json j;
        j["tool"] = "finsler2d";
        j["version"] = kToolVersion;
        j["metric"] = def.name;
        j["rescaled"] = conf != nullptr;
        j["degree"] = opt.degree;
        j["points"] = entries;
        write_output(j.dump(2) + "\n", opt.out_path);
    } else {
        write_output(eval_text(def.name, entries), opt.out_path);
    }
    return 0;
}

int cmd_report(const RunOptions& opt, const MetricDef& def, const std::string& suite) {
    SamplePlan plan = plan_from(opt, def, /*default_count=*/100);
    Tolerances tol;
    if (opt.threshold > 0) tol = Tolerances{opt.threshold, opt.threshold, opt.threshold};
    ClassificationReport rep = run_suite(def, plan, suite, tol, opt.degree);
    write_output(opt.format == "json" ? rep.to_json() : rep.to_text(), opt.out_path);
    return rep.identities_pass() ? 0 : 1;
}

int exit_code_for(const Error& e) {
    if (dynamic_cast<const DegreeExhausted*>(&e) || dynamic_cast<const DomainError*>(&e) ||
        dynamic_cast<const JetMismatch*>(&e) || dynamic_cast<const DegenerateMetric*>(&e) ||
        dynamic_cast<const SprayMismatch*>(&e) ||
        dynamic_cast<const ProbeDegenerate*>(&e) ||
        dynamic_cast<const ProbeDisagreement*>(&e) ||
        dynamic_cast<const NegativeRho*>(&e) ||
        dynamic_cast<const FormulaMismatch*>(&e) ||
        dynamic_cast<const SignatureFlip*>(&e))
        return 3;
    return 2;  // argument, file, parse, or domain problem
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"finsler2d — jet-based evaluation, verification, and classification "
                 "of two-dimensional direction-dependent metrics"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    RunOptions opt;

    auto add_common = [&](CLI::App* sub, bool with_metric) {
        if (with_metric)
            sub->add_option("--metric", opt.metric_path, "metric definition file (TOML)")
                ->required();
        sub->add_option("--count", opt.count, "number of sampled points");
        sub->add_option("--seed", opt.seed, "sampling seed (default 1)");
        sub->add_option("--box", opt.box_arg,
                        "sampling box as x1lo,x1hi,x2lo,x2hi,y1lo,y1hi,y2lo,y2hi");
        sub->add_option("--degree", opt.degree, "truncation degree budget (default 8)");
        sub->add_option("--format", opt.format, "output format: text | json")
            ->check(CLI::IsMember({"text", "json"}));
        sub->add_option("--out", opt.out_path, "write the report to this file");
    };

    CLI::App* eval = app.add_subcommand(
        "eval", "print every frame, spray, and curvature scalar at chosen points");
    add_common(eval, true);
    eval->add_option("--point", opt.point_args,
                     "evaluation point as x1,x2,y1,y2 (repeatable; default: sample)");

    std::string verify_suite = "identities";
    std::string classify_suite = "full";
    std::string example_suite = "full";

    CLI::App* verify = app.add_subcommand(
        "verify", "check the equation suites over a deterministic sample");
    add_common(verify, true);
    verify->add_option("--suite", verify_suite, "identities | oracle | full (default identities)");
    verify->add_option("--threshold", opt.threshold, "override all residual thresholds");

    CLI::App* classify = app.add_subcommand(
        "classify", "run the equation suites plus the metric-property checks");
    add_common(classify, true);
    classify->add_option("--suite", classify_suite,
                         "identities | oracle | classify | full (default full)");
    classify->add_option("--threshold", opt.threshold, "override all residual thresholds");

    CLI::App* example = app.add_subcommand("example", "run a bundled metric definition");
    std::string example_name;
    example->add_option("name", example_name, "funk | berwald-rund")->required();
    add_common(example, false);
    example->add_option("--suite", example_suite,
                        "identities | oracle | classify | full (default full)");
    example->add_option("--threshold", opt.threshold, "override all residual thresholds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        MetricDef def;
        if (example->parsed()) {
            auto it = bundled_examples().find(example_name);
            if (it == bundled_examples().end())
                throw Error("unknown example \"" + example_name +
                            "\" (available: funk, berwald-rund)");
            def = parse_metric_def(it->second);
        } else {
            def = parse_metric_def(slurp_file(opt.metric_path));
        }

        if (eval->parsed()) return cmd_eval(opt, def);
        if (verify->parsed()) return cmd_report(opt, def, verify_suite);
        if (classify->parsed()) return cmd_report(opt, def, classify_suite);
        return cmd_report(opt, def, example_suite);
    } catch (const DegreeExhausted& e) {
        std::cerr << "error: " << e.chained_message() << "\n";
        return 3;
    } catch (const SyntaxError& e) {
        std::cerr << "error: " << e.what();
        if (e.offset >= 0) std::cerr << " (at offset " << e.offset << ")";
        std::cerr << "\n";
        return 2;
    } catch (const UnknownIdentifier& e) {
        std::cerr << "error: " << e.what();
        if (e.offset >= 0) std::cerr << " (at offset " << e.offset << ")";
        std::cerr << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
