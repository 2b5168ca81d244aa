// Acceptance gate: a standalone binary that checks the project's exit
// criteria end to end and prints one [PASS]/[FAIL] line per criterion with
// the measured values.  Exits nonzero when any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "finsler/classify.hpp"
#include "finsler/conformal.hpp"
#include "finsler/errors.hpp"
#include "finsler/expr.hpp"
#include "finsler/geometry.hpp"
#include "finsler/metricfile.hpp"
#include "oracles.hpp"

using namespace finsler;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double now_seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

MetricDef load_def(const char* name) {
    return parse_metric_def(testutil::slurp(testutil::config_path(name)));
}

std::vector<Point4> sample(const MetricDef& def, int count,
                           const Surface& surf, const Conformal* conf) {
    SamplePlan plan;
    plan.box = box_for(def);
    plan.count = count;
    auto low = def.lower();
    return sample_points(surf, conf, low, plan);
}

const CheckResult* find_check(const ClassificationReport& rep, const std::string& id) {
    for (const auto& c : rep.checks)
        if (c.id == id) return &c;
    return nullptr;
}

// 1. Bundled projectively flat example: the rescaling factor is horizontally
//    constant and the rescaled spray equals the base spray.
Outcome criterion_1() {
    auto t0 = std::chrono::steady_clock::now();
    MetricDef def = load_def("funk");
    auto low = def.lower();
    auto surf = std::make_shared<Surface>(low.F, low.domain, def.name);
    Conformal conf(surf, low.phi);

    Field d1 = surf->delta(1, conf.phi());
    Field d2 = surf->delta(2, conf.phi());
    std::vector<Point4> pts = sample(def, 50, *surf, &conf);
    double max_dphi = 0, max_gap = 0;
    for (const Point4& p : pts) {
        EvalContext ctx(p);
        max_dphi = std::max({max_dphi, std::fabs(ctx.eval(d1, 0).value()),
                             std::fabs(ctx.eval(d2, 0).value())});
        BarSpraySample bs = conf.spray_at(p);
        SpraySample sp = surf->spray_at(p);
        double scale = std::max({1.0, std::fabs(sp.G[0]), std::fabs(sp.G[1])});
        for (int i = 0; i < 2; ++i)
            max_gap = std::max(max_gap, std::fabs(bs.G[i] - sp.G[i]) / scale);
    }
    double secs = now_seconds(t0);
    Outcome o;
    o.pass = max_dphi < 1e-8 && max_gap < 1e-8 && secs < 5.0;
    o.detail = "max|horizontal dphi|=" + fmt(max_dphi) + ", max|G_bar-G|=" + fmt(max_gap) +
               " over 50 pts in " + fmt(secs) + "s (limits 1e-8, 1e-8, 5s)";
    return o;
}

// 2. Bundled rigidity counterexample: quadratic base, affinely rigid rescale,
//    horizontally non-constant factor, quartic-shift criterion satisfied.
Outcome criterion_2() {
    MetricDef def = load_def("berwald-rund");
    auto low = def.lower();
    auto surf = std::make_shared<Surface>(low.F, low.domain, def.name);
    Conformal conf(surf, low.phi);
    std::vector<Point4> pts = sample(def, 50, *surf, &conf);

    double max_I = 0, max_r = 0, min_slope = 1e300, max_quartic = 0;
    for (const Point4& p : pts) {
        max_I = std::max(max_I, std::fabs(surf->frame_at(p).main_scalar));
        BerwaldSample b = conf.berwald_at(p);
        max_r = std::max({max_r, b.r1, b.r2});
        EvalContext ctx(p);
        double s1 = std::fabs(ctx.eval(conf.phi_h1(), 0).value());
        double s2 = std::fabs(ctx.eval(conf.phi_h2(), 0).value());
        min_slope = std::min(min_slope, std::max(s1, s2));
        max_quartic = std::max(max_quartic, conf.douglas_at(p).quadratic_base_form);
    }
    Outcome o;
    o.pass = max_I < 1e-8 && max_r < 1e-6 && min_slope > 1e-2 && max_quartic < 1e-6;
    o.detail = "max|I|=" + fmt(max_I) + " (<1e-8), max rigidity resid=" + fmt(max_r) +
               " (<1e-6), min factor slope=" + fmt(min_slope) +
               " (>1e-2), max quartic resid=" + fmt(max_quartic) + " (<1e-6)";
    return o;
}

// 3. Transformation formulas vs a from-scratch rebuild of the rescaled
//    surface, for every rescaled object over all bundled metric pairs.
Outcome criterion_3() {
    auto t0 = std::chrono::steady_clock::now();
    double worst = 0;
    std::string worst_at;
    bool all = true;
    for (const char* name : {"euclid", "sphere", "randers", "funk", "berwald-rund"}) {
        MetricDef def = load_def(name);
        SamplePlan plan;
        plan.box = box_for(def);
        plan.count = 100;
        ClassificationReport rep = run_suite(def, plan, "oracle");
        for (const auto& c : rep.checks) {
            if (c.max_normalized > worst) {
                worst = c.max_normalized;
                worst_at = std::string(name) + "/" + c.id;
            }
            all = all && c.verdict;
        }
    }
    double secs = now_seconds(t0);
    Outcome o;
    o.pass = all && worst < 1e-7 && secs < 60.0;
    o.detail = "5 pairs x 100 pts, worst rel resid=" + fmt(worst) + " at " + worst_at +
               " (<1e-7) in " + fmt(secs) + "s (<60s)";
    return o;
}

// 4 and 5 share the identity-suite reports.
std::vector<ClassificationReport> identity_reports() {
    std::vector<ClassificationReport> reps;
    for (const char* name : {"euclid", "sphere", "randers", "funk", "berwald-rund"}) {
        MetricDef def = load_def(name);
        SamplePlan plan;
        plan.box = box_for(def);
        plan.count = 100;
        reps.push_back(run_suite(def, plan, "identities"));
    }
    return reps;
}

// 4. The equation suite: spray-shift relations, raw-vs-frame derivative
//    identities, the three commutation rules, and the frame-derivative
//    closures, each under 1e-8 over 100 points per bundled metric.
Outcome criterion_4(const std::vector<ClassificationReport>& reps) {
    static const char* ids[] = {
        "conf.spray.pq-relation",     "conf.spray.q-identity",
        "deriv.raw-vs-horizontal",    "conf.factor.raw-vs-horizontal",
        "deriv.commutation-horizontal", "deriv.commutation-mixed",
        "deriv.commutation-vertical", "deriv.vertical-frame",
        "deriv.scalar-decomposition", "frame.unit-vertical",
        "frame.metric-decomposition", "frame.completeness",
    };
    double worst = 0;
    std::string worst_at;
    bool all = true;
    for (const auto& rep : reps)
        for (const char* id : ids) {
            const CheckResult* c = find_check(rep, id);
            if (!c) {
                all = false;
                worst_at = rep.metric + "/" + id + " (missing)";
                continue;
            }
            all = all && c->verdict;
            if (c->max_normalized > worst) {
                worst = c->max_normalized;
                worst_at = rep.metric + "/" + id;
            }
        }
    Outcome o;
    o.pass = all && worst < 1e-8;
    o.detail = "12 identity families x 5 metrics x 100 pts, worst resid=" + fmt(worst) +
               " at " + worst_at + " (<1e-8)";
    return o;
}

// 5. The two closed forms of the rescaled main scalar, and the two closed
//    forms of the rescaled Landsberg scalar, each agree to 1e-9.
Outcome criterion_5(const std::vector<ClassificationReport>& reps) {
    double worst = 0;
    std::string worst_at;
    bool found = true;
    for (const auto& rep : reps)
        for (const char* id : {"conf.main-scalar.dual", "conf.landsberg.dual"}) {
            const CheckResult* c = find_check(rep, id);
            if (!c) {
                found = false;
                continue;
            }
            if (c->max_normalized > worst) {
                worst = c->max_normalized;
                worst_at = rep.metric + "/" + id;
            }
        }
    Outcome o;
    o.pass = found && worst < 1e-9;
    o.detail = "dual closed forms over 5 metrics x 100 pts, worst rel gap=" + fmt(worst) +
               " at " + worst_at + " (<1e-9)";
    return o;
}

// 6. A position-only factor collapses to the classical rescaling: the
//    anisotropy scalars vanish and the spray shifts reduce to factor slopes.
Outcome criterion_6() {
    MetricDef def = load_def("sphere");
    auto low = def.lower();
    auto surf = std::make_shared<Surface>(low.F, low.domain, def.name);
    Conformal conf(surf, low.phi);
    std::vector<Point4> pts = sample(def, 50, *surf, &conf);

    Field L = surf->L();
    Field checks[6] = {
        conf.phi2(),
        conf.sigma(),
        conf.rho() - surf->eps(),
        conf.I_bar() - surf->I(),
        conf.Q() + 0.5 * (L * conf.phi_h2()),
        conf.P() - 0.5 * (L * conf.phi_h1()),
    };
    double worst = 0;
    for (const Point4& p : pts) {
        EvalContext ctx(p);
        for (const Field& f : checks)
            worst = std::max(worst, std::fabs(ctx.eval(f, 0).value()));
    }
    Outcome o;
    o.pass = worst < 1e-9;
    o.detail = "6 reduction residuals over 50 pts, worst=" + fmt(worst) + " (<1e-9)";
    return o;
}

// 7. Jet engine against finite differences, plus exactness on polynomials.
Outcome criterion_7() {
    using testutil::fd1;
    using testutil::fd2;
    using testutil::real_of;

    std::mt19937 seed_gen(7);
    double worst_fd = 0;
    for (int k = 0; k < 20; ++k) {
        testutil::RandomFieldGen gen(100 + k);
        Field f = gen.field(3);
        testutil::RealFn fn = real_of(f);
        std::vector<Point4> pts = testutil::random_points(200 + k, 3, testutil::kUnitBox);
        for (const Point4& p : pts) {
            for (int v = 0; v < 4; ++v) {
                double jet = field_value(fpartial(v, f), p);
                double fd = fd1(fn, p, v, 1e-5);
                worst_fd = std::max(worst_fd, testutil::rel_err(jet, fd));
            }
            for (int va = 0; va < 4; ++va)
                for (int vb = va; vb < 4; ++vb) {
                    double jet = field_value(fpartial(vb, fpartial(va, f)), p);
                    double fd = fd2(fn, p, va, vb);
                    worst_fd = std::max(worst_fd, testutil::rel_err(jet, fd));
                }
        }
    }

    // Polynomial with hand-computed derivatives; jets must be exact.
    Field x1 = fcoord(0), x2 = fcoord(1), y1 = fcoord(2), y2 = fcoord(3);
    Field poly = (x1 * x1) * y1 - 3.0 * (x2 * (y2 * (y2 * y2))) +
                 2.0 * (x1 * (x2 * (y1 * y2)));
    double worst_poly = 0;
    std::vector<Point4> pts = testutil::random_points(777, 20, testutil::kUnitBox);
    for (const Point4& p : pts) {
        double X1 = p[0], X2 = p[1], Y1 = p[2], Y2 = p[3];
        struct Want {
            Field f;
            double v;
        } cases[] = {
            {poly, X1 * X1 * Y1 - 3 * X2 * Y2 * Y2 * Y2 + 2 * X1 * X2 * Y1 * Y2},
            {fpartial(0, poly), 2 * X1 * Y1 + 2 * X2 * Y1 * Y2},
            {fpartial(1, poly), -3 * Y2 * Y2 * Y2 + 2 * X1 * Y1 * Y2},
            {fpartial(2, poly), X1 * X1 + 2 * X1 * X2 * Y2},
            {fpartial(3, poly), -9 * X2 * Y2 * Y2 + 2 * X1 * X2 * Y1},
            {fpartial(0, fpartial(0, poly)), 2 * Y1},
            {fpartial(2, fpartial(0, poly)), 2 * X1 + 2 * X2 * Y2},
            {fpartial(3, fpartial(1, poly)), -9 * Y2 * Y2 + 2 * X1 * Y1},
            {fpartial(3, fpartial(3, poly)), -18 * X2 * Y2},
            {fpartial(3, fpartial(3, fpartial(3, poly))), -18 * X2},
            {fpartial(2, fpartial(3, fpartial(1, fpartial(0, poly)))), 2.0},
        };
        for (const Want& w : cases)
            worst_poly = std::max(worst_poly, std::fabs(field_value(w.f, p) - w.v));
    }
    Outcome o;
    o.pass = worst_fd < 1e-6 && worst_poly < 1e-13;
    o.detail = "20 random fields x 3 pts: worst FD rel err=" + fmt(worst_fd) +
               " (<1e-6); polynomial worst abs err=" + fmt(worst_poly) + " (<1e-13)";
    return o;
}

// 8. Expression round-trip fuzz and end-to-end parse+evaluate of the bundled
//    definition files.
Outcome criterion_8() {
    std::mt19937 rng(20260816);
    int failures = 0;
    auto pick = [&rng](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
    auto uni = [&rng](double a, double b) {
        return std::uniform_real_distribution<double>(a, b)(rng);
    };
    std::function<ExprPtr(int)> random_ast = [&](int depth) -> ExprPtr {
        auto node = std::make_shared<Expr>();
        if (depth <= 0 || pick(4) == 0) {
            if (pick(2)) {
                node->kind = ExprKind::Number;
                node->number = pick(2) ? static_cast<double>(pick(100)) : uni(0.0, 1e6);
            } else {
                node->kind = ExprKind::Ident;
                const char* names[] = {"x1", "x2", "y1", "y2", "a", "bb", "c_3", "_t"};
                node->name = names[pick(8)];
            }
            return node;
        }
        switch (pick(6)) {
            case 0:
                node->kind = ExprKind::Unary;
                node->op = '-';
                node->args = {random_ast(depth - 1)};
                return node;
            case 1: {
                node->kind = ExprKind::Call;
                const char* fns[] = {"sqrt", "exp", "ln", "sin", "cos", "abs"};
                node->name = fns[pick(6)];
                node->args = {random_ast(depth - 1)};
                return node;
            }
            default: {
                node->kind = ExprKind::Binary;
                const char ops[] = {'+', '-', '*', '/', '^'};
                node->op = ops[pick(5)];
                node->args = {random_ast(depth - 1), random_ast(depth - 1)};
                return node;
            }
        }
    };
    for (int i = 0; i < 1000; ++i) {
        ExprPtr ast = random_ast(5);
        std::string text = print_expr(*ast);
        try {
            ExprPtr back = parse_expr(text);
            if (!expr_equal(*ast, *back) || print_expr(*back) != text) ++failures;
        } catch (const Error&) {
            ++failures;
        }
    }

    // Bundled definitions parse, lower, and evaluate at an admissible point.
    int evaluated = 0;
    for (const char* name : {"funk", "berwald-rund"}) {
        MetricDef def = load_def(name);
        auto low = def.lower();
        auto surf = std::make_shared<Surface>(low.F, low.domain, def.name);
        Conformal conf(surf, low.phi);
        std::vector<Point4> pts = sample(def, 1, *surf, &conf);
        double fbar = conf.frame_at(pts[0]).F_bar;
        if (std::isfinite(fbar) && fbar > 0) ++evaluated;
    }
    Outcome o;
    o.pass = failures == 0 && evaluated == 2;
    o.detail = "1000-case print/parse fuzz: " + std::to_string(failures) +
               " failures; bundled definitions evaluated: " + std::to_string(evaluated) +
               "/2";
    return o;
}

// 9. Curvature: probe independence everywhere, and the classical law for a
//    quadratic metric under a position-only rescale, checked against an
//    independently assembled chart-derivative formula.
Outcome criterion_9() {
    double worst_probe = 0;
    std::string worst_at;
    for (const char* name : {"euclid", "sphere", "randers", "funk", "berwald-rund"}) {
        MetricDef def = load_def(name);
        auto low = def.lower();
        auto surf = std::make_shared<Surface>(low.F, low.domain, def.name);
        Conformal conf(surf, low.phi);
        std::vector<Point4> pts = sample(def, 40, *surf, &conf);
        for (const Point4& p : pts) {
            GaussSample g = surf->gauss_at(p);
            if (std::isfinite(g.R_probe[0]) && std::isfinite(g.R_probe[1])) {
                double rel = std::fabs(g.R_probe[0] - g.R_probe[1]) /
                             std::max({1.0, std::fabs(g.R_probe[0]),
                                       std::fabs(g.R_probe[1])});
                if (rel > worst_probe) {
                    worst_probe = rel;
                    worst_at = name;
                }
            }
        }
    }

    // Position-only rescale of a quadratic metric: curvature transforms by
    // the second-order chart law  K_bar = e^{-2 phi} (K - Lap_g phi),
    // with the metric Laplacian assembled directly from chart derivatives.
    MetricDef def = load_def("sphere");
    auto low = def.lower();
    auto surf = std::make_shared<Surface>(low.F, low.domain, def.name);
    Conformal conf(surf, low.phi);
    Field phi = conf.phi();
    Field det = surf->det_g();
    Field sqrt_det = fsqrt(det);
    Field ginv[2][2] = {{surf->g(2, 2) / det, -1.0 * (surf->g(1, 2) / det)},
                        {-1.0 * (surf->g(1, 2) / det), surf->g(1, 1) / det}};
    Field lap = fconst(0.0);
    for (int i = 0; i < 2; ++i) {
        Field flux = fconst(0.0);
        for (int j = 0; j < 2; ++j) flux = flux + ginv[i][j] * fpartial(j, phi);
        lap = lap + fpartial(i, sqrt_det * flux);
    }
    lap = lap / sqrt_det;

    const Surface& rebuilt = *conf.fresh();
    std::vector<Point4> pts = sample(def, 20, *surf, &conf);
    double worst_law = 0;
    for (const Point4& p : pts) {
        double K = surf->gauss_at(p).R;
        double K_bar = rebuilt.gauss_at(p).R;
        EvalContext ctx(p);
        double lap_v = ctx.eval(lap, 0).value();
        double phi_v = ctx.eval(phi, 0).value();
        double law = std::exp(-2.0 * phi_v) * (K - lap_v);
        worst_law = std::max(worst_law, std::fabs(K_bar - law) /
                                            std::max({1.0, std::fabs(K_bar),
                                                      std::fabs(law)}));
    }
    Outcome o;
    o.pass = worst_probe < 1e-8 && worst_law < 1e-6;
    o.detail = "probe agreement worst=" + fmt(worst_probe) + " (" + worst_at +
               ", <1e-8); chart-law agreement worst=" + fmt(worst_law) +
               " over 20 pts (<1e-6)";
    return o;
}

} // namespace

int main() {
    std::vector<std::pair<std::string, Outcome>> results;
    auto run = [&](const char* label, auto&& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        results.emplace_back(label, std::move(o));
    };

    run("1 spray-preserving example reproduction", [] { return criterion_1(); });
    run("2 rigid non-metrizable example reproduction", [] { return criterion_2(); });
    run("3 transformation-vs-rebuild oracle", [] { return criterion_3(); });

    std::vector<ClassificationReport> reps;
    try {
        reps = identity_reports();
    } catch (const std::exception& e) {
        Outcome o;
        o.detail = std::string("exception: ") + e.what();
        results.emplace_back("4 equation suite", o);
        results.emplace_back("5 dual closed forms", o);
        reps.clear();
    }
    if (!reps.empty()) {
        run("4 equation suite", [&] { return criterion_4(reps); });
        run("5 dual closed forms", [&] { return criterion_5(reps); });
    }

    run("6 position-only factor reduction", [] { return criterion_6(); });
    run("7 jet engine vs finite differences", [] { return criterion_7(); });
    run("8 expression round-trip and bundled files", [] { return criterion_8(); });
    run("9 curvature probes and chart law", [] { return criterion_9(); });

    int failed = 0;
    for (const auto& [label, o] : results) {
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << label << ": " << o.detail
                  << "\n";
        if (!o.pass) ++failed;
    }
    std::cout << (failed == 0 ? "acceptance: all criteria hold\n"
                              : "acceptance: " + std::to_string(failed) +
                                    " criterion(s) failed\n");
    return failed == 0 ? 0 : 1;
}
