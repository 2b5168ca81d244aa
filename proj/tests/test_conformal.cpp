#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "doctest.h"
#include "finsler/conformal.hpp"
#include "finsler/errors.hpp"
#include "finsler/geometry.hpp"
#include "finsler/metricfile.hpp"
#include "oracles.hpp"

using namespace finsler;
using testutil::random_points;
using testutil::Stock;

namespace {

const Stock& stock(const std::string& name) {
    for (const auto& s : testutil::stock_pairs())
        if (s.def.name == name) return s;
    throw std::runtime_error("no stock named " + name);
}

// Indefinite-signature base with a perturbed factor: the rescaled metric has
// the opposite signature sign everywhere on the box, and all derived scalars
// are nonzero.  Exercises the regime the five bundled pairs leave untouched.
const char* kMixedPair = R"TOML(
name = "mixed"
F   = "sqrt(2*y1*y2*x2^2 + c*y2^2)/x2"
phi = "1.5*ln(u/(x2^2*y2)) + 0.05*sin(x1)*y1/(y1 + y2)"

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
)TOML";

// Same base with a stronger perturbation: the rescaled metric degenerates on a
// hypersurface inside the box (1/rho crosses zero), giving both signs of rho.
const char* kWallPair = R"TOML(
name = "wall"
F   = "sqrt(2*y1*y2*x2^2 + c*y2^2)/x2"
phi = "1.5*ln(u/(x2^2*y2)) + 0.2*sin(x1)*y1/(y1 + y2)"

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
)TOML";

// Position-dependent multiple of a quartic norm whose rescaling removes the
// position dependence entirely.
const char* kFlatPair = R"TOML(
name = "flatpair"
F   = "exp(0 - 0.2*x1)*sqrt(sqrt(y1^4 + y2^4))"
phi = "0.2*x1"

[box]
x1 = [-0.5, 0.5]
x2 = [-0.5, 0.5]
y1 = [0.3, 1.5]
y2 = [0.3, 1.5]
)TOML";

// Euclidean base with a constant factor: the rescaled metric is a flat norm
// again, so it is trivially the rescaling of a quadratic-energy metric.
const char* kConstPair = R"TOML(
name = "constpair"
F   = "sqrt(y1^2 + y2^2)"
phi = "0.3"

[box]
x1 = [-0.5, 0.5]
x2 = [-0.5, 0.5]
y1 = [0.3, 1.5]
y2 = [0.3, 1.5]
)TOML";

const char* kZeroPair = R"TOML(
name = "zeropair"
F   = "sqrt(y1^2 + (1 + x1^2)*y2^2) + 0.3*y1"
phi = "0"

[box]
x1 = [-0.5, 0.5]
x2 = [-0.5, 0.5]
y1 = [0.3, 1.5]
y2 = [0.3, 1.5]
)TOML";

double rel_gap(double a, double b) {
    return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

std::vector<Point4> kept_points(const Stock& s, const Conformal& c, unsigned seed, int want,
                                int attempts = 4000) {
    std::vector<Point4> out;
    for (const Point4& p : random_points(seed, attempts, s.box)) {
        if (static_cast<int>(out.size()) >= want) break;
        if (!s.surface->in_domain(p)) continue;
        try {
            s.surface->eps_at(p);
            c.data_at(p);
        } catch (const Error&) {
            continue;
        }
        out.push_back(p);
    }
    REQUIRE(static_cast<int>(out.size()) == want);
    return out;
}

Stock fixture(const char* toml) { return testutil::make_stock(toml); }

} // namespace

TEST_CASE("differential identities of the rescaling data vanish on every stock pair") {
    for (const auto& s : testutil::stock_pairs()) {
        CAPTURE(s.name);
        Conformal c(s.surface, s.phi);
        double worst = 0;
        for (const Point4& p : kept_points(s, c, 101, 20)) {
            RescaleSample d = c.data_at(p);
            worst = std::max(worst, std::fabs(d.admissibility - 1.0 / d.rho));
            worst = std::max(worst, std::fabs(field_value(c.pq_relation(), p)));
            worst = std::max(worst, std::fabs(field_value(c.q_identity(), p)));
            worst = std::max(worst, std::fabs(field_value(c.rho_identity(), p)));
            CHECK(d.s > 0.0);
        }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("independent routes to the rescaled scalars agree on every stock pair") {
    for (const auto& s : testutil::stock_pairs()) {
        CAPTURE(s.name);
        Conformal c(s.surface, s.phi);
        double worst = 0;
        for (const Point4& p : kept_points(s, c, 202, 20)) {
            BarFrameSample fr = c.frame_at(p);  // throws FormulaMismatch on disagreement
            worst = std::max(worst, rel_gap(fr.I_bar, fr.I_bar_alt));
            BarDerivSample dv = c.derivs_at(p);
            worst = std::max({worst, rel_gap(dv.J_bar, dv.J_rho_form),
                              rel_gap(dv.J_bar, dv.J_sigma_form), rel_gap(dv.T_vb, dv.T_closed),
                              rel_gap(dv.Ia, dv.Ia_closed), rel_gap(dv.Id, dv.Id_closed)});
        }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("every transformed object matches a from-scratch rebuild of the rescaled metric") {
    for (const auto& s : testutil::stock_pairs()) {
        CAPTURE(s.name);
        Conformal c(s.surface, s.phi);
        const Surface& fresh = *c.fresh();
        double worst = 0;
        for (const Point4& p : kept_points(s, c, 303, 12)) {
            BarFrameSample fr = c.frame_at(p);
            FrameSample ff = fresh.frame_at(p);
            worst = std::max(worst, rel_gap(field_value(fresh.F(), p), fr.F_bar));
            worst = std::max(worst, rel_gap(ff.main_scalar, fr.I_bar));
            for (int i = 0; i < 2; ++i) {
                worst = std::max({worst, rel_gap(ff.ell_lo[i], fr.ell_lo[i]),
                                  rel_gap(ff.ell_hi[i], fr.ell_hi[i]),
                                  rel_gap(ff.m_lo[i], fr.m_lo[i]),
                                  rel_gap(ff.m_hi[i], fr.m_hi[i])});
            }
            BarSpraySample sp = c.spray_at(p);
            SpraySample fs = fresh.spray_at(p);
            for (int i = 0; i < 2; ++i) {
                worst = std::max(worst, rel_gap(fs.G[i], sp.G[i]));
                for (int j = 0; j < 2; ++j) {
                    worst = std::max(worst, rel_gap(fs.Gj[i][j], sp.Gj[i][j]));
                    for (int k = 0; k < 2; ++k) {
                        worst = std::max(worst, rel_gap(fs.Gjk[i][j][k], sp.Gjk[i][j][k]));
                        for (int r = 0; r < 2; ++r)
                            worst = std::max(worst, rel_gap(fs.B[i][j][k][r], sp.B[i][j][k][r]));
                    }
                }
            }
            BarDerivSample dv = c.derivs_at(p);
            worst = std::max(worst, rel_gap(fs.J, dv.J_bar));
            worst = std::max(worst, rel_gap(fs.I_v2, dv.Ivb));
            worst = std::max(worst, rel_gap(fs.I_h1, dv.Ia));
            worst = std::max(worst, rel_gap(fs.I_h2, dv.Ib));
            CHECK(sp.D_gap < 1e-9);
        }
        CHECK(worst < 1e-7);
    }
}

TEST_CASE("scalar derivative operators agree with the rebuilt surface's operators") {
    Field y1 = fcoord(2), y2 = fcoord(3), x1 = fcoord(0);
    Field f1 = y1 / (y1 + y2);
    Field f2 = (1.0 + 0.3 * fexp(x1)) * (y2 / (y1 + y2));

    auto check_pair = [&](const Stock& s, unsigned seed) {
        CAPTURE(s.name);
        Conformal c(s.surface, s.phi);
        const Surface& fresh = *c.fresh();
        double worst = 0;
        for (const Point4& p : kept_points(s, c, seed, 8)) {
            for (const Field& f : {f1, f2}) {
                worst = std::max(worst, rel_gap(field_value(fresh.v1(f), p),
                                                field_value(c.va(f), p)));
                worst = std::max(worst, rel_gap(field_value(fresh.v2(f), p),
                                                field_value(c.vb(f), p)));
                worst = std::max(worst, rel_gap(field_value(fresh.h1(f), p),
                                                field_value(c.ha(f), p)));
                worst = std::max(worst, rel_gap(field_value(fresh.h2(f), p),
                                                field_value(c.hb(f), p)));
            }
        }
        CHECK(worst < 1e-8);
    };

    for (const auto& s : testutil::stock_pairs()) check_pair(s, 404);
    check_pair(fixture(kMixedPair), 405);
}

TEST_CASE("opposite-signature rescaling is fully computable and matches the rebuild") {
    Stock s = fixture(kMixedPair);
    Conformal c(s.surface, s.phi);
    const Surface& fresh = *c.fresh();
    double worst = 0, biggest = 0;
    for (const Point4& p : kept_points(s, c, 505, 20)) {
        double eps = s.surface->eps_at(p);
        RescaleSample d = c.data_at(p);
        CHECK(eps == -1.0);
        CHECK(d.rho > 0.0);  // transformed signature is opposite to the base one
        FrameSample ff = fresh.frame_at(p);
        CHECK(ff.eps == 1.0);

        BarFrameSample fr = c.frame_at(p);
        BarDerivSample dv = c.derivs_at(p);
        biggest = std::max({biggest, std::fabs(dv.Id), std::fabs(dv.J_bar)});
        worst = std::max({worst, rel_gap(ff.main_scalar, fr.I_bar),
                          rel_gap(field_value(fresh.I_two(), p), dv.Id),
                          rel_gap(field_value(fresh.J(), p), dv.J_bar),
                          rel_gap(ff.m_lo[0], fr.m_lo[0]), rel_gap(ff.m_hi[0], fr.m_hi[0]),
                          rel_gap(dv.Id, dv.Id_closed), rel_gap(dv.T_vb, dv.T_closed),
                          rel_gap(dv.Ia, dv.Ia_closed), rel_gap(dv.J_bar, dv.J_rho_form),
                          rel_gap(dv.J_bar, dv.J_sigma_form)});
    }
    CHECK(worst < 1e-7);
    CHECK(biggest > 1.0);  // the derived scalars are genuinely nonzero here
}

TEST_CASE("position-only factor reduces to the isotropic formulas") {
    const Stock& s = stock("sphere");
    Conformal c(s.surface, s.phi);
    const Surface& base = *s.surface;
    double worst = 0;
    for (const Point4& p : kept_points(s, c, 606, 20)) {
        RescaleSample d = c.data_at(p);
        double eps = base.eps_at(p);
        worst = std::max({worst, std::fabs(d.phi2), std::fabs(d.phi22), std::fabs(d.sigma)});
        worst = std::max(worst, std::fabs(d.rho - eps));
        double L = field_value(base.L(), p);
        double h1phi = field_value(base.h1(c.phi()), p);
        double h2phi = field_value(base.h2(c.phi()), p);
        worst = std::max(worst, std::fabs(d.P - 0.5 * L * h1phi));
        worst = std::max(worst, std::fabs(d.Q + 0.5 * L * h2phi));
        BarFrameSample fr = c.frame_at(p);
        double I = field_value(base.I(), p);
        worst = std::max(worst, std::fabs(fr.I_bar - I));
        // radial horizontal derivative collapses onto base derivatives of I
        double expect = std::exp(-d.phi) * (field_value(base.I_h1(), p) +
                                            eps * h2phi * field_value(base.I_v2(), p));
        BarDerivSample dv = c.derivs_at(p);
        worst = std::max(worst, std::fabs(dv.Ia - expect));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("zero factor is the identity transformation") {
    Stock s = fixture(kZeroPair);
    Conformal c(s.surface, s.phi);
    const Surface& base = *s.surface;
    double worst = 0;
    for (const Point4& p : kept_points(s, c, 707, 12)) {
        RescaleSample d = c.data_at(p);
        worst = std::max({worst, std::fabs(d.phi), std::fabs(d.P), std::fabs(d.Q)});
        BarFrameSample fr = c.frame_at(p);
        FrameSample bf = base.frame_at(p);
        worst = std::max(worst, rel_gap(fr.F_bar, field_value(base.F(), p)));
        worst = std::max(worst, rel_gap(fr.I_bar, bf.main_scalar));
        SpraySample bs = base.spray_at(p);
        BarSpraySample sp = c.spray_at(p);
        for (int i = 0; i < 2; ++i) {
            worst = std::max(worst, rel_gap(sp.G[i], bs.G[i]));
            worst = std::max(worst, rel_gap(fr.m_lo[i], bf.m_lo[i]));
            worst = std::max(worst, rel_gap(fr.m_hi[i], bf.m_hi[i]));
        }
        BarDerivSample dv = c.derivs_at(p);
        worst = std::max(worst, rel_gap(dv.J_bar, bs.J));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("projective disk pair: the factor is horizontally constant and the spray is kept") {
    const Stock& s = stock("funk");
    Conformal c(s.surface, s.phi);
    const Surface& base = *s.surface;
    double worst_dphi = 0, worst_shift = 0, worst_gap = 0;
    for (const Point4& p : kept_points(s, c, 808, 20)) {
        worst_dphi = std::max({worst_dphi, std::fabs(field_value(c.phi_h1(), p)),
                               std::fabs(field_value(c.phi_h2(), p))});
        RescaleSample d = c.data_at(p);
        worst_shift = std::max({worst_shift, std::fabs(d.P), std::fabs(d.Q)});
        BarSpraySample sp = c.spray_at(p);
        double g1 = field_value(base.G(1), p);
        double g2 = field_value(base.G(2), p);
        worst_gap = std::max({worst_gap, rel_gap(sp.G[0], g1), rel_gap(sp.G[1], g2)});
    }
    CHECK(worst_dphi < 1e-8);
    CHECK(worst_shift < 1e-8);
    CHECK(worst_gap < 1e-8);

    // quadratic base + preserved spray: the rescale is affinely rigid, and a
    // horizontally constant factor makes it metrizable
    MetrizabilitySample m = c.metrizability_at(kept_points(s, c, 809, 1)[0]);
    CHECK(m.status == MetrizabilitySample::Status::Ok);
    CHECK(m.m_fiber_deriv < 1e-10);
    CHECK(m.defining_relation < 1e-10);
    CHECK(m.phi_horizontal < 1e-10);
    CHECK(m.metrizable);

    FlatnessSample fl = c.flatness_at(kept_points(s, c, 810, 1)[0]);
    CHECK_FALSE(fl.flat);
}

TEST_CASE("indefinite pair: rescaled metric is affinely rigid but not metrizable") {
    const Stock& s = stock("berwald-rund");
    Conformal c(s.surface, s.phi);
    double worst_base_I = 0, worst_cond = 0, worst_quartic = 0, worst_bar = 0;
    double min_phi_horiz = 1e300;
    auto pts = kept_points(s, c, 909, 20);
    for (const Point4& p : pts) {
        CHECK(s.surface->eps_at(p) == -1.0);
        RescaleSample d = c.data_at(p);
        CHECK(d.rho > 0.0);  // signature flips under this rescaling
        worst_base_I = std::max(worst_base_I, std::fabs(field_value(s.surface->I(), p)));

        BerwaldSample b = c.berwald_at(p);
        CHECK(b.base_riemannian < 1e-8);
        worst_cond = std::max({worst_cond, b.r1, b.r2});
        worst_bar = std::max(worst_bar, b.bar_residual);

        DouglasSample dg = c.douglas_at(p);
        worst_quartic = std::max(worst_quartic, dg.quadratic_base_form);
        CHECK(dg.base < 1e-8);
        CHECK(dg.bar < 1e-8);
        CHECK(dg.berwald_base_form < 1e-8);

        MetrizabilitySample m = c.metrizability_at(p);
        CHECK(m.status == MetrizabilitySample::Status::Ok);
        CHECK(m.m_fiber_deriv < 1e-8);
        CHECK(m.defining_relation < 1e-8);
        CHECK_FALSE(m.metrizable);
        min_phi_horiz = std::min(min_phi_horiz, m.phi_horizontal);

        BarResiduals r = c.bar_class_at(p);
        CHECK(r.landsberg.normalized() < 1e-8);
        CHECK(r.berwald.normalized() < 1e-8);
        CHECK(r.riemannian.raw > 1e-2);  // rescaled metric is not quadratic
    }
    CHECK(worst_base_I < 1e-8);
    CHECK(worst_cond < 1e-6);
    CHECK(worst_quartic < 1e-6);
    CHECK(worst_bar < 1e-6);
    CHECK(min_phi_horiz > 1e-2);
}

TEST_CASE("rescaling that removes position dependence is recognized as flat") {
    Stock s = fixture(kFlatPair);
    Conformal c(s.surface, s.phi);
    for (const Point4& p : kept_points(s, c, 111, 8)) {
        FlatnessSample fl = c.flatness_at(p);
        CHECK(fl.d_chart[0] < 1e-9);
        CHECK(fl.d_chart[1] < 1e-9);
        CHECK(fl.spray_radial < 1e-9);
        CHECK(fl.spray_transverse < 1e-9);
        CHECK(fl.necessary < 1e-9);
        CHECK(fl.flat);
    }
}

TEST_CASE("constant factor keeps the flat norm affinely rigid and metrizable") {
    Stock s = fixture(kConstPair);
    Conformal c(s.surface, s.phi);
    for (const Point4& p : kept_points(s, c, 222, 8)) {
        MetrizabilitySample m = c.metrizability_at(p);
        CHECK(m.status == MetrizabilitySample::Status::Ok);
        CHECK(m.phi_horizontal < 1e-10);
        CHECK(m.metrizable);
    }
}

TEST_CASE("generic factor on a quadratic base is reported as not affine-preserving") {
    const Stock& s = stock("euclid");
    Conformal c(s.surface, s.phi);
    MetrizabilitySample m = c.metrizability_at(kept_points(s, c, 333, 1)[0]);
    CHECK(m.status == MetrizabilitySample::Status::NotBerwald);
}

TEST_CASE("degenerating rescaled metric raises the admissibility error") {
    Stock s = fixture(kWallPair);
    Conformal c(s.surface, s.phi);
    // find one point on each side of the degeneracy wall
    Point4 neg{}, pos{};
    bool have_neg = false, have_pos = false;
    for (const Point4& p : random_points(444, 4000, s.box)) {
        if (have_neg && have_pos) break;
        if (!s.surface->in_domain(p)) continue;
        double inv;
        try {
            inv = field_value(c.inv_rho(), p);
        } catch (const Error&) {
            continue;
        }
        if (inv < -0.1 && !have_neg) neg = p, have_neg = true;
        if (inv > 0.1 && !have_pos) pos = p, have_pos = true;
    }
    REQUIRE(have_neg);
    REQUIRE(have_pos);
    // bisect the segment between them down to the degeneracy hypersurface
    Point4 a = neg, b = pos;
    for (int it = 0; it < 200; ++it) {
        Point4 mid;
        for (int i = 0; i < 4; ++i) mid[i] = 0.5 * (a[i] + b[i]);
        double inv = field_value(c.inv_rho(), mid);
        (inv < 0 ? a : b) = mid;
        if (std::fabs(inv) < 1e-13) break;
    }
    Point4 wall;
    for (int i = 0; i < 4; ++i) wall[i] = 0.5 * (a[i] + b[i]);
    CHECK_THROWS_AS(c.data_at(wall), Inadmissible);
}

TEST_CASE("transformed fields keep their homogeneity weights") {
    for (const auto& s : {stock("randers"), fixture(kMixedPair)}) {
        CAPTURE(s.name);
        Conformal c(s.surface, s.phi);
        double worst = 0;
        for (const Point4& p : kept_points(s, c, 555, 6)) {
            worst = std::max(worst, homogeneity_residual(c.F_bar(), 1.0, p, kHomogeneityLambdas));
            worst = std::max(worst, homogeneity_residual(c.I_bar(), 0.0, p, kHomogeneityLambdas));
            worst = std::max(worst, homogeneity_residual(c.P(), 2.0, p, kHomogeneityLambdas));
            worst = std::max(worst, homogeneity_residual(c.Q(), 2.0, p, kHomogeneityLambdas));
            worst = std::max(worst, homogeneity_residual(c.J_bar(), 1.0, p, kHomogeneityLambdas));
            worst = std::max(worst, homogeneity_residual(c.rho(), 0.0, p, kHomogeneityLambdas));
        }
        CHECK(worst < 1e-8);
    }
}
