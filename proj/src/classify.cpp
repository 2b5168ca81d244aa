#include "finsler/classify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "finsler/errors.hpp"

namespace finsler {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kIdentityThreshold = 1e-8;
constexpr double kOracleThreshold = 1e-7;
constexpr double kClassifyThreshold = 1e-6;

enum Kind { kIdentity = 0, kOracle = 1, kClassify = 2 };

// Fixed 0-homogeneous probe scalar with both position and direction
// dependence; the derivative identities hold for any such function, so one
// nontrivial representative exercises them.
Field make_probe() {
    Field x1 = fcoord(0), x2 = fcoord(1), y1 = fcoord(2), y2 = fcoord(3);
    Field yy = y1 * y1 + y2 * y2;
    return (0.4 * x1 + 0.3) * ((y1 * y2) / yy) + 0.2 * x2 +
           0.1 * (((y1 * y1) - (y2 * y2)) / yy);
}

// One residual expression plus the terms whose largest magnitude sets its
// normalization scale.
struct ResidualField {
    Field value;
    std::vector<Field> terms;
};

// Everything a check may need at one sampled point.  Samples are computed on
// first use and cached; `ctx` is shared by all plain field evaluations so the
// common subexpressions are evaluated once per point.
struct PointData {
    PointData(const Point4& point, int deg, const Surface* s, const Conformal* c,
              const Surface* fresh)
        : p(point), degree(deg), S(s), C(c), FS(fresh), ctx(point, deg) {}

    Point4 p;
    int degree;
    const Surface* S;
    const Conformal* C;
    const Surface* FS;
    EvalContext ctx;

    double eps = 0;
    double eps_bar = 0;

    double val(const Field& f) { return ctx.eval(f, 0).value(); }

    const BaseResiduals& base_class() {
        if (!base_cls_) base_cls_ = S->base_class_at(p, degree);
        return *base_cls_;
    }
    const GaussSample& gauss() {
        if (!gauss_) gauss_ = S->gauss_at(p, degree);
        return *gauss_;
    }
    const RescaleSample& rescale() {
        if (!rescale_) rescale_ = C->data_at(p, degree);
        return *rescale_;
    }
    const BarFrameSample& bar_frame() {
        if (!bar_frame_) bar_frame_ = C->frame_at(p, degree);
        return *bar_frame_;
    }
    const BarSpraySample& bar_spray() {
        if (!bar_spray_) bar_spray_ = C->spray_at(p, degree);
        return *bar_spray_;
    }
    const BarDerivSample& derivs() {
        if (!derivs_) derivs_ = C->derivs_at(p, degree);
        return *derivs_;
    }
    const BerwaldSample& berwald() {
        if (!berwald_) berwald_ = C->berwald_at(p, degree);
        return *berwald_;
    }
    const DouglasSample& douglas() {
        if (!douglas_) douglas_ = C->douglas_at(p, degree);
        return *douglas_;
    }
    const FlatnessSample& flatness(double threshold) {
        if (!flatness_) flatness_ = C->flatness_at(p, threshold, degree);
        return *flatness_;
    }
    const MetrizabilitySample& metrizability(double threshold) {
        if (!metriz_) metriz_ = C->metrizability_at(p, threshold, degree);
        return *metriz_;
    }
    const FrameSample& fresh_frame() {
        if (!fresh_frame_) fresh_frame_ = FS->frame_at(p, degree);
        return *fresh_frame_;
    }
    const SpraySample& fresh_spray() {
        if (!fresh_spray_) fresh_spray_ = FS->spray_at(p, degree);
        return *fresh_spray_;
    }

private:
    std::optional<BaseResiduals> base_cls_;
    std::optional<GaussSample> gauss_;
    std::optional<RescaleSample> rescale_;
    std::optional<BarFrameSample> bar_frame_;
    std::optional<BarSpraySample> bar_spray_;
    std::optional<BarDerivSample> derivs_;
    std::optional<BerwaldSample> berwald_;
    std::optional<DouglasSample> douglas_;
    std::optional<FlatnessSample> flatness_;
    std::optional<MetrizabilitySample> metriz_;
    std::optional<FrameSample> fresh_frame_;
    std::optional<SpraySample> fresh_spray_;
};

struct Row {
    bool applicable = true;
    bool errored = false;
    std::string error;
    double raw = 0;
    double normalized = 0;
    bool outcome = true;        // classification checks only
    std::string note;
};

struct Check {
    std::string id;
    std::string summary;
    int kind = kIdentity;
    bool classification = false;
    std::function<Row(PointData&)> eval;
};

double norm_of(double raw, double scale) {
    return std::fabs(raw) / std::max(1.0, scale);
}

Row eval_residual_fields(PointData& pd, const std::vector<ResidualField>& group) {
    Row row;
    for (const auto& rf : group) {
        double v = pd.val(rf.value);
        double scale = 1.0;
        for (const auto& t : rf.terms) scale = std::max(scale, std::fabs(pd.val(t)));
        double n = norm_of(v, scale);
        if (n >= row.normalized) {
            row.normalized = n;
            row.raw = std::fabs(v);
        }
    }
    return row;
}

Row row_from(double raw, double scale) {
    Row r;
    r.raw = std::fabs(raw);
    r.normalized = norm_of(raw, scale);
    return r;
}

Row row_from(const Resid& r) { return row_from(r.raw, r.scale); }

using Group = std::shared_ptr<std::vector<ResidualField>>;

Check field_check(std::string id, std::string summary, int kind, Group group) {
    Check c;
    c.id = std::move(id);
    c.summary = std::move(summary);
    c.kind = kind;
    c.eval = [group](PointData& pd) { return eval_residual_fields(pd, *group); };
    return c;
}

// ---------- base identity checks ----------

void add_base_checks(std::vector<Check>& out, const Surface& S, const Field& probe) {
    Field one = fconst(1.0);
    Field F = S.F(), L = S.L(), eps = S.eps(), I = S.I();

    {
        auto g = std::make_shared<std::vector<ResidualField>>();
        Field ll = S.ell_lo(1) * S.ell_hi(1) + S.ell_lo(2) * S.ell_hi(2);
        Field mm = S.m_lo(1) * S.m_hi(1) + S.m_lo(2) * S.m_hi(2);
        Field lm = S.ell_lo(1) * S.m_hi(1) + S.ell_lo(2) * S.m_hi(2);
        Field ml = S.m_lo(1) * S.ell_hi(1) + S.m_lo(2) * S.ell_hi(2);
        g->push_back({ll - one, {}});
        g->push_back({mm - eps, {}});
        g->push_back({lm, {}});
        g->push_back({ml, {}});
        out.push_back(field_check("frame.unit-vertical",
                                  "frame contractions: unit radial covector, signed unit "
                                  "transverse covector, mutual orthogonality",
                                  kIdentity, g));
    }
    {
        auto g = std::make_shared<std::vector<ResidualField>>();
        for (int i = 1; i <= 2; ++i)
            for (int j = i; j <= 2; ++j) {
                Field rebuilt = S.ell_lo(i) * S.ell_lo(j) + eps * (S.m_lo(i) * S.m_lo(j));
                g->push_back({S.g(i, j) - rebuilt, {S.g(i, j), rebuilt}});
            }
        out.push_back(field_check("frame.metric-decomposition",
                                  "metric tensor reassembled from the moving frame",
                                  kIdentity, g));
    }
    {
        auto g = std::make_shared<std::vector<ResidualField>>();
        for (int i = 1; i <= 2; ++i)
            for (int j = 1; j <= 2; ++j) {
                Field rebuilt = S.ell_hi(j) * S.ell_lo(i) + eps * (S.m_hi(j) * S.m_lo(i));
                Field delta = fconst(i == j ? 1.0 : 0.0);
                g->push_back({rebuilt - delta, {}});
            }
        out.push_back(field_check("frame.completeness",
                                  "identity tensor reassembled from the moving frame",
                                  kIdentity, g));
    }
    {
        // Fiber derivatives of the frame close in the frame itself.
        auto g = std::make_shared<std::vector<ResidualField>>();
        for (int i = 1; i <= 2; ++i)
            for (int j = 1; j <= 2; ++j) {
                int var = 1 + j;  // y^j
                Field mj = S.m_lo(j);
                Field a = F * fpartial(var, S.ell_lo(i)) - eps * (S.m_lo(i) * mj);
                Field b = F * fpartial(var, S.ell_hi(i)) - eps * (S.m_hi(i) * mj);
                Field c =
                    F * fpartial(var, S.m_lo(i)) + (S.ell_lo(i) - eps * (I * S.m_lo(i))) * mj;
                Field d =
                    F * fpartial(var, S.m_hi(i)) + (S.ell_hi(i) + eps * (I * S.m_hi(i))) * mj;
                g->push_back({a, {S.m_lo(i) * mj}});
                g->push_back({b, {S.m_hi(i) * mj}});
                g->push_back({c, {S.ell_lo(i) * mj, I * S.m_lo(i) * mj}});
                g->push_back({d, {S.ell_hi(i) * mj, I * S.m_hi(i) * mj}});
            }
        out.push_back(field_check("deriv.vertical-frame",
                                  "fiber derivatives of the moving frame close in the frame",
                                  kIdentity, g));
    }
    {
        auto g = std::make_shared<std::vector<ResidualField>>();
        Field v1p = S.v1(probe), v2p = S.v2(probe);
        Field h1p = S.h1(probe), h2p = S.h2(probe);
        for (int i = 1; i <= 2; ++i) {
            Field vert = F * fpartial(1 + i, probe) - (v1p * S.ell_lo(i) + v2p * S.m_lo(i));
            Field hor = S.delta(i, probe) - (h1p * S.ell_lo(i) + h2p * S.m_lo(i));
            g->push_back({vert, {v2p * S.m_lo(i), v1p * S.ell_lo(i)}});
            g->push_back({hor, {h1p * S.ell_lo(i), h2p * S.m_lo(i)}});
        }
        out.push_back(field_check("deriv.scalar-decomposition",
                                  "derivatives of a probe scalar decompose along the frame",
                                  kIdentity, g));
    }
    {
        // Raw chart derivatives against spray-corrected frame components, for
        // a probe scalar (tangential and transverse) and for the energy.
        auto g = std::make_shared<std::vector<ResidualField>>();
        Field Gm = S.G(1) * S.m_lo(1) + S.G(2) * S.m_lo(2);
        Field Gl = S.G(1) * S.ell_lo(1) + S.G(2) * S.ell_lo(2);
        Field raw_l = S.ell_hi(1) * fpartial(0, probe) + S.ell_hi(2) * fpartial(1, probe);
        Field raw_m = S.m_hi(1) * fpartial(0, probe) + S.m_hi(2) * fpartial(1, probe);
        Field conn_mm = fconst(0.0), conn_lm = fconst(0.0);
        for (int i = 1; i <= 2; ++i)
            for (int k = 1; k <= 2; ++k) {
                conn_mm = conn_mm + S.Gj(i, k) * (S.m_hi(k) * S.m_lo(i));
                conn_lm = conn_lm + S.Gj(i, k) * (S.m_hi(k) * S.ell_lo(i));
            }
        Field t1 = L * S.h1(probe), t2 = 2.0 * (Gm * S.v2(probe));
        g->push_back({L * raw_l - t1 - t2, {L * raw_l, t1, t2}});
        Field u1 = eps * (F * S.h2(probe)), u2 = conn_mm * S.v2(probe);
        g->push_back({F * raw_m - u1 - u2, {F * raw_m, u1, u2}});
        Field raw_L_l = S.ell_hi(1) * fpartial(0, L) + S.ell_hi(2) * fpartial(1, L);
        Field raw_L_m = S.m_hi(1) * fpartial(0, L) + S.m_hi(2) * fpartial(1, L);
        g->push_back({raw_L_l - 4.0 * Gl, {raw_L_l, 4.0 * Gl}});
        g->push_back({raw_L_m - 2.0 * (F * conn_lm), {raw_L_m, 2.0 * (F * conn_lm)}});
        out.push_back(field_check("deriv.raw-vs-horizontal",
                                  "raw chart derivatives agree with spray-corrected components",
                                  kIdentity, g));
    }
    {
        auto g = std::make_shared<std::vector<ResidualField>>();
        Field y1 = fcoord(2), y2 = fcoord(3);
        for (const Field& f : {I, probe}) {
            Field spray_route = y1 * fpartial(0, f) + y2 * fpartial(1, f) -
                                2.0 * (S.G(1) * fpartial(2, f) + S.G(2) * fpartial(3, f));
            Field frame_route = F * S.h1(f);
            g->push_back({spray_route - frame_route, {spray_route, frame_route}});
        }
        out.push_back(field_check("deriv.spray-vs-radial-horizontal",
                                  "spray derivative equals the F-weighted radial horizontal "
                                  "derivative",
                                  kIdentity, g));
    }
    {
        // The three commutation rules for a 0-homogeneous scalar.  The first
        // needs the Gauss curvature value, so it is evaluated numerically.
        struct Pieces {
            Field h2h1, h1h2, v2, v2h1, h1v2, h2, v2h2, h2v2, h1, I, I_h1, eps;
        };
        auto pc = std::make_shared<Pieces>(Pieces{
            S.h2(S.h1(probe)), S.h1(S.h2(probe)), S.v2(probe), S.v2(S.h1(probe)),
            S.h1(S.v2(probe)), S.h2(probe), S.v2(S.h2(probe)), S.h2(S.v2(probe)),
            S.h1(probe), S.I(), S.I_h1(), S.eps()});
        Check hor;
        hor.id = "deriv.commutation-horizontal";
        hor.summary = "horizontal derivatives commute up to the Gauss curvature";
        hor.eval = [pc](PointData& pd) {
            double R = pd.gauss().R;
            double a = pd.val(pc->h2h1), b = pd.val(pc->h1h2), c = R * pd.val(pc->v2);
            return row_from(a - b + c, std::max({std::fabs(a), std::fabs(b), std::fabs(c)}));
        };
        out.push_back(hor);
        Check mixed;
        mixed.id = "deriv.commutation-mixed";
        mixed.summary = "transverse fiber derivative of a radial horizontal derivative";
        mixed.eval = [pc](PointData& pd) {
            double a = pd.val(pc->v2h1), b = pd.val(pc->h1v2), c = pd.val(pc->h2);
            return row_from(a - b - c, std::max({std::fabs(a), std::fabs(b), std::fabs(c)}));
        };
        out.push_back(mixed);
        Check vert;
        vert.id = "deriv.commutation-vertical";
        vert.summary = "transverse fiber derivative of a transverse horizontal derivative";
        vert.eval = [pc](PointData& pd) {
            double e = pd.val(pc->eps);
            double a = pd.val(pc->v2h2), b = pd.val(pc->h2v2);
            double c = pd.val(pc->h1) + pd.val(pc->I) * pd.val(pc->h2) +
                       pd.val(pc->I_h1) * pd.val(pc->v2);
            return row_from(a - b + e * c,
                            std::max({std::fabs(a), std::fabs(b), std::fabs(c)}));
        };
        out.push_back(vert);
    }
    {
        auto g = std::make_shared<std::vector<ResidualField>>();
        for (int i = 1; i <= 2; ++i)
            for (int j = 1; j <= 2; ++j)
                for (int k = 1; k <= 2; ++k)
                    for (int r = 1; r <= 2; ++r) {
                        Field structural = (-2.0 * (S.I_h1() * S.ell_hi(i)) +
                                            S.I_two() * S.m_hi(i)) *
                                           (S.m_lo(j) * (S.m_lo(k) * S.m_lo(r)));
                        Field mech = F * S.B(i, j, k, r);
                        g->push_back({mech - structural, {mech, structural}});
                    }
        out.push_back(field_check("curvature.berwald-structure",
                                  "Berwald curvature is rank-one along the transverse "
                                  "covector with the two classifying scalars",
                                  kIdentity, g));
    }
    {
        Check c;
        c.id = "curvature.gauss-probe";
        c.summary = "Gauss curvature independent of the reconstruction probe";
        c.eval = [](PointData& pd) {
            const GaussSample& gs = pd.gauss();
            double a = gs.R_probe[0], b = gs.R_probe[1];
            if (!std::isfinite(a) || !std::isfinite(b)) {
                Row r;
                r.applicable = false;
                return r;
            }
            return row_from(a - b, std::max(std::fabs(a), std::fabs(b)));
        };
        out.push_back(c);
    }
}

// ---------- conformal identity checks ----------

void add_conformal_checks(std::vector<Check>& out, const Surface& S, const Conformal& C,
                          const Field& probe) {
    Field F = S.F(), L = S.L(), eps = S.eps(), I = S.I();
    Field phi = C.phi(), phi2 = C.phi2(), phi22 = C.phi22();

    {
        auto g = std::make_shared<std::vector<ResidualField>>();
        g->push_back({C.rho_identity(),
                      {C.rho() - eps, eps * (C.rho() * (C.sigma() - phi2 * phi2))}});
        out.push_back(field_check("conf.scalars.rho-identity",
                                  "algebraic relation among the rescaling scalars",
                                  kIdentity, g));
    }
    {
        auto g = std::make_shared<std::vector<ResidualField>>();
        g->push_back({C.pq_relation(),
                      {2.0 * (eps * (phi2 * C.Q())), 2.0 * C.P(), L * C.phi_h1()}});
        out.push_back(field_check("conf.spray.pq-relation",
                                  "radial spray shift determined by the transverse shift and "
                                  "the factor's radial slope",
                                  kIdentity, g));
    }
    {
        auto g = std::make_shared<std::vector<ResidualField>>();
        g->push_back({C.q_identity(),
                      {phi2 * C.P(), C.P2(), eps * (phi2 * C.Q2()),
                       (I * phi2 + 1.0) * C.Q(), L * C.phi_h2()}});
        out.push_back(field_check("conf.spray.q-identity",
                                  "differential identity tying both spray shifts to the "
                                  "factor's transverse slope",
                                  kIdentity, g));
    }
    {
        // Raw chart derivatives of the factor vs its spray-corrected
        // components (the factor is 0-homogeneous, so its radial fiber
        // derivative drops out).
        auto g = std::make_shared<std::vector<ResidualField>>();
        Field Gm = S.G(1) * S.m_lo(1) + S.G(2) * S.m_lo(2);
        Field raw_l = S.ell_hi(1) * fpartial(0, phi) + S.ell_hi(2) * fpartial(1, phi);
        Field raw_m = S.m_hi(1) * fpartial(0, phi) + S.m_hi(2) * fpartial(1, phi);
        Field conn_mm = fconst(0.0);
        for (int i = 1; i <= 2; ++i)
            for (int k = 1; k <= 2; ++k)
                conn_mm = conn_mm + S.Gj(i, k) * (S.m_hi(k) * S.m_lo(i));
        Field t1 = L * C.phi_h1(), t2 = 2.0 * (Gm * phi2);
        g->push_back({L * raw_l - t1 - t2, {L * raw_l, t1, t2}});
        Field u1 = eps * (F * C.phi_h2()), u2 = conn_mm * phi2;
        g->push_back({F * raw_m - u1 - u2, {F * raw_m, u1, u2}});
        out.push_back(field_check("conf.factor.raw-vs-horizontal",
                                  "raw chart derivatives of the factor agree with "
                                  "spray-corrected components",
                                  kIdentity, g));
    }
    {
        auto g = std::make_shared<std::vector<ResidualField>>();
        g->push_back({C.I_bar() - C.I_bar_alt(), {C.I_bar(), C.I_bar_alt()}});
        out.push_back(field_check("conf.main-scalar.dual",
                                  "two closed forms of the rescaled main scalar agree",
                                  kIdentity, g));
    }
    {
        // Closed form of the transverse fiber derivative of the rescaled
        // main scalar, written in base quantities.
        auto g = std::make_shared<std::vector<ResidualField>>();
        Field rho = C.rho(), s = C.s();
        Field rho2 = S.v2(rho), rho22 = S.v2(S.v2(rho));
        Field bracket = rho2 * (I + 2.0 * (eps * phi2) + 0.5 * (eps * (rho2 / rho))) +
                        2.0 * (rho * (S.I_v2() + 2.0 * (eps * phi22))) - eps * rho22;
        Field closed = (eps * (0.5 / s)) * bracket;
        Field direct = S.v2(C.I_bar());
        g->push_back({direct - closed, {direct, closed}});
        out.push_back(field_check("conf.main-scalar.vertical-deriv",
                                  "closed form of the transverse fiber derivative of the "
                                  "rescaled main scalar",
                                  kIdentity, g));
    }
    {
        auto g = std::make_shared<std::vector<ResidualField>>();
        g->push_back({C.J_rho_form() - C.J_sigma_form(), {C.J_rho_form(), C.J_sigma_form()}});
        g->push_back({C.J_bar() - C.J_rho_form(), {C.J_bar(), C.J_rho_form()}});
        out.push_back(field_check("conf.landsberg.dual",
                                  "closed forms of the rescaled Landsberg scalar agree with "
                                  "each other and the operator route",
                                  kIdentity, g));
    }
    {
        // The rescaled Landsberg scalar recomputed from raw chart derivatives
        // of the rescaled main scalar along the shifted spray.
        auto g = std::make_shared<std::vector<ResidualField>>();
        Field y1 = fcoord(2), y2 = fcoord(3);
        Field Ibar = C.I_bar();
        Field spray_route = y1 * fpartial(0, Ibar) + y2 * fpartial(1, Ibar) -
                            2.0 * (C.G_bar(1) * fpartial(2, Ibar) +
                                   C.G_bar(2) * fpartial(3, Ibar));
        g->push_back({spray_route - C.J_bar(), {spray_route, C.J_bar()}});
        out.push_back(field_check("conf.landsberg.spray-route",
                                  "rescaled Landsberg scalar recomputed from raw chart "
                                  "derivatives along the shifted spray",
                                  kIdentity, g));
    }
    {
        Check c;
        c.id = "conf.derivs.dual";
        c.summary = "operator-route derivatives of the rescaled main scalar match their "
                    "closed forms";
        c.eval = [](PointData& pd) {
            const BarDerivSample& d = pd.derivs();
            Row r = row_from(d.Ia - d.Ia_closed, std::max(std::fabs(d.Ia), std::fabs(d.Ia_closed)));
            Row r2 = row_from(d.Id - d.Id_closed, std::max(std::fabs(d.Id), std::fabs(d.Id_closed)));
            Row r3 = row_from(d.T_vb - d.T_closed, std::max(std::fabs(d.T_vb), std::fabs(d.T_closed)));
            if (r2.normalized > r.normalized) r = r2;
            if (r3.normalized > r.normalized) r = r3;
            return r;
        };
        out.push_back(c);
    }
    {
        // When the factor does not depend on direction the whole
        // transformation collapses to the classical position rescaling.
        auto gate = std::make_shared<Field>(phi2);
        auto g = std::make_shared<std::vector<ResidualField>>();
        Field e_mphi = fexp(-phi);
        g->push_back({C.sigma(), {}});
        g->push_back({C.rho() - eps, {}});
        g->push_back({C.P() - 0.5 * (L * C.phi_h1()), {C.P(), 0.5 * (L * C.phi_h1())}});
        g->push_back({C.Q() + 0.5 * (L * C.phi_h2()), {C.Q(), 0.5 * (L * C.phi_h2())}});
        g->push_back({C.I_bar() - I, {C.I_bar(), I}});
        Check c;
        c.id = "conf.isotropic-reduction";
        c.summary = "direction-independent factor reduces to the position-rescaling formulas";
        c.eval = [gate, g](PointData& pd) {
            if (std::fabs(pd.val(*gate)) > 1e-10) {
                Row r;
                r.applicable = false;
                return r;
            }
            return eval_residual_fields(pd, *g);
        };
        out.push_back(c);
    }
    {
        // Volume-factor regime: when the rescaled metric density is the
        // fourth-power rescale of the base one, the Landsberg scalar and the
        // transverse main-scalar derivative transfer by closed formulas.
        auto gate_val = std::make_shared<Field>(C.sigma() - phi2 * phi2);
        auto gate_scale = std::make_shared<Field>(C.sigma());
        auto g1 = std::make_shared<std::vector<ResidualField>>();
        {
            Field t1 = F * C.J_bar();
            Field t2 = F * S.J();
            Field t3 = 2.0 * (eps * (L * S.h1(phi2)));
            Field t4 = 2.0 * (eps * (C.Q() * (S.I_v2() + 2.0 * (eps * phi22))));
            g1->push_back({t1 - t2 - t3 + t4, {t1, t2, t3, t4}});
        }
        auto g2 = std::make_shared<std::vector<ResidualField>>();
        {
            Field direct = S.v2(C.I_bar());
            Field closed = S.I_v2() + 2.0 * (eps * phi22);
            g2->push_back({direct - closed, {direct, closed}});
        }
        auto gated = [gate_val, gate_scale](PointData& pd,
                                            const std::vector<ResidualField>& grp) {
            double gv = pd.val(*gate_val);
            double gs = std::fabs(pd.val(*gate_scale));
            if (norm_of(gv, gs) > 1e-9) {
                Row r;
                r.applicable = false;
                return r;
            }
            return eval_residual_fields(pd, grp);
        };
        Check c1;
        c1.id = "conf.landsberg.special-factor";
        c1.summary = "Landsberg scalar transfer when the rescaled density is the "
                     "fourth-power rescale of the base density";
        c1.eval = [gated, g1](PointData& pd) { return gated(pd, *g1); };
        out.push_back(c1);
        Check c2;
        c2.id = "conf.t-condition.special-factor";
        c2.summary = "transverse main-scalar derivative transfer in the same regime";
        c2.eval = [gated, g2](PointData& pd) { return gated(pd, *g2); };
        out.push_back(c2);
    }
    {
        // Quadratic base whose factor slope is horizontally constant: the
        // radial derivative of the rescaled main scalar is proportional to
        // its transverse fiber derivative.
        auto gate = std::make_shared<std::vector<Field>>(
            std::vector<Field>{I, S.h1(phi2), S.h2(phi2)});
        auto g = std::make_shared<std::vector<ResidualField>>();
        Field e_mphi = fexp(-phi);
        Field t1 = C.ha(C.I_bar());
        Field t2 = (e_mphi * (C.rho() * S.v2(C.I_bar()))) * (phi2 * C.phi_h1() - C.phi_h2());
        g->push_back({t1 + t2, {t1, t2}});
        Check c;
        c.id = "conf.landsberg.riemannian-factor";
        c.summary = "Landsberg obstruction for a quadratic base with horizontally constant "
                    "factor slope";
        c.eval = [gate, g](PointData& pd) {
            for (const Field& f : *gate)
                if (std::fabs(pd.val(f)) > 1e-10) {
                    Row r;
                    r.applicable = false;
                    return r;
                }
            return eval_residual_fields(pd, *g);
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "conf.metrizability.m-tensor";
        c.summary = "difference tensor of the two connections is position-only and satisfies "
                    "its defining relation";
        c.kind = kOracle;  // cancellation-heavy second fiber derivatives
        c.eval = [](PointData& pd) {
            const MetrizabilitySample& m = pd.metrizability(kClassifyThreshold);
            if (m.status != MetrizabilitySample::Status::Ok) {
                Row r;
                r.applicable = false;
                return r;
            }
            return row_from(std::max(m.m_fiber_deriv, m.defining_relation), 1.0);
        };
        out.push_back(c);
    }
    (void)probe;
}

// ---------- oracle checks (transform route vs fresh rebuild) ----------

void add_oracle_checks(std::vector<Check>& out, const Surface& S, const Conformal& C,
                       const Field& probe) {
    {
        Check c;
        c.id = "oracle.norm";
        c.summary = "rescaled norm matches the rebuilt surface";
        c.eval = [](PointData& pd) {
            double fresh = pd.val(pd.FS->F());
            double via = pd.bar_frame().F_bar;
            return row_from(via - fresh, std::max(std::fabs(via), std::fabs(fresh)));
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "oracle.frame";
        c.summary = "rescaled moving frame matches the rebuilt surface";
        c.eval = [](PointData& pd) {
            const BarFrameSample& bf = pd.bar_frame();
            const FrameSample& ff = pd.fresh_frame();
            Row worst;
            for (int i = 0; i < 2; ++i) {
                for (auto [via, fresh] :
                     {std::pair{bf.ell_lo[i], ff.ell_lo[i]}, {bf.ell_hi[i], ff.ell_hi[i]},
                      {bf.m_lo[i], ff.m_lo[i]}, {bf.m_hi[i], ff.m_hi[i]}}) {
                    Row r = row_from(via - fresh, std::max(std::fabs(via), std::fabs(fresh)));
                    if (r.normalized > worst.normalized) worst = r;
                }
            }
            return worst;
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "oracle.main-scalar";
        c.summary = "rescaled main scalar matches the rebuilt surface";
        c.eval = [](PointData& pd) {
            double via = pd.bar_frame().I_bar;
            double fresh = pd.fresh_frame().main_scalar;
            return row_from(via - fresh, std::max(std::fabs(via), std::fabs(fresh)));
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "oracle.spray";
        c.summary = "shifted spray matches the rebuilt surface";
        c.eval = [](PointData& pd) {
            const BarSpraySample& bs = pd.bar_spray();
            const SpraySample& fs = pd.fresh_spray();
            Row worst;
            for (int i = 0; i < 2; ++i) {
                Row r = row_from(bs.G[i] - fs.G[i],
                                 std::max(std::fabs(bs.G[i]), std::fabs(fs.G[i])));
                if (r.normalized > worst.normalized) worst = r;
            }
            return worst;
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "oracle.connection";
        c.summary = "shifted nonlinear connection matches the rebuilt surface";
        c.eval = [](PointData& pd) {
            const BarSpraySample& bs = pd.bar_spray();
            const SpraySample& fs = pd.fresh_spray();
            Row worst;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    Row r = row_from(bs.Gj[i][j] - fs.Gj[i][j],
                                     std::max(std::fabs(bs.Gj[i][j]), std::fabs(fs.Gj[i][j])));
                    if (r.normalized > worst.normalized) worst = r;
                }
            return worst;
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "oracle.berwald-connection";
        c.summary = "shifted Berwald connection matches the rebuilt surface";
        c.eval = [](PointData& pd) {
            const BarSpraySample& bs = pd.bar_spray();
            const SpraySample& fs = pd.fresh_spray();
            Row worst;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    for (int k = 0; k < 2; ++k) {
                        Row r = row_from(bs.Gjk[i][j][k] - fs.Gjk[i][j][k],
                                         std::max(std::fabs(bs.Gjk[i][j][k]),
                                                  std::fabs(fs.Gjk[i][j][k])));
                        if (r.normalized > worst.normalized) worst = r;
                    }
            return worst;
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "oracle.berwald-curvature";
        c.summary = "rescaled Berwald curvature matches the rebuilt surface";
        c.eval = [](PointData& pd) {
            const BarSpraySample& bs = pd.bar_spray();
            const SpraySample& fs = pd.fresh_spray();
            Row worst;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    for (int k = 0; k < 2; ++k)
                        for (int r4 = 0; r4 < 2; ++r4) {
                            Row r = row_from(
                                bs.B[i][j][k][r4] - fs.B[i][j][k][r4],
                                std::max(std::fabs(bs.B[i][j][k][r4]),
                                         std::fabs(fs.B[i][j][k][r4])));
                            if (r.normalized > worst.normalized) worst = r;
                        }
            return worst;
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "oracle.landsberg";
        c.summary = "rescaled Landsberg scalar matches the rebuilt surface";
        c.eval = [](PointData& pd) {
            double via = pd.derivs().J_bar;
            double fresh = pd.fresh_spray().J;
            return row_from(via - fresh, std::max(std::fabs(via), std::fabs(fresh)));
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "oracle.t-scalar";
        c.summary = "transverse fiber derivative of the rescaled main scalar matches the "
                    "rebuilt surface";
        c.eval = [](PointData& pd) {
            double via = pd.derivs().T_vb;
            double fresh = pd.fresh_spray().I_v2;
            return row_from(via - fresh, std::max(std::fabs(via), std::fabs(fresh)));
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "oracle.h-derivs";
        c.summary = "horizontal derivatives of the rescaled main scalar match the rebuilt "
                    "surface";
        c.eval = [](PointData& pd) {
            const BarDerivSample& d = pd.derivs();
            const SpraySample& fs = pd.fresh_spray();
            Row worst = row_from(d.Ia - fs.I_h1, std::max(std::fabs(d.Ia), std::fabs(fs.I_h1)));
            Row r2 = row_from(d.Ib - fs.I_h2, std::max(std::fabs(d.Ib), std::fabs(fs.I_h2)));
            Row r3 = row_from(d.Id - fs.I_two, std::max(std::fabs(d.Id), std::fabs(fs.I_two)));
            if (r2.normalized > worst.normalized) worst = r2;
            if (r3.normalized > worst.normalized) worst = r3;
            return worst;
        };
        out.push_back(c);
    }
    {
        // The full projective-curvature combination, transform route vs the
        // rebuilt surface's own combination.
        auto idv = std::make_shared<Field>(C.vb(C.I_d()));
        Check c;
        c.id = "oracle.douglas-combination";
        c.summary = "projective-curvature scalar combination matches the rebuilt surface";
        c.eval = [idv](PointData& pd) {
            const BarDerivSample& d = pd.derivs();
            double ibar = pd.bar_frame().I_bar;
            double eb = pd.eps_bar;
            double via = 6.0 * d.Ia + eb * pd.val(*idv) + 2.0 * ibar * d.Id;
            double fresh = pd.val(pd.FS->douglas());
            return row_from(via - fresh, std::max(std::fabs(via), std::fabs(fresh)));
        };
        out.push_back(c);
    }
    {
        auto pieces = std::make_shared<std::array<Field, 3>>(
            std::array<Field, 3>{fexp(4.0 * C.phi()), S.det_g(), C.inv_rho()});
        Check c;
        c.id = "oracle.metric-determinant";
        c.summary = "determinant of the rescaled metric tensor matches its closed form";
        c.eval = [pieces](PointData& pd) {
            double fresh = pd.fresh_frame().det_g;
            double e4 = pd.val((*pieces)[0]);
            double dg = pd.val((*pieces)[1]);
            double ir = pd.val((*pieces)[2]);
            double predicted = e4 * pd.eps * dg * ir;
            return row_from(fresh - predicted, std::max(std::fabs(fresh), std::fabs(predicted)));
        };
        out.push_back(c);
    }
    {
        auto fields = std::make_shared<std::array<Field, 4>>(
            std::array<Field, 4>{C.va(probe), C.vb(probe), C.ha(probe), C.hb(probe)});
        Check c;
        c.id = "oracle.operators";
        c.summary = "rescaled scalar derivative operators match the rebuilt surface's "
                    "operators on a probe scalar";
        c.eval = [fields, probe](PointData& pd) {
            const Surface& FS = *pd.FS;
            std::array<Field, 4> fresh{FS.v1(probe), FS.v2(probe), FS.h1(probe),
                                       FS.h2(probe)};
            Row worst;
            for (int i = 0; i < 4; ++i) {
                double a = pd.val((*fields)[i]);
                double b = pd.val(fresh[i]);
                Row r = row_from(a - b, std::max(std::fabs(a), std::fabs(b)));
                if (r.normalized > worst.normalized) worst = r;
            }
            return worst;
        };
        out.push_back(c);
    }
}

// ---------- classification checks ----------

void add_class_checks(std::vector<Check>& out, bool rescaled) {
    auto base_resid = [](const char* id, const char* summary,
                         Resid BaseResiduals::*member) {
        Check c;
        c.id = id;
        c.summary = summary;
        c.kind = kClassify;
        c.classification = true;
        c.eval = [member](PointData& pd) { return row_from(pd.base_class().*member); };
        return c;
    };
    out.push_back(base_resid("class.base.riemannian",
                             "base main scalar vanishes (quadratic energy)",
                             &BaseResiduals::riemannian));
    out.push_back(base_resid("class.base.berwald",
                             "base main scalar is horizontally constant",
                             &BaseResiduals::berwald));
    out.push_back(base_resid("class.base.landsberg",
                             "base Landsberg scalar vanishes", &BaseResiduals::landsberg));
    out.push_back(base_resid("class.base.t-condition",
                             "transverse fiber derivative of the base main scalar vanishes",
                             &BaseResiduals::t_condition));
    out.push_back(base_resid("class.base.douglas",
                             "base projective-curvature combination vanishes",
                             &BaseResiduals::douglas));
    {
        Check c;
        c.id = "class.base.flat-curvature";
        c.summary = "base Gauss curvature vanishes over the sample";
        c.kind = kClassify;
        c.classification = true;
        c.eval = [](PointData& pd) { return row_from(pd.gauss().R, 1.0); };
        out.push_back(c);
    }
    if (!rescaled) return;
    {
        Check c;
        c.id = "class.bar.spray-preserved";
        c.summary = "rescaling keeps the base spray (both shifts vanish)";
        c.kind = kClassify;
        c.classification = true;
        c.eval = [](PointData& pd) {
            const RescaleSample& d = pd.rescale();
            double g1 = pd.val(pd.S->G(1)), g2 = pd.val(pd.S->G(2));
            return row_from(std::max(std::fabs(d.P), std::fabs(d.Q)),
                            std::max(std::fabs(g1), std::fabs(g2)));
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "class.bar.riemannian";
        c.summary = "rescaled main scalar vanishes (quadratic energy)";
        c.kind = kClassify;
        c.classification = true;
        c.eval = [](PointData& pd) { return row_from(pd.bar_frame().I_bar, 1.0); };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "class.bar.berwald";
        c.summary = "rescaled main scalar is horizontally constant";
        c.kind = kClassify;
        c.classification = true;
        c.eval = [](PointData& pd) {
            return row_from(pd.berwald().bar_residual,
                            std::fabs(pd.bar_frame().I_bar));
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "class.bar.berwald-quadratic-base";
        c.summary = "rescaled metric is affinely rigid by the spray-shift criterion "
                    "(quadratic base)";
        c.kind = kClassify;
        c.classification = true;
        c.eval = [](PointData& pd) {
            const BerwaldSample& b = pd.berwald();
            if (b.base_riemannian > 1e-10) {
                Row r;
                r.applicable = false;
                return r;
            }
            return row_from(std::max(b.r1, b.r2), 1.0);
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "class.bar.landsberg";
        c.summary = "rescaled Landsberg scalar vanishes";
        c.kind = kClassify;
        c.classification = true;
        c.eval = [](PointData& pd) {
            return row_from(pd.derivs().Ia, std::fabs(pd.bar_frame().I_bar));
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "class.bar.t-condition";
        c.summary = "transverse fiber derivative of the rescaled main scalar vanishes";
        c.kind = kClassify;
        c.classification = true;
        c.eval = [](PointData& pd) {
            return row_from(pd.derivs().T_vb, std::fabs(pd.bar_frame().I_bar));
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "class.bar.douglas";
        c.summary = "rescaled projective-curvature combination vanishes";
        c.kind = kClassify;
        c.classification = true;
        c.eval = [](PointData& pd) { return row_from(pd.douglas().bar, 1.0); };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "class.bar.douglas-quartic";
        c.summary = "rescaled metric is projectively quadratic by the quartic shift "
                    "criterion (quadratic base)";
        c.kind = kClassify;
        c.classification = true;
        c.eval = [](PointData& pd) {
            if (pd.berwald().base_riemannian > 1e-10) {
                Row r;
                r.applicable = false;
                return r;
            }
            return row_from(pd.douglas().quadratic_base_form, 1.0);
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "class.flat";
        c.summary = "rescaled norm is position-free in this chart (vanishing spray)";
        c.kind = kClassify;
        c.classification = true;
        c.eval = [](PointData& pd) {
            const FlatnessSample& f = pd.flatness(kClassifyThreshold);
            Row r = row_from(std::max({f.d_chart[0], f.d_chart[1], f.spray_radial,
                                       f.spray_transverse}),
                             1.0);
            r.outcome = f.flat;
            return r;
        };
        out.push_back(c);
    }
    {
        Check c;
        c.id = "class.metrizable";
        c.summary = "rescaled connection is the connection of a quadratic-energy metric";
        c.kind = kClassify;
        c.classification = true;
        c.eval = [](PointData& pd) {
            const MetrizabilitySample& m = pd.metrizability(kClassifyThreshold);
            Row r = row_from(m.phi_horizontal, 1.0);
            r.outcome = m.status == MetrizabilitySample::Status::Ok && m.metrizable;
            if (m.status == MetrizabilitySample::Status::BaseNotQuadratic)
                r.note = "base spray is not quadratic; the question is posed for "
                         "quadratic bases";
            else if (m.status == MetrizabilitySample::Status::NotBerwald)
                r.note = "rescaled metric is not affinely rigid, so no single "
                         "connection to compare";
            return r;
        };
        out.push_back(c);
    }
}

int thread_count() {
    if (const char* env = std::getenv("FINSLER2D_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return std::min(n, 64);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return std::max(1u, std::min(hw, 16u));
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

} // namespace

std::array<std::array<double, 2>, 4> box_for(const MetricDef& def) {
    if (def.box) return *def.box;
    return SamplePlan{}.box;
}

std::vector<Point4> sample_points(const Surface& surf, const Conformal* conf,
                                  const MetricDef::Lowered& low, const SamplePlan& plan,
                                  long* attempts_out, int budget) {
    (void)low;
    std::mt19937_64 rng(plan.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<Point4> pts;
    pts.reserve(plan.count);
    const long max_attempts =
        static_cast<long>(plan.max_attempt_factor) * std::max(1, plan.count);
    long attempts = 0;
    while (static_cast<int>(pts.size()) < plan.count && attempts < max_attempts) {
        ++attempts;
        Point4 p;
        for (int i = 0; i < 4; ++i) {
            double lo = plan.box[i][0], hi = plan.box[i][1];
            p[i] = lo + (hi - lo) * u01(rng);
        }
        if (std::hypot(p[2], p[3]) < 1e-9) continue;
        try {
            if (!surf.in_domain(p, budget)) continue;
            surf.eps_at(p, budget);
            if (conf) conf->data_at(p, budget);
        } catch (const Error&) {
            continue;
        }
        pts.push_back(p);
    }
    if (attempts_out) *attempts_out = attempts;
    if (static_cast<int>(pts.size()) < plan.count)
        throw Error("sampling found only " + std::to_string(pts.size()) + " of " +
                    std::to_string(plan.count) + " admissible points after " +
                    std::to_string(attempts) + " attempts");
    return pts;
}

bool ClassificationReport::identities_pass() const {
    if (sampled == 0) return false;
    for (const auto& c : checks)
        if (!c.classification && !c.verdict) return false;
    return true;
}

std::string ClassificationReport::to_json() const {
    ordered_json j;
    j["tool"] = "finsler2d";
    j["version"] = kToolVersion;
    j["metric"] = metric;
    j["rescaled"] = rescaled;
    j["suite"] = suite;
    j["degree"] = degree;
    j["seed"] = seed;
    j["points"] = ordered_json{{"requested", requested}, {"sampled", sampled},
                               {"attempts", attempts}};
    j["signature"] = ordered_json{{"base", base_eps}, {"rescaled", bar_eps}};
    j["identities_pass"] = identities_pass();
    ordered_json cls = ordered_json::object();
    for (const auto& c : checks)
        if (c.classification) {
            std::string key = c.id.substr(std::string("class.").size());
            if (c.points == 0 && !c.notes.empty())
                cls[key] = nullptr;
            else
                cls[key] = c.verdict;
        }
    j["classifications"] = cls;
    ordered_json arr = ordered_json::array();
    for (const auto& c : checks) {
        ordered_json e;
        e["id"] = c.id;
        e["kind"] = c.classification ? "classification" : "identity";
        e["summary"] = c.summary;
        e["threshold"] = c.threshold;
        e["points"] = c.points;
        e["residual"] = ordered_json{{"max_raw", c.max_raw},
                                     {"max_normalized", c.max_normalized},
                                     {"mean_normalized", c.mean_normalized}};
        e["verdict"] = c.verdict;
        e["errors"] = c.errors;
        e["notes"] = c.notes;
        arr.push_back(std::move(e));
    }
    j["checks"] = arr;
    return j.dump(2) + "\n";
}

std::string ClassificationReport::to_text() const {
    std::ostringstream os;
    os << "finsler2d " << kToolVersion << " — " << suite << " suite on \"" << metric
       << "\"" << (rescaled ? " (with rescaling factor)" : "") << "\n";
    os << "degree " << degree << ", seed " << seed << ", points " << sampled << "/"
       << requested << " (" << attempts << " attempts), signature base "
       << (base_eps > 0 ? "+1" : base_eps < 0 ? "-1" : "mixed");
    if (rescaled)
        os << ", rescaled " << (bar_eps > 0 ? "+1" : bar_eps < 0 ? "-1" : "mixed");
    os << "\n\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-40s %-14s %4s  %-10s %-9s %s\n", "check",
                  "kind", "pts", "max-norm", "threshold", "verdict");
    os << line;
    os << std::string(92, '-') << "\n";
    for (const auto& c : checks) {
        std::snprintf(line, sizeof line, "%-40s %-14s %4d  %-10s %-9s %s\n",
                      c.id.c_str(), c.classification ? "classification" : "identity",
                      c.points, fmt_double(c.max_normalized).c_str(),
                      fmt_double(c.threshold).c_str(),
                      c.classification ? (c.verdict ? "yes" : "no")
                                       : (c.verdict ? "pass" : "FAIL"));
        os << line;
        for (const auto& n : c.notes) os << "    note: " << n << "\n";
        for (const auto& e : c.errors) os << "    error: " << e << "\n";
    }
    os << std::string(92, '-') << "\n";
    os << "identity checks: " << (identities_pass() ? "PASS" : "FAIL") << "\n";
    return os.str();
}

ClassificationReport run_suite(const MetricDef& def, const SamplePlan& plan,
                               const std::string& suite, const Tolerances& tol,
                               int degree) {
    const bool want_ident = suite == "identities" || suite == "full";
    const bool want_oracle = suite == "oracle" || suite == "full";
    const bool want_class = suite == "classify" || suite == "full";
    if (!want_ident && !want_oracle && !want_class)
        throw Error("unknown suite \"" + suite +
                    "\" (expected identities, oracle, classify, or full)");

    MetricDef::Lowered low = def.lower();
    auto surf = std::make_shared<Surface>(low.F, low.domain,
                                          def.name.empty() ? "F" : def.name);
    std::unique_ptr<Conformal> conf;
    if (low.phi) conf = std::make_unique<Conformal>(surf, low.phi);

    Field probe = make_probe();
    std::vector<Check> checks;
    if (want_ident) {
        add_base_checks(checks, *surf, probe);
        if (conf) add_conformal_checks(checks, *surf, *conf, probe);
    }
    if (want_oracle && conf) add_oracle_checks(checks, *surf, *conf, probe);
    if (want_class) add_class_checks(checks, conf != nullptr);

    double thr_ident = tol.identity > 0 ? tol.identity : kIdentityThreshold;
    double thr_oracle = tol.oracle > 0 ? tol.oracle : kOracleThreshold;
    double thr_class = tol.classify > 0 ? tol.classify : kClassifyThreshold;

    ClassificationReport rep;
    rep.metric = def.name;
    rep.rescaled = conf != nullptr;
    rep.suite = suite;
    rep.degree = degree;
    rep.seed = plan.seed;
    rep.requested = plan.count;

    std::vector<Point4> pts =
        sample_points(*surf, conf.get(), low, plan, &rep.attempts, degree);
    rep.sampled = static_cast<int>(pts.size());
    if (pts.empty()) throw Error("no viable sample points");

    const Surface* fresh = conf ? conf->fresh().get() : nullptr;

    const size_t npts = pts.size(), nchk = checks.size();
    std::vector<std::vector<Row>> rows(npts, std::vector<Row>(nchk));
    std::vector<double> eps_pt(npts, 0.0), eps_bar_pt(npts, 0.0);

    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= npts) return;
            PointData pd(pts[i], degree, surf.get(), conf.get(), fresh);
            try {
                pd.eps = surf->eps_at(pts[i], degree);
                if (conf) pd.eps_bar = pd.rescale().rho > 0.0 ? 1.0 : -1.0;
            } catch (const Error& e) {
                for (size_t c = 0; c < nchk; ++c) {
                    rows[i][c].errored = true;
                    rows[i][c].error = e.what();
                }
                continue;
            }
            eps_pt[i] = pd.eps;
            eps_bar_pt[i] = pd.eps_bar;
            for (size_t c = 0; c < nchk; ++c) {
                try {
                    rows[i][c] = checks[c].eval(pd);
                } catch (const Error& e) {
                    rows[i][c].errored = true;
                    rows[i][c].error = e.what();
                } catch (const std::exception& e) {
                    rows[i][c].errored = true;
                    rows[i][c].error = e.what();
                }
            }
        }
    };
    int nthreads = std::min<int>(thread_count(), static_cast<int>(npts));
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (size_t c = 0; c < nchk; ++c) {
        CheckResult r;
        r.id = checks[c].id;
        r.summary = checks[c].summary;
        r.classification = checks[c].classification;
        r.threshold = checks[c].kind == kIdentity  ? thr_ident
                      : checks[c].kind == kOracle ? thr_oracle
                                                  : thr_class;
        double sum = 0;
        bool outcome = true;
        for (size_t i = 0; i < npts; ++i) {
            const Row& row = rows[i][c];
            if (row.errored) {
                if (r.errors.size() < 5)
                    r.errors.push_back("point " + std::to_string(i) + ": " + row.error);
                continue;
            }
            if (!row.applicable) continue;
            ++r.points;
            r.max_raw = std::max(r.max_raw, row.raw);
            r.max_normalized = std::max(r.max_normalized, row.normalized);
            sum += row.normalized;
            outcome = outcome && row.outcome;
            if (!row.note.empty() && r.notes.empty()) r.notes.push_back(row.note);
        }
        r.mean_normalized = r.points ? sum / r.points : 0.0;
        if (r.points == 0) {
            if (r.errors.empty()) {
                r.notes.push_back("vacuous: hypothesis held at no sampled point");
                r.verdict = !r.classification;
            } else {
                r.verdict = false;
            }
        } else {
            r.verdict = r.max_normalized < r.threshold;
            if (r.classification) r.verdict = r.verdict && outcome;
            if (!r.errors.empty()) r.verdict = false;
        }
        // a classification whose defining quantity is itself below threshold
        // everywhere but whose outcome flag says otherwise keeps the flag
        rep.checks.push_back(std::move(r));
    }

    // signature constancy over the sample
    auto sig_check = [&](const char* id, const char* summary,
                         const std::vector<double>& vals, bool enabled) {
        if (!enabled) return;
        CheckResult r;
        r.id = id;
        r.summary = summary;
        r.classification = true;
        r.threshold = thr_class;
        r.points = static_cast<int>(npts);
        bool constant = true;
        for (double v : vals)
            if (v != vals[0]) constant = false;
        r.max_raw = constant ? 0.0 : 1.0;
        r.max_normalized = r.max_raw;
        r.verdict = constant;
        if (!constant) r.notes.push_back("both signs occur over the sample");
        rep.checks.push_back(std::move(r));
    };
    if (want_class) {
        sig_check("class.base.signature", "base metric signature is constant over the sample",
                  eps_pt, true);
        sig_check("class.bar.signature",
                  "rescaled metric signature is constant over the sample", eps_bar_pt,
                  conf != nullptr);
    }

    bool base_const = std::all_of(eps_pt.begin(), eps_pt.end(),
                                  [&](double v) { return v == eps_pt[0]; });
    rep.base_eps = base_const ? static_cast<int>(eps_pt[0]) : 0;
    if (conf) {
        bool bar_const = std::all_of(eps_bar_pt.begin(), eps_bar_pt.end(),
                                     [&](double v) { return v == eps_bar_pt[0]; });
        rep.bar_eps = bar_const ? static_cast<int>(eps_bar_pt[0]) : 0;
    }
    return rep;
}

} // namespace finsler
