#include "finsler/geometry.hpp"

#include <cmath>
#include <limits>

namespace finsler {

namespace {

constexpr double kDegenTol = 1e-10;  // relative floor for |det g|
constexpr double kSprayTol = 1e-6;   // agreement between the two spray routes
constexpr double kProbeTol = 1e-6;   // agreement between the curvature probes

double rel_gap(double a, double b) {
    return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

} // namespace

int Surface::check2(int i) {
    if (i < 1 || i > 2) throw Error("frame index out of range (must be 1 or 2)");
    return i - 1;
}

const Field& Surface::g(int i, int j) const { return g_[check2(i)][check2(j)]; }

Surface::Surface(Field F, std::vector<std::pair<Field, bool>> domain, std::string label)
    : label_(std::move(label)), domain_(std::move(domain)) {
    F_ = std::move(F);
    L_ = F_ * F_;

    for (int i = 0; i < 2; ++i) {
        ell_lo_[i] = fpartial(2 + i, F_);
        ell_hi_[i] = fcoord(2 + i) / F_;
    }

    Field dL[2] = {fpartial(2, L_), fpartial(3, L_)};
    Field ddL[2][2];
    ddL[0][0] = fpartial(2, dL[0]);
    ddL[0][1] = fpartial(3, dL[0]);
    ddL[1][0] = ddL[0][1];
    ddL[1][1] = fpartial(3, dL[1]);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) g_[i][j] = 0.5 * ddL[i][j];

    det_ = ftag("det g", g_[0][0] * g_[1][1] - g_[0][1] * g_[0][1]);
    eps_ = fsign_det(det_);
    sq_ = ftag("sqrt(eps*det g)", fsqrt(eps_ * det_));

    // transverse frame covector/vector, normalized against ell
    m_hi_[0] = eps_ * (-ell_lo_[1]) / sq_;
    m_hi_[1] = eps_ * ell_lo_[0] / sq_;
    m_lo_[0] = sq_ * (-ell_hi_[1]);
    m_lo_[1] = sq_ * ell_hi_[0];

    // Cartan coefficients (quarter of the third fiber derivatives of F^2)
    Field C111 = 0.25 * fpartial(2, ddL[0][0]);
    Field C112 = 0.25 * fpartial(3, ddL[0][0]);
    Field C122 = 0.25 * fpartial(3, ddL[0][1]);
    Field C222 = 0.25 * fpartial(3, ddL[1][1]);
    const Field& m1 = m_hi_[0];
    const Field& m2 = m_hi_[1];
    I_ = ftag("I", eps_ * F_ *
                       (C111 * m1 * m1 * m1 + 3.0 * (C112 * m1 * m1 * m2) +
                        3.0 * (C122 * m1 * m2 * m2) + C222 * m2 * m2 * m2));

    // spray, frame route: 2G = (y.dF/dx) ell + F^2 * (antisymmetric mixed
    // second derivative of F) / sqrt(eps*det g) * m
    curl_ = fpartial(3, fpartial(0, F_)) - fpartial(2, fpartial(1, F_));
    rad_ = fcoord(2) * fpartial(0, F_) + fcoord(3) * fpartial(1, F_);
    for (int i = 0; i < 2; ++i)
        G_[i] = ftag("G", 0.5 * (rad_ * ell_hi_[i] + (L_ * curl_ / sq_) * m_hi_[i]));

    // spray, metric-inverse route: 4 G^i = g^{il} (y^k d^2L/dx^k dy^l - dL/dx^l)
    Field gi[2][2];
    gi[0][0] = g_[1][1] / det_;
    gi[0][1] = (-g_[0][1]) / det_;
    gi[1][0] = gi[0][1];
    gi[1][1] = g_[0][0] / det_;
    Field E[2];
    for (int l = 0; l < 2; ++l)
        E[l] = fcoord(2) * fpartial(0, dL[l]) + fcoord(3) * fpartial(1, dL[l]) - fpartial(l, L_);
    for (int i = 0; i < 2; ++i)
        G_alt_[i] = 0.25 * (gi[i][0] * E[0] + gi[i][1] * E[1]);

    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) Gj_[i][j] = fpartial(2 + j, G_[i]);
    for (int i = 0; i < 2; ++i) {
        Gjk_[i][0][0] = fpartial(2, Gj_[i][0]);
        Gjk_[i][0][1] = fpartial(3, Gj_[i][0]);
        Gjk_[i][1][0] = Gjk_[i][0][1];
        Gjk_[i][1][1] = fpartial(3, Gj_[i][1]);
    }
    for (int i = 0; i < 2; ++i) {
        // build the four distinct components, then mirror over permutations
        Field b000 = fpartial(2, Gjk_[i][0][0]);
        Field b001 = fpartial(3, Gjk_[i][0][0]);
        Field b011 = fpartial(3, Gjk_[i][0][1]);
        Field b111 = fpartial(3, Gjk_[i][1][1]);
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int r = 0; r < 2; ++r) {
                    int ones = j + k + r;
                    B_[i][j][k][r] = ones == 0 ? b000 : ones == 1 ? b001 : ones == 2 ? b011 : b111;
                }
    }

    I_h1_ = h1(I_);
    I_h2_ = h2(I_);
    I_v1_ = v1(I_);
    I_v2_ = v2(I_);
    I_two_ = ftag("I2", v2(I_h1_) + I_h2_);
    I_two_v2_ = v2(I_two_);
    J_ = ftag("J", F_ * I_h1_);
    douglas_ = ftag("douglas", 6.0 * I_h1_ + eps_ * I_two_v2_ + 2.0 * (I_ * I_two_));

    // Gauss curvature probes: f = y^k / F is 0-homogeneous with f_v2 = eps*m^k,
    // and the two m-components cannot vanish together.
    for (int k = 0; k < 2; ++k) {
        const Field& f = ell_hi_[k];
        probe_num_[k] = h2(h1(f)) - h1(h2(f));
        probe_den_[k] = v2(f);
    }
}

Field Surface::cached_op(int op, int aux, const Field& f,
                         Field (Surface::*build)(int, const Field&) const) const {
    {
        std::scoped_lock lk(op_mutex_);
        auto it = op_cache_.find(std::make_tuple(op, aux, f.get()));
        if (it != op_cache_.end()) return it->second.result;
    }
    Field r = (this->*build)(aux, f);
    std::scoped_lock lk(op_mutex_);
    auto [it, inserted] = op_cache_.emplace(std::make_tuple(op, aux, f.get()), OpEntry{f, r});
    return it->second.result;  // keep the first one on a race
}

Field Surface::build_v(int which, const Field& f) const {
    Field d1 = fpartial(2, f), d2 = fpartial(3, f);
    if (which == 1) return ftag("v1", fcoord(2) * d1 + fcoord(3) * d2);
    return ftag("v2", eps_ * F_ * (d1 * m_hi_[0] + d2 * m_hi_[1]));
}

Field Surface::build_delta(int i, const Field& f) const {
    return fpartial(i - 1, f) - (Gj_[0][i - 1] * fpartial(2, f) + Gj_[1][i - 1] * fpartial(3, f));
}

Field Surface::build_h(int which, const Field& f) const {
    Field d1 = delta(1, f), d2 = delta(2, f);
    if (which == 1) return ftag("h1", d1 * ell_hi_[0] + d2 * ell_hi_[1]);
    return ftag("h2", eps_ * (d1 * m_hi_[0] + d2 * m_hi_[1]));
}

Field Surface::v1(const Field& f) const { return cached_op(1, 1, f, &Surface::build_v); }
Field Surface::v2(const Field& f) const { return cached_op(1, 2, f, &Surface::build_v); }
Field Surface::h1(const Field& f) const { return cached_op(2, 1, f, &Surface::build_h); }
Field Surface::h2(const Field& f) const { return cached_op(2, 2, f, &Surface::build_h); }
Field Surface::delta(int i, const Field& f) const {
    check2(i);
    return cached_op(3, i, f, &Surface::build_delta);
}

bool Surface::in_domain(const Point4& p, int budget) const {
    if (p[2] == 0.0 && p[3] == 0.0) return false;
    for (const auto& [f, positive] : domain_) {
        double v;
        try {
            v = field_value(f, p, budget);
        } catch (const DomainError&) {
            return false;
        }
        if (!std::isfinite(v)) return false;
        if (positive ? !(v > 0.0) : v == 0.0) return false;
    }
    return true;
}

void Surface::check_frame(EvalContext& ctx) const {
    if (!in_domain(ctx.point(), ctx.budget()))
        throw OutsideCone("evaluation point lies outside the declared conic domain (or y = 0)");
    double g11 = ctx.eval(g_[0][0], 0).value();
    double g12 = ctx.eval(g_[0][1], 0).value();
    double g22 = ctx.eval(g_[1][1], 0).value();
    double det = g11 * g22 - g12 * g12;
    double scale = g11 * g11 + 2.0 * g12 * g12 + g22 * g22;
    if (!(std::fabs(det) > kDegenTol * scale) || !std::isfinite(det))
        throw DegenerateMetric("det g = " + std::to_string(det) +
                               " is numerically degenerate at the evaluation point");
}

double Surface::eps_at(const Point4& p, int budget) const {
    EvalContext ctx(p, budget);
    check_frame(ctx);
    return ctx.eval(eps_, 0).value();
}

FrameSample Surface::frame_at(const Point4& p, int budget) const {
    EvalContext ctx(p, budget);
    check_frame(ctx);
    FrameSample s;
    s.g11 = ctx.eval(g_[0][0], 0).value();
    s.g12 = ctx.eval(g_[0][1], 0).value();
    s.g22 = ctx.eval(g_[1][1], 0).value();
    s.det_g = ctx.eval(det_, 0).value();
    s.eps = ctx.eval(eps_, 0).value();
    for (int i = 0; i < 2; ++i) {
        s.ell_lo[i] = ctx.eval(ell_lo_[i], 0).value();
        s.ell_hi[i] = ctx.eval(ell_hi_[i], 0).value();
        s.m_lo[i] = ctx.eval(m_lo_[i], 0).value();
        s.m_hi[i] = ctx.eval(m_hi_[i], 0).value();
    }
    s.main_scalar = ctx.eval(I_, 0).value();
    return s;
}

SpraySample Surface::spray_at(const Point4& p, int budget) const {
    EvalContext ctx(p, budget);
    check_frame(ctx);
    SpraySample s;
    for (int i = 0; i < 2; ++i) {
        double a = ctx.eval(G_[i], 0).value();
        double b = ctx.eval(G_alt_[i], 0).value();
        if (rel_gap(a, b) > kSprayTol)
            throw SprayMismatch("spray routes disagree: frame route " + std::to_string(a) +
                                " vs metric-inverse route " + std::to_string(b));
        s.G[i] = a;
    }
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) s.Gj[i][j] = ctx.eval(Gj_[i][j], 0).value();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) s.Gjk[i][j][k] = ctx.eval(Gjk_[i][j][k], 0).value();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int r = 0; r < 2; ++r) s.B[i][j][k][r] = ctx.eval(B_[i][j][k][r], 0).value();
    s.J = ctx.eval(J_, 0).value();
    s.I_v1 = ctx.eval(I_v1_, 0).value();
    s.I_v2 = ctx.eval(I_v2_, 0).value();
    s.I_h1 = ctx.eval(I_h1_, 0).value();
    s.I_h2 = ctx.eval(I_h2_, 0).value();
    s.I_two = ctx.eval(I_two_, 0).value();
    s.R = gauss_eval(ctx).R;
    return s;
}

GaussSample Surface::gauss_eval(EvalContext& ctx) const {
    GaussSample out;
    double den[2], num[2];
    for (int k = 0; k < 2; ++k) den[k] = ctx.eval(probe_den_[k], 0).value();
    double amax = std::max(std::fabs(den[0]), std::fabs(den[1]));
    if (!(amax > 0.0) || !std::isfinite(amax))
        throw ProbeDegenerate("both curvature probes are degenerate at the evaluation point");
    int primary = std::fabs(den[0]) >= std::fabs(den[1]) ? 0 : 1;
    bool have[2] = {false, false};
    for (int k = 0; k < 2; ++k) {
        out.denom[k] = den[k];
        out.R_probe[k] = std::numeric_limits<double>::quiet_NaN();
        if (std::fabs(den[k]) >= 1e-3 * amax) {
            num[k] = ctx.eval(probe_num_[k], 0).value();
            out.R_probe[k] = -num[k] / den[k];
            have[k] = true;
        }
    }
    out.R = out.R_probe[primary];
    if (have[0] && have[1] && rel_gap(out.R_probe[0], out.R_probe[1]) > kProbeTol)
        throw ProbeDisagreement("curvature probes disagree: " + std::to_string(out.R_probe[0]) +
                                " vs " + std::to_string(out.R_probe[1]));
    return out;
}

GaussSample Surface::gauss_at(const Point4& p, int budget) const {
    EvalContext ctx(p, budget);
    check_frame(ctx);
    return gauss_eval(ctx);
}

BaseResiduals Surface::base_class_at(const Point4& p, int budget) const {
    EvalContext ctx(p, budget);
    check_frame(ctx);
    double i0 = ctx.eval(I_, 0).value();
    double ih1 = ctx.eval(I_h1_, 0).value();
    double ih2 = ctx.eval(I_h2_, 0).value();
    double iv2 = ctx.eval(I_v2_, 0).value();
    double i2 = ctx.eval(I_two_, 0).value();
    double i2v2 = ctx.eval(I_two_v2_, 0).value();
    double eps = ctx.eval(eps_, 0).value();

    BaseResiduals r;
    r.landsberg = {std::fabs(ih1), 1.0};
    r.berwald = {std::max(std::fabs(ih1), std::fabs(ih2)), 1.0};
    r.t_condition = {std::fabs(iv2), 1.0};
    double t1 = 6.0 * ih1, t2 = eps * i2v2, t3 = 2.0 * i0 * i2;
    r.douglas = {std::fabs(t1 + t2 + t3), std::max({std::fabs(t1), std::fabs(t2), std::fabs(t3)})};
    r.riemannian = {std::fabs(i0), 1.0};
    return r;
}

} // namespace finsler
