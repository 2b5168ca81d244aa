#include "finsler/conformal.hpp"

#include <algorithm>
#include <cmath>

#include "finsler/errors.hpp"

namespace finsler {

namespace {

constexpr double kPoleTol = 1e-10;      // relative floor for |1/rho|
constexpr double kFormulaTol = 1e-6;    // agreement between independent routes
constexpr double kQuadraticTol = 1e-8;  // |main scalar| cutoff for quadratic energy
constexpr double kBerwaldTol = 1e-6;    // Berwald residual cutoff for preconditions

double rel_gap(double a, double b) {
    return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

} // namespace

int Conformal::check2(int i) {
    if (i < 1 || i > 2) throw Error("frame index out of range (must be 1 or 2)");
    return i - 1;
}

Conformal::Conformal(std::shared_ptr<const Surface> base, Field phi) : base_(std::move(base)) {
    const Surface& S = *base_;
    const Field& F = S.F();
    const Field& L = S.L();
    const Field& eps = S.eps();
    const Field& I = S.I();
    const Field& Iv2 = S.I_v2();
    Field Iv2v2 = S.v2(S.I_v2());

    phi_ = ftag("phi", std::move(phi));
    phi2_ = S.v2(phi_);
    phi22_ = S.v2(phi2_);
    phi_h1_ = S.h1(phi_);
    phi_h2_ = S.h2(phi_);

    sigma_ = ftag("sigma", phi22_ + eps * (I * phi2_) + 2.0 * (phi2_ * phi2_));
    sigma2_ = S.v2(sigma_);
    inv_rho_ = ftag("1/rho", sigma_ + eps - phi2_ * phi2_);

    // Independent regularity form: the same scalar assembled from the raw
    // fiber Hessian of phi instead of the v2-derivative chain.
    {
        Field dphi[2] = {fpartial(2, phi_), fpartial(3, phi_)};
        Field A[2][2];
        A[0][0] = fpartial(2, dphi[0]) + dphi[0] * dphi[0];
        A[0][1] = fpartial(3, dphi[0]) + dphi[0] * dphi[1];
        A[1][0] = A[0][1];
        A[1][1] = fpartial(3, dphi[1]) + dphi[1] * dphi[1];
        Field q = fconst(0.0);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) q = q + A[i][j] * (S.m_hi(i + 1) * S.m_hi(j + 1));
        adm_ = ftag("admissibility", L * q + eps);
    }

    rho_ = ftag("rho", 1.0 / inv_rho_);
    rho2_ = S.v2(rho_);
    rho22_ = S.v2(rho2_);
    // The rescaled signature is sign(rho), which can differ from the base
    // signature.  Writing the frame normalization with s = sqrt(|rho|) and the
    // companion factor rho/s = sign(rho)*s keeps every formula real and valid
    // in both regimes; when sign(rho) == sign(det g) they collapse to the
    // familiar single-signature forms.
    s_ = ftag("s", fsqrt(ffunc(Func::Abs, rho_)));
    Field rs = rho_ / s_;  // sign(rho) * s

    qcore_ = ftag("spray-shift core", phi2_ * phi_h1_ + S.v2(phi_h1_) - 2.0 * phi_h2_);
    Q_ = ftag("Q", 0.5 * (eps * (rho_ * (L * qcore_))));
    P_ = ftag("P", 0.5 * (L * phi_h1_) - 0.5 * (rho_ * (L * (phi2_ * qcore_))));
    P2_ = S.v2(P_);
    Q2_ = S.v2(Q_);
    P22_ = S.v2(P2_);
    Q22_ = S.v2(Q2_);
    P222_ = S.v2(P22_);
    Q222_ = S.v2(Q22_);
    Q2222_ = S.v2(Q222_);

    e_phi_ = fexp(phi_);
    e_mphi_ = fexp(-phi_);
    F_bar_ = ftag("rescaled F", e_phi_ * F);

    for (int i = 0; i < 2; ++i) {
        ell_bar_lo_[i] = e_phi_ * (S.ell_lo(i + 1) + phi2_ * S.m_lo(i + 1));
        ell_bar_hi_[i] = e_mphi_ * S.ell_hi(i + 1);
        m_bar_lo_[i] = (e_phi_ / s_) * S.m_lo(i + 1);
        m_bar_hi_[i] = (eps * (e_mphi_ * rs)) * (S.m_hi(i + 1) - (eps * phi2_) * S.ell_hi(i + 1));
    }

    I_bar_ = ftag("rescaled main scalar",
                  (eps * rs) * (I + 2.0 * (eps * phi2_) - 0.5 * (eps * (rho2_ / rho_))));
    I_bar_alt_ = ftag("rescaled main scalar (alt)",
                      (s_ * (s_ * s_)) * ((1.0 + eps * sigma_) * I + 0.5 * sigma2_ +
                                          phi2_ * (sigma_ + 2.0 * eps)));

    // Rescaled spray: base spray shifted along the frame directions.
    for (int i = 0; i < 2; ++i)
        G_bar_[i] = ftag("rescaled G", S.G(i + 1) + Q_ * S.m_hi(i + 1) + P_ * S.ell_hi(i + 1));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) Gj_bar_[i][j] = fpartial(2 + j, G_bar_[i]);
    for (int i = 0; i < 2; ++i) {
        Gjk_bar_[i][0][0] = fpartial(2, Gj_bar_[i][0]);
        Gjk_bar_[i][0][1] = fpartial(3, Gj_bar_[i][0]);
        Gjk_bar_[i][1][0] = Gjk_bar_[i][0][1];
        Gjk_bar_[i][1][1] = fpartial(3, Gj_bar_[i][1]);
    }
    for (int i = 0; i < 2; ++i) {
        Field b000 = fpartial(2, Gjk_bar_[i][0][0]);
        Field b001 = fpartial(3, Gjk_bar_[i][0][0]);
        Field b011 = fpartial(3, Gjk_bar_[i][0][1]);
        Field b111 = fpartial(3, Gjk_bar_[i][1][1]);
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int r = 0; r < 2; ++r) {
                    int ones = j + k + r;
                    B_bar_[i][j][k][r] =
                        ones == 0 ? b000 : ones == 1 ? b001 : ones == 2 ? b011 : b111;
                }
    }

    // Closed-form counterparts: rank-one frame corrections to the base tower.
    Field cEll = P2_ - Q_;
    Field cM = eps * P_ + Q2_ - eps * (I * Q_);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            Gj_closed_[i][j] =
                S.Gj(i + 1, j + 1) +
                (1.0 / F) * (2.0 * (P_ * (S.ell_hi(i + 1) * S.ell_lo(j + 1))) +
                             cEll * (S.ell_hi(i + 1) * S.m_lo(j + 1)) +
                             2.0 * (Q_ * (S.m_hi(i + 1) * S.ell_lo(j + 1))) +
                             cM * (S.m_hi(i + 1) * S.m_lo(j + 1)));

    Field dEll = eps * P_ + P22_ - 2.0 * Q2_ + eps * (I * P2_);
    Field dM = 2.0 * (eps * P2_) + eps * Q_ + Q22_ - eps * (Iv2 * Q_) - eps * (I * Q2_);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                Gjk_closed_[i][j][k] =
                    S.Gjk(i + 1, j + 1, k + 1) +
                    (1.0 / L) *
                        ((2.0 * (P_ * S.ell_hi(i + 1)) + 2.0 * (Q_ * S.m_hi(i + 1))) *
                             (S.ell_lo(j + 1) * S.ell_lo(k + 1)) +
                         (cEll * S.ell_hi(i + 1) + cM * S.m_hi(i + 1)) *
                             (S.ell_lo(j + 1) * S.m_lo(k + 1) + S.ell_lo(k + 1) * S.m_lo(j + 1)) +
                         (dEll * S.ell_hi(i + 1) + dM * S.m_hi(i + 1)) *
                             (S.m_lo(j + 1) * S.m_lo(k + 1)));

    psi_l2_ = ftag("curvature shift, radial part",
                   (Iv2 - 3.0) * (eps * Q_) + ((1.0 + Iv2) * eps + 2.0 * (I * I)) * P2_ + P222_ -
                       3.0 * Q22_ + 3.0 * (eps * (I * P22_)) - 3.0 * (eps * (I * Q2_)) +
                       2.0 * (I * P_));
    chi_l2_ = ftag("curvature shift, transverse part",
                   3.0 * P_ - (I + eps * Iv2v2 + I * Iv2) * Q_ -
                       (2.0 * (eps * Iv2) + I * I - eps) * Q2_ + 3.0 * (eps * P22_) + Q222_ +
                       3.0 * (I * P2_));
    for (int i = 0; i < 2; ++i) {
        Field corr = (1.0 / (F * L)) * (psi_l2_ * S.ell_hi(i + 1) + chi_l2_ * S.m_hi(i + 1));
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int r = 0; r < 2; ++r)
                    B_closed_[i][j][k][r] =
                        S.B(i + 1, j + 1, k + 1, r + 1) +
                        corr * (S.m_lo(j + 1) * (S.m_lo(k + 1) * S.m_lo(r + 1)));
    }

    // Differential identities tying P, Q and the rescaling factor together;
    // each field must vanish identically.
    pq_relation_ = ftag("pq relation", 2.0 * (eps * (phi2_ * Q_)) + 2.0 * P_ - L * phi_h1_);
    q_identity_ = ftag("q identity", phi2_ * P_ + P2_ + eps * (phi2_ * Q2_) -
                                         (I * phi2_ + 1.0) * Q_ - L * phi_h2_);
    rho_identity_ =
        ftag("rho identity", (rho_ - eps) + eps * (rho_ * (sigma_ - phi2_ * phi2_)));

    // Rescaled Landsberg scalar three ways: through the rescaled operators,
    // and by hand-expanding the radial horizontal derivative through each of
    // the two main-scalar representations.  W(f) = L*h1(f) - 2(P v1 f + eps Q v2 f)
    // is F^2 e^phi times the rescaled radial horizontal derivative.
    J_bar_ = ftag("rescaled J", F_bar_ * ha(I_bar_));
    {
        auto W = [&](const Field& f) {
            return L * S.h1(f) - 2.0 * (P_ * S.v1(f) + eps * (Q_ * S.v2(f)));
        };
        Field WI = W(I);
        Field Wphi2 = W(phi2_);
        Field Wrho = W(rho_);
        Field Wrho2 = W(rho2_);
        Field Y = I + 2.0 * (eps * phi2_) - 0.5 * (eps * (rho2_ / rho_));
        Field WY = WI + 2.0 * (eps * Wphi2) -
                   0.5 * (eps * ((Wrho2 - (rho2_ / rho_) * Wrho) / rho_));
        J_rho_form_ = ftag("rescaled J, first closed form",
                           (eps * (rs / F)) * (WY + 0.5 * ((Y * Wrho) / rho_)));

        Field Wsigma = W(sigma_);
        Field Wsigma2 = W(sigma2_);
        Field X = (1.0 + eps * sigma_) * I + 0.5 * sigma2_ + phi2_ * (sigma_ + 2.0 * eps);
        Field WX = (1.0 + eps * sigma_) * WI + (eps * I + phi2_) * Wsigma + 0.5 * Wsigma2 +
                   (sigma_ + 2.0 * eps) * Wphi2;
        J_sigma_form_ = ftag("rescaled J, second closed form",
                             (rs / F) * (rho_ * WX + 1.5 * (X * Wrho)));

        // Transverse vertical derivative of the rescaled main scalar, operator
        // route vs the same product-rule expansion.
        Field Yv2 = Iv2 + 2.0 * (eps * phi22_) -
                    0.5 * (eps * ((rho22_ - rho2_ * (rho2_ / rho_)) / rho_));
        T_vb_ = ftag("T scalar", vb(I_bar_));
        T_closed_ =
            ftag("T scalar, closed form", eps * (rho_ * Yv2) + 0.5 * (eps * (rho2_ * Y)));
    }

    // Second-order derived scalar of the rescaled main scalar and its closed
    // forms through the curvature-shift parts.
    I_d_ = ftag("rescaled I2", vb(ha(I_bar_)) + hb(I_bar_));
    I_d_closed_ = ftag("rescaled I2, closed form",
                       eps * (e_mphi_ * (rho_ * (S.I_two() + chi_l2_ / L))));
    I_a_closed_ =
        ftag("rescaled I_h1, closed form",
             -0.5 * (e_mphi_ * (((rho_ * rho_) / s_) *
                                (-2.0 * S.I_h1() + psi_l2_ / L +
                                 eps * (phi2_ * (S.I_two() + chi_l2_ / L))))));

    // Difference tensor between the rescaled and base Berwald connections,
    // its fiber derivatives, and the compatibility relation it must satisfy
    // against the candidate quadratic energy e^{2 phi} L.
    {
        Field mEll = P2_ - Q_;
        Field mM = eps * P_ + Q2_;
        Field mEll2 = eps * P_ + P22_ - 2.0 * Q2_;
        Field mM2 = 2.0 * (eps * P2_) + eps * Q_ + Q22_;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k)
                    M_[i][j][k] =
                        (1.0 / L) *
                        ((2.0 * (P_ * S.ell_hi(i + 1)) + 2.0 * (Q_ * S.m_hi(i + 1))) *
                             (S.ell_lo(j + 1) * S.ell_lo(k + 1)) +
                         (mEll * S.ell_hi(i + 1) + mM * S.m_hi(i + 1)) *
                             (S.ell_lo(j + 1) * S.m_lo(k + 1) + S.ell_lo(k + 1) * S.m_lo(j + 1)) +
                         (mEll2 * S.ell_hi(i + 1) + mM2 * S.m_hi(i + 1)) *
                             (S.m_lo(j + 1) * S.m_lo(k + 1)));
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k)
                    for (int r = 0; r < 2; ++r) Md_[i][j][k][r] = fpartial(2 + r, M_[i][j][k]);

        Field e2 = e_phi_ * e_phi_;
        Field w = e2 * L;
        Field dw[2] = {fpartial(2, w), fpartial(3, w)};
        for (int i = 0; i < 2; ++i) {
            def_rel_lhs_[i] = L * S.delta(i + 1, e2);
            Field rhs = fconst(0.0);
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k) rhs = rhs + fcoord(2 + k) * (M_[j][i][k] * dw[j]);
            def_rel_rhs_[i] = rhs;
        }
    }

    // Spray-shift conditions specializing the classification residuals when
    // the base energy is quadratic.
    r1_ = ftag("berwald condition 1", eps * P2_ + P222_ - 3.0 * (eps * Q_) - 3.0 * Q22_);
    r2_ = ftag("berwald condition 2", 3.0 * P_ + 3.0 * (eps * P22_) + eps * Q2_ + Q222_);
    quartic_ = ftag("douglas quartic form", 9.0 * (eps * Q_) + 10.0 * Q22_ + eps * Q2222_);
    douglas_thm_ = ftag("douglas closed form",
                        3.0 * psi_l2_ - eps * S.v2(chi_l2_) - I * chi_l2_);

    // Chart-flatness of the rescaled metric: d(F_bar)/dx, the rescaled spray
    // resolved on the base frame, and a scalar that must vanish when flat.
    Field Gl = S.G(1) * S.ell_lo(1) + S.G(2) * S.ell_lo(2);
    Field Gm = S.G(1) * S.m_lo(1) + S.G(2) * S.m_lo(2);
    necessary_ = ftag("flatness scalar", L * phi_h1_ + 2.0 * (phi2_ * Gm) + 2.0 * Gl);
    for (int j = 0; j < 2; ++j) d_chart_[j] = fpartial(j, F_bar_);
    flat_radial_ = G_bar_[0] * S.ell_lo(1) + G_bar_[1] * S.ell_lo(2);
    flat_transverse_ = eps * (G_bar_[0] * S.m_lo(1) + G_bar_[1] * S.m_lo(2));

    fresh_ = std::make_shared<Surface>(F_bar_, S.domain(), S.label() + "-rescaled");
}

Field Conformal::cached_op(int which, const Field& f,
                           Field (Conformal::*build)(const Field&) const) const {
    {
        std::scoped_lock lk(op_mutex_);
        auto it = op_cache_.find(std::make_pair(which, f.get()));
        if (it != op_cache_.end()) return it->second.result;
    }
    Field r = (this->*build)(f);
    std::scoped_lock lk(op_mutex_);
    auto [it, inserted] =
        op_cache_.emplace(std::make_pair(which, f.get()), OpEntry{f, r});
    return it->second.result;  // keep the first one on a race
}

Field Conformal::build_va(const Field& f) const { return base_->v1(f); }

Field Conformal::build_vb(const Field& f) const {
    return ftag("vb", s_ * (base_->v2(f) - phi2_ * base_->v1(f)));
}

Field Conformal::build_ha(const Field& f) const {
    const Surface& S = *base_;
    return ftag("ha", e_mphi_ * (S.h1(f) - (2.0 / S.L()) * (P_ * S.v1(f) +
                                                            S.eps() * (Q_ * S.v2(f)))));
}

Field Conformal::build_hb(const Field& f) const {
    const Surface& S = *base_;
    const Field& eps = S.eps();
    Field c1 = P2_ - Q_ - 2.0 * (phi2_ * P_);
    Field c2 = eps * P_ + Q2_ - eps * (S.I() * Q_) - 2.0 * (phi2_ * Q_);
    return ftag("hb", (e_mphi_ * s_) * (S.h2(f) - phi2_ * S.h1(f) -
                                        (1.0 / S.L()) * (c1 * S.v1(f) + eps * (c2 * S.v2(f)))));
}

Field Conformal::va(const Field& f) const { return cached_op(1, f, &Conformal::build_va); }
Field Conformal::vb(const Field& f) const { return cached_op(2, f, &Conformal::build_vb); }
Field Conformal::ha(const Field& f) const { return cached_op(3, f, &Conformal::build_ha); }
Field Conformal::hb(const Field& f) const { return cached_op(4, f, &Conformal::build_hb); }

std::pair<double, double> Conformal::guard_at(EvalContext& ctx) const {
    double inv = ctx.eval(inv_rho_, 0).value();
    double sg = ctx.eval(sigma_, 0).value();
    double p2 = ctx.eval(phi2_, 0).value();
    double scale = std::max({1.0, std::fabs(sg), p2 * p2});
    if (!std::isfinite(inv) || std::fabs(inv) <= kPoleTol * scale)
        throw Inadmissible("rescaled metric is singular at the evaluation point "
                           "(regularity factor 1/rho = " +
                           std::to_string(inv) + ")");
    double rho = 1.0 / inv;
    // The frame normalization uses sqrt(|rho|); |rho| > 0 is guaranteed by the
    // pole guard above, so this only trips on non-finite garbage.
    if (!(std::fabs(rho) > 0.0) || !std::isfinite(rho))
        throw NegativeRho("frame normalization sqrt(|rho|) undefined: rho = " +
                          std::to_string(rho));
    return {rho, std::sqrt(std::fabs(rho))};
}

RescaleSample Conformal::data_at(const Point4& p, int budget) const {
    base_->eps_at(p, budget);  // cone / degeneracy guards
    EvalContext ctx(p, budget);
    auto [rho, s] = guard_at(ctx);
    RescaleSample out;
    out.phi = ctx.eval(phi_, 0).value();
    out.phi2 = ctx.eval(phi2_, 0).value();
    out.phi22 = ctx.eval(phi22_, 0).value();
    out.sigma = ctx.eval(sigma_, 0).value();
    out.rho = rho;
    out.s = s;
    out.admissibility = ctx.eval(adm_, 0).value();
    out.P = ctx.eval(P_, 0).value();
    out.Q = ctx.eval(Q_, 0).value();
    return out;
}

BarFrameSample Conformal::frame_at(const Point4& p, int budget) const {
    base_->eps_at(p, budget);
    EvalContext ctx(p, budget);
    guard_at(ctx);
    BarFrameSample out;
    out.F_bar = ctx.eval(F_bar_, 0).value();
    for (int i = 0; i < 2; ++i) {
        out.ell_lo[i] = ctx.eval(ell_bar_lo_[i], 0).value();
        out.ell_hi[i] = ctx.eval(ell_bar_hi_[i], 0).value();
        out.m_lo[i] = ctx.eval(m_bar_lo_[i], 0).value();
        out.m_hi[i] = ctx.eval(m_bar_hi_[i], 0).value();
    }
    out.I_bar = ctx.eval(I_bar_, 0).value();
    out.I_bar_alt = ctx.eval(I_bar_alt_, 0).value();
    if (rel_gap(out.I_bar, out.I_bar_alt) > kFormulaTol)
        throw FormulaMismatch("rescaled main-scalar routes disagree: " +
                              std::to_string(out.I_bar) + " vs " +
                              std::to_string(out.I_bar_alt));
    return out;
}

BarSpraySample Conformal::spray_at(const Point4& p, int budget) const {
    base_->eps_at(p, budget);
    EvalContext ctx(p, budget);
    guard_at(ctx);
    BarSpraySample out;
    for (int i = 0; i < 2; ++i) out.G[i] = ctx.eval(G_bar_[i], 0).value();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            double a = ctx.eval(Gj_bar_[i][j], 0).value();
            double b = ctx.eval(Gj_closed_[i][j], 0).value();
            if (rel_gap(a, b) > kFormulaTol)
                throw FormulaMismatch(
                    "rescaled nonlinear connection: closed form disagrees with the fiber "
                    "derivative (" +
                    std::to_string(a) + " vs " + std::to_string(b) + ")");
            out.Gj[i][j] = a;
        }
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) {
                double a = ctx.eval(Gjk_bar_[i][j][k], 0).value();
                double b = ctx.eval(Gjk_closed_[i][j][k], 0).value();
                if (rel_gap(a, b) > kFormulaTol)
                    throw FormulaMismatch(
                        "rescaled linear connection: closed form disagrees with the fiber "
                        "derivative (" +
                        std::to_string(a) + " vs " + std::to_string(b) + ")");
                out.Gjk[i][j][k] = a;
            }
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int r = 0; r < 2; ++r) {
                    double a = ctx.eval(B_bar_[i][j][k][r], 0).value();
                    double b = ctx.eval(B_closed_[i][j][k][r], 0).value();
                    if (rel_gap(a, b) > kFormulaTol)
                        throw FormulaMismatch(
                            "rescaled curvature: closed form disagrees with the fiber "
                            "derivative (" +
                            std::to_string(a) + " vs " + std::to_string(b) + ")");
                    out.B[i][j][k][r] = a;
                }
    // The antisymmetric spray pairing only picks up the transverse shift.
    double d_bar = out.G[0] * p[3] - out.G[1] * p[2];
    double g1 = ctx.eval(base_->G(1), 0).value();
    double g2 = ctx.eval(base_->G(2), 0).value();
    double d_base = g1 * p[3] - g2 * p[2];
    double q = ctx.eval(Q_, 0).value();
    double m1 = ctx.eval(base_->m_hi(1), 0).value();
    double m2 = ctx.eval(base_->m_hi(2), 0).value();
    double predicted = q * (m1 * p[3] - m2 * p[2]);
    out.D_gap = std::fabs(d_bar - d_base - predicted) /
                std::max({1.0, std::fabs(d_bar), std::fabs(d_base)});
    return out;
}

BarDerivSample Conformal::derivs_at(const Point4& p, int budget) const {
    base_->eps_at(p, budget);
    EvalContext ctx(p, budget);
    guard_at(ctx);
    BarDerivSample out;
    out.Ia = ctx.eval(ha(I_bar_), 0).value();
    out.Ib = ctx.eval(hb(I_bar_), 0).value();
    out.Ivb = ctx.eval(vb(I_bar_), 0).value();
    out.Id = ctx.eval(I_d_, 0).value();
    out.Id_closed = ctx.eval(I_d_closed_, 0).value();
    out.Ia_closed = ctx.eval(I_a_closed_, 0).value();
    out.J_bar = ctx.eval(J_bar_, 0).value();
    out.J_rho_form = ctx.eval(J_rho_form_, 0).value();
    out.J_sigma_form = ctx.eval(J_sigma_form_, 0).value();
    out.T_vb = ctx.eval(T_vb_, 0).value();
    out.T_closed = ctx.eval(T_closed_, 0).value();
    if (rel_gap(out.Ia, out.Ia_closed) > kFormulaTol)
        throw FormulaMismatch("rescaled radial derivative routes disagree: " +
                              std::to_string(out.Ia) + " vs " + std::to_string(out.Ia_closed));
    if (rel_gap(out.Id, out.Id_closed) > kFormulaTol)
        throw FormulaMismatch("rescaled second-derivative routes disagree: " +
                              std::to_string(out.Id) + " vs " + std::to_string(out.Id_closed));
    if (rel_gap(out.J_bar, out.J_rho_form) > kFormulaTol ||
        rel_gap(out.J_bar, out.J_sigma_form) > kFormulaTol)
        throw FormulaMismatch("rescaled Landsberg scalar routes disagree: " +
                              std::to_string(out.J_bar) + " vs " +
                              std::to_string(out.J_rho_form) + " vs " +
                              std::to_string(out.J_sigma_form));
    if (rel_gap(out.T_vb, out.T_closed) > kFormulaTol)
        throw FormulaMismatch("rescaled T-scalar routes disagree: " + std::to_string(out.T_vb) +
                              " vs " + std::to_string(out.T_closed));
    return out;
}

BarResiduals Conformal::bar_class_at(const Point4& p, int budget) const {
    base_->eps_at(p, budget);
    EvalContext ctx(p, budget);
    auto [rho, s] = guard_at(ctx);
    (void)s;
    double ibar = ctx.eval(I_bar_, 0).value();
    double ia = ctx.eval(ha(I_bar_), 0).value();
    double ib = ctx.eval(hb(I_bar_), 0).value();
    double ivb = ctx.eval(vb(I_bar_), 0).value();
    double id = ctx.eval(I_d_, 0).value();
    double idv = ctx.eval(vb(I_d_), 0).value();
    double eps_bar = rho > 0.0 ? 1.0 : -1.0;  // signature of the rescaled metric

    BarResiduals r;
    r.landsberg = {std::fabs(ia), 1.0};
    r.berwald = {std::max(std::fabs(ia), std::fabs(ib)), 1.0};
    r.t_condition = {std::fabs(ivb), 1.0};
    double t1 = 6.0 * ia, t2 = eps_bar * idv, t3 = 2.0 * ibar * id;
    r.douglas = {std::fabs(t1 + t2 + t3),
                 std::max({std::fabs(t1), std::fabs(t2), std::fabs(t3)})};
    r.riemannian = {std::fabs(ibar), 1.0};
    return r;
}

MetrizabilitySample Conformal::metrizability_at(const Point4& p, double threshold,
                                                int budget) const {
    base_->eps_at(p, budget);
    EvalContext ctx(p, budget);
    guard_at(ctx);
    MetrizabilitySample out;
    double i0 = ctx.eval(base_->I(), 0).value();
    if (std::fabs(i0) > kQuadraticTol) {
        out.status = MetrizabilitySample::Status::BaseNotQuadratic;
        return out;
    }
    double ia = ctx.eval(ha(I_bar_), 0).value();
    double ib = ctx.eval(hb(I_bar_), 0).value();
    if (std::max(std::fabs(ia), std::fabs(ib)) > kBerwaldTol) {
        out.status = MetrizabilitySample::Status::NotBerwald;
        return out;
    }
    double mmax = 0.0, dmax = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) {
                mmax = std::max(mmax, std::fabs(ctx.eval(M_[i][j][k], 0).value()));
                for (int r = 0; r < 2; ++r)
                    dmax = std::max(dmax, std::fabs(ctx.eval(Md_[i][j][k][r], 0).value()));
            }
    out.m_fiber_deriv = dmax / std::max(1.0, mmax);
    double rel = 0.0;
    for (int i = 0; i < 2; ++i) {
        double lhs = ctx.eval(def_rel_lhs_[i], 0).value();
        double rhs = ctx.eval(def_rel_rhs_[i], 0).value();
        rel = std::max(rel, std::fabs(lhs - rhs) /
                                std::max({1.0, std::fabs(lhs), std::fabs(rhs)}));
    }
    out.defining_relation = rel;
    double h1p = ctx.eval(phi_h1_, 0).value();
    double h2p = ctx.eval(phi_h2_, 0).value();
    out.phi_horizontal = std::max(std::fabs(h1p), std::fabs(h2p));
    out.metrizable = out.phi_horizontal < threshold;
    return out;
}

FlatnessSample Conformal::flatness_at(const Point4& p, double threshold, int budget) const {
    base_->eps_at(p, budget);
    EvalContext ctx(p, budget);
    guard_at(ctx);
    FlatnessSample out;
    double fb = ctx.eval(F_bar_, 0).value();
    for (int j = 0; j < 2; ++j) {
        double d = ctx.eval(d_chart_[j], 0).value();
        out.d_chart[j] = std::fabs(d) / std::max(1.0, std::fabs(fb));
    }
    double lv = std::fabs(ctx.eval(base_->L(), 0).value());
    out.spray_radial = std::fabs(ctx.eval(flat_radial_, 0).value()) / std::max(1.0, lv);
    out.spray_transverse = std::fabs(ctx.eval(flat_transverse_, 0).value()) / std::max(1.0, lv);
    out.necessary = std::fabs(ctx.eval(necessary_, 0).value()) / std::max(1.0, lv);
    out.flat = std::max({out.d_chart[0], out.d_chart[1], out.spray_radial,
                         out.spray_transverse}) < threshold;
    return out;
}

DouglasSample Conformal::douglas_at(const Point4& p, int budget) const {
    base_->eps_at(p, budget);
    EvalContext ctx(p, budget);
    auto [rho, s] = guard_at(ctx);
    (void)s;
    DouglasSample out;
    double eps = ctx.eval(base_->eps(), 0).value();
    double eps_bar = rho > 0.0 ? 1.0 : -1.0;

    double ih1 = ctx.eval(base_->I_h1(), 0).value();
    double i2v2 = ctx.eval(base_->I_two_v2(), 0).value();
    double i0 = ctx.eval(base_->I(), 0).value();
    double i2 = ctx.eval(base_->I_two(), 0).value();
    double t1 = 6.0 * ih1, t2 = eps * i2v2, t3 = 2.0 * i0 * i2;
    out.base = std::fabs(t1 + t2 + t3) /
               std::max({1.0, std::fabs(t1), std::fabs(t2), std::fabs(t3)});

    double ia = ctx.eval(ha(I_bar_), 0).value();
    double ibar = ctx.eval(I_bar_, 0).value();
    double id = ctx.eval(I_d_, 0).value();
    double idv = ctx.eval(vb(I_d_), 0).value();
    double u1 = 6.0 * ia, u2 = eps_bar * idv, u3 = 2.0 * ibar * id;
    out.bar = std::fabs(u1 + u2 + u3) /
              std::max({1.0, std::fabs(u1), std::fabs(u2), std::fabs(u3)});

    double q = ctx.eval(Q_, 0).value();
    double lv = std::fabs(ctx.eval(base_->L(), 0).value());
    out.preservation = std::fabs(q) / std::max(1.0, lv);

    double psi = ctx.eval(psi_l2_, 0).value();
    double chi = ctx.eval(chi_l2_, 0).value();
    double chiv2 = ctx.eval(base_->v2(chi_l2_), 0).value();
    double b1 = 3.0 * psi, b2 = eps * chiv2, b3 = i0 * chi;
    out.berwald_base_form = std::fabs(b1 - b2 - b3) /
                            std::max({1.0, std::fabs(b1), std::fabs(b2), std::fabs(b3)});

    double q22 = ctx.eval(Q22_, 0).value();
    double q4 = ctx.eval(Q2222_, 0).value();
    double c1 = 9.0 * eps * q, c2 = 10.0 * q22, c3 = eps * q4;
    out.quadratic_base_form = std::fabs(c1 + c2 + c3) /
                              std::max({1.0, std::fabs(c1), std::fabs(c2), std::fabs(c3)});
    return out;
}

BerwaldSample Conformal::berwald_at(const Point4& p, int budget) const {
    base_->eps_at(p, budget);
    EvalContext ctx(p, budget);
    guard_at(ctx);
    BerwaldSample out;
    double eps = ctx.eval(base_->eps(), 0).value();
    double qv = ctx.eval(Q_, 0).value();
    double q2 = ctx.eval(Q2_, 0).value();
    double q22 = ctx.eval(Q22_, 0).value();
    double q222 = ctx.eval(Q222_, 0).value();
    double pv = ctx.eval(P_, 0).value();
    double p2 = ctx.eval(P2_, 0).value();
    double p22 = ctx.eval(P22_, 0).value();
    double p222 = ctx.eval(P222_, 0).value();

    double a1 = eps * p2, a2 = p222, a3 = -3.0 * eps * qv, a4 = -3.0 * q22;
    out.r1 = std::fabs(a1 + a2 + a3 + a4) /
             std::max({1.0, std::fabs(a1), std::fabs(a2), std::fabs(a3), std::fabs(a4)});
    double b1 = 3.0 * pv, b2 = 3.0 * eps * p22, b3 = eps * q2, b4 = q222;
    out.r2 = std::fabs(b1 + b2 + b3 + b4) /
             std::max({1.0, std::fabs(b1), std::fabs(b2), std::fabs(b3), std::fabs(b4)});
    double ia = ctx.eval(ha(I_bar_), 0).value();
    double ib = ctx.eval(hb(I_bar_), 0).value();
    out.bar_residual = std::max(std::fabs(ia), std::fabs(ib));
    out.base_riemannian = std::fabs(ctx.eval(base_->I(), 0).value());
    return out;
}

} // namespace finsler
