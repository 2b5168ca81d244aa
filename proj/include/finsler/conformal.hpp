#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "finsler/geometry.hpp"

namespace finsler {

// Pointwise data of the rescaling factor: its transverse fiber derivatives,
// the induced quadratic-form scalars and the two spray-shift coefficients.
struct RescaleSample {
    double phi = 0;
    double phi2 = 0, phi22 = 0;  // first/second transverse fiber derivatives
    double sigma = 0;            // phi22 + eps*I*phi2 + 2*phi2^2
    double rho = 0;              // 1 / (sigma + eps - phi2^2)
    double s = 0;                // frame normalization sqrt(|rho|) > 0
    double admissibility = 0;    // direct quadratic-form value; equals 1/rho
    double P = 0, Q = 0;         // radial / transverse spray shifts
};

// The rescaled surface's frame and main scalar at one point, computed from
// the base frame by the transformation rules (no second surface involved).
struct BarFrameSample {
    double F_bar = 0;
    std::array<double, 2> ell_lo{}, ell_hi{}, m_lo{}, m_hi{};
    double I_bar = 0;      // log-reciprocal route (primary)
    double I_bar_alt = 0;  // quadratic-form route (must agree)
};

// Rescaled spray/connection tower at one point.  The closed-form rank-one
// corrections are evaluated alongside the mechanical fiber derivatives and
// must agree; spray_at throws FormulaMismatch otherwise.
struct BarSpraySample {
    std::array<double, 2> G{};
    double Gj[2][2]{};
    double Gjk[2][2][2]{};
    double B[2][2][2][2]{};
    double D_gap = 0;  // projective-factor relation residual (normalized)
};

// Derivatives of the rescaled main scalar through the rescaled operators,
// with their closed-form counterparts.
struct BarDerivSample {
    double Ia = 0;         // radial horizontal derivative of I_bar
    double Ib = 0;         // transverse horizontal derivative
    double Ivb = 0;        // transverse vertical derivative
    double Id = 0;         // vb(ha(I_bar)) + hb(I_bar)
    double Id_closed = 0;  // eps * e^-phi * rho * (I_two + chi)
    double Ia_closed = 0;  // -(1/2) e^-phi s^3 [ -2 I_h1 + psi + eps phi2 (I_two + chi) ]
    double J_bar = 0;      // F_bar * Ia  (rescaled Landsberg scalar, F-weighted)
    double J_rho_form = 0, J_sigma_form = 0;  // the two closed forms of F * ha(I_bar)
    double T_vb = 0;       // vb(I_bar)
    double T_closed = 0;   // closed form of the same scalar
};

struct BarResiduals {
    Resid landsberg, berwald, t_condition, douglas, riemannian;
};

// Whether the rescaled connection can come from rescaling a quadratic-energy
// metric.  Preconditions: the base must be quadratic-energy and the rescaled
// metric Berwald-type; otherwise `status` reports why the question is moot.
struct MetrizabilitySample {
    enum class Status { Ok, BaseNotQuadratic, NotBerwald };
    Status status = Status::Ok;
    double m_fiber_deriv = 0;      // max |d(M^i_jk)/dy^r|  (connection linearity)
    double defining_relation = 0;  // normalized residual of the compatibility identity
    double phi_horizontal = 0;     // max(|h1 phi|, |h2 phi|)
    bool metrizable = false;       // phi_horizontal < threshold
};

// Whether the rescaled metric has vanishing spray in this chart (and hence is
// locally a norm independent of position).
struct FlatnessSample {
    std::array<double, 2> d_chart{};  // d(e^phi F)/dx^j, normalized
    double spray_radial = 0;          // P + (radial part of base spray)
    double spray_transverse = 0;      // Q + (transverse part of base spray)
    double necessary = 0;             // scalar that must vanish if flat
    bool flat = false;
};

// Douglas-type data: whether the projective class keeps its Douglas property
// under the rescaling, with reduced forms for Berwald-type and
// quadratic-energy bases.
struct DouglasSample {
    double base = 0;         // base Douglas residual (normalized)
    double bar = 0;          // rescaled Douglas residual (normalized)
    double preservation = 0; // |Q|: zero iff the rescale keeps the spray projectively flat-ish
    double berwald_base_form = 0;    // 3 psi - eps*chi_v2 - I*chi   (valid when base is Berwald)
    double quadratic_base_form = 0;  // 9 eps Q + 10 Q22 + eps Q2222 (valid when base is quadratic)
};

// Berwald-type conditions on the rescaled metric when the base has quadratic
// energy, written directly in the spray shifts.
struct BerwaldSample {
    double r1 = 0, r2 = 0;     // both vanish iff the rescaled metric is Berwald
    double bar_residual = 0;   // operator-route residual max(|ha I_bar|, |hb I_bar|)
    double base_riemannian = 0;
};

// An anisotropic rescaling  F -> e^phi(x,y) * F  of a conic surface, with phi
// 0-homogeneous in y.  Everything the rescaled surface carries (frame, spray,
// connection, curvature, scalars) is expressed through base-surface fields;
// `fresh()` builds the rescaled surface from scratch instead, which the test
// suite uses as an independent oracle.
class Conformal {
public:
    Conformal(std::shared_ptr<const Surface> base, Field phi);

    const Surface& base() const { return *base_; }
    const std::shared_ptr<const Surface>& base_ptr() const { return base_; }

    // --- rescaling-factor fields ---
    const Field& phi() const { return phi_; }
    const Field& phi2() const { return phi2_; }
    const Field& phi22() const { return phi22_; }
    const Field& phi_h1() const { return phi_h1_; }
    const Field& phi_h2() const { return phi_h2_; }
    const Field& sigma() const { return sigma_; }
    const Field& inv_rho() const { return inv_rho_; }
    const Field& admissibility() const { return adm_; }
    const Field& rho() const { return rho_; }
    const Field& s() const { return s_; }
    const Field& P() const { return P_; }
    const Field& Q() const { return Q_; }
    const Field& P2() const { return P2_; }
    const Field& Q2() const { return Q2_; }

    // --- rescaled surface fields (transform route) ---
    const Field& F_bar() const { return F_bar_; }
    const Field& ell_bar_lo(int i) const { return ell_bar_lo_[check2(i)]; }
    const Field& ell_bar_hi(int i) const { return ell_bar_hi_[check2(i)]; }
    const Field& m_bar_lo(int i) const { return m_bar_lo_[check2(i)]; }
    const Field& m_bar_hi(int i) const { return m_bar_hi_[check2(i)]; }
    const Field& I_bar() const { return I_bar_; }
    const Field& I_bar_alt() const { return I_bar_alt_; }
    const Field& G_bar(int i) const { return G_bar_[check2(i)]; }
    const Field& Gj_bar(int i, int j) const { return Gj_bar_[check2(i)][check2(j)]; }
    const Field& Gjk_bar(int i, int j, int k) const {
        return Gjk_bar_[check2(i)][check2(j)][check2(k)];
    }
    const Field& B_bar(int i, int j, int k, int r) const {
        return B_bar_[check2(i)][check2(j)][check2(k)][check2(r)];
    }
    // closed-form counterparts (rank-one corrections to the base objects)
    const Field& Gj_closed(int i, int j) const { return Gj_closed_[check2(i)][check2(j)]; }
    const Field& Gjk_closed(int i, int j, int k) const {
        return Gjk_closed_[check2(i)][check2(j)][check2(k)];
    }
    const Field& B_closed(int i, int j, int k, int r) const {
        return B_closed_[check2(i)][check2(j)][check2(k)][check2(r)];
    }
    const Field& psi_l2() const { return psi_l2_; }  // F^2 * psi
    const Field& chi_l2() const { return chi_l2_; }  // F^2 * chi

    // --- rescaled scalar derivative operators ---
    Field va(const Field& f) const;  // radial vertical (same as base v1)
    Field vb(const Field& f) const;  // transverse vertical
    Field ha(const Field& f) const;  // radial horizontal
    Field hb(const Field& f) const;  // transverse horizontal

    // --- derived scalars ---
    const Field& J_bar() const { return J_bar_; }
    const Field& J_rho_form() const { return J_rho_form_; }
    const Field& J_sigma_form() const { return J_sigma_form_; }
    const Field& T_vb() const { return T_vb_; }
    const Field& T_closed() const { return T_closed_; }
    const Field& I_d() const { return I_d_; }
    const Field& I_d_closed() const { return I_d_closed_; }
    const Field& I_a_closed() const { return I_a_closed_; }
    const Field& pq_relation() const { return pq_relation_; }    // 2 eps phi2 Q + 2P - L h1(phi)
    const Field& q_identity() const { return q_identity_; }      // mixed P/Q differential identity
    const Field& rho_identity() const { return rho_identity_; }  // (rho-eps) + eps rho (sigma - phi2^2)
    const Field& M(int i, int j, int k) const { return M_[check2(i)][check2(j)][check2(k)]; }
    const Field& berwald_r1() const { return r1_; }
    const Field& berwald_r2() const { return r2_; }
    const Field& douglas_quartic() const { return quartic_; }
    const Field& douglas_berwald_form() const { return douglas_thm_; }
    const Field& flat_necessary() const { return necessary_; }

    // --- per-point operations (throw Inadmissible at a rho pole, FormulaMismatch
    //     when two independent routes to the same quantity disagree) ---
    RescaleSample data_at(const Point4& p, int budget = kDefaultBudget) const;
    BarFrameSample frame_at(const Point4& p, int budget = kDefaultBudget) const;
    BarSpraySample spray_at(const Point4& p, int budget = kDefaultBudget) const;
    BarDerivSample derivs_at(const Point4& p, int budget = kDefaultBudget) const;
    BarResiduals bar_class_at(const Point4& p, int budget = kDefaultBudget) const;
    MetrizabilitySample metrizability_at(const Point4& p, double threshold = 1e-8,
                                         int budget = kDefaultBudget) const;
    FlatnessSample flatness_at(const Point4& p, double threshold = 1e-8,
                               int budget = kDefaultBudget) const;
    DouglasSample douglas_at(const Point4& p, int budget = kDefaultBudget) const;
    BerwaldSample berwald_at(const Point4& p, int budget = kDefaultBudget) const;

    // The rescaled surface built from scratch out of e^phi * F.  Independent
    // of every transform-route field above; used as the master oracle.
    const std::shared_ptr<const Surface>& fresh() const { return fresh_; }

private:
    static int check2(int i);
    // evaluates the admissibility guards and returns (rho, s)
    std::pair<double, double> guard_at(EvalContext& ctx) const;
    Field cached_op(int which, const Field& f, Field (Conformal::*build)(const Field&) const) const;
    Field build_va(const Field& f) const;
    Field build_vb(const Field& f) const;
    Field build_ha(const Field& f) const;
    Field build_hb(const Field& f) const;

    std::shared_ptr<const Surface> base_;
    std::shared_ptr<const Surface> fresh_;

    Field phi_, phi2_, phi22_, phi_h1_, phi_h2_;
    Field sigma_, sigma2_, inv_rho_, adm_, rho_, rho2_, rho22_, s_;
    Field qcore_, P_, Q_, P2_, Q2_, P22_, Q22_, P222_, Q222_, Q2222_;
    Field e_phi_, e_mphi_;  // e^phi, e^-phi
    Field F_bar_;
    Field ell_bar_lo_[2], ell_bar_hi_[2], m_bar_lo_[2], m_bar_hi_[2];
    Field I_bar_, I_bar_alt_;
    Field G_bar_[2];
    Field Gj_bar_[2][2], Gjk_bar_[2][2][2], B_bar_[2][2][2][2];
    Field Gj_closed_[2][2], Gjk_closed_[2][2][2], B_closed_[2][2][2][2];
    Field psi_l2_, chi_l2_;
    Field J_bar_, J_rho_form_, J_sigma_form_, T_vb_, T_closed_;
    Field I_d_, I_d_closed_, I_a_closed_;
    Field pq_relation_, q_identity_, rho_identity_;
    Field M_[2][2][2];
    Field Md_[2][2][2][2];   // fiber derivatives of M
    Field def_rel_lhs_[2], def_rel_rhs_[2];
    Field r1_, r2_, quartic_, douglas_thm_;
    Field necessary_;
    Field d_chart_[2], flat_radial_, flat_transverse_;

    struct OpEntry {
        Field input;
        Field result;
    };
    mutable std::mutex op_mutex_;
    mutable std::map<std::pair<int, const FieldNode*>, OpEntry> op_cache_;
};

} // namespace finsler
