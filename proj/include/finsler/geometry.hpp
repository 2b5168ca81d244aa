#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "finsler/field.hpp"

namespace finsler {

// Values of the moving frame attached to (F, point): metric components, the
// flag/support covector pair (ell) and its transverse partner (m), the
// signature sign and the main scalar.
struct FrameSample {
    double g11 = 0, g12 = 0, g22 = 0;
    double det_g = 0;
    double eps = 0;  // sign(det g)
    std::array<double, 2> ell_lo{}, ell_hi{}, m_lo{}, m_hi{};
    double main_scalar = 0;
};

// Spray/connection values at one point, plus the derived scalars used by the
// classification checks.
struct SpraySample {
    std::array<double, 2> G{};            // spray coefficients
    double Gj[2][2]{};                    // nonlinear connection  dG^i/dy^j
    double Gjk[2][2][2]{};                // Berwald connection
    double B[2][2][2][2]{};               // Berwald curvature  dGjk/dy^r
    double J = 0;                         // F * (main scalar)_h1
    double R = 0;                         // Gauss curvature (probe-reconciled)
    double I_v1 = 0, I_v2 = 0, I_h1 = 0, I_h2 = 0, I_two = 0;
};

// One residual together with the magnitude of the largest term entering its
// defining expression; normalized() is what verdict thresholds apply to.
struct Resid {
    double raw = 0;
    double scale = 1;
    double normalized() const { return raw / (scale > 1.0 ? scale : 1.0); }
};

struct BaseResiduals {
    Resid landsberg;    // (main scalar)_h1
    Resid berwald;      // max(|I_h1|, |I_h2|)
    Resid t_condition;  // I_v2
    Resid douglas;      // 6 I_h1 + eps*(I_two)_v2 + 2 I I_two
    Resid riemannian;   // |I|
};

struct GaussSample {
    double R = 0;                     // value from the better-conditioned probe
    std::array<double, 2> R_probe{};  // per-probe values (NaN where degenerate)
    std::array<double, 2> denom{};    // probe f_v2 values
};

// A 2D conic pseudo-Finsler surface built from a positively 1-homogeneous
// field F(x, y).  Construction assembles the whole lazy DAG of geometric
// fields; nothing is evaluated until a point is supplied.
//
// Scalar derivative notation used throughout (f any scalar field):
//   v1(f) = y^i df/dy^i                     (radial vertical derivative)
//   v2(f) = eps * F * (df/dy^i) m^i         (transverse vertical derivative)
//   h1(f) = (delta_i f) ell^i               (radial horizontal derivative)
//   h2(f) = eps * (delta_i f) m^i           (transverse horizontal derivative)
// with delta_i = d/dx^i - Gj(j,i) d/dy^j.
class Surface {
public:
    explicit Surface(Field F, std::vector<std::pair<Field, bool>> domain = {},
                     std::string label = "F");

    // --- fields (shared handles into the DAG); indices are 1-based ---
    const Field& F() const { return F_; }
    const Field& L() const { return L_; }                    // F^2
    const Field& g(int i, int j) const;
    const Field& det_g() const { return det_; }
    const Field& eps() const { return eps_; }
    const Field& sqrt_eps_det() const { return sq_; }        // sqrt(eps * det g)
    const Field& ell_lo(int i) const { return ell_lo_[check2(i)]; }
    const Field& ell_hi(int i) const { return ell_hi_[check2(i)]; }
    const Field& m_lo(int i) const { return m_lo_[check2(i)]; }
    const Field& m_hi(int i) const { return m_hi_[check2(i)]; }
    const Field& I() const { return I_; }                    // main scalar
    const Field& G(int i) const { return G_[check2(i)]; }
    const Field& G_alt(int i) const { return G_alt_[check2(i)]; }  // metric-inverse route
    const Field& Gj(int i, int j) const { return Gj_[check2(i)][check2(j)]; }
    const Field& Gjk(int i, int j, int k) const { return Gjk_[check2(i)][check2(j)][check2(k)]; }
    const Field& B(int i, int j, int k, int r) const {
        return B_[check2(i)][check2(j)][check2(k)][check2(r)];
    }
    const Field& I_h1() const { return I_h1_; }
    const Field& I_h2() const { return I_h2_; }
    const Field& I_v1() const { return I_v1_; }
    const Field& I_v2() const { return I_v2_; }
    const Field& I_two() const { return I_two_; }            // v2(h1(I)) + h2(I)
    const Field& I_two_v2() const { return I_two_v2_; }
    const Field& J() const { return J_; }                    // F * h1(I)
    const Field& douglas() const { return douglas_; }

    // --- scalar derivative operators (cached per input field) ---
    Field v1(const Field& f) const;
    Field v2(const Field& f) const;
    Field h1(const Field& f) const;
    Field h2(const Field& f) const;
    Field delta(int i, const Field& f) const;

    // --- per-point operations ---
    bool in_domain(const Point4& p, int budget = kDefaultBudget) const;
    double eps_at(const Point4& p, int budget = kDefaultBudget) const;
    FrameSample frame_at(const Point4& p, int budget = kDefaultBudget) const;
    SpraySample spray_at(const Point4& p, int budget = kDefaultBudget) const;
    GaussSample gauss_at(const Point4& p, int budget = kDefaultBudget) const;
    BaseResiduals base_class_at(const Point4& p, int budget = kDefaultBudget) const;

    const std::string& label() const { return label_; }
    const std::vector<std::pair<Field, bool>>& domain() const { return domain_; }

private:
    static int check2(int i);
    void check_frame(EvalContext& ctx) const;  // OutsideCone / DegenerateMetric guards
    GaussSample gauss_eval(EvalContext& ctx) const;
    Field cached_op(int op, int aux, const Field& f,
                    Field (Surface::*build)(int, const Field&) const) const;
    Field build_v(int which, const Field& f) const;
    Field build_h(int which, const Field& f) const;
    Field build_delta(int i, const Field& f) const;

    std::string label_;
    std::vector<std::pair<Field, bool>> domain_;

    Field F_, L_;
    Field ell_lo_[2], ell_hi_[2];
    Field g_[2][2], det_, eps_, sq_;
    Field m_lo_[2], m_hi_[2];
    Field I_;
    Field curl_, rad_;
    Field G_[2], G_alt_[2];
    Field Gj_[2][2], Gjk_[2][2][2], B_[2][2][2][2];
    Field I_h1_, I_h2_, I_v1_, I_v2_, I_two_, I_two_v2_, J_, douglas_;
    Field probe_num_[2], probe_den_[2];  // Gauss curvature probes

    struct OpEntry {
        Field input;  // keeps the key pointer alive
        Field result;
    };
    mutable std::mutex op_mutex_;
    mutable std::map<std::tuple<int, int, const FieldNode*>, OpEntry> op_cache_;
};

// Convenience: max over the two probes' homogeneity defects used in audits.
inline constexpr std::array<double, 3> kHomogeneityLambdas = {0.5, 2.0, 3.0};

} // namespace finsler
