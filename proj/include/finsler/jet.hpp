#pragma once

#include <array>
#include <span>
#include <vector>

#include "finsler/errors.hpp"

namespace finsler {

// The four base coordinates, in this order: x1, x2, y1, y2.
inline constexpr int kNumVars = 4;
using Point4 = std::array<double, 4>;

// Hard cap on the truncation order the monomial tables are built for.
inline constexpr int kMaxDegree = 20;

// Number of monomials in 4 variables of total degree <= d, i.e. C(d+4, 4).
std::size_t jet_size(int degree);

// A truncated Taylor expansion of a smooth function of (x1, x2, y1, y2)
// about a base point.  Coefficients are stored densely in graded order:
// all monomials of total degree 0, then 1, then 2, ...  The coefficient of
// the monomial with exponents (e1,e2,e3,e4) is the corresponding Taylor
// coefficient, i.e. the partial derivative divided by e1! e2! e3! e4!.
//
// `degree()` is the number of derivative orders that are still trustworthy.
// Operations that consume an order (partial) hand back a jet with one order
// fewer; running out is a hard DegreeExhausted error, never a silent
// truncation.  Arithmetic between jets of different degrees yields the
// smaller degree.
class Jet {
public:
    // Zero jet of the given degree.
    Jet(const Point4& base, int degree);

    static Jet constant(const Point4& base, int degree, double value);

    // The expansion of the coordinate function #var (0..3): value + t.
    static Jet coordinate(int var, const Point4& base, int degree);

    int degree() const { return degree_; }
    const Point4& base() const { return base_; }

    // Value of the underlying function at the base point.
    double value() const { return coeffs_[0]; }

    // Taylor coefficient of the monomial with the given exponents
    // (zero-filled lookup is an error if the total degree exceeds degree()).
    double coeff(const std::array<int, 4>& exps) const;

    std::span<const double> coeffs() const { return coeffs_; }
    double& raw(std::size_t i) { return coeffs_[i]; }
    double raw(std::size_t i) const { return coeffs_[i]; }

    // Copy truncated to a smaller (or equal) degree.
    Jet truncated(int degree) const;

    // Partial derivative with respect to variable #var (0..3).
    // Costs one order: the result has degree() - 1.
    Jet partial(int var) const;

    Jet operator-() const;
    Jet& operator+=(const Jet& o);
    Jet& operator-=(const Jet& o);
    Jet& operator+=(double c);
    Jet& operator-=(double c);
    Jet& operator*=(double c);

    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator+(Jet a, double b) { return a += b; }
    friend Jet operator-(Jet a, double b) { return a -= b; }
    friend Jet operator+(double a, Jet b) { return b += a; }
    friend Jet operator-(double a, Jet b) { b *= -1.0; return b += a; }
    friend Jet operator*(Jet a, double b) { return a *= b; }
    friend Jet operator*(double a, Jet b) { return b *= a; }
    friend Jet operator/(Jet a, double b) { return a *= (1.0 / b); }

    friend Jet operator*(const Jet& a, const Jet& b);
    friend Jet operator/(const Jet& a, const Jet& b);
    friend Jet operator/(double a, const Jet& b);

    // Analytic functions of a jet, expanded about its constant term.
    friend Jet sqrt(const Jet& a);   // constant term must be > 0
    friend Jet exp(const Jet& a);
    friend Jet log(const Jet& a);    // constant term must be > 0
    friend Jet sin(const Jet& a);
    friend Jet cos(const Jet& a);
    friend Jet abs(const Jet& a);    // constant term must be nonzero
    friend Jet pow(const Jet& a, double p);
    friend Jet pow(const Jet& a, const Jet& b);

private:
    // Horner evaluation of sum_k series[k] * (a - a.value())^k.
    Jet compose_series(std::span<const double> series) const;
    Jet int_pow(long n) const;
    void check_same(const Jet& o) const;

    Point4 base_{};
    int degree_ = 0;
    std::vector<double> coeffs_;
};

} // namespace finsler
