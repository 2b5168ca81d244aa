#include "finsler/jet.hpp"

#include <cmath>
#include <cstdint>
#include <limits>

namespace finsler {

namespace {

// Shared enumeration of all monomials x1^e1 x2^e2 y1^e3 y2^e4 with
// e1+e2+e3+e4 <= kMaxDegree, in graded order (degree 0, then 1, ...).
// Exponent tuples are packed into base-(kMaxDegree+1) integers so that the
// index of a product monomial is one table lookup: pack(a) + pack(b).
struct Basis {
    static constexpr std::uint32_t kBase = kMaxDegree + 1;

    std::vector<std::array<std::uint8_t, 4>> exps;
    std::vector<std::uint8_t> total;
    std::vector<std::uint32_t> pack;
    std::array<std::size_t, kMaxDegree + 2> offset{};  // first index of each degree
    std::vector<std::int32_t> index_of;                // pack -> monomial index
    std::array<std::uint32_t, 4> unit{};               // pack of each coordinate

    static const Basis& get() {
        static const Basis b;
        return b;
    }

    Basis() {
        index_of.assign(kBase * kBase * kBase * kBase, -1);
        for (int t = 0; t <= kMaxDegree; ++t) {
            offset[t] = exps.size();
            for (int e1 = 0; e1 <= t; ++e1)
                for (int e2 = 0; e2 <= t - e1; ++e2)
                    for (int e3 = 0; e3 <= t - e1 - e2; ++e3) {
                        int e4 = t - e1 - e2 - e3;
                        std::uint32_t p =
                            ((static_cast<std::uint32_t>(e1) * kBase + e2) * kBase + e3) * kBase + e4;
                        index_of[p] = static_cast<std::int32_t>(exps.size());
                        exps.push_back({static_cast<std::uint8_t>(e1), static_cast<std::uint8_t>(e2),
                                        static_cast<std::uint8_t>(e3), static_cast<std::uint8_t>(e4)});
                        total.push_back(static_cast<std::uint8_t>(t));
                        pack.push_back(p);
                    }
        }
        offset[kMaxDegree + 1] = exps.size();
        unit[0] = kBase * kBase * kBase;
        unit[1] = kBase * kBase;
        unit[2] = kBase;
        unit[3] = 1;
    }
};

void check_degree(int degree) {
    if (degree < 0)
        throw Error("jet degree must be nonnegative");
    if (degree > kMaxDegree)
        throw DegreeExhausted("jet degree " + std::to_string(degree) + " exceeds the supported maximum " +
                              std::to_string(kMaxDegree));
}

} // namespace

std::size_t jet_size(int degree) {
    check_degree(degree);
    return Basis::get().offset[degree + 1];
}

Jet::Jet(const Point4& base, int degree) : base_(base), degree_(degree) {
    check_degree(degree);
    coeffs_.assign(Basis::get().offset[degree + 1], 0.0);
}

Jet Jet::constant(const Point4& base, int degree, double value) {
    Jet j(base, degree);
    j.coeffs_[0] = value;
    return j;
}

Jet Jet::coordinate(int var, const Point4& base, int degree) {
    if (var < 0 || var >= kNumVars)
        throw Error("coordinate index out of range");
    Jet j(base, degree);
    j.coeffs_[0] = base[var];
    if (degree >= 1)
        j.coeffs_[Basis::get().index_of[Basis::get().unit[var]]] = 1.0;
    return j;
}

double Jet::coeff(const std::array<int, 4>& e) const {
    int t = e[0] + e[1] + e[2] + e[3];
    for (int v : e)
        if (v < 0) throw Error("negative exponent in coefficient lookup");
    if (t > degree_)
        throw Error("coefficient of total degree " + std::to_string(t) +
                    " requested from a jet of degree " + std::to_string(degree_));
    const Basis& B = Basis::get();
    std::uint32_t p = ((static_cast<std::uint32_t>(e[0]) * Basis::kBase + e[1]) * Basis::kBase + e[2]) *
                          Basis::kBase + e[3];
    return coeffs_[B.index_of[p]];
}

Jet Jet::truncated(int degree) const {
    if (degree > degree_)
        throw DegreeExhausted("cannot extend a jet of degree " + std::to_string(degree_) + " to degree " +
                              std::to_string(degree));
    Jet j(base_, degree);
    std::copy(coeffs_.begin(), coeffs_.begin() + static_cast<std::ptrdiff_t>(j.coeffs_.size()),
              j.coeffs_.begin());
    return j;
}

Jet Jet::partial(int var) const {
    if (var < 0 || var >= kNumVars)
        throw Error("coordinate index out of range");
    if (degree_ <= 0)
        throw DegreeExhausted("partial derivative requested from a jet with no derivative orders left");
    const Basis& B = Basis::get();
    Jet r(base_, degree_ - 1);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        int e = B.exps[i][var];
        if (e == 0 || coeffs_[i] == 0.0) continue;
        r.coeffs_[B.index_of[B.pack[i] - B.unit[var]]] += coeffs_[i] * e;
    }
    return r;
}

void Jet::check_same(const Jet& o) const {
    if (base_ != o.base_)
        throw JetMismatch("jet arithmetic on operands anchored at different base points");
}

Jet Jet::operator-() const {
    Jet r = *this;
    for (double& c : r.coeffs_) c = -c;
    return r;
}

Jet& Jet::operator+=(const Jet& o) {
    check_same(o);
    if (o.degree_ < degree_) {
        degree_ = o.degree_;
        coeffs_.resize(Basis::get().offset[degree_ + 1]);
    }
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
    return *this;
}

Jet& Jet::operator-=(const Jet& o) {
    check_same(o);
    if (o.degree_ < degree_) {
        degree_ = o.degree_;
        coeffs_.resize(Basis::get().offset[degree_ + 1]);
    }
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
    return *this;
}

Jet& Jet::operator+=(double c) {
    coeffs_[0] += c;
    return *this;
}

Jet& Jet::operator-=(double c) {
    coeffs_[0] -= c;
    return *this;
}

Jet& Jet::operator*=(double c) {
    for (double& v : coeffs_) v *= c;
    return *this;
}

Jet operator*(const Jet& a, const Jet& b) {
    a.check_same(b);
    const Basis& B = Basis::get();
    int D = std::min(a.degree_, b.degree_);
    Jet r(a.base_, D);
    std::size_t na = B.offset[D + 1];
    for (std::size_t ia = 0; ia < na; ++ia) {
        double ca = a.coeffs_[ia];
        if (ca == 0.0) continue;
        std::size_t nb = B.offset[D - B.total[ia] + 1];
        std::uint32_t pa = B.pack[ia];
        for (std::size_t ib = 0; ib < nb; ++ib) {
            double cb = b.coeffs_[ib];
            if (cb == 0.0) continue;
            r.coeffs_[B.index_of[pa + B.pack[ib]]] += ca * cb;
        }
    }
    return r;
}

Jet Jet::compose_series(std::span<const double> series) const {
    // Horner scheme in u = (jet - constant term).
    Jet u = *this;
    u.coeffs_[0] = 0.0;
    Jet r = Jet::constant(base_, degree_, series[degree_]);
    for (int k = degree_ - 1; k >= 0; --k) {
        r = r * u;
        r.coeffs_[0] += series[static_cast<std::size_t>(k)];
    }
    return r;
}

Jet Jet::int_pow(long n) const {
    Jet r = Jet::constant(base_, degree_, 1.0);
    Jet b = *this;
    while (n > 0) {
        if (n & 1) r = r * b;
        n >>= 1;
        if (n > 0) b = b * b;
    }
    return r;
}

Jet operator/(const Jet& a, const Jet& b) {
    return a * (1.0 / b);
}

Jet operator/(double a, const Jet& b) {
    double c = b.value();
    if (c == 0.0 || !std::isfinite(c))
        throw DomainError("division by a jet with zero (or non-finite) constant term");
    std::vector<double> s(static_cast<std::size_t>(b.degree_) + 1);
    double p = 1.0 / c;
    for (int k = 0; k <= b.degree_; ++k) {
        s[static_cast<std::size_t>(k)] = (k % 2 == 0 ? p : -p);
        p /= c;
    }
    Jet r = b.compose_series(s);
    if (a != 1.0) r *= a;
    return r;
}

Jet sqrt(const Jet& a) {
    double c = a.value();
    if (!(c > 0.0))
        throw DomainError("sqrt of a jet with non-positive constant term");
    std::vector<double> s(static_cast<std::size_t>(a.degree_) + 1);
    s[0] = std::sqrt(c);
    for (int k = 1; k <= a.degree_; ++k)
        s[static_cast<std::size_t>(k)] = s[static_cast<std::size_t>(k - 1)] * (0.5 - (k - 1)) / (k * c);
    return a.compose_series(s);
}

Jet exp(const Jet& a) {
    std::vector<double> s(static_cast<std::size_t>(a.degree_) + 1);
    s[0] = std::exp(a.value());
    for (int k = 1; k <= a.degree_; ++k)
        s[static_cast<std::size_t>(k)] = s[static_cast<std::size_t>(k - 1)] / k;
    return a.compose_series(s);
}

Jet log(const Jet& a) {
    double c = a.value();
    if (!(c > 0.0))
        throw DomainError("log of a jet with non-positive constant term");
    std::vector<double> s(static_cast<std::size_t>(a.degree_) + 1);
    s[0] = std::log(c);
    double p = 1.0 / c;
    for (int k = 1; k <= a.degree_; ++k) {
        s[static_cast<std::size_t>(k)] = (k % 2 == 1 ? p : -p) / k;
        p /= c;
    }
    return a.compose_series(s);
}

Jet sin(const Jet& a) {
    double sc = std::sin(a.value()), cc = std::cos(a.value());
    std::vector<double> s(static_cast<std::size_t>(a.degree_) + 1);
    double fact = 1.0;
    for (int k = 0; k <= a.degree_; ++k) {
        if (k > 0) fact *= k;
        double d = (k % 4 == 0) ? sc : (k % 4 == 1) ? cc : (k % 4 == 2) ? -sc : -cc;
        s[static_cast<std::size_t>(k)] = d / fact;
    }
    return a.compose_series(s);
}

Jet cos(const Jet& a) {
    double sc = std::sin(a.value()), cc = std::cos(a.value());
    std::vector<double> s(static_cast<std::size_t>(a.degree_) + 1);
    double fact = 1.0;
    for (int k = 0; k <= a.degree_; ++k) {
        if (k > 0) fact *= k;
        double d = (k % 4 == 0) ? cc : (k % 4 == 1) ? -sc : (k % 4 == 2) ? -cc : sc;
        s[static_cast<std::size_t>(k)] = d / fact;
    }
    return a.compose_series(s);
}

Jet abs(const Jet& a) {
    double c = a.value();
    if (c > 0.0) return a;
    if (c < 0.0) return -a;
    throw DomainError("abs of a jet with zero constant term is not differentiable");
}

Jet pow(const Jet& a, double p) {
    if (std::isfinite(p) && p == std::nearbyint(p) && std::fabs(p) <= 64.0) {
        long n = static_cast<long>(p);
        if (n >= 0) return a.int_pow(n);
        if (a.value() == 0.0)
            throw DomainError("negative power of a jet with zero constant term");
        return 1.0 / a.int_pow(-n);
    }
    double c = a.value();
    if (!(c > 0.0))
        throw DomainError("non-integer power of a jet with non-positive constant term");
    std::vector<double> s(static_cast<std::size_t>(a.degree_) + 1);
    s[0] = std::pow(c, p);
    for (int k = 1; k <= a.degree_; ++k)
        s[static_cast<std::size_t>(k)] = s[static_cast<std::size_t>(k - 1)] * (p - (k - 1)) / (k * c);
    return a.compose_series(s);
}

Jet pow(const Jet& a, const Jet& b) {
    a.check_same(b);
    bool b_const = true;
    for (std::size_t i = 1; i < b.coeffs_.size(); ++i)
        if (b.coeffs_[i] != 0.0) { b_const = false; break; }
    if (b_const) {
        // keep the overall degree contract: result degree = min of operands
        Jet r = pow(a, b.value());
        return r.degree() > b.degree() ? r.truncated(b.degree()) : r;
    }
    return exp(b * log(a));
}

} // namespace finsler
