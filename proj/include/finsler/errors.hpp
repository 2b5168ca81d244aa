#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace finsler {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- truncated-jet arithmetic -------------------------------------------

// A value outside the real domain of an operation was hit while evaluating
// (division by a zero constant term, sqrt/ln of a non-positive constant
// term, |.| at zero, non-integer power of a non-positive base).
struct DomainError : Error {
    using Error::Error;
};

// An operation needed more derivative orders than the jet (or the configured
// degree budget) carries.  `chain` records the operator nesting that led to
// the request, innermost first.
struct DegreeExhausted : Error {
    explicit DegreeExhausted(const std::string& what) : Error(what) {}
    std::vector<std::string> chain;
    std::string chained_message() const {
        std::string s = what();
        if (!chain.empty()) {
            s += " [requested by: ";
            for (std::size_t i = chain.size(); i-- > 0;) {
                s += chain[i];
                if (i != 0) s += " -> ";
            }
            s += "]";
        }
        return s;
    }
};

// Binary jet arithmetic on operands anchored at different base points.
struct JetMismatch : Error {
    using Error::Error;
};

// ---- expression parsing ---------------------------------------------------

struct SyntaxError : Error {
    SyntaxError(const std::string& what, int off) : Error(what), offset(off) {}
    int offset = -1;
};

struct UnknownIdentifier : Error {
    UnknownIdentifier(const std::string& what, int off) : Error(what), offset(off) {}
    int offset = -1;
};

// ---- metric geometry ------------------------------------------------------

// det g is (numerically) zero at the evaluation point.
struct DegenerateMetric : Error {
    using Error::Error;
};

// Evaluation point violates the declared domain inequalities or y = 0.
struct OutsideCone : Error {
    using Error::Error;
};

// The two independent routes to the geodesic spray disagree.
struct SprayMismatch : Error {
    using Error::Error;
};

// Both curvature probes are degenerate at the point (cannot happen for a
// nondegenerate frame; kept as a hard guard).
struct ProbeDegenerate : Error {
    using Error::Error;
};

// The two curvature probes give different values.
struct ProbeDisagreement : Error {
    using Error::Error;
};

// ---- conformal change -----------------------------------------------------

// The rescaled metric is singular at the point (its regularity factor has a
// pole or zero there).
struct Inadmissible : Error {
    using Error::Error;
};

// The square root normalizing the rescaled frame has no positive radicand at
// the point.  The frame uses sqrt(|rho|), so after the admissibility guard this
// only fires on non-finite input; it is kept as a defensive backstop.
struct NegativeRho : Error {
    using Error::Error;
};

// Two formulas for the same rescaled object disagree beyond tolerance.
struct FormulaMismatch : Error {
    using Error::Error;
};

// A check that requires the rescaled metric to be Berwald was invoked on a
// point/metric where the Berwald residual is not small.
struct NotBerwald : Error {
    using Error::Error;
};

// A check's structural precondition (e.g. "base metric is Riemannian") does
// not hold.
struct PreconditionNotMet : Error {
    using Error::Error;
};

// sign(det g) changed across sample points of one run.
struct SignatureFlip : Error {
    using Error::Error;
};

} // namespace finsler
