#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "finsler/jet.hpp"

namespace finsler {

// Default cap on the jet degree any coordinate leaf may be asked for.  The
// deepest derivative chains the library forms need the inputs to this order.
inline constexpr int kDefaultBudget = 8;

class FieldNode;

// A scalar field on (x, y)-space: a shared, immutable expression DAG that can
// be evaluated to a truncated jet at any point and any degree.
using Field = std::shared_ptr<const FieldNode>;

// Per-point evaluation state.  Caches the highest-degree jet computed for
// each DAG node so shared subexpressions are evaluated once.
class EvalContext {
public:
    EvalContext(const Point4& p, int budget = kDefaultBudget)
        : point_(p), budget_(budget) {}

    const Point4& point() const { return point_; }
    int budget() const { return budget_; }

    Jet eval(const Field& f, int degree);
    Jet eval(const FieldNode* f, int degree);

private:
    Point4 point_;
    int budget_;
    std::unordered_map<const FieldNode*, Jet> memo_;
};

class FieldNode {
public:
    virtual ~FieldNode() = default;
    // Compute this field's jet at ctx.point(), exact through `degree`.
    virtual Jet compute(EvalContext& ctx, int degree) const = 0;
};

// ---- constructors -----------------------------------------------------------

Field fconst(double v);
Field fcoord(int var);  // 0..3 for x1, x2, y1, y2

Field operator+(Field a, Field b);
Field operator-(Field a, Field b);
Field operator*(Field a, Field b);
Field operator/(Field a, Field b);
Field operator+(Field a, double b);
Field operator-(Field a, double b);
Field operator*(Field a, double b);
Field operator/(Field a, double b);
Field operator+(double a, Field b);
Field operator-(double a, Field b);
Field operator*(double a, Field b);
Field operator/(double a, Field b);
Field operator-(Field a);

enum class Func { Sqrt, Exp, Log, Sin, Cos, Abs, Neg };
Field ffunc(Func f, Field a, std::string where = {});
inline Field fsqrt(Field a) { return ffunc(Func::Sqrt, std::move(a)); }
inline Field fexp(Field a) { return ffunc(Func::Exp, std::move(a)); }
inline Field flog(Field a) { return ffunc(Func::Log, std::move(a)); }

Field fpow(Field a, double p, std::string where = {});
Field fpow(Field a, Field b, std::string where = {});

// Partial derivative w.r.t. variable #var; consumes one jet order.
Field fpartial(int var, Field a);

// The sign of `det_field` evaluated at degree 0, as a constant +-1 field.
// Throws DegenerateMetric if the determinant is exactly zero or non-finite.
Field fsign_det(Field det_field);

// Identity wrapper that stamps `label` onto DegreeExhausted errors passing
// through, so "ran out of derivative orders" messages name the chain of
// operators that made the request.
Field ftag(std::string label, Field a);

// ---- small helpers ----------------------------------------------------------

// Value of f at p (degree-0 evaluation).
double field_value(const Field& f, const Point4& p, int budget = kDefaultBudget);

// Max over lambdas of the relative defect of f(x, lambda*y) = lambda^r f(x, y).
double homogeneity_residual(const Field& f, double r, const Point4& p,
                            std::span<const double> lambdas, int budget = kDefaultBudget);

} // namespace finsler
