#include "finsler/field.hpp"

#include <cmath>

namespace finsler {

Jet EvalContext::eval(const Field& f, int degree) { return eval(f.get(), degree); }

Jet EvalContext::eval(const FieldNode* f, int degree) {
    auto it = memo_.find(f);
    if (it != memo_.end() && it->second.degree() >= degree)
        return it->second.degree() == degree ? it->second : it->second.truncated(degree);
    Jet j = f->compute(*this, degree);
    auto [pos, inserted] = memo_.try_emplace(f, j);
    if (!inserted) pos->second = j;
    return j;
}

namespace {

struct ConstNode final : FieldNode {
    double v;
    explicit ConstNode(double v) : v(v) {}
    Jet compute(EvalContext& ctx, int degree) const override {
        return Jet::constant(ctx.point(), degree, v);
    }
};

struct CoordNode final : FieldNode {
    int var;
    explicit CoordNode(int var) : var(var) {}
    Jet compute(EvalContext& ctx, int degree) const override {
        if (degree > ctx.budget())
            throw DegreeExhausted("degree budget " + std::to_string(ctx.budget()) +
                                  " exceeded: a coordinate jet of degree " + std::to_string(degree) +
                                  " was requested");
        return Jet::coordinate(var, ctx.point(), degree);
    }
};

enum class BinOp { Add, Sub, Mul, Div };

struct BinNode final : FieldNode {
    BinOp op;
    Field a, b;
    std::string where;
    BinNode(BinOp op, Field a, Field b, std::string where = {})
        : op(op), a(std::move(a)), b(std::move(b)), where(std::move(where)) {}
    Jet compute(EvalContext& ctx, int degree) const override {
        Jet ja = ctx.eval(a, degree);
        Jet jb = ctx.eval(b, degree);
        try {
            switch (op) {
                case BinOp::Add: return ja + jb;
                case BinOp::Sub: return ja - jb;
                case BinOp::Mul: return ja * jb;
                case BinOp::Div: return ja / jb;
            }
        } catch (DomainError& e) {
            if (!where.empty()) throw DomainError(std::string(e.what()) + " in '" + where + "'");
            throw;
        }
        throw Error("unreachable");
    }
};

struct FuncNode final : FieldNode {
    Func f;
    Field a;
    std::string where;
    FuncNode(Func f, Field a, std::string where) : f(f), a(std::move(a)), where(std::move(where)) {}
    Jet compute(EvalContext& ctx, int degree) const override {
        Jet ja = ctx.eval(a, degree);
        try {
            switch (f) {
                case Func::Sqrt: return sqrt(ja);
                case Func::Exp: return exp(ja);
                case Func::Log: return log(ja);
                case Func::Sin: return sin(ja);
                case Func::Cos: return cos(ja);
                case Func::Abs: return abs(ja);
                case Func::Neg: return -ja;
            }
        } catch (DomainError& e) {
            if (!where.empty()) throw DomainError(std::string(e.what()) + " in '" + where + "'");
            throw;
        }
        throw Error("unreachable");
    }
};

struct PowConstNode final : FieldNode {
    Field a;
    double p;
    std::string where;
    PowConstNode(Field a, double p, std::string where) : a(std::move(a)), p(p), where(std::move(where)) {}
    Jet compute(EvalContext& ctx, int degree) const override {
        Jet ja = ctx.eval(a, degree);
        try {
            return pow(ja, p);
        } catch (DomainError& e) {
            if (!where.empty()) throw DomainError(std::string(e.what()) + " in '" + where + "'");
            throw;
        }
    }
};

struct PowNode final : FieldNode {
    Field a, b;
    std::string where;
    PowNode(Field a, Field b, std::string where) : a(std::move(a)), b(std::move(b)), where(std::move(where)) {}
    Jet compute(EvalContext& ctx, int degree) const override {
        Jet ja = ctx.eval(a, degree);
        Jet jb = ctx.eval(b, degree);
        try {
            return pow(ja, jb);
        } catch (DomainError& e) {
            if (!where.empty()) throw DomainError(std::string(e.what()) + " in '" + where + "'");
            throw;
        }
    }
};

struct PartialNode final : FieldNode {
    int var;
    Field a;
    PartialNode(int var, Field a) : var(var), a(std::move(a)) {}
    Jet compute(EvalContext& ctx, int degree) const override {
        return ctx.eval(a, degree + 1).partial(var);
    }
};

struct SignDetNode final : FieldNode {
    Field det;
    explicit SignDetNode(Field det) : det(std::move(det)) {}
    Jet compute(EvalContext& ctx, int degree) const override {
        double d = ctx.eval(det, 0).value();
        if (d == 0.0 || !std::isfinite(d))
            throw DegenerateMetric("det g vanishes (or is non-finite) at the evaluation point");
        return Jet::constant(ctx.point(), degree, d > 0.0 ? 1.0 : -1.0);
    }
};

struct TagNode final : FieldNode {
    std::string label;
    Field a;
    TagNode(std::string label, Field a) : label(std::move(label)), a(std::move(a)) {}
    Jet compute(EvalContext& ctx, int degree) const override {
        try {
            return ctx.eval(a, degree);
        } catch (DegreeExhausted& e) {
            e.chain.push_back(label);
            throw;
        }
    }
};

} // namespace

Field fconst(double v) { return std::make_shared<ConstNode>(v); }

Field fcoord(int var) {
    if (var < 0 || var >= kNumVars) throw Error("coordinate index out of range");
    return std::make_shared<CoordNode>(var);
}

Field operator+(Field a, Field b) { return std::make_shared<BinNode>(BinOp::Add, std::move(a), std::move(b)); }
Field operator-(Field a, Field b) { return std::make_shared<BinNode>(BinOp::Sub, std::move(a), std::move(b)); }
Field operator*(Field a, Field b) { return std::make_shared<BinNode>(BinOp::Mul, std::move(a), std::move(b)); }
Field operator/(Field a, Field b) { return std::make_shared<BinNode>(BinOp::Div, std::move(a), std::move(b)); }
Field operator+(Field a, double b) { return std::move(a) + fconst(b); }
Field operator-(Field a, double b) { return std::move(a) - fconst(b); }
Field operator*(Field a, double b) { return std::move(a) * fconst(b); }
Field operator/(Field a, double b) { return std::move(a) * fconst(1.0 / b); }
Field operator+(double a, Field b) { return fconst(a) + std::move(b); }
Field operator-(double a, Field b) { return fconst(a) - std::move(b); }
Field operator*(double a, Field b) { return fconst(a) * std::move(b); }
Field operator/(double a, Field b) { return fconst(a) / std::move(b); }
Field operator-(Field a) { return ffunc(Func::Neg, std::move(a)); }

Field ffunc(Func f, Field a, std::string where) {
    return std::make_shared<FuncNode>(f, std::move(a), std::move(where));
}

Field fpow(Field a, double p, std::string where) {
    return std::make_shared<PowConstNode>(std::move(a), p, std::move(where));
}

Field fpow(Field a, Field b, std::string where) {
    return std::make_shared<PowNode>(std::move(a), std::move(b), std::move(where));
}

Field fpartial(int var, Field a) {
    if (var < 0 || var >= kNumVars) throw Error("coordinate index out of range");
    return std::make_shared<PartialNode>(var, std::move(a));
}

Field fsign_det(Field det_field) { return std::make_shared<SignDetNode>(std::move(det_field)); }

Field ftag(std::string label, Field a) { return std::make_shared<TagNode>(std::move(label), std::move(a)); }

double field_value(const Field& f, const Point4& p, int budget) {
    EvalContext ctx(p, budget);
    return ctx.eval(f, 0).value();
}

double homogeneity_residual(const Field& f, double r, const Point4& p,
                            std::span<const double> lambdas, int budget) {
    double f0 = field_value(f, p, budget);
    double worst = 0.0;
    for (double lam : lambdas) {
        Point4 q = p;
        q[2] *= lam;
        q[3] *= lam;
        double fl = field_value(f, q, budget);
        double want = std::pow(lam, r) * f0;
        double resid = std::fabs(fl - want) / std::max(1.0, std::fabs(want));
        worst = std::max(worst, resid);
    }
    return worst;
}

} // namespace finsler
