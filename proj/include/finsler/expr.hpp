#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "finsler/field.hpp"

namespace finsler {

// Abstract syntax for the metric expression language.
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | power
//   power  := atom ('^' factor)?              (right associative)
//   atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//
// Unary minus binds tighter than '*' but looser than '^', so -x1^2 is -(x1^2).
// Known functions: sqrt, exp, ln (alias log), sin, cos, abs.

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprKind { Number, Ident, Unary, Binary, Call };

struct Expr {
    ExprKind kind;
    double number = 0.0;        // Number
    std::string name;           // Ident / Call
    char op = 0;                // Binary: one of + - * / ^ ; Unary: -
    std::vector<ExprPtr> args;  // operands / call arguments
    int offset = -1;            // byte offset of this node in the source text
    int length = 0;
};

// Parse a complete expression; throws SyntaxError on malformed input.
ExprPtr parse_expr(std::string_view src);

// Canonical text form; parse_expr(print_expr(e)) is structurally equal to e.
std::string print_expr(const Expr& e);
inline std::string print_expr(const ExprPtr& e) { return print_expr(*e); }

bool expr_equal(const Expr& a, const Expr& b);
inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) { return expr_equal(*a, *b); }

// Name resolution environment for lowering: coordinates are implicit
// (x1, x2, y1, y2); everything else must be found here.
using SymbolTable = std::map<std::string, Field, std::less<>>;

// Lower an AST to an evaluable field; throws UnknownIdentifier for names
// not in the table and not coordinates.
Field lower_expr(const Expr& e, const SymbolTable& symbols);
inline Field lower_expr(const ExprPtr& e, const SymbolTable& symbols) {
    return lower_expr(*e, symbols);
}

} // namespace finsler
