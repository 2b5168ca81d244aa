#include "finsler/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace finsler {

namespace {

const std::array<std::string_view, 7> kFunctions = {"sqrt", "exp", "ln", "log", "sin", "cos", "abs"};

bool is_function(std::string_view s) {
    for (auto f : kFunctions)
        if (f == s) return true;
    return false;
}

struct Token {
    enum Kind { Num, Ident, Op, LParen, RParen, Comma, End } kind = End;
    double num = 0.0;
    std::string text;
    char op = 0;
    int offset = 0;
    int length = 0;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }

    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        tok_ = Token{};
        tok_.offset = static_cast<int>(pos_);
        if (pos_ >= src_.size()) {
            tok_.kind = Token::End;
            return;
        }
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            std::size_t start = pos_;
            while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
                ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
                std::size_t mark = pos_;
                ++pos_;
                if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
                if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
                } else {
                    pos_ = mark;  // 'e' was not an exponent, leave it for the next token
                }
            }
            double v = 0.0;
            auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
            if (res.ec != std::errc{} || res.ptr != src_.data() + pos_)
                throw SyntaxError("malformed number literal at offset " + std::to_string(start),
                                  static_cast<int>(start));
            tok_.kind = Token::Num;
            tok_.num = v;
            tok_.length = static_cast<int>(pos_ - start);
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            tok_.kind = Token::Ident;
            tok_.text = std::string(src_.substr(start, pos_ - start));
            tok_.length = static_cast<int>(pos_ - start);
            return;
        }
        tok_.length = 1;
        ++pos_;
        switch (c) {
            case '+': case '-': case '*': case '/': case '^':
                tok_.kind = Token::Op;
                tok_.op = c;
                return;
            case '(': tok_.kind = Token::LParen; return;
            case ')': tok_.kind = Token::RParen; return;
            case ',': tok_.kind = Token::Comma; return;
            default:
                throw SyntaxError(std::string("unexpected character '") + c + "' at offset " +
                                      std::to_string(tok_.offset),
                                  tok_.offset);
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    Token tok_;
};

constexpr int kPrecAdd = 1;
constexpr int kPrecMul = 2;
constexpr int kPrecUnary = 3;
constexpr int kPrecPow = 4;
constexpr int kPrecAtom = 5;

int binary_prec(char op) {
    switch (op) {
        case '+': case '-': return kPrecAdd;
        case '*': case '/': return kPrecMul;
        case '^': return kPrecPow;
    }
    return -1;
}

class Parser {
public:
    explicit Parser(std::string_view src) : lex_(src) {}

    ExprPtr parse() {
        ExprPtr e = expression(kPrecAdd);
        if (lex_.peek().kind != Token::End)
            throw SyntaxError("expected an operator or end of input at offset " +
                                  std::to_string(lex_.peek().offset),
                              lex_.peek().offset);
        return e;
    }

private:
    ExprPtr expression(int min_prec) {
        ExprPtr lhs = prefix();
        while (lex_.peek().kind == Token::Op) {
            char op = lex_.peek().op;
            int prec = binary_prec(op);
            if (prec < min_prec) break;
            lex_.take();
            // '^' is right associative, the rest are left associative
            ExprPtr rhs = expression(op == '^' ? prec : prec + 1);
            auto node = std::make_shared<Expr>();
            node->kind = ExprKind::Binary;
            node->op = op;
            node->args = {lhs, rhs};
            node->offset = lhs->offset;
            node->length = rhs->offset + rhs->length - lhs->offset;
            lhs = node;
        }
        return lhs;
    }

    ExprPtr prefix() {
        const Token& t = lex_.peek();
        if (t.kind == Token::Op && t.op == '-') {
            Token minus = lex_.take();
            ExprPtr operand = expression(kPrecPow);  // unary '-' binds looser than '^'
            auto node = std::make_shared<Expr>();
            node->kind = ExprKind::Unary;
            node->op = '-';
            node->args = {operand};
            node->offset = minus.offset;
            node->length = operand->offset + operand->length - minus.offset;
            return node;
        }
        return atom();
    }

    ExprPtr atom() {
        Token t = lex_.take();
        switch (t.kind) {
            case Token::Num: {
                auto node = std::make_shared<Expr>();
                node->kind = ExprKind::Number;
                node->number = t.num;
                node->offset = t.offset;
                node->length = t.length;
                return node;
            }
            case Token::Ident: {
                if (lex_.peek().kind == Token::LParen) {
                    if (!is_function(t.text))
                        throw SyntaxError("unknown function '" + t.text + "' at offset " +
                                              std::to_string(t.offset),
                                          t.offset);
                    lex_.take();  // '('
                    auto node = std::make_shared<Expr>();
                    node->kind = ExprKind::Call;
                    node->name = t.text;
                    node->offset = t.offset;
                    node->args.push_back(expression(kPrecAdd));
                    while (lex_.peek().kind == Token::Comma) {
                        lex_.take();
                        node->args.push_back(expression(kPrecAdd));
                    }
                    Token close = lex_.take();
                    if (close.kind != Token::RParen)
                        throw SyntaxError("expected ')' at offset " + std::to_string(close.offset),
                                          close.offset);
                    if (node->args.size() != 1)
                        throw SyntaxError("function '" + t.text + "' takes exactly one argument (offset " +
                                              std::to_string(t.offset) + ")",
                                          t.offset);
                    node->length = close.offset + close.length - t.offset;
                    return node;
                }
                auto node = std::make_shared<Expr>();
                node->kind = ExprKind::Ident;
                node->name = t.text;
                node->offset = t.offset;
                node->length = t.length;
                return node;
            }
            case Token::LParen: {
                ExprPtr inner = expression(kPrecAdd);
                Token close = lex_.take();
                if (close.kind != Token::RParen)
                    throw SyntaxError("expected ')' at offset " + std::to_string(close.offset), close.offset);
                return inner;
            }
            default:
                throw SyntaxError(
                    "expected a number, identifier, function call, '(' or unary '-' at offset " +
                        std::to_string(t.offset),
                    t.offset);
        }
    }

    Lexer lex_;
};

int node_prec(const Expr& e) {
    switch (e.kind) {
        case ExprKind::Number:
        case ExprKind::Ident:
        case ExprKind::Call:
            return kPrecAtom;
        case ExprKind::Unary:
            return kPrecUnary;
        case ExprKind::Binary:
            return binary_prec(e.op);
    }
    return kPrecAtom;
}

std::string print_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void print_rec(const Expr& e, std::string& out) {
    auto wrapped = [&out](const Expr& child, bool need) {
        if (need) out += '(';
        print_rec(child, out);
        if (need) out += ')';
    };
    switch (e.kind) {
        case ExprKind::Number:
            out += print_number(e.number);
            return;
        case ExprKind::Ident:
            out += e.name;
            return;
        case ExprKind::Call:
            out += e.name;
            out += '(';
            print_rec(*e.args[0], out);
            out += ')';
            return;
        case ExprKind::Unary:
            out += '-';
            // parenthesize anything binding looser than or equal to unary '-'
            wrapped(*e.args[0], node_prec(*e.args[0]) <= kPrecUnary);
            return;
        case ExprKind::Binary: {
            int p = binary_prec(e.op);
            const Expr& l = *e.args[0];
            const Expr& r = *e.args[1];
            if (e.op == '^') {
                wrapped(l, node_prec(l) <= p);  // right associative
                out += e.op;
                wrapped(r, node_prec(r) < p);
            } else {
                wrapped(l, node_prec(l) < p);
                out += e.op;
                wrapped(r, node_prec(r) <= p);
            }
            return;
        }
    }
}

} // namespace

ExprPtr parse_expr(std::string_view src) { return Parser(src).parse(); }

std::string print_expr(const Expr& e) {
    std::string out;
    print_rec(e, out);
    return out;
}

bool expr_equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case ExprKind::Number:
            return a.number == b.number;
        case ExprKind::Ident:
            return a.name == b.name;
        case ExprKind::Call:
            if (a.name != b.name) return false;
            break;
        case ExprKind::Unary:
        case ExprKind::Binary:
            if (a.op != b.op) return false;
            break;
    }
    if (a.args.size() != b.args.size()) return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!expr_equal(*a.args[i], *b.args[i])) return false;
    return true;
}

Field lower_expr(const Expr& e, const SymbolTable& symbols) {
    switch (e.kind) {
        case ExprKind::Number:
            return fconst(e.number);
        case ExprKind::Ident: {
            if (e.name == "x1") return fcoord(0);
            if (e.name == "x2") return fcoord(1);
            if (e.name == "y1") return fcoord(2);
            if (e.name == "y2") return fcoord(3);
            auto it = symbols.find(e.name);
            if (it == symbols.end())
                throw UnknownIdentifier("unknown identifier '" + e.name + "' at offset " +
                                            std::to_string(e.offset),
                                        e.offset);
            return it->second;
        }
        case ExprKind::Unary:
            return -lower_expr(*e.args[0], symbols);
        case ExprKind::Call: {
            Field a = lower_expr(*e.args[0], symbols);
            std::string where = print_expr(e);
            if (e.name == "sqrt") return ffunc(Func::Sqrt, std::move(a), std::move(where));
            if (e.name == "exp") return ffunc(Func::Exp, std::move(a), std::move(where));
            if (e.name == "ln" || e.name == "log") return ffunc(Func::Log, std::move(a), std::move(where));
            if (e.name == "sin") return ffunc(Func::Sin, std::move(a), std::move(where));
            if (e.name == "cos") return ffunc(Func::Cos, std::move(a), std::move(where));
            if (e.name == "abs") return ffunc(Func::Abs, std::move(a), std::move(where));
            throw UnknownIdentifier("unknown function '" + e.name + "'", e.offset);
        }
        case ExprKind::Binary: {
            Field a = lower_expr(*e.args[0], symbols);
            if (e.op == '^') {
                const Expr& rhs = *e.args[1];
                if (rhs.kind == ExprKind::Number)
                    return fpow(std::move(a), rhs.number, print_expr(e));
                if (rhs.kind == ExprKind::Unary && rhs.args[0]->kind == ExprKind::Number)
                    return fpow(std::move(a), -rhs.args[0]->number, print_expr(e));
                return fpow(std::move(a), lower_expr(rhs, symbols), print_expr(e));
            }
            Field b = lower_expr(*e.args[1], symbols);
            switch (e.op) {
                case '+': return std::move(a) + std::move(b);
                case '-': return std::move(a) - std::move(b);
                case '*': return std::move(a) * std::move(b);
                case '/': {
                    // divisions get a source tag so domain failures point at the culprit
                    std::string where = print_expr(e);
                    Field recip = fpow(std::move(b), -1.0, where);
                    return std::move(a) * std::move(recip);
                }
            }
            throw Error("unreachable binary operator");
        }
    }
    throw Error("unreachable expression kind");
}

} // namespace finsler
