#pragma once

// Closed-form scalar expressions: parsing, evaluation and symbolic derivatives.
//
// Grammar (see docs/grammar.md):
//   expr    := term { ('+' | '-') term }
//   term    := unary { ('*' | '/') unary }
//   unary   := '-' unary | power
//   power   := primary [ '^' unary ]
//   primary := number | name | function '(' expr ')' | '(' expr ')'
//
// `^` is right associative and binds tighter than unary minus, so -x^2 == -(x^2).
// There is no unary plus and no implicit multiplication.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kparab/error.hpp"

namespace kparab {

enum class Func { Sin, Cos, Tan, Sinh, Cosh, Tanh, Exp, Log, Sqrt, Abs, Atan };

namespace detail {

inline constexpr std::array<std::pair<std::string_view, Func>, 11> function_table{{
    {"sin", Func::Sin},   {"cos", Func::Cos},   {"tan", Func::Tan},   {"sinh", Func::Sinh},
    {"cosh", Func::Cosh}, {"tanh", Func::Tanh}, {"exp", Func::Exp},   {"log", Func::Log},
    {"sqrt", Func::Sqrt}, {"abs", Func::Abs},   {"atan", Func::Atan},
}};

inline std::optional<Func> lookup_function(std::string_view name) {
    for (const auto& [n, f] : function_table)
        if (n == name) return f;
    return std::nullopt;
}

inline std::string_view function_name(Func f) {
    for (const auto& [n, g] : function_table)
        if (g == f) return n;
    return "?";
}

enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Call };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    Op op = Op::Const;
    double value = 0.0;      // Const
    std::size_t slot = 0;    // Var
    Func func = Func::Sin;   // Call
    NodePtr lhs;             // unary operand / left operand
    NodePtr rhs;
};

inline NodePtr make_const(double v) {
    auto n = std::make_shared<Node>();
    n->op = Op::Const;
    n->value = v;
    return n;
}

inline NodePtr make_var(std::size_t slot) {
    auto n = std::make_shared<Node>();
    n->op = Op::Var;
    n->slot = slot;
    return n;
}

inline bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }
inline bool is_const(const NodePtr& n) { return n->op == Op::Const; }

inline double apply_function(Func f, double x) {
    switch (f) {
        case Func::Sin: return std::sin(x);
        case Func::Cos: return std::cos(x);
        case Func::Tan: return std::tan(x);
        case Func::Sinh: return std::sinh(x);
        case Func::Cosh: return std::cosh(x);
        case Func::Tanh: return std::tanh(x);
        case Func::Exp: return std::exp(x);
        case Func::Log: return std::log(x);
        case Func::Sqrt: return std::sqrt(x);
        case Func::Abs: return std::fabs(x);
        case Func::Atan: return std::atan(x);
    }
    return std::nan("");
}

// Smart constructors: constant folding plus the 0/1 identities, nothing more.

inline NodePtr make_binary(Op op, NodePtr a, NodePtr b);

inline NodePtr make_neg(NodePtr a) {
    if (a->op == Op::Const) return make_const(-a->value);
    if (a->op == Op::Neg) return a->lhs;
    auto n = std::make_shared<Node>();
    n->op = Op::Neg;
    n->lhs = std::move(a);
    return n;
}

inline NodePtr make_call(Func f, NodePtr a) {
    if (a->op == Op::Const) {
        const double v = apply_function(f, a->value);
        if (std::isfinite(v)) return make_const(v);
    }
    auto n = std::make_shared<Node>();
    n->op = Op::Call;
    n->func = f;
    n->lhs = std::move(a);
    return n;
}

inline NodePtr make_binary(Op op, NodePtr a, NodePtr b) {
    if (a->op == Op::Const && b->op == Op::Const) {
        double v = std::nan("");
        switch (op) {
            case Op::Add: v = a->value + b->value; break;
            case Op::Sub: v = a->value - b->value; break;
            case Op::Mul: v = a->value * b->value; break;
            case Op::Div: v = b->value != 0.0 ? a->value / b->value : std::nan(""); break;
            case Op::Pow: v = std::pow(a->value, b->value); break;
            default: break;
        }
        if (std::isfinite(v)) return make_const(v);
    }
    switch (op) {
        case Op::Add:
            if (is_const(a, 0.0)) return b;
            if (is_const(b, 0.0)) return a;
            break;
        case Op::Sub:
            if (is_const(b, 0.0)) return a;
            if (is_const(a, 0.0)) return make_neg(std::move(b));
            break;
        case Op::Mul:
            if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
            if (is_const(a, 1.0)) return b;
            if (is_const(b, 1.0)) return a;
            if (is_const(a, -1.0)) return make_neg(std::move(b));
            if (is_const(b, -1.0)) return make_neg(std::move(a));
            break;
        case Op::Div:
            if (is_const(a, 0.0) && !is_const(b, 0.0)) return make_const(0.0);
            if (is_const(b, 1.0)) return a;
            break;
        case Op::Pow:
            if (is_const(b, 1.0)) return a;
            if (is_const(b, 0.0)) return make_const(1.0);
            break;
        default: break;
    }
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
}

inline bool node_depends_on(const Node& n, std::size_t slot) {
    switch (n.op) {
        case Op::Const: return false;
        case Op::Var: return n.slot == slot;
        case Op::Neg:
        case Op::Call: return node_depends_on(*n.lhs, slot);
        default: return node_depends_on(*n.lhs, slot) || node_depends_on(*n.rhs, slot);
    }
}

inline int precedence(const Node& n) {
    switch (n.op) {
        case Op::Add:
        case Op::Sub: return 1;
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Neg: return 3;
        case Op::Pow: return 4;
        case Op::Const: return n.value < 0.0 || std::signbit(n.value) ? 3 : 5;
        default: return 5;
    }
}

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void print_node(const Node& n, const std::vector<std::string>& names, std::string& out);

inline void print_wrapped(const Node& n, bool wrap, const std::vector<std::string>& names,
                          std::string& out) {
    if (wrap) out += '(';
    print_node(n, names, out);
    if (wrap) out += ')';
}

inline void print_node(const Node& n, const std::vector<std::string>& names, std::string& out) {
    const int p = precedence(n);
    switch (n.op) {
        case Op::Const:
            if (std::signbit(n.value)) {
                out += '-';
                out += format_number(-n.value);
            } else {
                out += format_number(n.value);
            }
            return;
        case Op::Var: out += names[n.slot]; return;
        case Op::Neg:
            out += '-';
            print_wrapped(*n.lhs, precedence(*n.lhs) < 3, names, out);
            return;
        case Op::Call:
            out += function_name(n.func);
            out += '(';
            print_node(*n.lhs, names, out);
            out += ')';
            return;
        case Op::Pow:
            print_wrapped(*n.lhs, precedence(*n.lhs) <= 4, names, out);
            out += '^';
            print_wrapped(*n.rhs, precedence(*n.rhs) < 3, names, out);
            return;
        default: {
            const char sym = n.op == Op::Add ? '+' : n.op == Op::Sub ? '-' : n.op == Op::Mul ? '*' : '/';
            // A leading negation is a unary node and must not sit directly after a binary operator
            // of higher precedence; the precedence table already forces parentheses for those.
            print_wrapped(*n.lhs, precedence(*n.lhs) < p, names, out);
            out += sym;
            const bool strict = n.op == Op::Sub || n.op == Op::Div;
            const int rp = precedence(*n.rhs);
            print_wrapped(*n.rhs, strict ? rp <= p || rp == 3 : rp < p || rp == 3, names, out);
            return;
        }
    }
}

[[noreturn]] inline void domain_fault(const char* what, const Node& n, const std::vector<std::string>& names) {
    std::string text;
    print_node(n, names, text);
    throw DomainError(what, text);
}

inline double eval_node(const Node& n, std::span<const double> v, const std::vector<std::string>& names) {
    switch (n.op) {
        case Op::Const: return n.value;
        case Op::Var: return v[n.slot];
        case Op::Neg: return -eval_node(*n.lhs, v, names);
        case Op::Add: return eval_node(*n.lhs, v, names) + eval_node(*n.rhs, v, names);
        case Op::Sub: return eval_node(*n.lhs, v, names) - eval_node(*n.rhs, v, names);
        case Op::Mul: return eval_node(*n.lhs, v, names) * eval_node(*n.rhs, v, names);
        case Op::Div: {
            const double a = eval_node(*n.lhs, v, names);
            const double b = eval_node(*n.rhs, v, names);
            if (b == 0.0) domain_fault("division by zero", n, names);
            return a / b;
        }
        case Op::Pow: {
            const double a = eval_node(*n.lhs, v, names);
            const double b = eval_node(*n.rhs, v, names);
            if (a == 0.0 && b < 0.0) domain_fault("zero raised to a negative power", n, names);
            const double r = std::pow(a, b);
            if (std::isnan(r) && !std::isnan(a) && !std::isnan(b))
                domain_fault("negative base with non-integer exponent", n, names);
            return r;
        }
        case Op::Call: {
            const double x = eval_node(*n.lhs, v, names);
            if (n.func == Func::Log && x <= 0.0) domain_fault("log of non-positive value", n, names);
            if (n.func == Func::Sqrt && x < 0.0) domain_fault("sqrt of negative value", n, names);
            return apply_function(n.func, x);
        }
    }
    return std::nan("");
}

inline NodePtr derive(const NodePtr& n, std::size_t slot) {
    if (!node_depends_on(*n, slot)) return make_const(0.0);
    switch (n->op) {
        case Op::Const: return make_const(0.0);
        case Op::Var: return make_const(1.0);
        case Op::Neg: return make_neg(derive(n->lhs, slot));
        case Op::Add: return make_binary(Op::Add, derive(n->lhs, slot), derive(n->rhs, slot));
        case Op::Sub: return make_binary(Op::Sub, derive(n->lhs, slot), derive(n->rhs, slot));
        case Op::Mul:
            return make_binary(Op::Add, make_binary(Op::Mul, derive(n->lhs, slot), n->rhs),
                               make_binary(Op::Mul, n->lhs, derive(n->rhs, slot)));
        case Op::Div: {
            // (a/b)' = a'/b - a b' / b^2
            auto first = make_binary(Op::Div, derive(n->lhs, slot), n->rhs);
            auto second = make_binary(
                Op::Div, make_binary(Op::Mul, n->lhs, derive(n->rhs, slot)),
                make_binary(Op::Pow, n->rhs, make_const(2.0)));
            return make_binary(Op::Sub, std::move(first), std::move(second));
        }
        case Op::Pow: {
            const auto& a = n->lhs;
            const auto& b = n->rhs;
            if (!node_depends_on(*b, slot)) {
                auto power = make_binary(Op::Pow, a, make_binary(Op::Sub, b, make_const(1.0)));
                return make_binary(Op::Mul, make_binary(Op::Mul, b, std::move(power)), derive(a, slot));
            }
            if (!node_depends_on(*a, slot)) {
                return make_binary(Op::Mul, make_binary(Op::Mul, n, make_call(Func::Log, a)),
                                   derive(b, slot));
            }
            // a^b (b' log a + b a'/a)
            auto inner = make_binary(
                Op::Add, make_binary(Op::Mul, derive(b, slot), make_call(Func::Log, a)),
                make_binary(Op::Div, make_binary(Op::Mul, b, derive(a, slot)), a));
            return make_binary(Op::Mul, n, std::move(inner));
        }
        case Op::Call: {
            const auto& a = n->lhs;
            auto da = derive(a, slot);
            NodePtr outer;
            switch (n->func) {
                case Func::Sin: outer = make_call(Func::Cos, a); break;
                case Func::Cos: outer = make_neg(make_call(Func::Sin, a)); break;
                case Func::Tan:
                    outer = make_binary(Op::Add, make_const(1.0),
                                        make_binary(Op::Pow, n, make_const(2.0)));
                    break;
                case Func::Sinh: outer = make_call(Func::Cosh, a); break;
                case Func::Cosh: outer = make_call(Func::Sinh, a); break;
                case Func::Tanh:
                    outer = make_binary(Op::Sub, make_const(1.0),
                                        make_binary(Op::Pow, n, make_const(2.0)));
                    break;
                case Func::Exp: outer = n; break;
                case Func::Log: return make_binary(Op::Div, std::move(da), a);
                case Func::Sqrt:
                    return make_binary(Op::Div, std::move(da), make_binary(Op::Mul, make_const(2.0), n));
                case Func::Abs: outer = make_binary(Op::Div, a, n); break;
                case Func::Atan:
                    return make_binary(Op::Div, std::move(da),
                                       make_binary(Op::Add, make_const(1.0),
                                                   make_binary(Op::Pow, a, make_const(2.0))));
            }
            return make_binary(Op::Mul, std::move(outer), std::move(da));
        }
    }
    return make_const(0.0);
}

class Parser {
public:
    Parser(std::string_view src, const std::vector<std::string>& names) : src_(src), names_(names) {}

    NodePtr parse() {
        skip_space();
        if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
        auto n = parse_expr();
        skip_space();
        if (pos_ < src_.size()) throw ParseError(unexpected(), pos_);
        return n;
    }

private:
    static constexpr int max_depth = 200;

    std::string_view src_;
    const std::vector<std::string>& names_;
    std::size_t pos_ = 0;
    int depth_ = 0;

    struct DepthGuard {
        int& d;
        DepthGuard(int& depth, std::size_t pos) : d(depth) {
            if (++d > max_depth) throw ParseError("expression nested too deeply", pos);
        }
        ~DepthGuard() { --d; }
    };

    void skip_space() {
        while (pos_ < src_.size() &&
               (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
            ++pos_;
    }

    char peek() {
        skip_space();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    std::string unexpected() const {
        if (pos_ >= src_.size()) return "unexpected end of input";
        const unsigned char c = static_cast<unsigned char>(src_[pos_]);
        if (c < 0x20 || c >= 0x7f) return "unexpected byte";
        return std::string("unexpected '") + src_[pos_] + "'";
    }

    NodePtr parse_expr() {
        DepthGuard guard(depth_, pos_);
        auto lhs = parse_term();
        for (;;) {
            const char c = peek();
            if (c != '+' && c != '-') return lhs;
            ++pos_;
            auto rhs = parse_term();
            lhs = raw(c == '+' ? Op::Add : Op::Sub, std::move(lhs), std::move(rhs));
        }
    }

    NodePtr parse_term() {
        auto lhs = parse_unary();
        for (;;) {
            const char c = peek();
            if (c != '*' && c != '/') return lhs;
            ++pos_;
            auto rhs = parse_unary();
            lhs = raw(c == '*' ? Op::Mul : Op::Div, std::move(lhs), std::move(rhs));
        }
    }

    NodePtr parse_unary() {
        DepthGuard guard(depth_, pos_);
        if (peek() == '-') {
            ++pos_;
            auto n = std::make_shared<Node>();
            n->op = Op::Neg;
            n->lhs = parse_unary();
            return n;
        }
        auto base = parse_primary();
        if (peek() == '^') {
            ++pos_;
            auto exponent = parse_unary();
            return raw(Op::Pow, std::move(base), std::move(exponent));
        }
        return base;
    }

    NodePtr parse_primary() {
        const char c = peek();
        const std::size_t start = pos_;
        if (c == '(') {
            ++pos_;
            auto inner = parse_expr();
            if (peek() != ')') throw ParseError("expected ')'", pos_);
            ++pos_;
            return inner;
        }
        if ((c >= '0' && c <= '9') || c == '.') return parse_number();
        if (is_ident_start(c)) {
            while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
            const std::string_view name = src_.substr(start, pos_ - start);
            for (std::size_t i = 0; i < names_.size(); ++i)
                if (names_[i] == name) return make_var(i);
            if (auto f = lookup_function(name)) {
                if (peek() != '(') throw ParseError("expected '(' after function name", pos_);
                ++pos_;
                auto arg = parse_expr();
                if (peek() != ')') throw ParseError("expected ')'", pos_);
                ++pos_;
                auto n = std::make_shared<Node>();
                n->op = Op::Call;
                n->func = *f;
                n->lhs = std::move(arg);
                return n;
            }
            if (name == "pi") return make_const(std::numbers::pi);
            if (name == "e") return make_const(std::numbers::e);
            throw UnknownIdentifier(std::string(name), start);
        }
        throw ParseError(unexpected(), pos_);
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        std::size_t i = pos_;
        std::size_t digits = 0;
        while (i < src_.size() && is_digit(src_[i])) ++i, ++digits;
        if (i < src_.size() && src_[i] == '.') {
            ++i;
            while (i < src_.size() && is_digit(src_[i])) ++i, ++digits;
        }
        if (digits == 0) throw ParseError("malformed number", start);
        if (i < src_.size() && (src_[i] == 'e' || src_[i] == 'E')) {
            std::size_t j = i + 1;
            if (j < src_.size() && (src_[j] == '+' || src_[j] == '-')) ++j;
            if (j < src_.size() && is_digit(src_[j])) {
                while (j < src_.size() && is_digit(src_[j])) ++j;
                i = j;
            }
        }
        double value = 0.0;
        const auto res = std::from_chars(src_.data() + start, src_.data() + i, value);
        if (res.ec != std::errc() || res.ptr != src_.data() + i || !std::isfinite(value))
            throw ParseError("malformed number", start);
        pos_ = i;
        return make_const(value);
    }

    static NodePtr raw(Op op, NodePtr a, NodePtr b) {
        auto n = std::make_shared<Node>();
        n->op = op;
        n->lhs = std::move(a);
        n->rhs = std::move(b);
        return n;
    }

    static bool is_digit(char c) { return c >= '0' && c <= '9'; }
    static bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
    static bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }
};

}  // namespace detail

using Bindings = std::map<std::string, double, std::less<>>;

/// Immutable expression tree over a fixed, ordered list of identifiers.
/// Copies share the tree; evaluation is reentrant.
class Expression {
public:
    Expression(detail::NodePtr root, std::shared_ptr<const std::vector<std::string>> names)
        : root_(std::move(root)), names_(std::move(names)) {}

    const std::vector<std::string>& names() const noexcept { return *names_; }
    const detail::NodePtr& root() const noexcept { return root_; }
    const std::shared_ptr<const std::vector<std::string>>& shared_names() const noexcept { return names_; }

    /// Values are given in the order of names().
    double operator()(std::span<const double> values) const {
        if (values.size() < names_->size())
            throw SpecError("expression expects " + std::to_string(names_->size()) + " values");
        return detail::eval_node(*root_, values, *names_);
    }

    double operator()(double x) const { return (*this)(std::span<const double>(&x, 1)); }

    double operator()(double x, double y) const {
        const double v[2] = {x, y};
        return (*this)(std::span<const double>(v, 2));
    }

    std::optional<std::size_t> slot_of(std::string_view name) const {
        for (std::size_t i = 0; i < names_->size(); ++i)
            if ((*names_)[i] == name) return i;
        return std::nullopt;
    }

    bool depends_on(std::string_view name) const {
        const auto slot = slot_of(name);
        return slot && detail::node_depends_on(*root_, *slot);
    }

    bool is_constant() const noexcept { return root_->op == detail::Op::Const; }

    std::string to_string() const {
        std::string out;
        detail::print_node(*root_, *names_, out);
        return out;
    }

private:
    detail::NodePtr root_;
    std::shared_ptr<const std::vector<std::string>> names_;
};

inline Expression parse(std::string_view source, std::vector<std::string> names) {
    auto shared = std::make_shared<const std::vector<std::string>>(std::move(names));
    detail::Parser parser(source, *shared);
    auto root = parser.parse();
    return Expression(std::move(root), std::move(shared));
}

inline double evaluate(const Expression& e, const Bindings& bindings) {
    std::vector<double> values(e.names().size(), std::nan(""));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto it = bindings.find(e.names()[i]);
        if (it != bindings.end()) {
            values[i] = it->second;
        } else if (detail::node_depends_on(*e.root(), i)) {
            throw SpecError("identifier '" + e.names()[i] + "' is not bound");
        }
    }
    return e(values);
}

inline Expression differentiate(const Expression& e, std::string_view var) {
    const auto slot = e.slot_of(var);
    if (!slot) throw SpecError("cannot differentiate with respect to undeclared '" + std::string(var) + "'");
    return Expression(detail::derive(e.root(), *slot), e.shared_names());
}

inline Expression constant(double v, const Expression& like) {
    return Expression(detail::make_const(v), like.shared_names());
}

inline Expression variable(std::string_view name, const Expression& like) {
    const auto slot = like.slot_of(name);
    if (!slot) throw SpecError("undeclared identifier '" + std::string(name) + "'");
    return Expression(detail::make_var(*slot), like.shared_names());
}

namespace detail {
inline const std::shared_ptr<const std::vector<std::string>>& common_names(const Expression& a,
                                                                           const Expression& b) {
    if (a.shared_names() != b.shared_names() && a.names() != b.names())
        throw SpecError("expressions are declared over different identifiers");
    return a.shared_names();
}
}  // namespace detail

inline Expression operator+(const Expression& a, const Expression& b) {
    return Expression(detail::make_binary(detail::Op::Add, a.root(), b.root()), detail::common_names(a, b));
}
inline Expression operator-(const Expression& a, const Expression& b) {
    return Expression(detail::make_binary(detail::Op::Sub, a.root(), b.root()), detail::common_names(a, b));
}
inline Expression operator*(const Expression& a, const Expression& b) {
    return Expression(detail::make_binary(detail::Op::Mul, a.root(), b.root()), detail::common_names(a, b));
}
inline Expression operator/(const Expression& a, const Expression& b) {
    return Expression(detail::make_binary(detail::Op::Div, a.root(), b.root()), detail::common_names(a, b));
}
inline Expression operator-(const Expression& a) {
    return Expression(detail::make_neg(a.root()), a.shared_names());
}
inline Expression pow(const Expression& a, const Expression& b) {
    return Expression(detail::make_binary(detail::Op::Pow, a.root(), b.root()), detail::common_names(a, b));
}
inline Expression apply(Func f, const Expression& a) {
    return Expression(detail::make_call(f, a.root()), a.shared_names());
}

namespace detail {
inline NodePtr substitute(const NodePtr& n, const std::vector<NodePtr>& args) {
    switch (n->op) {
        case Op::Const: return n;
        case Op::Var: return args[n->slot];
        case Op::Neg: return make_neg(substitute(n->lhs, args));
        case Op::Call: return make_call(n->func, substitute(n->lhs, args));
        default: return make_binary(n->op, substitute(n->lhs, args), substitute(n->rhs, args));
    }
}
}  // namespace detail

/// e(args[0], args[1], ...): each identifier of e replaced by the matching argument.
/// The arguments must share one identifier list, which the result inherits.
inline Expression compose(const Expression& e, const std::vector<Expression>& args) {
    if (args.size() != e.names().size()) throw SpecError("compose needs one argument per identifier");
    if (args.empty()) return e;
    std::vector<detail::NodePtr> roots;
    for (const auto& a : args) {
        detail::common_names(args.front(), a);
        roots.push_back(a.root());
    }
    return Expression(detail::substitute(e.root(), roots), args.front().shared_names());
}

}  // namespace kparab
