#include "rds/expr.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <charconv>
#include <algorithm>

namespace rds {

ParseError::ParseError(const std::string& msg, std::size_t offset_)
    : std::runtime_error(msg + " (offset " + std::to_string(offset_) + ")"), offset(offset_) {}

const char* to_string(EvalErrorKind k) {
    switch (k) {
        case EvalErrorKind::LogNonPositive: return "log of non-positive";
        case EvalErrorKind::DivisionByZero: return "division by zero";
        case EvalErrorKind::FractionalPowerOfNegative: return "fractional power of negative base";
        case EvalErrorKind::SqrtOfNegative: return "sqrt of negative";
        case EvalErrorKind::NonFinite: return "non-finite result";
        case EvalErrorKind::UnboundSymbol: return "unbound symbol";
    }
    return "?";
}

EvalError::EvalError(EvalErrorKind kind_, int node_, const std::string& msg)
    : std::runtime_error(msg), kind(kind_), node(node_) {}

const char* to_string(Monotonicity m) {
    switch (m) {
        case Monotonicity::NonDecreasing: return "NonDecreasing";
        case Monotonicity::NonIncreasing: return "NonIncreasing";
        case Monotonicity::Mixed: return "Mixed";
    }
    return "?";
}

namespace {

struct FuncInfo {
    const char* name;
    FuncId id;
    int arity;
};

constexpr FuncInfo kFuncs[] = {
    {"exp", FuncId::Exp, 1},  {"ln", FuncId::Ln, 1},    {"sin", FuncId::Sin, 1},
    {"cos", FuncId::Cos, 1},  {"abs", FuncId::Abs, 1},  {"sqrt", FuncId::Sqrt, 1},
    {"min", FuncId::Min, 2},  {"max", FuncId::Max, 2},
};

const FuncInfo* lookup_func(std::string_view name) {
    for (const auto& f : kFuncs)
        if (name == f.name) return &f;
    return nullptr;
}

const char* func_name(FuncId id) {
    for (const auto& f : kFuncs)
        if (f.id == id) return f.name;
    return "?";
}

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Lexer {
    std::string_view src;
    std::size_t pos = 0;  // 0-based cursor

    Tok tok = Tok::End;
    std::size_t tok_pos = 0;  // 0-based start of current token
    double number = 0.0;
    std::string_view ident;

    explicit Lexer(std::string_view s) : src(s) { next(); }

    [[noreturn]] void fail(const std::string& msg, std::size_t at0) const {
        throw ParseError(msg, at0 + 1);
    }

    void next() {
        while (pos < src.size() && (src[pos] == ' ' || src[pos] == '\t' || src[pos] == '\n' || src[pos] == '\r'))
            ++pos;
        tok_pos = pos;
        if (pos >= src.size()) {
            tok = Tok::End;
            return;
        }
        char c = src[pos];
        switch (c) {
            case '+': tok = Tok::Plus; ++pos; return;
            case '-': tok = Tok::Minus; ++pos; return;
            case '*': tok = Tok::Star; ++pos; return;
            case '/': tok = Tok::Slash; ++pos; return;
            case '^': tok = Tok::Caret; ++pos; return;
            case '(': tok = Tok::LParen; ++pos; return;
            case ')': tok = Tok::RParen; ++pos; return;
            case ',': tok = Tok::Comma; ++pos; return;
            default: break;
        }
        if ((c >= '0' && c <= '9') || c == '.') {
            const char* begin = src.data() + pos;
            const char* end = src.data() + src.size();
            double v = 0.0;
            auto [p, ec] = std::from_chars(begin, end, v);
            if (ec != std::errc{} || p == begin) fail("malformed number", pos);
            pos += static_cast<std::size_t>(p - begin);
            tok = Tok::Number;
            number = v;
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos;
            while (pos < src.size() &&
                   (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
                ++pos;
            tok = Tok::Ident;
            ident = src.substr(start, pos - start);
            return;
        }
        fail(std::string("unexpected character '") + c + "'", pos);
    }
};

struct Parser {
    Lexer lex;
    const std::set<std::string>& variables;
    const std::set<std::string>& parameters;
    std::vector<ExprNode> nodes;
    std::vector<Symbol> symbols;

    Parser(std::string_view src, const std::set<std::string>& vars, const std::set<std::string>& params)
        : lex(src), variables(vars), parameters(params) {}

    int add(ExprNode n) {
        nodes.push_back(n);
        return static_cast<int>(nodes.size()) - 1;
    }

    int symbol_slot(std::string_view name, bool is_param) {
        for (std::size_t i = 0; i < symbols.size(); ++i)
            if (symbols[i].name == name) return static_cast<int>(i);
        symbols.push_back({std::string(name), is_param});
        return static_cast<int>(symbols.size()) - 1;
    }

    void expect(Tok t, const char* what) {
        if (lex.tok != t) lex.fail(std::string("expected ") + what, lex.tok_pos);
        lex.next();
    }

    // expr := term (('+'|'-') term)*
    int parse_expr() {
        int left = parse_term();
        while (lex.tok == Tok::Plus || lex.tok == Tok::Minus) {
            BinaryOp op = lex.tok == Tok::Plus ? BinaryOp::Add : BinaryOp::Sub;
            lex.next();
            int right = parse_term();
            ExprNode n;
            n.kind = ExprNode::Kind::Binary;
            n.bop = op;
            n.a = left;
            n.b = right;
            left = add(n);
        }
        return left;
    }

    // term := unary (('*'|'/') unary)*
    int parse_term() {
        int left = parse_unary();
        while (lex.tok == Tok::Star || lex.tok == Tok::Slash) {
            BinaryOp op = lex.tok == Tok::Star ? BinaryOp::Mul : BinaryOp::Div;
            lex.next();
            int right = parse_unary();
            ExprNode n;
            n.kind = ExprNode::Kind::Binary;
            n.bop = op;
            n.a = left;
            n.b = right;
            left = add(n);
        }
        return left;
    }

    // unary := '-' unary | power        (so ^ binds tighter than unary minus)
    int parse_unary() {
        if (lex.tok == Tok::Minus) {
            lex.next();
            int child = parse_unary();
            ExprNode n;
            n.kind = ExprNode::Kind::Unary;
            n.uop = UnaryOp::Negate;
            n.a = child;
            return add(n);
        }
        return parse_power();
    }

    // power := atom ('^' unary)?       (right-associative; exponent may carry its own sign)
    int parse_power() {
        int base = parse_atom();
        if (lex.tok == Tok::Caret) {
            lex.next();
            int expo = parse_unary();
            ExprNode n;
            n.kind = ExprNode::Kind::Binary;
            n.bop = BinaryOp::Pow;
            n.a = base;
            n.b = expo;
            return add(n);
        }
        return base;
    }

    int parse_atom() {
        if (lex.tok == Tok::Number) {
            ExprNode n;
            n.kind = ExprNode::Kind::Number;
            n.value = lex.number;
            lex.next();
            return add(n);
        }
        if (lex.tok == Tok::LParen) {
            lex.next();
            int inner = parse_expr();
            expect(Tok::RParen, "')'");
            return inner;
        }
        if (lex.tok == Tok::Ident) {
            std::string name(lex.ident);
            std::size_t at = lex.tok_pos;
            lex.next();
            if (const FuncInfo* fi = lookup_func(name)) {
                if (lex.tok != Tok::LParen) lex.fail("function name '" + name + "' requires arguments", at);
                lex.next();
                int a0 = parse_expr();
                int a1 = -1;
                if (fi->arity == 2) {
                    expect(Tok::Comma, "','");
                    a1 = parse_expr();
                } else if (lex.tok == Tok::Comma) {
                    lex.fail("function '" + name + "' takes one argument", lex.tok_pos);
                }
                expect(Tok::RParen, "')'");
                ExprNode n;
                n.kind = ExprNode::Kind::Call;
                n.func = fi->id;
                n.a = a0;
                n.b = a1;
                return add(n);
            }
            bool is_var = variables.count(name) > 0;
            bool is_param = parameters.count(name) > 0;
            if (!is_var && !is_param) lex.fail("unknown identifier '" + name + "'", at);
            ExprNode n;
            n.kind = ExprNode::Kind::Symbol;
            n.slot = symbol_slot(name, !is_var);
            return add(n);
        }
        lex.fail("expected a value", lex.tok_pos);
    }
};

// Shortest decimal form that parses back to the same double.
std::string format_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

int precedence_of(const ExprNode& n) {
    switch (n.kind) {
        case ExprNode::Kind::Binary:
            switch (n.bop) {
                case BinaryOp::Add:
                case BinaryOp::Sub: return 1;
                case BinaryOp::Mul:
                case BinaryOp::Div: return 2;
                case BinaryOp::Pow: return 4;
            }
            return 0;
        case ExprNode::Kind::Unary: return 3;
        default: return 5;  // atoms never need parens
    }
}

void print_node(const std::vector<ExprNode>& nodes, const std::vector<Symbol>& symbols, int id,
                std::string& out) {
    const ExprNode& n = nodes[static_cast<std::size_t>(id)];
    auto child = [&](int cid, bool needs_parens) {
        if (needs_parens) out += '(';
        print_node(nodes, symbols, cid, out);
        if (needs_parens) out += ')';
    };
    switch (n.kind) {
        case ExprNode::Kind::Number:
            out += format_double(n.value);
            return;
        case ExprNode::Kind::Symbol:
            out += symbols[static_cast<std::size_t>(n.slot)].name;
            return;
        case ExprNode::Kind::Unary: {
            out += '-';
            int cp = precedence_of(nodes[static_cast<std::size_t>(n.a)]);
            child(n.a, cp < 3);
            return;
        }
        case ExprNode::Kind::Binary: {
            int prec = precedence_of(n);
            int lp = precedence_of(nodes[static_cast<std::size_t>(n.a)]);
            int rp = precedence_of(nodes[static_cast<std::size_t>(n.b)]);
            const char* op = "";
            bool lparen = false, rparen = false;
            switch (n.bop) {
                case BinaryOp::Add: op = " + "; lparen = lp < prec; rparen = rp < prec; break;
                case BinaryOp::Sub: op = " - "; lparen = lp < prec; rparen = rp <= prec; break;
                case BinaryOp::Mul: op = "*"; lparen = lp < prec; rparen = rp < prec; break;
                case BinaryOp::Div: op = "/"; lparen = lp < prec; rparen = rp <= prec; break;
                case BinaryOp::Pow: op = "^"; lparen = lp <= prec; rparen = rp < 3; break;
            }
            child(n.a, lparen);
            out += op;
            child(n.b, rparen);
            return;
        }
        case ExprNode::Kind::Call: {
            out += func_name(n.func);
            out += '(';
            print_node(nodes, symbols, n.a, out);
            if (n.b >= 0) {
                out += ", ";
                print_node(nodes, symbols, n.b, out);
            }
            out += ')';
            return;
        }
    }
}

double require_finite(double v, int node) {
    if (!std::isfinite(v)) throw EvalError(EvalErrorKind::NonFinite, node, "overflow to non-finite value");
    return v;
}

double eval_node(const std::vector<ExprNode>& nodes, int id, std::span<const double> env) {
    const ExprNode& n = nodes[static_cast<std::size_t>(id)];
    switch (n.kind) {
        case ExprNode::Kind::Number:
            return n.value;
        case ExprNode::Kind::Symbol:
            return env[static_cast<std::size_t>(n.slot)];
        case ExprNode::Kind::Unary:
            return -eval_node(nodes, n.a, env);
        case ExprNode::Kind::Binary: {
            double x = eval_node(nodes, n.a, env);
            double y = eval_node(nodes, n.b, env);
            switch (n.bop) {
                case BinaryOp::Add: return require_finite(x + y, id);
                case BinaryOp::Sub: return require_finite(x - y, id);
                case BinaryOp::Mul: return require_finite(x * y, id);
                case BinaryOp::Div:
                    if (y == 0.0) throw EvalError(EvalErrorKind::DivisionByZero, id, "division by zero");
                    return require_finite(x / y, id);
                case BinaryOp::Pow: {
                    if (x == 0.0 && y < 0.0)
                        throw EvalError(EvalErrorKind::DivisionByZero, id, "zero base with negative exponent");
                    if (x < 0.0 && std::nearbyint(y) != y)
                        throw EvalError(EvalErrorKind::FractionalPowerOfNegative, id,
                                        "fractional power of negative base");
                    return require_finite(std::pow(x, y), id);
                }
            }
            return 0.0;
        }
        case ExprNode::Kind::Call: {
            double x = eval_node(nodes, n.a, env);
            switch (n.func) {
                case FuncId::Exp: return require_finite(std::exp(x), id);
                case FuncId::Ln:
                    if (x <= 0.0) throw EvalError(EvalErrorKind::LogNonPositive, id, "ln of non-positive value");
                    return require_finite(std::log(x), id);
                case FuncId::Sin: return std::sin(x);
                case FuncId::Cos: return std::cos(x);
                case FuncId::Abs: return std::fabs(x);
                case FuncId::Sqrt:
                    if (x < 0.0) throw EvalError(EvalErrorKind::SqrtOfNegative, id, "sqrt of negative value");
                    return std::sqrt(x);
                case FuncId::Min: return std::min(x, eval_node(nodes, n.b, env));
                case FuncId::Max: return std::max(x, eval_node(nodes, n.b, env));
            }
            return 0.0;
        }
    }
    return 0.0;
}

}  // namespace

Expr parse(std::string_view source, const std::set<std::string>& variables,
           const std::set<std::string>& parameters) {
    Parser p(source, variables, parameters);
    int root = p.parse_expr();
    if (p.lex.tok != Tok::End) p.lex.fail("trailing input", p.lex.tok_pos);
    auto data = std::make_shared<Expr::Data>();
    data->nodes = std::move(p.nodes);
    data->symbols = std::move(p.symbols);
    data->root = root;
    Expr e;
    e.data_ = std::move(data);
    return e;
}

double Expr::eval(std::span<const double> env) const {
    return eval_node(data_->nodes, data_->root, env);
}

double Expr::eval(const std::map<std::string, double>& bindings) const {
    std::vector<double> env(data_->symbols.size());
    for (std::size_t i = 0; i < data_->symbols.size(); ++i) {
        auto it = bindings.find(data_->symbols[i].name);
        if (it == bindings.end())
            throw EvalError(EvalErrorKind::UnboundSymbol, data_->root,
                            "no binding for '" + data_->symbols[i].name + "'");
        env[i] = it->second;
    }
    return eval(env);
}

const std::vector<Symbol>& Expr::symbols() const { return data_->symbols; }

int Expr::slot_of(std::string_view name) const {
    for (std::size_t i = 0; i < data_->symbols.size(); ++i)
        if (data_->symbols[i].name == name) return static_cast<int>(i);
    return -1;
}

std::string Expr::str() const {
    std::string out;
    print_node(data_->nodes, data_->symbols, data_->root, out);
    return out;
}

const std::vector<ExprNode>& Expr::nodes() const { return data_->nodes; }
int Expr::root() const { return data_->root; }

namespace {

bool same_node(const Expr& x, int xi, const Expr& y, int yi) {
    const ExprNode& a = x.nodes()[static_cast<std::size_t>(xi)];
    const ExprNode& b = y.nodes()[static_cast<std::size_t>(yi)];
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case ExprNode::Kind::Number:
            return a.value == b.value;
        case ExprNode::Kind::Symbol:
            return x.symbols()[static_cast<std::size_t>(a.slot)].name ==
                   y.symbols()[static_cast<std::size_t>(b.slot)].name;
        case ExprNode::Kind::Unary:
            return a.uop == b.uop && same_node(x, a.a, y, b.a);
        case ExprNode::Kind::Binary:
            return a.bop == b.bop && same_node(x, a.a, y, b.a) && same_node(x, a.b, y, b.b);
        case ExprNode::Kind::Call:
            if (a.func != b.func) return false;
            if (!same_node(x, a.a, y, b.a)) return false;
            if ((a.b >= 0) != (b.b >= 0)) return false;
            return a.b < 0 || same_node(x, a.b, y, b.b);
    }
    return false;
}

}  // namespace

bool Expr::same_structure(const Expr& other) const {
    if (!valid() || !other.valid()) return valid() == other.valid();
    return same_node(*this, root(), other, other.root());
}

Monotonicity monotonicity_probe(const Expr& e, const std::string& var,
                                const std::map<std::string, Interval>& box,
                                int samples_per_axis,
                                const std::map<std::string, double>& parameters) {
    if (samples_per_axis < 2) samples_per_axis = 2;
    const auto it = box.find(var);
    if (it == box.end()) throw std::invalid_argument("probe variable has no box interval");
    const double width = it->second.hi - it->second.lo;
    const double h = width * 1e-4;
    const double tol_mono = 1e-9;

    std::vector<int> axis_slots;
    std::vector<Interval> axis_box;
    std::vector<double> env(e.symbols().size(), 0.0);
    for (std::size_t i = 0; i < e.symbols().size(); ++i) {
        const auto& sym = e.symbols()[i];
        if (auto bit = box.find(sym.name); bit != box.end()) {
            axis_slots.push_back(static_cast<int>(i));
            axis_box.push_back(bit->second);
        } else if (auto pit = parameters.find(sym.name); pit != parameters.end()) {
            env[i] = pit->second;
        } else {
            throw EvalError(EvalErrorKind::UnboundSymbol, e.root(),
                            "no box interval or parameter value for '" + sym.name + "'");
        }
    }
    const int var_slot = e.slot_of(var);

    bool any_up = false, any_down = false;
    std::vector<int> idx(axis_slots.size(), 0);
    const int n = samples_per_axis;
    while (true) {
        for (std::size_t d = 0; d < axis_slots.size(); ++d) {
            const Interval& iv = axis_box[d];
            double lo = iv.lo, hi = iv.hi;
            if (axis_slots[d] == var_slot) {
                lo += h;
                hi -= h;
                if (hi < lo) hi = lo;
            }
            double t = n == 1 ? 0.0 : static_cast<double>(idx[d]) / (n - 1);
            env[static_cast<std::size_t>(axis_slots[d])] = lo + t * (hi - lo);
        }
        if (var_slot >= 0) {
            const double x = env[static_cast<std::size_t>(var_slot)];
            env[static_cast<std::size_t>(var_slot)] = x + h;
            const double fp = e.eval(env);
            env[static_cast<std::size_t>(var_slot)] = x - h;
            const double fm = e.eval(env);
            env[static_cast<std::size_t>(var_slot)] = x;
            const double d = fp - fm;
            if (d > tol_mono) any_up = true;
            if (d < -tol_mono) any_down = true;
            if (any_up && any_down) return Monotonicity::Mixed;
        }
        std::size_t k = 0;
        for (; k < idx.size(); ++k) {
            if (++idx[k] < n) break;
            idx[k] = 0;
        }
        if (k == idx.size()) break;
    }
    if (any_down && !any_up) return Monotonicity::NonIncreasing;
    return Monotonicity::NonDecreasing;
}

}  // namespace rds
