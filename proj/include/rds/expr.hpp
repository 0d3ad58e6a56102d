#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rds {

// Parse failure; `offset` is a 1-based byte position into the source text
// (end-of-input reports length+1).
struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, std::size_t offset_);
    std::size_t offset;
};

enum class EvalErrorKind {
    LogNonPositive,
    DivisionByZero,
    FractionalPowerOfNegative,
    SqrtOfNegative,
    NonFinite,
    UnboundSymbol,
};

const char* to_string(EvalErrorKind k);

// Raised iff the expression is mathematically undefined or non-finite at the
// evaluation point. `node` is the id of the offending AST node.
struct EvalError : std::runtime_error {
    EvalError(EvalErrorKind kind_, int node_, const std::string& msg);
    EvalErrorKind kind;
    int node;
};

enum class UnaryOp { Negate };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };
enum class FuncId { Exp, Ln, Sin, Cos, Abs, Sqrt, Min, Max };

struct ExprNode {
    enum class Kind { Number, Symbol, Unary, Binary, Call } kind;
    double value = 0.0;   // Number
    int slot = -1;        // Symbol: index into the symbol table / eval buffer
    UnaryOp uop = UnaryOp::Negate;
    BinaryOp bop = BinaryOp::Add;
    FuncId func = FuncId::Exp;
    int a = -1, b = -1;   // child node ids
};

struct Symbol {
    std::string name;
    bool is_parameter = false;  // false: declared variable, true: named constant
};

// Immutable expression tree. Cheap to copy (shared storage), safe to share
// across threads; evaluation is reentrant and allocates nothing.
class Expr {
public:
    Expr() = default;

    bool valid() const { return data_ != nullptr; }

    // Evaluate with one value per symbol slot (see symbols()).
    double eval(std::span<const double> env) const;

    // Convenience: evaluate with named bindings.
    double eval(const std::map<std::string, double>& bindings) const;

    const std::vector<Symbol>& symbols() const;
    int slot_of(std::string_view name) const;  // -1 if absent

    std::string str() const;
    bool same_structure(const Expr& other) const;

    const std::vector<ExprNode>& nodes() const;
    int root() const;

private:
    struct Data {
        std::vector<ExprNode> nodes;
        std::vector<Symbol> symbols;
        int root = -1;
    };
    std::shared_ptr<const Data> data_;
    friend Expr parse(std::string_view, const std::set<std::string>&,
                      const std::set<std::string>&);
};

// Parse `source` over the declared variable set. Identifiers that are neither
// variables, parameters nor builtin functions are rejected at parse time.
Expr parse(std::string_view source, const std::set<std::string>& variables,
           const std::set<std::string>& parameters = {});

enum class Monotonicity { NonDecreasing, NonIncreasing, Mixed };

const char* to_string(Monotonicity m);

struct Interval {
    double lo = 0.0, hi = 0.0;
};

// Heuristic probe: central finite differences of `e` in `var` on a sample
// grid over `box`. Evidence, never proof.
Monotonicity monotonicity_probe(const Expr& e, const std::string& var,
                                const std::map<std::string, Interval>& box,
                                int samples_per_axis,
                                const std::map<std::string, double>& parameters = {});

}  // namespace rds
