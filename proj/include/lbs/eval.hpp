#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lbs/ast.hpp"
#include "lbs/geometry.hpp"

// Big-step evaluation of closed expressions and the concrete operator table.
// Callers substitute parameters and `this` before evaluating; a stuck term
// raises EvalError, which the runtime turns into a rejected event rather than
// a crash.

namespace lbs {

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Program-level evaluation context. glue has no intrinsic contact distance;
// it is fixed per program (sum of the entity radii when every entity shares
// one sphere radius, else the configured default).
struct OpContext {
    double glue_contact = 2.0;
};

struct OpSig {
    TypePtr arg;
    TypePtr ret;
};

// typeOf: operator name -> admissible (argument, result) signatures.
// Overloads are resolved by argument type.
inline const std::vector<OpSig>* op_signatures(const std::string& name) {
    static const std::vector<OpSig> plus = {
        {ty_prod({ty_fl(), ty_fl()}), ty_fl()},
        {ty_prod({ty_point(), ty_point()}), ty_point()},
    };
    static const std::vector<OpSig> minus = {
        {ty_prod({ty_fl(), ty_fl()}), ty_fl()},
    };
    static const std::vector<OpSig> times = {
        {ty_prod({ty_fl(), ty_fl()}), ty_fl()},
        {ty_prod({ty_fl(), ty_point()}), ty_point()},
    };
    static const std::vector<OpSig> glue = {
        {ty_prod({ty_point(), ty_point()}), ty_point()},
    };
    if (name == "+") return &plus;
    if (name == "-") return &minus;
    if (name == "*") return &times;
    if (name == "glue") return &glue;
    return nullptr;
}

inline bool value_is_point(const Value& v) {
    if (!v.is_tuple() || v.items().size() != 3) return false;
    for (const auto& x : v.items())
        if (!x.is_const()) return false;
    return true;
}

inline Point value_to_point(const Value& v) {
    if (!value_is_point(v)) throw EvalError("expected a point value, got " + std::string(v.is_tuple() ? "tuple" : "non-tuple"));
    return Point{v.items()[0].num(), v.items()[1].num(), v.items()[2].num()};
}

inline Value point_to_value(const Point& p) { return Value::point_v(p.x, p.y, p.z); }

inline Value apply_op(const std::string& name, const Value& v, const OpContext& ctx) {
    auto pair = [&](const char* op) -> const std::vector<Value>& {
        if (!v.is_tuple() || v.items().size() != 2)
            throw EvalError(std::string(op) + " expects a pair argument");
        return v.items();
    };
    if (name == "+") {
        const auto& xs = pair("+");
        if (xs[0].is_const() && xs[1].is_const()) return Value::const_v(xs[0].num() + xs[1].num());
        if (value_is_point(xs[0]) && value_is_point(xs[1]))
            return point_to_value(value_to_point(xs[0]) + value_to_point(xs[1]));
        throw EvalError("+ expects two reals or two points");
    }
    if (name == "-") {
        const auto& xs = pair("-");
        if (xs[0].is_const() && xs[1].is_const()) return Value::const_v(xs[0].num() - xs[1].num());
        throw EvalError("- expects two reals");
    }
    if (name == "*") {
        const auto& xs = pair("*");
        if (xs[0].is_const() && xs[1].is_const()) return Value::const_v(xs[0].num() * xs[1].num());
        if (xs[0].is_const() && value_is_point(xs[1]))
            return point_to_value(xs[0].num() * value_to_point(xs[1]));
        throw EvalError("* expects two reals or a real and a point");
    }
    if (name == "glue") {
        const auto& xs = pair("glue");
        Point p = value_to_point(xs[0]);
        Point q = value_to_point(xs[1]);
        try {
            return point_to_value(glue_point(p, q, ctx.glue_contact));
        } catch (const GeometryError& e) {
            throw EvalError(e.what());
        }
    }
    throw EvalError("unknown operator '" + name + "'");
}

// Exp.ch / Exp.const / Exp.tuple / Exp.() / Exp.sel / Exp.op of the
// expression semantics. Identifiers surviving to evaluation are channel
// names and evaluate to themselves.
inline Value eval_expr(const ExprPtr& e, const OpContext& ctx) {
    if (!e) throw EvalError("null expression");
    if (const auto* id = std::get_if<Expr::Ident>(&e->node)) return Value::chan_v(id->name);
    if (const auto* c = std::get_if<Expr::Const>(&e->node)) return Value::const_v(c->value);
    if (std::holds_alternative<Expr::This>(e->node))
        throw EvalError("expression is not closed: contains 'this'");
    if (std::holds_alternative<Expr::Unit>(e->node)) return Value::unit_v();
    if (const auto* t = std::get_if<Expr::Tuple>(&e->node)) {
        std::vector<Value> items;
        items.reserve(t->items.size());
        for (const auto& x : t->items) items.push_back(eval_expr(x, ctx));
        return Value::tuple_v(std::move(items));
    }
    if (const auto* p = std::get_if<Expr::Proj>(&e->node)) {
        Value v = eval_expr(p->tuple, ctx);
        if (!v.is_tuple() || p->index < 1 || static_cast<size_t>(p->index) > v.items().size())
            throw EvalError("Exp.sel: selection index " + std::to_string(p->index) + " out of range");
        return v.items()[static_cast<size_t>(p->index) - 1];
    }
    const auto& op = std::get<Expr::Op>(e->node);
    return apply_op(op.name, eval_expr(op.arg, ctx), ctx);
}

} // namespace lbs
