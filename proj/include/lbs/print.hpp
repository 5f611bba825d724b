#pragma once

#include <cassert>
#include <charconv>
#include <sstream>
#include <string>

#include "lbs/ast.hpp"

// Source printer. parse(print(ast)) reproduces the AST, which the round-trip
// tests rely on; keep the emitted forms inside the grammar the parser accepts.

namespace lbs {

inline std::string number_to_source(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, end);
}

inline bool is_infix_op(const std::string& name) { return name == "+" || name == "-" || name == "*"; }

inline std::string to_source(const ExprPtr& e) {
    if (!e) return "<null>";
    if (const auto* id = std::get_if<Expr::Ident>(&e->node)) return id->name;
    if (const auto* c = std::get_if<Expr::Const>(&e->node)) return number_to_source(c->value);
    if (std::holds_alternative<Expr::This>(e->node)) return "this";
    if (std::holds_alternative<Expr::Unit>(e->node)) return "()";
    if (const auto* t = std::get_if<Expr::Tuple>(&e->node)) {
        std::string s = "(";
        for (size_t i = 0; i < t->items.size(); ++i) {
            if (i) s += ",";
            s += to_source(t->items[i]);
        }
        return s + ")";
    }
    if (const auto* p = std::get_if<Expr::Proj>(&e->node)) {
        std::string base = to_source(p->tuple);
        // Infix results are already parenthesized; identifiers, tuples and
        // projections are postfix-safe as printed.
        return base + "." + std::to_string(p->index);
    }
    const auto& op = std::get<Expr::Op>(e->node);
    if (is_infix_op(op.name)) {
        const auto* args = std::get_if<Expr::Tuple>(&op.arg->node);
        assert(args && args->items.size() == 2);
        return "(" + to_source(args->items[0]) + " " + op.name + " " + to_source(args->items[1]) + ")";
    }
    if (const auto* args = std::get_if<Expr::Tuple>(&op.arg->node)) {
        std::string s = op.name + "(";
        for (size_t i = 0; i < args->items.size(); ++i) {
            if (i) s += ",";
            s += to_source(args->items[i]);
        }
        return s + ")";
    }
    return op.name + "(" + to_source(op.arg) + ")";
}

inline std::string to_source(const TypePtr& t) {
    if (!t) return "<null>";
    if (std::holds_alternative<Type::Fl>(t->node)) return "fl";
    if (std::holds_alternative<Type::Top>(t->node)) return "()";
    if (const auto* c = std::get_if<Type::Ch>(&t->node)) {
        if (std::holds_alternative<Type::Top>(c->payload->node)) return "ch()";
        return "ch(" + to_source(c->payload) + ")";
    }
    const auto& items = std::get<Type::Prod>(t->node).items;
    std::string s;
    for (size_t i = 0; i < items.size(); ++i) {
        if (i) s += "*";
        bool paren = std::holds_alternative<Type::Prod>(items[i]->node);
        s += paren ? "(" + to_source(items[i]) + ")" : to_source(items[i]);
    }
    return s;
}

inline std::string to_string(const Value& v) {
    if (v.is_chan()) return v.chan();
    if (v.is_const()) return number_to_source(v.num());
    if (v.is_unit()) return "()";
    std::string s = "(";
    const auto& xs = v.items();
    for (size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ",";
        s += to_string(xs[i]);
    }
    return s + ")";
}

inline std::string to_source(const ProcessPtr& p);

inline std::string to_source(const Restriction& r) {
    return "new " + r.name + "@" + to_source(r.rate) + "," + to_source(r.radius) + ":" + to_source(ty_ch(r.payload));
}

inline std::string to_source(const Prefix& pre) {
    if (const auto* d = std::get_if<Prefix::Delay>(&pre.node)) return "delay@" + to_source(d->rate);
    if (const auto* o = std::get_if<Prefix::Output>(&pre.node)) {
        if (std::holds_alternative<Expr::Unit>(o->payload->node)) return "!" + o->chan;
        if (const auto* t = std::get_if<Expr::Tuple>(&o->payload->node)) {
            std::string s = "!" + o->chan + "(";
            for (size_t i = 0; i < t->items.size(); ++i) {
                if (i) s += ",";
                s += to_source(t->items[i]);
            }
            return s + ")";
        }
        return "!" + o->chan + "(" + to_source(o->payload) + ")";
    }
    if (const auto* i = std::get_if<Prefix::Input>(&pre.node)) {
        if (i->binder.empty()) return "?" + i->chan;
        return "?" + i->chan + "(" + i->binder + ")";
    }
    return "mov";
}

inline std::string to_source(const ProcessPtr& p) {
    if (!p) return "<null>";
    if (std::holds_alternative<Process::Nil>(p->node)) return "0";
    if (const auto* inst = std::get_if<Process::Instance>(&p->node)) {
        std::string args;
        if (std::holds_alternative<Expr::Unit>(inst->arg->node)) {
            args = "()";
        } else if (const auto* t = std::get_if<Expr::Tuple>(&inst->arg->node)) {
            args = "(";
            for (size_t i = 0; i < t->items.size(); ++i) {
                if (i) args += ",";
                args += to_source(t->items[i]);
            }
            args += ")";
        } else {
            args = "(" + to_source(inst->arg) + ")";
        }
        return inst->entity + args + "_" + to_source(inst->loc);
    }
    if (const auto* par = std::get_if<Process::Par>(&p->node)) {
        auto side = [](const ProcessPtr& q) {
            std::string s = to_source(q);
            return std::holds_alternative<Process::Restrict>(q->node) ? "(" + s + ")" : s;
        };
        return side(par->left) + " | " + side(par->right);
    }
    const auto& r = std::get<Process::Restrict>(p->node);
    return to_source(r.decl) + "; " + to_source(r.body);
}

inline std::string to_source(const Branch& b) {
    std::string s = to_source(b.prefix);
    if (!std::holds_alternative<Process::Nil>(b.cont->node)) s += "; " + to_source(b.cont);
    return s;
}

inline std::string to_source(const RestrictedChoice& rc) {
    std::string s = "(";
    for (const auto& r : rc.restrictions) s += " " + to_source(r);
    s += " do ";
    for (size_t i = 0; i < rc.branches.size(); ++i) {
        if (i) s += " or ";
        s += to_source(rc.branches[i]);
    }
    return s + " )";
}

inline std::string to_source(const ShapeSyn& sh) {
    if (sh.sphere) return "sphere(" + to_source(sh.dims[0]) + ")";
    return "cuboid(" + to_source(sh.dims[0]) + "," + to_source(sh.dims[1]) + "," + to_source(sh.dims[2]) + ")";
}

inline std::string to_source(const SpaceSyn& sp) {
    return to_source(sp.shape) + " @ <" + to_source(sp.anchor[0]) + "," + to_source(sp.anchor[1]) + "," +
           to_source(sp.anchor[2]) + ">";
}

inline std::string to_source(const SpaceRef& sr) {
    if (!sr.name.empty()) return sr.name;
    return to_source(*sr.inline_space);
}

inline std::string to_source(const EntityDef& d, bool first) {
    std::string s = first ? "let " : "and ";
    s += d.name + "(";
    for (size_t i = 0; i < d.params.size(); ++i) {
        if (i) s += ",";
        s += d.params[i].first + ":" + to_source(d.params[i].second);
    }
    s += ")@" + to_source(d.space) + "," + to_source(d.step) + "," + to_source(d.shape);
    if (d.max_size) s += "," + to_source(d.max_size);
    s += " =\n" + to_source(d.body);
    return s;
}

inline std::string to_source(const Program& p) {
    std::ostringstream out;
    out << "#mode " << mode_name(p.mode) << "\n";
    for (const auto& v : p.vals) {
        out << "val " << v.name;
        if (v.space) {
            out << ":space = " << to_source(*v.space);
        } else {
            if (v.annotation) out << ":" << to_source(*v.annotation);
            out << " = " << to_source(v.expr);
        }
        out << "\n";
    }
    for (const auto& c : p.channels)
        out << "new " << c.name << "@" << to_source(c.rate) << "," << to_source(c.radius) << ":"
            << to_source(ty_ch(c.payload)) << "\n";
    for (size_t i = 0; i < p.defs.size(); ++i) out << to_source(p.defs[i], i == 0) << "\n";
    out << "run " << to_source(p.initial) << "\n";
    return out.str();
}

} // namespace lbs
