#pragma once

#include <set>
#include <stdexcept>
#include <string>

#include "lbs/ast.hpp"

// Binder-aware operations over the syntax: free variables and free channel
// names, capture-avoiding substitution of values and expressions, and
// consistent renaming of channel identifiers. Identifiers form one syntactic
// class; an occurrence counts as a variable use when it sits in expression
// position and as a channel name when it is a prefix subject. Input binders,
// restriction names, and entity parameters all bind the same class.

namespace lbs {

struct FreeSets {
    std::set<std::string> vars;  // free identifiers in expression positions
    std::set<std::string> names; // free identifiers in channel-subject positions
};

namespace detail {

inline void free_expr(const ExprPtr& e, const std::set<std::string>& bound, FreeSets& out) {
    if (!e) return;
    if (const auto* id = std::get_if<Expr::Ident>(&e->node)) {
        if (!bound.count(id->name)) out.vars.insert(id->name);
    } else if (const auto* t = std::get_if<Expr::Tuple>(&e->node)) {
        for (const auto& x : t->items) free_expr(x, bound, out);
    } else if (const auto* p = std::get_if<Expr::Proj>(&e->node)) {
        free_expr(p->tuple, bound, out);
    } else if (const auto* o = std::get_if<Expr::Op>(&e->node)) {
        free_expr(o->arg, bound, out);
    }
}

inline void free_proc(const ProcessPtr& p, std::set<std::string> bound, FreeSets& out);

inline void free_branch(const Branch& b, const std::set<std::string>& bound, FreeSets& out) {
    std::set<std::string> inner = bound;
    if (const auto* d = std::get_if<Prefix::Delay>(&b.prefix.node)) {
        free_expr(d->rate, bound, out);
    } else if (const auto* o = std::get_if<Prefix::Output>(&b.prefix.node)) {
        if (!bound.count(o->chan)) out.names.insert(o->chan);
        free_expr(o->payload, bound, out);
    } else if (const auto* i = std::get_if<Prefix::Input>(&b.prefix.node)) {
        if (!bound.count(i->chan)) out.names.insert(i->chan);
        inner.insert(i->binder);
    }
    free_proc(b.cont, inner, out);
}

inline void free_proc(const ProcessPtr& p, std::set<std::string> bound, FreeSets& out) {
    if (!p) return;
    if (const auto* inst = std::get_if<Process::Instance>(&p->node)) {
        free_expr(inst->arg, bound, out);
        free_expr(inst->loc, bound, out);
    } else if (const auto* par = std::get_if<Process::Par>(&p->node)) {
        free_proc(par->left, bound, out);
        free_proc(par->right, bound, out);
    } else if (const auto* r = std::get_if<Process::Restrict>(&p->node)) {
        free_expr(r->decl.rate, bound, out);
        free_expr(r->decl.radius, bound, out);
        bound.insert(r->decl.name);
        free_proc(r->body, bound, out);
    }
}

inline void free_choice(const RestrictedChoice& rc, std::set<std::string> bound, FreeSets& out) {
    for (const auto& r : rc.restrictions) {
        free_expr(r.rate, bound, out);
        free_expr(r.radius, bound, out);
        bound.insert(r.name);
    }
    for (const auto& b : rc.branches) free_branch(b, bound, out);
}

inline void all_idents_expr(const ExprPtr& e, std::set<std::string>& out) {
    if (!e) return;
    if (const auto* id = std::get_if<Expr::Ident>(&e->node)) out.insert(id->name);
    else if (const auto* t = std::get_if<Expr::Tuple>(&e->node))
        for (const auto& x : t->items) all_idents_expr(x, out);
    else if (const auto* p = std::get_if<Expr::Proj>(&e->node)) all_idents_expr(p->tuple, out);
    else if (const auto* o = std::get_if<Expr::Op>(&e->node)) all_idents_expr(o->arg, out);
}

inline void all_idents_proc(const ProcessPtr& p, std::set<std::string>& out) {
    if (!p) return;
    if (const auto* inst = std::get_if<Process::Instance>(&p->node)) {
        all_idents_expr(inst->arg, out);
        all_idents_expr(inst->loc, out);
    } else if (const auto* par = std::get_if<Process::Par>(&p->node)) {
        all_idents_proc(par->left, out);
        all_idents_proc(par->right, out);
    } else if (const auto* r = std::get_if<Process::Restrict>(&p->node)) {
        out.insert(r->decl.name);
        all_idents_expr(r->decl.rate, out);
        all_idents_expr(r->decl.radius, out);
        all_idents_proc(r->body, out);
    }
}

} // namespace detail

inline FreeSets free_idents(const ExprPtr& e) {
    FreeSets out;
    detail::free_expr(e, {}, out);
    return out;
}
inline FreeSets free_idents(const ProcessPtr& p) {
    FreeSets out;
    detail::free_proc(p, {}, out);
    return out;
}
inline FreeSets free_idents(const RestrictedChoice& rc) {
    FreeSets out;
    detail::free_choice(rc, {}, out);
    return out;
}
inline FreeSets free_idents(const Branch& b) {
    FreeSets out;
    detail::free_branch(b, {}, out);
    return out;
}

template <typename T> std::set<std::string> free_vars(const T& t) { return free_idents(t).vars; }
template <typename T> std::set<std::string> free_names(const T& t) { return free_idents(t).names; }

inline bool contains_this(const ExprPtr& e) {
    if (!e) return false;
    if (std::holds_alternative<Expr::This>(e->node)) return true;
    if (const auto* t = std::get_if<Expr::Tuple>(&e->node)) {
        for (const auto& x : t->items)
            if (contains_this(x)) return true;
        return false;
    }
    if (const auto* p = std::get_if<Expr::Proj>(&e->node)) return contains_this(p->tuple);
    if (const auto* o = std::get_if<Expr::Op>(&e->node)) return contains_this(o->arg);
    return false;
}

inline bool contains_this(const ProcessPtr& p) {
    if (!p) return false;
    if (const auto* inst = std::get_if<Process::Instance>(&p->node))
        return contains_this(inst->arg) || contains_this(inst->loc);
    if (const auto* par = std::get_if<Process::Par>(&p->node))
        return contains_this(par->left) || contains_this(par->right);
    if (const auto* r = std::get_if<Process::Restrict>(&p->node))
        return contains_this(r->decl.rate) || contains_this(r->decl.radius) || contains_this(r->body);
    return false;
}

// δ[v/this]
inline ExprPtr subst_this(const ExprPtr& e, const Value& thisVal) {
    if (!e) return e;
    if (std::holds_alternative<Expr::This>(e->node)) return value_to_expr(thisVal, e->span);
    if (const auto* t = std::get_if<Expr::Tuple>(&e->node)) {
        std::vector<ExprPtr> items;
        items.reserve(t->items.size());
        for (const auto& x : t->items) items.push_back(subst_this(x, thisVal));
        return mk_tuple(std::move(items), e->span);
    }
    if (const auto* p = std::get_if<Expr::Proj>(&e->node)) return mk_proj(subst_this(p->tuple, thisVal), p->index, e->span);
    if (const auto* o = std::get_if<Expr::Op>(&e->node)) return mk_op(o->name, subst_this(o->arg, thisVal), e->span);
    return e;
}

namespace detail {

// Picks a name based on `base` distinct from everything in `avoid`.
inline std::string fresh_against(const std::string& base, const std::set<std::string>& avoid) {
    std::string cand = base + "'";
    while (avoid.count(cand)) cand += "'";
    return cand;
}

inline void names_of_value(const Value& v, std::set<std::string>& out) {
    if (v.is_chan()) out.insert(v.chan());
    else if (v.is_tuple())
        for (const auto& x : v.items()) names_of_value(x, out);
}

} // namespace detail

// δ[e/x]: replaces free expression-position occurrences of `x`. Replacement
// of channel-subject occurrences is only possible when `e` is itself an
// identifier; other cases cannot be represented and throw.
inline ExprPtr subst_expr(const ExprPtr& e, const std::string& var, const ExprPtr& repl) {
    if (!e) return e;
    if (const auto* id = std::get_if<Expr::Ident>(&e->node)) return id->name == var ? repl : e;
    if (const auto* t = std::get_if<Expr::Tuple>(&e->node)) {
        std::vector<ExprPtr> items;
        items.reserve(t->items.size());
        for (const auto& x : t->items) items.push_back(subst_expr(x, var, repl));
        return mk_tuple(std::move(items), e->span);
    }
    if (const auto* p = std::get_if<Expr::Proj>(&e->node)) return mk_proj(subst_expr(p->tuple, var, repl), p->index, e->span);
    if (const auto* o = std::get_if<Expr::Op>(&e->node)) return mk_op(o->name, subst_expr(o->arg, var, repl), e->span);
    return e;
}

inline ProcessPtr subst_value(const ProcessPtr& p, const std::string& var, const Value& val);

inline Branch subst_value(const Branch& b, const std::string& var, const Value& val) {
    Branch out = b;
    if (const auto* d = std::get_if<Prefix::Delay>(&b.prefix.node)) {
        out.prefix.node = Prefix::Delay{subst_expr(d->rate, var, value_to_expr(val))};
    } else if (const auto* o = std::get_if<Prefix::Output>(&b.prefix.node)) {
        std::string chan = o->chan;
        if (chan == var) {
            if (!val.is_chan()) throw std::logic_error("substituting non-channel value into channel position");
            chan = val.chan();
        }
        out.prefix.node = Prefix::Output{chan, subst_expr(o->payload, var, value_to_expr(val))};
    } else if (const auto* i = std::get_if<Prefix::Input>(&b.prefix.node)) {
        std::string chan = i->chan;
        if (chan == var) {
            if (!val.is_chan()) throw std::logic_error("substituting non-channel value into channel position");
            chan = val.chan();
        }
        std::string binder = i->binder;
        ProcessPtr cont = b.cont;
        if (binder != var) {
            std::set<std::string> valNames;
            detail::names_of_value(val, valNames);
            if (valNames.count(binder)) {
                // The binder would capture a name of the value: rename it.
                std::set<std::string> avoid = valNames;
                detail::all_idents_proc(cont, avoid);
                avoid.insert(var);
                std::string fresh = detail::fresh_against(binder, avoid);
                cont = subst_value(cont, binder, Value::chan_v(fresh));
                binder = fresh;
            }
            cont = subst_value(cont, var, val);
        }
        out.prefix.node = Prefix::Input{chan, binder};
        out.cont = cont;
        return out;
    }
    out.cont = subst_value(b.cont, var, val);
    return out;
}

inline ProcessPtr subst_value(const ProcessPtr& p, const std::string& var, const Value& val) {
    if (!p) return p;
    if (const auto* inst = std::get_if<Process::Instance>(&p->node)) {
        ExprPtr v = value_to_expr(val);
        return mk_instance(inst->entity, subst_expr(inst->arg, var, v), subst_expr(inst->loc, var, v), p->span);
    }
    if (const auto* par = std::get_if<Process::Par>(&p->node))
        return mk_par(subst_value(par->left, var, val), subst_value(par->right, var, val), p->span);
    if (const auto* r = std::get_if<Process::Restrict>(&p->node)) {
        Restriction decl = r->decl;
        decl.rate = subst_expr(decl.rate, var, value_to_expr(val));
        decl.radius = subst_expr(decl.radius, var, value_to_expr(val));
        if (decl.name == var) return mk_restrict(decl, r->body, p->span); // shadowed
        std::set<std::string> valNames;
        detail::names_of_value(val, valNames);
        ProcessPtr body = r->body;
        if (valNames.count(decl.name)) {
            std::set<std::string> avoid = valNames;
            detail::all_idents_proc(body, avoid);
            avoid.insert(var);
            std::string fresh = detail::fresh_against(decl.name, avoid);
            body = subst_value(body, decl.name, Value::chan_v(fresh));
            decl.name = fresh;
        }
        return mk_restrict(decl, subst_value(body, var, val), p->span);
    }
    return p; // Nil
}

// Substitution on expressions, value payload form: δ[v/x].
inline ExprPtr subst_value(const ExprPtr& e, const std::string& var, const Value& val) {
    return subst_expr(e, var, value_to_expr(val));
}

// Renames a channel identifier everywhere it occurs free, in both expression
// and channel-subject positions. The new name is expected to be fresh for the
// whole term (runtime freshening guarantees this), so no capture can occur.
inline ProcessPtr rename_ident(const ProcessPtr& p, const std::string& from, const std::string& to) {
    return subst_value(p, from, Value::chan_v(to));
}
inline ExprPtr rename_ident(const ExprPtr& e, const std::string& from, const std::string& to) {
    return subst_expr(e, from, mk_ident(to));
}
inline Branch rename_ident(const Branch& b, const std::string& from, const std::string& to) {
    return subst_value(b, from, Value::chan_v(to));
}

} // namespace lbs
