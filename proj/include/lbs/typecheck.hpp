#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lbs/ast.hpp"
#include "lbs/binders.hpp"
#include "lbs/eval.hpp"
#include "lbs/print.hpp"

// The typing judgements: expression typing, well-formed processes, choices
// and definitions, and whole-program checking. Every diagnostic names the
// rule it violates; checking continues past errors so one pass reports all
// of them.

namespace lbs {

struct Diagnostic {
    enum class Severity { Error, Warning };
    Severity severity = Severity::Error;
    Span span;
    std::string rule;
    std::string message;
};

inline std::string format_diagnostic(const std::string& filename, const Diagnostic& d) {
    return filename + ":" + std::to_string(d.span.line) + ":" + std::to_string(d.span.col) + ": [" + d.rule + "] " +
           d.message;
}

// Ordered identifier environment (last binding wins) plus a separate entity
// namespace mapping each entity to its parameter type.
class TypeEnv {
public:
    void bind(const std::string& name, TypePtr t) { idents_.emplace_back(name, std::move(t)); }
    void bind_entity(const std::string& name, TypePtr t) { entities_[name] = std::move(t); }

    const TypePtr* lookup(const std::string& name) const {
        for (auto it = idents_.rbegin(); it != idents_.rend(); ++it)
            if (it->first == name) return &it->second;
        return nullptr;
    }
    const TypePtr* lookup_entity(const std::string& name) const {
        auto it = entities_.find(name);
        return it == entities_.end() ? nullptr : &it->second;
    }

    size_t mark() const { return idents_.size(); }
    void reset(size_t m) { idents_.resize(m); }

    const std::vector<std::pair<std::string, TypePtr>>& idents() const { return idents_; }

private:
    std::vector<std::pair<std::string, TypePtr>> idents_;
    std::map<std::string, TypePtr> entities_;
};

namespace tyck {

inline void error(std::vector<Diagnostic>& diags, Span span, std::string rule, std::string msg) {
    diags.push_back(Diagnostic{Diagnostic::Severity::Error, span, std::move(rule), std::move(msg)});
}

} // namespace tyck

// Γ ⊢ δ : T. Returns null after reporting when no rule applies; null inputs
// propagate silently so a single fault is reported once.
inline TypePtr type_of_expr(const TypeEnv& env, const ExprPtr& e, Mode mode, std::vector<Diagnostic>& diags) {
    if (!e) return nullptr;
    if (const auto* id = std::get_if<Expr::Ident>(&e->node)) {
        if (const TypePtr* t = env.lookup(id->name)) return *t;
        tyck::error(diags, e->span, "Ty.id", "unbound identifier '" + id->name + "'");
        return nullptr;
    }
    if (std::holds_alternative<Expr::Const>(e->node)) return ty_fl();
    if (std::holds_alternative<Expr::This>(e->node)) return this_type(mode);
    if (std::holds_alternative<Expr::Unit>(e->node)) return ty_top();
    if (const auto* t = std::get_if<Expr::Tuple>(&e->node)) {
        std::vector<TypePtr> items;
        bool ok = true;
        for (const auto& x : t->items) {
            TypePtr xt = type_of_expr(env, x, mode, diags);
            ok = ok && xt != nullptr;
            items.push_back(xt);
        }
        return ok ? ty_prod(std::move(items)) : nullptr;
    }
    if (const auto* p = std::get_if<Expr::Proj>(&e->node)) {
        TypePtr t0 = type_of_expr(env, p->tuple, mode, diags);
        if (!t0) return nullptr;
        const auto* prod = std::get_if<Type::Prod>(&t0->node);
        if (!prod || p->index < 1 || static_cast<size_t>(p->index) > prod->items.size()) {
            tyck::error(diags, e->span, "Ty.sel",
                        "selection ." + std::to_string(p->index) + " does not apply to type " + to_source(t0));
            return nullptr;
        }
        return prod->items[static_cast<size_t>(p->index) - 1];
    }
    const auto& op = std::get<Expr::Op>(e->node);
    TypePtr argT = type_of_expr(env, op.arg, mode, diags);
    if (!argT) return nullptr;
    const auto* sigs = op_signatures(op.name);
    if (!sigs) {
        tyck::error(diags, e->span, "Ty.op", "unknown operator '" + op.name + "'");
        return nullptr;
    }
    for (const auto& sig : *sigs)
        if (type_equal(sig.arg, argT)) return sig.ret;
    tyck::error(diags, e->span, "Ty.op", "operator '" + op.name + "' does not accept argument of type " + to_source(argT));
    return nullptr;
}

namespace tyck {

inline void check_expr_has_type(TypeEnv& env, const ExprPtr& e, const TypePtr& want, Mode mode, const char* rule,
                                const std::string& what, std::vector<Diagnostic>& diags) {
    TypePtr t = type_of_expr(env, e, mode, diags);
    if (t && !type_equal(t, want))
        error(diags, e->span, rule, what + " has type " + to_source(t) + ", expected " + to_source(want));
}

} // namespace tyck

inline void check_process(TypeEnv& env, const ProcessPtr& p, Mode mode, std::vector<Diagnostic>& diags) {
    if (!p) return;
    if (std::holds_alternative<Process::Nil>(p->node)) return;
    if (const auto* inst = std::get_if<Process::Instance>(&p->node)) {
        const char* rule = instance_rule_name(mode);
        const TypePtr* paramT = env.lookup_entity(inst->entity);
        if (!paramT) {
            tyck::error(diags, p->span, rule, "unknown entity '" + inst->entity + "'");
        } else {
            tyck::check_expr_has_type(env, inst->arg, *paramT, mode, rule,
                                      "argument of " + inst->entity, diags);
        }
        tyck::check_expr_has_type(env, inst->loc, subscript_type(mode), mode, rule,
                                  "location subscript of " + inst->entity, diags);
        return;
    }
    if (const auto* par = std::get_if<Process::Par>(&p->node)) {
        check_process(env, par->left, mode, diags);
        check_process(env, par->right, mode, diags);
        return;
    }
    const auto& r = std::get<Process::Restrict>(p->node);
    tyck::check_expr_has_type(env, r.decl.rate, ty_fl(), mode, "Ty.restr", "channel rate", diags);
    tyck::check_expr_has_type(env, r.decl.radius, ty_fl(), mode, "Ty.restr", "channel radius", diags);
    size_t m = env.mark();
    env.bind(r.decl.name, ty_ch(r.decl.payload));
    check_process(env, r.body, mode, diags);
    env.reset(m);
}

inline void check_branch(TypeEnv& env, const Branch& b, Mode mode, std::vector<Diagnostic>& diags) {
    if (const auto* d = std::get_if<Prefix::Delay>(&b.prefix.node)) {
        tyck::check_expr_has_type(env, d->rate, ty_fl(), mode, "Ty.delay", "delay rate", diags);
    } else if (const auto* o = std::get_if<Prefix::Output>(&b.prefix.node)) {
        const TypePtr* t = env.lookup(o->chan);
        if (!t) {
            tyck::error(diags, b.prefix.span, "Ty.out", "unbound channel '" + o->chan + "'");
        } else if (!is_chan_type(*t)) {
            tyck::error(diags, b.prefix.span, "Ty.out",
                        "output subject '" + o->chan + "' has type " + to_source(*t) + ", not a channel");
        } else {
            tyck::check_expr_has_type(env, o->payload, std::get<Type::Ch>((*t)->node).payload, mode, "Ty.out",
                                      "payload on '" + o->chan + "'", diags);
        }
    } else if (const auto* i = std::get_if<Prefix::Input>(&b.prefix.node)) {
        const TypePtr* t = env.lookup(i->chan);
        TypePtr payload;
        if (!t) {
            tyck::error(diags, b.prefix.span, "Ty.in", "unbound channel '" + i->chan + "'");
        } else if (!is_chan_type(*t)) {
            tyck::error(diags, b.prefix.span, "Ty.in",
                        "input subject '" + i->chan + "' has type " + to_source(*t) + ", not a channel");
        } else {
            payload = std::get<Type::Ch>((*t)->node).payload;
        }
        size_t m = env.mark();
        if (!i->binder.empty() && payload) env.bind(i->binder, payload);
        check_process(env, b.cont, mode, diags);
        env.reset(m);
        return;
    }
    check_process(env, b.cont, mode, diags);
}

inline void check_choice(TypeEnv& env, const RestrictedChoice& rc, Mode mode, std::vector<Diagnostic>& diags) {
    size_t m = env.mark();
    for (const auto& r : rc.restrictions) {
        tyck::check_expr_has_type(env, r.rate, ty_fl(), mode, "Ty.restr", "channel rate", diags);
        tyck::check_expr_has_type(env, r.radius, ty_fl(), mode, "Ty.restr", "channel radius", diags);
        env.bind(r.name, ty_ch(r.payload));
    }
    for (const auto& b : rc.branches) check_branch(env, b, mode, diags);
    env.reset(m);
}

// Wraps point-typed subscripts of the initial process into the identity
// placements of the extended modes: (p,0) adds no random translation and
// ((p,0),1) additionally keeps scale 1.
inline ProcessPtr lift_initial_locations(const ProcessPtr& p, const TypeEnv& env, Mode mode) {
    if (!p || mode == Mode::Base) return p;
    if (const auto* par = std::get_if<Process::Par>(&p->node))
        return mk_par(lift_initial_locations(par->left, env, mode), lift_initial_locations(par->right, env, mode),
                      p->span);
    if (const auto* inst = std::get_if<Process::Instance>(&p->node)) {
        std::vector<Diagnostic> scratch;
        TypeEnv scratchEnv = env;
        TypePtr t = type_of_expr(scratchEnv, inst->loc, mode, scratch);
        if (t && type_equal(t, ty_point())) {
            ExprPtr lifted = mk_pair(inst->loc, mk_const(0.0), inst->loc->span);
            if (mode == Mode::RandomScale) lifted = mk_pair(lifted, mk_const(1.0), inst->loc->span);
            return mk_instance(inst->entity, inst->arg, lifted, p->span);
        }
    }
    return p;
}

namespace tyck {

inline bool initial_is_instance_composition(const ProcessPtr& p) {
    if (!p) return false;
    if (std::holds_alternative<Process::Instance>(p->node)) return true;
    if (const auto* par = std::get_if<Process::Par>(&p->node))
        return initial_is_instance_composition(par->left) && initial_is_instance_composition(par->right);
    return false;
}

} // namespace tyck

// Builds the global environment env(E), env(D) plus val bindings, reporting
// declaration-level faults (duplicates, ill-typed constants).
inline TypeEnv build_global_env(const Program& prog, Mode mode, std::vector<Diagnostic>& diags) {
    TypeEnv env;
    std::set<std::string> valNames, chanNames, spaceNames, entityNames;
    for (const auto& v : prog.vals) {
        if (v.space) {
            if (!spaceNames.insert(v.name).second)
                tyck::error(diags, v.span, "Val.unique", "space '" + v.name + "' declared more than once");
            for (const auto& dim : v.space->shape.dims)
                tyck::check_expr_has_type(env, dim, ty_fl(), mode, "Geom", "space dimension", diags);
            for (const auto& a : v.space->anchor)
                tyck::check_expr_has_type(env, a, ty_fl(), mode, "Geom", "space anchor coordinate", diags);
            continue;
        }
        if (!valNames.insert(v.name).second)
            tyck::error(diags, v.span, "Val.unique", "'" + v.name + "' bound more than once");
        if (contains_this(v.expr))
            tyck::error(diags, v.span, "Val.closed", "constant '" + v.name + "' must not mention 'this'");
        TypePtr t = type_of_expr(env, v.expr, mode, diags);
        if (t && v.annotation && !type_equal(t, *v.annotation))
            tyck::error(diags, v.span, "Val.ann",
                        "'" + v.name + "' has type " + to_source(t) + ", annotation says " + to_source(*v.annotation));
        env.bind(v.name, v.annotation ? *v.annotation : t);
    }
    for (const auto& c : prog.channels) {
        if (!chanNames.insert(c.name).second)
            tyck::error(diags, c.span, "E.unique", "channel '" + c.name + "' declared more than once");
        if (valNames.count(c.name))
            tyck::error(diags, c.span, "E.unique", "'" + c.name + "' is already bound as a constant");
        if (contains_this(c.rate) || contains_this(c.radius))
            tyck::error(diags, c.span, "Val.closed", "top-level channel attributes must not mention 'this'");
        tyck::check_expr_has_type(env, c.rate, ty_fl(), mode, "Ty.restr", "channel rate", diags);
        tyck::check_expr_has_type(env, c.radius, ty_fl(), mode, "Ty.restr", "channel radius", diags);
        env.bind(c.name, ty_ch(c.payload));
    }
    for (const auto& d : prog.defs) {
        if (!entityNames.insert(d.name).second)
            tyck::error(diags, d.span, "D.unique", "entity '" + d.name + "' defined more than once");
        env.bind_entity(d.name, def_param_type(d));
    }
    return env;
}

namespace tyck {

inline void check_def_geometry(TypeEnv& env, const Program& prog, const EntityDef& d,
                               Mode mode, std::vector<Diagnostic>& diags) {
    if (d.space.name.empty()) {
        for (const auto& dim : d.space.inline_space->shape.dims)
            check_expr_has_type(env, dim, ty_fl(), mode, "Geom", "space dimension", diags);
        for (const auto& a : d.space.inline_space->anchor)
            check_expr_has_type(env, a, ty_fl(), mode, "Geom", "space anchor coordinate", diags);
    } else {
        bool found = false;
        for (const auto& v : prog.vals)
            if (v.space && v.name == d.space.name) found = true;
        if (!found)
            error(diags, d.space.span, "Geom.space", "unknown space '" + d.space.name + "'");
    }
    check_expr_has_type(env, d.step, ty_fl(), mode, "Geom", "movement step", diags);
    for (const auto& dim : d.shape.dims) check_expr_has_type(env, dim, ty_fl(), mode, "Geom", "shape dimension", diags);
    if (!d.shape.sphere)
        error(diags, d.shape.span, "Geom.shape", "entity shapes are restricted to spheres");
    if (d.max_size) check_expr_has_type(env, d.max_size, ty_fl(), mode, "Geom", "max-size", diags);
    for (const auto& e : {d.step, d.max_size}) {
        if (e && contains_this(e)) error(diags, e->span, "Val.closed", "geometry must not mention 'this'");
    }
}

} // namespace tyck

// Well-formed program: env(E) ⊢ D and env(E),env(D) ⊢ P, with vals and
// geometry resolved alongside.
inline std::vector<Diagnostic> check_program(const Program& prog, Mode mode) {
    std::vector<Diagnostic> diags;
    TypeEnv env = build_global_env(prog, mode, diags);
    for (const auto& d : prog.defs) {
        tyck::check_def_geometry(env, prog, d, mode, diags);
        size_t m = env.mark();
        std::set<std::string> paramNames;
        for (const auto& [pname, ptype] : d.params) {
            if (!paramNames.insert(pname).second)
                tyck::error(diags, d.span, "Def.params", "parameter '" + pname + "' repeated in " + d.name);
            env.bind(pname, ptype);
        }
        check_choice(env, d.body, mode, diags);
        env.reset(m);
    }
    if (!tyck::initial_is_instance_composition(prog.initial))
        tyck::error(diags, prog.run_span, "Init.shape",
                    "the initial process must be a parallel composition of entity instances");
    if (contains_this(prog.initial))
        tyck::error(diags, prog.run_span, "Init.closed", "the initial process must not mention 'this'");
    ProcessPtr initial = lift_initial_locations(prog.initial, env, mode);
    check_process(env, initial, mode, diags);
    return diags;
}

inline std::vector<Diagnostic> check_program(const Program& prog) { return check_program(prog, prog.mode); }

// Typing of run-time values; channel names are typed by the payload lookup
// (the run-time channel environment). Returns null when a name is unknown.
inline TypePtr type_of_value(const Value& v, const std::function<TypePtr(const std::string&)>& chanPayload) {
    if (v.is_chan()) {
        TypePtr payload = chanPayload(v.chan());
        return payload ? ty_ch(payload) : nullptr;
    }
    if (v.is_const()) return ty_fl();
    if (v.is_unit()) return ty_top();
    std::vector<TypePtr> items;
    for (const auto& x : v.items()) {
        TypePtr t = type_of_value(x, chanPayload);
        if (!t) return nullptr;
        items.push_back(std::move(t));
    }
    return ty_prod(std::move(items));
}

} // namespace lbs
