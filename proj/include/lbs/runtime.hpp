#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "lbs/ast.hpp"
#include "lbs/binders.hpp"
#include "lbs/eval.hpp"
#include "lbs/geometry.hpp"
#include "lbs/parser.hpp"
#include "lbs/scheduler.hpp"
#include "lbs/typecheck.hpp"

// Spatial configurations and the reduction machinery: structural-equivalence
// normalization, placement, space consistency, event enumeration, event
// application and the committed step.

namespace lbs {

struct LoadError : std::runtime_error {
    Span span;
    LoadError(const std::string& msg, Span s = {}) : std::runtime_error(msg), span(s) {}
};

struct ChannelInfo {
    double rate = 0.0;
    double radius = 0.0;
    TypePtr payload;
};

// Run-time channel environment E plus the fresh-name supply used when
// restrictions are hoisted. Fresh names are `base#counter`; source
// identifiers cannot contain '#', so they never collide.
class ChannelEnv {
public:
    bool has(const std::string& name) const { return chans_.count(name) != 0; }
    const ChannelInfo* find(const std::string& name) const {
        auto it = chans_.find(name);
        return it == chans_.end() ? nullptr : &it->second;
    }
    void declare(const std::string& name, ChannelInfo info) {
        if (!chans_.emplace(name, std::move(info)).second)
            throw std::logic_error("channel '" + name + "' already declared");
    }
    std::string fresh(const std::string& base) {
        std::string stem = base.substr(0, base.find('#'));
        return stem + "#" + std::to_string(counter_++);
    }
    const std::map<std::string, ChannelInfo>& all() const { return chans_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::map<std::string, ChannelInfo> chans_;
    std::uint64_t counter_ = 0;
};

struct LocatedEntity {
    std::string entity;
    Value arg;
    Point pos;
    double scale = 1.0;
};

struct CanonicalConfig {
    ChannelEnv env;
    std::vector<LocatedEntity> entities;
    double clock = 0.0;
};

// ---------------------------------------------------------------------------
// Loaded programs: constants folded, geometry resolved.

struct LoadedDef {
    std::string name;
    std::vector<std::string> param_names;
    TypePtr param_type;
    RestrictedChoice body;
    Space space;
    double step = 0.0;
    Shape shape;
    double max_size = std::numeric_limits<double>::infinity();
};

struct LoadedProgram {
    Mode mode = Mode::Base;
    std::map<std::string, LoadedDef> defs;
    std::vector<std::pair<std::string, ChannelInfo>> channels;
    std::map<std::string, Space> spaces;
    ProcessPtr initial;
    OpContext ops;
};

namespace rt {

// Simultaneous substitution of resolved constants, respecting binders.
inline ExprPtr inline_vals(const ExprPtr& e, const std::map<std::string, Value>& vals,
                           const std::set<std::string>& shadow) {
    if (!e) return e;
    if (const auto* id = std::get_if<Expr::Ident>(&e->node)) {
        if (shadow.count(id->name)) return e;
        auto it = vals.find(id->name);
        return it == vals.end() ? e : value_to_expr(it->second, e->span);
    }
    if (const auto* t = std::get_if<Expr::Tuple>(&e->node)) {
        std::vector<ExprPtr> items;
        items.reserve(t->items.size());
        for (const auto& x : t->items) items.push_back(inline_vals(x, vals, shadow));
        return mk_tuple(std::move(items), e->span);
    }
    if (const auto* p = std::get_if<Expr::Proj>(&e->node))
        return mk_proj(inline_vals(p->tuple, vals, shadow), p->index, e->span);
    if (const auto* o = std::get_if<Expr::Op>(&e->node))
        return mk_op(o->name, inline_vals(o->arg, vals, shadow), e->span);
    return e;
}

inline ProcessPtr inline_vals(const ProcessPtr& p, const std::map<std::string, Value>& vals,
                              std::set<std::string> shadow) {
    if (!p) return p;
    if (const auto* inst = std::get_if<Process::Instance>(&p->node))
        return mk_instance(inst->entity, inline_vals(inst->arg, vals, shadow), inline_vals(inst->loc, vals, shadow),
                           p->span);
    if (const auto* par = std::get_if<Process::Par>(&p->node))
        return mk_par(inline_vals(par->left, vals, shadow), inline_vals(par->right, vals, shadow), p->span);
    if (const auto* r = std::get_if<Process::Restrict>(&p->node)) {
        Restriction decl = r->decl;
        decl.rate = inline_vals(decl.rate, vals, shadow);
        decl.radius = inline_vals(decl.radius, vals, shadow);
        shadow.insert(decl.name);
        return mk_restrict(decl, inline_vals(r->body, vals, shadow), p->span);
    }
    return p;
}

inline Branch inline_vals(const Branch& b, const std::map<std::string, Value>& vals, std::set<std::string> shadow) {
    Branch out = b;
    if (const auto* d = std::get_if<Prefix::Delay>(&b.prefix.node)) {
        out.prefix.node = Prefix::Delay{inline_vals(d->rate, vals, shadow)};
    } else if (const auto* o = std::get_if<Prefix::Output>(&b.prefix.node)) {
        out.prefix.node = Prefix::Output{o->chan, inline_vals(o->payload, vals, shadow)};
    } else if (const auto* i = std::get_if<Prefix::Input>(&b.prefix.node)) {
        if (!i->binder.empty()) shadow.insert(i->binder);
    }
    out.cont = inline_vals(b.cont, vals, shadow);
    return out;
}

inline RestrictedChoice inline_vals(const RestrictedChoice& rc, const std::map<std::string, Value>& vals,
                                    std::set<std::string> shadow) {
    RestrictedChoice out;
    for (const auto& r : rc.restrictions) {
        Restriction decl = r;
        decl.rate = inline_vals(decl.rate, vals, shadow);
        decl.radius = inline_vals(decl.radius, vals, shadow);
        shadow.insert(decl.name);
        out.restrictions.push_back(std::move(decl));
    }
    for (const auto& b : rc.branches) out.branches.push_back(inline_vals(b, vals, shadow));
    return out;
}

inline double eval_fl(const ExprPtr& e, const OpContext& ops) {
    Value v = eval_expr(e, ops);
    if (!v.is_const() || !std::isfinite(v.num())) throw EvalError("expected a finite real, got " + to_string(v));
    return v.num();
}

inline double load_fl(const ExprPtr& e, const std::map<std::string, Value>& vals, const OpContext& ops, Span span,
                      const char* what) {
    try {
        return eval_fl(inline_vals(e, vals, {}), ops);
    } catch (const EvalError& err) {
        throw LoadError(std::string(what) + ": " + err.what(), span);
    }
}

inline Shape load_shape(const ShapeSyn& sh, const std::map<std::string, Value>& vals, const OpContext& ops) {
    try {
        if (sh.sphere) return Shape::sphere(load_fl(sh.dims[0], vals, ops, sh.span, "shape radius"));
        return Shape::cuboid(load_fl(sh.dims[0], vals, ops, sh.span, "cuboid width"),
                             load_fl(sh.dims[1], vals, ops, sh.span, "cuboid height"),
                             load_fl(sh.dims[2], vals, ops, sh.span, "cuboid depth"));
    } catch (const GeometryError& err) {
        throw LoadError(err.what(), sh.span);
    }
}

inline Space load_space(const SpaceSyn& sp, const std::map<std::string, Value>& vals, const OpContext& ops) {
    Space out;
    out.shape = load_shape(sp.shape, vals, ops);
    out.anchor = Point{load_fl(sp.anchor[0], vals, ops, sp.span, "anchor x"),
                       load_fl(sp.anchor[1], vals, ops, sp.span, "anchor y"),
                       load_fl(sp.anchor[2], vals, ops, sp.span, "anchor z")};
    return out;
}

} // namespace rt

// Resolves constants, spaces, channel attributes and entity geometry, and
// folds constants into every expression the runtime will evaluate. The
// program must already have passed check_program for the same mode.
inline LoadedProgram load_program(const Program& prog, Mode mode,
                                  std::optional<double> glue_contact = std::nullopt) {
    LoadedProgram out;
    out.mode = mode;
    out.ops.glue_contact = glue_contact.value_or(2.0);

    for (int pass = 0;; ++pass) {
        std::map<std::string, Value> vals;
        out.spaces.clear();
        for (const auto& v : prog.vals) {
            if (v.space) {
                out.spaces[v.name] = rt::load_space(*v.space, vals, out.ops);
            } else {
                try {
                    vals[v.name] = eval_expr(rt::inline_vals(v.expr, vals, {}), out.ops);
                } catch (const EvalError& err) {
                    throw LoadError("constant '" + v.name + "': " + err.what(), v.span);
                }
            }
        }

        out.channels.clear();
        for (const auto& c : prog.channels) {
            ChannelInfo info;
            info.rate = rt::load_fl(c.rate, vals, out.ops, c.span, "channel rate");
            info.radius = rt::load_fl(c.radius, vals, out.ops, c.span, "channel radius");
            info.payload = c.payload;
            if (info.rate < 0.0) throw LoadError("channel rate must be nonnegative", c.span);
            if (info.radius < 0.0) throw LoadError("channel radius must be nonnegative", c.span);
            out.channels.emplace_back(c.name, std::move(info));
        }

        out.defs.clear();
        for (const auto& d : prog.defs) {
            LoadedDef ld;
            ld.name = d.name;
            for (const auto& [pname, _] : d.params) ld.param_names.push_back(pname);
            ld.param_type = def_param_type(d);
            ld.space = d.space.name.empty() ? rt::load_space(*d.space.inline_space, vals, out.ops)
                                            : [&] {
                                                  auto it = out.spaces.find(d.space.name);
                                                  if (it == out.spaces.end())
                                                      throw LoadError("unknown space '" + d.space.name + "'", d.span);
                                                  return it->second;
                                              }();
            ld.step = rt::load_fl(d.step, vals, out.ops, d.span, "movement step");
            if (ld.step < 0.0) throw LoadError("movement step must be nonnegative", d.span);
            ld.shape = rt::load_shape(d.shape, vals, out.ops);
            if (d.max_size) {
                ld.max_size = rt::load_fl(d.max_size, vals, out.ops, d.span, "max-size");
                if (!(ld.max_size > 0.0)) throw LoadError("max-size must be positive", d.span);
            }
            std::set<std::string> shadow(ld.param_names.begin(), ld.param_names.end());
            ld.body = rt::inline_vals(d.body, vals, shadow);
            out.defs.emplace(ld.name, std::move(ld));
        }

        std::vector<Diagnostic> scratch;
        TypeEnv env = build_global_env(prog, mode, scratch);
        out.initial = rt::inline_vals(lift_initial_locations(prog.initial, env, mode), vals, {});

        // glue contact defaults to the sum of the two entity radii when all
        // entity spheres share one radius; constants may mention glue, so
        // re-resolve once if the context changed.
        if (!glue_contact && pass == 0) {
            double common = -1.0;
            bool uniform = !out.defs.empty();
            for (const auto& [_, ld] : out.defs) {
                if (!ld.shape.is_sphere()) { uniform = false; break; }
                if (common < 0.0) common = ld.shape.radius;
                else if (common != ld.shape.radius) { uniform = false; break; }
            }
            if (uniform && common > 0.0 && 2.0 * common != out.ops.glue_contact) {
                out.ops.glue_contact = 2.0 * common;
                continue;
            }
        }
        break;
    }
    return out;
}

inline LoadedProgram load_program(const Program& prog) { return load_program(prog, prog.mode); }

// ---------------------------------------------------------------------------
// Pending configurations and normalization.

struct HoistedChannel {
    std::string name;
    ChannelInfo info;
};

struct LocatedProcess {
    ProcessPtr proc;
    Point pos;
    double scale = 1.0;
};

struct PendingConfig {
    std::vector<HoistedChannel> hoisted; // already-evaluated restrictions
    std::vector<LocatedProcess> groups;
};

struct PendingInstance {
    std::string entity;
    ExprPtr arg;
    ExprPtr loc;
    Point parent_pos;
    double parent_scale = 1.0;
};

struct PreCanonical {
    std::vector<HoistedChannel> channels;
    std::vector<PendingInstance> instances;
};

// `this` as a value at a location: the barycentre, paired with the scale in
// RandomScale mode.
inline Value this_value(Mode mode, const Point& p, double scale) {
    Value pt = Value::point_v(p.x, p.y, p.z);
    if (mode == Mode::RandomScale) return Value::tuple_v({std::move(pt), Value::const_v(scale)});
    return pt;
}

// Structural-equivalence normalization to pre-canonical form: locations
// distribute over parallel compositions, nil groups vanish, and every
// restriction is hoisted outermost with a fresh name, its rate and radius
// evaluated after substituting the group location for `this`.
inline PreCanonical normalize(const PendingConfig& cfg, Mode mode, ChannelEnv& names, const OpContext& ops) {
    PreCanonical out;
    out.channels = cfg.hoisted;

    struct Walker {
        PreCanonical& out;
        Mode mode;
        ChannelEnv& names;
        const OpContext& ops;

        void walk(const ProcessPtr& p, const Point& pos, double scale) {
            if (!p || std::holds_alternative<Process::Nil>(p->node)) return;
            if (const auto* inst = std::get_if<Process::Instance>(&p->node)) {
                out.instances.push_back(PendingInstance{inst->entity, inst->arg, inst->loc, pos, scale});
                return;
            }
            if (const auto* par = std::get_if<Process::Par>(&p->node)) {
                walk(par->left, pos, scale);
                walk(par->right, pos, scale);
                return;
            }
            const auto& r = std::get<Process::Restrict>(p->node);
            Value thisV = this_value(mode, pos, scale);
            double rate = rt::eval_fl(subst_this(r.decl.rate, thisV), ops);
            double radius = rt::eval_fl(subst_this(r.decl.radius, thisV), ops);
            if (rate < 0.0 || radius < 0.0) throw EvalError("restriction rate and radius must be nonnegative");
            std::string fresh = names.fresh(r.decl.name);
            out.channels.push_back(HoistedChannel{fresh, ChannelInfo{rate, radius, r.decl.payload}});
            walk(rename_ident(r.body, r.decl.name, fresh), pos, scale);
        }
    } w{out, mode, names, ops};

    for (const auto& g : cfg.groups) w.walk(g.proc, g.pos, g.scale);
    return out;
}

// ---------------------------------------------------------------------------
// Placement: pre-canonical -> located entities.

struct Placement {
    std::vector<LocatedEntity> entities;
    bool randomness = false; // whether any nonzero random translation was drawn
};

namespace rt {

inline const std::vector<Value>& as_pair(const Value& v, const char* what) {
    if (!v.is_tuple() || v.items().size() != 2) throw EvalError(std::string(what) + ": expected a pair, got " + to_string(v));
    return v.items();
}

inline double as_fl(const Value& v, const char* what) {
    if (!v.is_const() || !std::isfinite(v.num())) throw EvalError(std::string(what) + ": expected a finite real");
    return v.num();
}

} // namespace rt

inline Placement place(const PreCanonical& pre, const LoadedProgram& prog, Rng& rng) {
    Placement out;
    for (const auto& inst : pre.instances) {
        auto defIt = prog.defs.find(inst.entity);
        if (defIt == prog.defs.end()) throw EvalError("unknown entity '" + inst.entity + "'");
        Value thisV = this_value(prog.mode, inst.parent_pos, inst.parent_scale);
        Value arg = eval_expr(subst_this(inst.arg, thisV), prog.ops);
        Value locV = eval_expr(subst_this(inst.loc, thisV), prog.ops);

        Point pos;
        double scale = 1.0;
        switch (prog.mode) {
        case Mode::Base:
            pos = value_to_point(locV);
            break;
        case Mode::RandomTranslation: {
            const auto& pr = rt::as_pair(locV, "location");
            Point base = value_to_point(pr[0]);
            double len = rt::as_fl(pr[1], "translation length");
            if (len < 0.0) throw EvalError("translation length must be nonnegative");
            pos = base + rand_point(len, rng);
            out.randomness = out.randomness || len > 0.0;
            break;
        }
        case Mode::RandomScale: {
            const auto& outer = rt::as_pair(locV, "location");
            const auto& pr = rt::as_pair(outer[0], "location");
            Point base = value_to_point(pr[0]);
            double len = rt::as_fl(pr[1], "translation length") * inst.parent_scale;
            double factor = rt::as_fl(outer[1], "scale factor");
            if (len < 0.0) throw EvalError("translation length must be nonnegative");
            scale = inst.parent_scale * factor;
            if (!(scale > 0.0) || !std::isfinite(scale)) throw EvalError("entity scale must stay positive");
            pos = base + rand_point(len, rng);
            out.randomness = out.randomness || len > 0.0;
            break;
        }
        }
        if (!pos.finite()) throw EvalError("entity position is not finite");
        out.entities.push_back(LocatedEntity{inst.entity, std::move(arg), pos, scale});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Space consistency.

struct SCViolation {
    enum class Kind { Containment, MaxSize, Overlap };
    Kind kind = Kind::Containment;
    size_t i = 0, j = 0;
    std::string describe() const {
        switch (kind) {
        case Kind::Containment: return "entity " + std::to_string(i) + " escapes its confinement space";
        case Kind::MaxSize: return "entity " + std::to_string(i) + " exceeds its max-size";
        case Kind::Overlap: return "entities " + std::to_string(i) + " and " + std::to_string(j) + " overlap";
        }
        return "";
    }
};

inline PlacedShape entity_shape(const LocatedEntity& e, const LoadedProgram& prog) {
    return PlacedShape{prog.defs.at(e.entity).shape, e.pos, e.scale};
}

namespace rt {

inline std::optional<SCViolation> check_one(const LocatedEntity& e, size_t idx, const LoadedProgram& prog) {
    const LoadedDef& def = prog.defs.at(e.entity);
    if (!contains(def.space, PlacedShape{def.shape, e.pos, e.scale}))
        return SCViolation{SCViolation::Kind::Containment, idx, idx};
    if (prog.mode == Mode::RandomScale && e.scale > def.max_size)
        return SCViolation{SCViolation::Kind::MaxSize, idx, idx};
    return std::nullopt;
}

} // namespace rt

inline std::optional<SCViolation> sc_violation(const std::vector<LocatedEntity>& entities, const LoadedProgram& prog) {
    for (size_t i = 0; i < entities.size(); ++i)
        if (auto v = rt::check_one(entities[i], i, prog)) return v;
    for (size_t i = 0; i < entities.size(); ++i)
        for (size_t j = i + 1; j < entities.size(); ++j)
            if (overlaps(entity_shape(entities[i], prog), entity_shape(entities[j], prog)))
                return SCViolation{SCViolation::Kind::Overlap, i, j};
    return std::nullopt;
}

inline bool is_space_consistent(const std::vector<LocatedEntity>& entities, const LoadedProgram& prog) {
    return !sc_violation(entities, prog);
}

// The untouched part of a committed state was already consistent, so only the
// freshly placed entities need checking: containment and size for each, plus
// overlaps among themselves and against the untouched rest.
inline std::optional<SCViolation> sc_violation_incremental(const std::vector<LocatedEntity>& untouched,
                                                           const std::vector<LocatedEntity>& placed,
                                                           const LoadedProgram& prog) {
    for (size_t i = 0; i < placed.size(); ++i) {
        if (auto v = rt::check_one(placed[i], untouched.size() + i, prog)) return v;
        PlacedShape si = entity_shape(placed[i], prog);
        for (size_t j = 0; j < i; ++j)
            if (overlaps(si, entity_shape(placed[j], prog)))
                return SCViolation{SCViolation::Kind::Overlap, untouched.size() + j, untouched.size() + i};
        for (size_t j = 0; j < untouched.size(); ++j)
            if (overlaps(si, entity_shape(untouched[j], prog)))
                return SCViolation{SCViolation::Kind::Overlap, j, untouched.size() + i};
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Event enumeration.

namespace rt {

// The branch with the entity's actual parameters substituted for the formal
// ones. Definition-level restriction names shadow parameters of the same
// name, because every branch sits inside those restrictions.
inline Branch substitute_params(const LoadedDef& def, const Branch& branch, const Value& arg) {
    Branch b = branch;
    std::set<std::string> shadowed;
    for (const auto& r : def.body.restrictions) shadowed.insert(r.name);
    auto apply = [&](const std::string& name, const Value& v) {
        if (!shadowed.count(name)) b = subst_value(b, name, v);
    };
    if (def.param_names.size() == 1) {
        apply(def.param_names[0], arg);
    } else if (def.param_names.size() >= 2) {
        if (!arg.is_tuple() || arg.items().size() != def.param_names.size())
            throw EvalError("argument arity mismatch for " + def.name);
        for (size_t k = 0; k < def.param_names.size(); ++k) apply(def.param_names[k], arg.items()[k]);
    }
    return b;
}

} // namespace rt

inline EventSet enabled_events(const CanonicalConfig& st, const LoadedProgram& prog, const SchedulerConfig& sched) {
    EventSet set;
    struct Port {
        size_t entity;
        int branch;
        std::string chan;
    };
    std::vector<Port> senders, receivers;

    for (size_t i = 0; i < st.entities.size(); ++i) {
        const LocatedEntity& e = st.entities[i];
        const LoadedDef& def = prog.defs.at(e.entity);
        Value thisV = this_value(prog.mode, e.pos, e.scale);
        std::set<std::string> localNames;
        for (const auto& r : def.body.restrictions) localNames.insert(r.name);

        for (size_t bi = 0; bi < def.body.branches.size(); ++bi) {
            Branch b;
            try {
                b = rt::substitute_params(def, def.body.branches[bi], e.arg);
            } catch (const EvalError&) {
                continue;
            }
            if (const auto* d = std::get_if<Prefix::Delay>(&b.prefix.node)) {
                try {
                    double r = rt::eval_fl(subst_this(d->rate, thisV), prog.ops);
                    if (r > 0.0 && std::isfinite(r)) {
                        EventDesc ev;
                        ev.kind = EventKind::Delay;
                        ev.propensity = r;
                        ev.entity_a = i;
                        ev.branch_a = static_cast<int>(bi);
                        set.add(ev);
                    }
                } catch (const EvalError&) {
                    // rate evaluation failure excludes this branch only
                }
            } else if (const auto* o = std::get_if<Prefix::Output>(&b.prefix.node)) {
                if (localNames.count(o->chan) || !st.env.has(o->chan)) continue; // private, not yet shared
                try {
                    (void)eval_expr(subst_this(o->payload, thisV), prog.ops);
                } catch (const EvalError&) {
                    continue; // the Com premise ev(delta_a[p/this]) cannot hold
                }
                senders.push_back(Port{i, static_cast<int>(bi), o->chan});
            } else if (const auto* in = std::get_if<Prefix::Input>(&b.prefix.node)) {
                if (localNames.count(in->chan) || !st.env.has(in->chan)) continue;
                receivers.push_back(Port{i, static_cast<int>(bi), in->chan});
            } else {
                double lambda = movement_propensity(e, prog.defs, sched);
                if (lambda > 0.0 && std::isfinite(lambda)) {
                    EventDesc ev;
                    ev.kind = EventKind::Move;
                    ev.propensity = lambda;
                    ev.entity_a = i;
                    ev.branch_a = static_cast<int>(bi);
                    set.add(ev);
                }
            }
        }
    }

    for (const auto& s : senders) {
        for (const auto& r : receivers) {
            if (s.chan != r.chan || s.entity == r.entity) continue;
            const ChannelInfo* info = st.env.find(s.chan);
            if (!info || !(info->rate > 0.0)) continue;
            double dist = min_distance(entity_shape(st.entities[s.entity], prog),
                                       entity_shape(st.entities[r.entity], prog));
            if (dist <= info->radius + kGeomEps) {
                EventDesc ev;
                ev.kind = EventKind::Com;
                ev.propensity = info->rate;
                ev.entity_a = s.entity;
                ev.branch_a = s.branch;
                ev.entity_b = r.entity;
                ev.branch_b = r.branch;
                ev.channel = s.chan;
                set.add(ev);
            }
        }
    }
    return set;
}

// ---------------------------------------------------------------------------
// Event application.

struct ApplyResult {
    PendingConfig pending;
    std::vector<size_t> consumed;
    bool randomness = false;
};

namespace rt {

// Re-attaching a definition's local restrictions around a fired branch:
// the restriction names are freshened first (the branch is renamed
// consistently, so a transmitted private name and the continuation agree),
// then rate and radius are evaluated with the entity location substituted
// for `this`. Following the reduction rules as written, the actual
// parameters are not substituted into restriction attributes.
struct FreshScope {
    std::vector<HoistedChannel> hoisted;
    Branch branch;
};

inline FreshScope freshen_def_scope(const LoadedDef& def, const Branch& branch, const Value& thisV,
                                    ChannelEnv& names, const OpContext& ops) {
    FreshScope out;
    out.branch = branch;
    std::vector<std::pair<std::string, std::string>> renames;
    for (const auto& r : def.body.restrictions) {
        ExprPtr rateE = r.rate;
        ExprPtr radiusE = r.radius;
        for (const auto& [from, to] : renames) {
            rateE = rename_ident(rateE, from, to);
            radiusE = rename_ident(radiusE, from, to);
        }
        double rate = eval_fl(subst_this(rateE, thisV), ops);
        double radius = eval_fl(subst_this(radiusE, thisV), ops);
        if (rate < 0.0 || radius < 0.0) throw EvalError("restriction rate and radius must be nonnegative");
        std::string fresh = names.fresh(r.name);
        renames.emplace_back(r.name, fresh);
        out.hoisted.push_back(HoistedChannel{fresh, ChannelInfo{rate, radius, r.payload}});
    }
    for (const auto& [from, to] : renames) out.branch = rename_ident(out.branch, from, to);
    return out;
}

} // namespace rt

inline ApplyResult apply_event(const CanonicalConfig& st, const EventDesc& ev, const LoadedProgram& prog, Rng& rng,
                               ChannelEnv& names) {
    ApplyResult out;
    const LocatedEntity& a = st.entities.at(ev.entity_a);
    const LoadedDef& defA = prog.defs.at(a.entity);
    Value thisA = this_value(prog.mode, a.pos, a.scale);

    switch (ev.kind) {
    case EventKind::Delay: {
        rt::FreshScope scope = rt::freshen_def_scope(defA, defA.body.branches.at(ev.branch_a), thisA, names, prog.ops);
        Branch b = rt::substitute_params(defA, scope.branch, a.arg);
        out.pending.hoisted = std::move(scope.hoisted);
        out.pending.groups.push_back(LocatedProcess{b.cont, a.pos, a.scale});
        out.consumed = {ev.entity_a};
        return out;
    }
    case EventKind::Move: {
        rt::FreshScope scope = rt::freshen_def_scope(defA, defA.body.branches.at(ev.branch_a), thisA, names, prog.ops);
        Branch b = rt::substitute_params(defA, scope.branch, a.arg);
        double len = prog.mode == Mode::RandomScale ? a.scale * defA.step : defA.step;
        Point target = a.pos + rand_point(len, rng);
        out.randomness = len > 0.0;
        out.pending.hoisted = std::move(scope.hoisted);
        out.pending.groups.push_back(LocatedProcess{b.cont, target, a.scale});
        out.consumed = {ev.entity_a};
        return out;
    }
    case EventKind::Com: {
        const LocatedEntity& recv = st.entities.at(ev.entity_b);
        const LoadedDef& defB = prog.defs.at(recv.entity);
        Value thisB = this_value(prog.mode, recv.pos, recv.scale);

        rt::FreshScope sendScope =
            rt::freshen_def_scope(defA, defA.body.branches.at(ev.branch_a), thisA, names, prog.ops);
        Branch send = rt::substitute_params(defA, sendScope.branch, a.arg);
        const auto* outPre = std::get_if<Prefix::Output>(&send.prefix.node);
        if (!outPre) throw EvalError("event does not match an output branch");
        Value payload = eval_expr(subst_this(outPre->payload, thisA), prog.ops);

        rt::FreshScope recvScope =
            rt::freshen_def_scope(defB, defB.body.branches.at(ev.branch_b), thisB, names, prog.ops);
        Branch recvB = rt::substitute_params(defB, recvScope.branch, recv.arg);
        const auto* inPre = std::get_if<Prefix::Input>(&recvB.prefix.node);
        if (!inPre) throw EvalError("event does not match an input branch");
        ProcessPtr recvCont = inPre->binder.empty() ? recvB.cont : subst_value(recvB.cont, inPre->binder, payload);

        out.pending.hoisted = std::move(sendScope.hoisted);
        out.pending.hoisted.insert(out.pending.hoisted.end(), recvScope.hoisted.begin(), recvScope.hoisted.end());
        out.pending.groups.push_back(LocatedProcess{send.cont, a.pos, a.scale});
        out.pending.groups.push_back(LocatedProcess{recvCont, recv.pos, recv.scale});
        out.consumed = {ev.entity_a, ev.entity_b};
        return out;
    }
    }
    throw EvalError("unknown event kind");
}

// ---------------------------------------------------------------------------
// The committed step.

enum class StepStatus { Committed, Blocked, NoEvent };

struct StepOptions {
    SchedulerConfig sched;
    int max_placement_retries = 16; // resamples for events with random outcomes
};

struct StepRecord {
    StepStatus status = StepStatus::NoEvent;
    double dt = 0.0;
    EventDesc event;
    std::vector<LocatedEntity> participants;
    std::vector<LocatedEntity> products;
    std::vector<HoistedChannel> new_channels;
    std::vector<size_t> consumed;
    int rejected_events = 0;
};

namespace rt {

inline std::vector<LocatedEntity> untouched_entities(const std::vector<LocatedEntity>& all,
                                                     const std::vector<size_t>& consumed) {
    std::vector<LocatedEntity> out;
    out.reserve(all.size());
    for (size_t i = 0; i < all.size(); ++i)
        if (std::find(consumed.begin(), consumed.end(), i) == consumed.end()) out.push_back(all[i]);
    return out;
}

} // namespace rt

// One reduction: select an event, apply it, normalize, place, and commit if
// the result is space consistent. Events whose outcome involves randomness
// are resampled up to the retry bound; deterministic outcomes fail fast.
// Events that cannot yield a consistent state are excluded at this instant
// and the selection is redrawn among the rest; Blocked when none remain.
inline StepStatus step(CanonicalConfig& st, const LoadedProgram& prog, Rng& rng, const StepOptions& opt,
                       StepRecord* rec = nullptr) {
    EventSet set = enabled_events(st, prog, opt.sched);
    auto sel = select_event(set, rng);
    if (!sel) {
        if (rec) *rec = StepRecord{};
        return StepStatus::NoEvent;
    }
    auto [idx, dt] = *sel;
    std::vector<bool> excluded(set.events.size(), false);
    int rejected = 0;

    while (true) {
        const EventDesc& ev = set.events[idx];
        for (int attempt = 0; attempt < std::max(1, opt.max_placement_retries); ++attempt) {
            bool randomness = false;
            try {
                ApplyResult applied = apply_event(st, ev, prog, rng, st.env);
                PreCanonical pre = normalize(applied.pending, prog.mode, st.env, prog.ops);
                Placement placed = place(pre, prog, rng);
                randomness = applied.randomness || placed.randomness;

                std::vector<LocatedEntity> untouched = rt::untouched_entities(st.entities, applied.consumed);
                if (!sc_violation_incremental(untouched, placed.entities, prog)) {
                    if (rec) {
                        rec->status = StepStatus::Committed;
                        rec->dt = dt;
                        rec->event = ev;
                        rec->participants.clear();
                        for (size_t c : applied.consumed) rec->participants.push_back(st.entities[c]);
                        rec->products = placed.entities;
                        rec->new_channels = pre.channels;
                        rec->consumed = applied.consumed;
                        rec->rejected_events = rejected;
                    }
                    for (const auto& hc : pre.channels) st.env.declare(hc.name, hc.info);
                    untouched.insert(untouched.end(), placed.entities.begin(), placed.entities.end());
                    st.entities = std::move(untouched);
                    st.clock += dt;
                    return StepStatus::Committed;
                }
            } catch (const EvalError&) {
                break; // expression failure: the event is rejected outright
            }
            if (!randomness) break; // deterministic outcome, retrying cannot help
        }
        excluded[idx] = true;
        ++rejected;
        auto next = pick_event(set, excluded, rng);
        if (!next) {
            if (rec) {
                *rec = StepRecord{};
                rec->status = StepStatus::Blocked;
                rec->rejected_events = rejected;
            }
            return StepStatus::Blocked;
        }
        idx = *next;
    }
}

// ---------------------------------------------------------------------------
// Initial configurations and run-time type checking.

// Builds the initial canonical configuration from the program's initial
// process. Reports the first space-consistency violation instead of a
// configuration when the initial placement is inconsistent.
inline CanonicalConfig initial_configuration(const LoadedProgram& prog, Rng& rng,
                                             std::optional<SCViolation>* violation = nullptr) {
    CanonicalConfig st;
    for (const auto& [name, info] : prog.channels) st.env.declare(name, info);
    PendingConfig pending;
    pending.groups.push_back(LocatedProcess{prog.initial, Point{0, 0, 0}, 1.0});
    PreCanonical pre = normalize(pending, prog.mode, st.env, prog.ops);
    for (const auto& hc : pre.channels) st.env.declare(hc.name, hc.info);
    Placement placed = place(pre, prog, rng);
    st.entities = std::move(placed.entities);
    if (violation) *violation = sc_violation(st.entities, prog);
    return st;
}

// Run-time type preservation check: every entity is defined, its argument
// value has the parameter type under the grown channel environment, and all
// channel names it mentions are declared.
inline std::optional<std::string> config_type_violation(const CanonicalConfig& st, const LoadedProgram& prog) {
    auto payloadOf = [&](const std::string& name) -> TypePtr {
        const ChannelInfo* info = st.env.find(name);
        return info ? info->payload : nullptr;
    };
    for (size_t i = 0; i < st.entities.size(); ++i) {
        const LocatedEntity& e = st.entities[i];
        auto it = prog.defs.find(e.entity);
        if (it == prog.defs.end()) return "entity " + std::to_string(i) + " has no definition: " + e.entity;
        TypePtr t = type_of_value(e.arg, payloadOf);
        if (!t) return "entity " + std::to_string(i) + " (" + e.entity + ") mentions an undeclared channel";
        if (!type_equal(t, it->second.param_type))
            return "entity " + std::to_string(i) + " (" + e.entity + ") argument " + to_string(e.arg) +
                   " has type " + to_source(t) + ", expected " + to_source(it->second.param_type);
        if (!(e.scale > 0.0)) return "entity " + std::to_string(i) + " has nonpositive scale";
        if (prog.mode != Mode::RandomScale && e.scale != 1.0)
            return "entity " + std::to_string(i) + " carries a scale outside RandomScale mode";
        if (!e.pos.finite()) return "entity " + std::to_string(i) + " has a non-finite position";
    }
    return std::nullopt;
}

} // namespace lbs
