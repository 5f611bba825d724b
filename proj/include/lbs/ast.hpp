#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace lbs {

// Language modes. Instance subscripts and `this` are typed per mode:
//   Base              subscript fl*fl*fl,              this : fl*fl*fl
//   RandomTranslation subscript (fl*fl*fl)*fl,         this : fl*fl*fl
//   RandomScale       subscript ((fl*fl*fl)*fl)*fl,    this : (fl*fl*fl)*fl
enum class Mode { Base, RandomTranslation, RandomScale };

inline const char* mode_name(Mode m) {
    switch (m) {
    case Mode::Base: return "base";
    case Mode::RandomTranslation: return "random";
    case Mode::RandomScale: return "scale";
    }
    return "?";
}

struct Span {
    int line = 0;
    int col = 0;
};

// ---------------------------------------------------------------------------
// Expressions

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    struct Ident { std::string name; };
    struct Const { double value; };
    struct This {};
    struct Unit {};
    struct Tuple { std::vector<ExprPtr> items; }; // arity >= 2
    struct Proj { ExprPtr tuple; int index; };    // 1-based
    struct Op { std::string name; ExprPtr arg; };

    std::variant<Ident, Const, This, Unit, Tuple, Proj, Op> node;
    Span span;
};

inline ExprPtr mk_ident(std::string name, Span s = {}) {
    return std::make_shared<Expr>(Expr{Expr::Ident{std::move(name)}, s});
}
inline ExprPtr mk_const(double v, Span s = {}) { return std::make_shared<Expr>(Expr{Expr::Const{v}, s}); }
inline ExprPtr mk_this(Span s = {}) { return std::make_shared<Expr>(Expr{Expr::This{}, s}); }
inline ExprPtr mk_unit(Span s = {}) { return std::make_shared<Expr>(Expr{Expr::Unit{}, s}); }
inline ExprPtr mk_tuple(std::vector<ExprPtr> items, Span s = {}) {
    return std::make_shared<Expr>(Expr{Expr::Tuple{std::move(items)}, s});
}
inline ExprPtr mk_pair(ExprPtr a, ExprPtr b, Span s = {}) { return mk_tuple({std::move(a), std::move(b)}, s); }
inline ExprPtr mk_proj(ExprPtr e, int i, Span s = {}) {
    return std::make_shared<Expr>(Expr{Expr::Proj{std::move(e), i}, s});
}
inline ExprPtr mk_op(std::string name, ExprPtr arg, Span s = {}) {
    return std::make_shared<Expr>(Expr{Expr::Op{std::move(name), std::move(arg)}, s});
}
inline ExprPtr mk_point(double x, double y, double z, Span s = {}) {
    return mk_tuple({mk_const(x), mk_const(y), mk_const(z)}, s);
}

inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
    if (a.get() == b.get()) return true;
    if (!a || !b) return false;
    if (a->node.index() != b->node.index()) return false;
    struct Cmp {
        const Expr& rhs;
        bool operator()(const Expr::Ident& x) const { return x.name == std::get<Expr::Ident>(rhs.node).name; }
        bool operator()(const Expr::Const& x) const { return x.value == std::get<Expr::Const>(rhs.node).value; }
        bool operator()(const Expr::This&) const { return true; }
        bool operator()(const Expr::Unit&) const { return true; }
        bool operator()(const Expr::Tuple& x) const {
            const auto& y = std::get<Expr::Tuple>(rhs.node);
            if (x.items.size() != y.items.size()) return false;
            for (size_t i = 0; i < x.items.size(); ++i)
                if (!expr_equal(x.items[i], y.items[i])) return false;
            return true;
        }
        bool operator()(const Expr::Proj& x) const {
            const auto& y = std::get<Expr::Proj>(rhs.node);
            return x.index == y.index && expr_equal(x.tuple, y.tuple);
        }
        bool operator()(const Expr::Op& x) const {
            const auto& y = std::get<Expr::Op>(rhs.node);
            return x.name == y.name && expr_equal(x.arg, y.arg);
        }
    };
    return std::visit(Cmp{*b}, a->node);
}

// ---------------------------------------------------------------------------
// Values

struct Value {
    struct Chan { std::string name; };
    struct Unit {};
    std::variant<Chan, double, Unit, std::vector<Value>> v;

    bool is_chan() const { return std::holds_alternative<Chan>(v); }
    bool is_const() const { return std::holds_alternative<double>(v); }
    bool is_unit() const { return std::holds_alternative<Unit>(v); }
    bool is_tuple() const { return std::holds_alternative<std::vector<Value>>(v); }
    const std::string& chan() const { return std::get<Chan>(v).name; }
    double num() const { return std::get<double>(v); }
    const std::vector<Value>& items() const { return std::get<std::vector<Value>>(v); }

    static Value chan_v(std::string n) { return Value{Chan{std::move(n)}}; }
    static Value const_v(double c) { return Value{c}; }
    static Value unit_v() { return Value{Unit{}}; }
    static Value tuple_v(std::vector<Value> xs) { return Value{std::move(xs)}; }
    static Value point_v(double x, double y, double z) { return tuple_v({const_v(x), const_v(y), const_v(z)}); }

    friend bool operator==(const Value& a, const Value& b) {
        if (a.v.index() != b.v.index()) return false;
        if (a.is_chan()) return a.chan() == b.chan();
        if (a.is_const()) return a.num() == b.num();
        if (a.is_unit()) return true;
        const auto& xs = a.items();
        const auto& ys = b.items();
        if (xs.size() != ys.size()) return false;
        for (size_t i = 0; i < xs.size(); ++i)
            if (!(xs[i] == ys[i])) return false;
        return true;
    }
    friend bool operator!=(const Value& a, const Value& b) { return !(a == b); }
};

// Values are a subset of expressions; the injection is used by substitution.
inline ExprPtr value_to_expr(const Value& v, Span s = {}) {
    if (v.is_chan()) return mk_ident(v.chan(), s);
    if (v.is_const()) return mk_const(v.num(), s);
    if (v.is_unit()) return mk_unit(s);
    std::vector<ExprPtr> items;
    items.reserve(v.items().size());
    for (const auto& x : v.items()) items.push_back(value_to_expr(x, s));
    return mk_tuple(std::move(items), s);
}

// ---------------------------------------------------------------------------
// Types

struct Type;
using TypePtr = std::shared_ptr<const Type>;

struct Type {
    struct Ch { TypePtr payload; };
    struct Fl {};
    struct Prod { std::vector<TypePtr> items; }; // arity >= 2
    struct Top {};
    std::variant<Ch, Fl, Prod, Top> node;
};

inline TypePtr ty_fl() {
    static const TypePtr t = std::make_shared<Type>(Type{Type::Fl{}});
    return t;
}
inline TypePtr ty_top() {
    static const TypePtr t = std::make_shared<Type>(Type{Type::Top{}});
    return t;
}
inline TypePtr ty_ch(TypePtr payload) { return std::make_shared<Type>(Type{Type::Ch{std::move(payload)}}); }
inline TypePtr ty_prod(std::vector<TypePtr> items) { return std::make_shared<Type>(Type{Type::Prod{std::move(items)}}); }
inline TypePtr ty_point() {
    static const TypePtr t = ty_prod({ty_fl(), ty_fl(), ty_fl()});
    return t;
}
// Subscript type for the RandomTranslation rule: (fl*fl*fl)*fl.
inline TypePtr ty_point_fl() {
    static const TypePtr t = ty_prod({ty_point(), ty_fl()});
    return t;
}
// Subscript type for the RandomScale rule: ((fl*fl*fl)*fl)*fl.
inline TypePtr ty_point_fl_fl() {
    static const TypePtr t = ty_prod({ty_point_fl(), ty_fl()});
    return t;
}

inline bool type_equal(const TypePtr& a, const TypePtr& b) {
    if (a.get() == b.get()) return true;
    if (!a || !b) return false;
    if (a->node.index() != b->node.index()) return false;
    if (std::holds_alternative<Type::Fl>(a->node) || std::holds_alternative<Type::Top>(a->node)) return true;
    if (const auto* ca = std::get_if<Type::Ch>(&a->node))
        return type_equal(ca->payload, std::get<Type::Ch>(b->node).payload);
    const auto& pa = std::get<Type::Prod>(a->node).items;
    const auto& pb = std::get<Type::Prod>(b->node).items;
    if (pa.size() != pb.size()) return false;
    for (size_t i = 0; i < pa.size(); ++i)
        if (!type_equal(pa[i], pb[i])) return false;
    return true;
}

inline bool is_chan_type(const TypePtr& t) { return t && std::holds_alternative<Type::Ch>(t->node); }
inline bool is_fl_type(const TypePtr& t) { return t && std::holds_alternative<Type::Fl>(t->node); }

// Instance subscript type required in each mode.
inline TypePtr subscript_type(Mode m) {
    switch (m) {
    case Mode::Base: return ty_point();
    case Mode::RandomTranslation: return ty_point_fl();
    case Mode::RandomScale: return ty_point_fl_fl();
    }
    return ty_point();
}
inline TypePtr this_type(Mode m) { return m == Mode::RandomScale ? ty_point_fl() : ty_point(); }

inline const char* instance_rule_name(Mode m) {
    switch (m) {
    case Mode::Base: return "Ty.inst";
    case Mode::RandomTranslation: return "Ty.inst.R";
    case Mode::RandomScale: return "Ty.inst.RS";
    }
    return "Ty.inst";
}

// ---------------------------------------------------------------------------
// Processes

struct Process;
using ProcessPtr = std::shared_ptr<const Process>;

struct Restriction {
    std::string name;
    ExprPtr rate;
    ExprPtr radius;
    TypePtr payload;
    Span span;
};

struct Prefix {
    struct Delay { ExprPtr rate; };
    struct Output { std::string chan; ExprPtr payload; };
    struct Input { std::string chan; std::string binder; };
    struct Move {};
    std::variant<Delay, Output, Input, Move> node;
    Span span;
};

struct Process {
    struct Nil {};
    struct Instance { std::string entity; ExprPtr arg; ExprPtr loc; };
    struct Par { ProcessPtr left, right; };
    struct Restrict { Restriction decl; ProcessPtr body; };
    std::variant<Nil, Instance, Par, Restrict> node;
    Span span;
};

inline ProcessPtr mk_nil(Span s = {}) { return std::make_shared<Process>(Process{Process::Nil{}, s}); }
inline ProcessPtr mk_instance(std::string entity, ExprPtr arg, ExprPtr loc, Span s = {}) {
    return std::make_shared<Process>(Process{Process::Instance{std::move(entity), std::move(arg), std::move(loc)}, s});
}
inline ProcessPtr mk_par(ProcessPtr l, ProcessPtr r, Span s = {}) {
    return std::make_shared<Process>(Process{Process::Par{std::move(l), std::move(r)}, s});
}
inline ProcessPtr mk_restrict(Restriction r, ProcessPtr body, Span s = {}) {
    return std::make_shared<Process>(Process{Process::Restrict{std::move(r), std::move(body)}, s});
}

struct Branch {
    Prefix prefix;
    ProcessPtr cont;
};

// N of the grammar: a choice of prefixed processes under local channel
// definitions. The restrictions scope over every branch.
struct RestrictedChoice {
    std::vector<Restriction> restrictions;
    std::vector<Branch> branches;
};

// ---------------------------------------------------------------------------
// Declarations (concrete-syntax level; geometry still unresolved expressions)

struct ShapeSyn {
    bool sphere = true;
    std::vector<ExprPtr> dims; // sphere: radius; cuboid: w,h,d
    Span span;
};

struct SpaceSyn {
    ShapeSyn shape;
    std::array<ExprPtr, 3> anchor;
    Span span;
};

// Either a reference to a named space or an inline space literal.
struct SpaceRef {
    std::string name; // empty when inline
    std::optional<SpaceSyn> inline_space;
    Span span;
};

struct EntityDef {
    std::string name;
    std::vector<std::pair<std::string, TypePtr>> params;
    RestrictedChoice body;
    SpaceRef space;
    ExprPtr step;
    ShapeSyn shape;
    ExprPtr max_size; // null when absent (+infinity)
    Span span;
};

struct ChannelDecl {
    std::string name;
    ExprPtr rate;
    ExprPtr radius;
    TypePtr payload;
    Span span;
};

struct ValDecl {
    std::string name;
    std::optional<TypePtr> annotation;
    ExprPtr expr;                    // null for space bindings
    std::optional<SpaceSyn> space;   // set for `val N:space = ...`
    Span span;
};

struct Program {
    std::string filename;
    Mode mode = Mode::RandomScale; // default per the pragma rules
    bool mode_explicit = false;
    std::vector<ValDecl> vals;
    std::vector<ChannelDecl> channels;
    std::vector<EntityDef> defs;
    ProcessPtr initial;
    Span run_span;
};

// Parameter type of a definition as a single type: Top for no parameters,
// the parameter type itself for one, and the product for several.
inline TypePtr def_param_type(const EntityDef& d) {
    if (d.params.empty()) return ty_top();
    if (d.params.size() == 1) return d.params[0].second;
    std::vector<TypePtr> ts;
    ts.reserve(d.params.size());
    for (const auto& [_, t] : d.params) ts.push_back(t);
    return ty_prod(std::move(ts));
}

} // namespace lbs
