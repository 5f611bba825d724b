#include <catch2/catch_amalgamated.hpp>

#include "lbs/eval.hpp"
#include "lbs/binders.hpp"
#include "lbs/parser.hpp"
#include "../support/generators.hpp"
#include "../support/oracles.hpp"

using namespace lbs;

namespace {
Value ev(const std::string& src) {
    OpContext ops;
    return eval_expr(parse_expr_string(src), ops);
}
} // namespace

TEST_CASE("big-step evaluation of closed expressions") {
    CHECK(ev("(1.0,2.0,24.0).2") == Value::const_v(2.0));
    CHECK(ev("()") == Value::unit_v());
    CHECK(ev("glue((4.0,0.0,0.0),(0.0,0.0,0.0))") == Value::point_v(2, 0, 0));
    CHECK(ev("1.0+0.25") == Value::const_v(1.25));
    CHECK(ev("(1.0,1.0,1.0)+(2.0,0.0,0.0)") == Value::point_v(3, 1, 1));
    CHECK(ev("2.0*3.5") == Value::const_v(7.0));
    CHECK(ev("0.5*(2.0,4.0,6.0)") == Value::point_v(1, 2, 3));
    CHECK(ev("a") == Value::chan_v("a")); // channel names evaluate to themselves
}

TEST_CASE("stuck terms raise evaluation errors naming the failure") {
    try {
        ev("(1.0,2.0).3");
        FAIL("expected an error");
    } catch (const EvalError& e) {
        CHECK(std::string(e.what()).find("Exp.sel") != std::string::npos);
    }
    CHECK_THROWS_AS(ev("glue((1.0,1.0,1.0),(1.0,1.0,1.0))"), EvalError); // degenerate direction
    CHECK_THROWS_AS(ev("this"), EvalError);                              // not closed
    CHECK_THROWS_AS(ev("1.0+(1.0,1.0,1.0)"), EvalError);                 // no signature
}

TEST_CASE("glue respects the configured contact distance") {
    OpContext wide{3.0};
    Value v = apply_op("glue", Value::tuple_v({Value::point_v(4, 0, 0), Value::point_v(0, 0, 0)}), wide);
    CHECK(v == Value::point_v(3, 0, 0));
}

TEST_CASE("evaluation is deterministic") {
    ExprPtr e = parse_expr_string("glue((4.0,1.0,0.5),(0.25,0.0,0.0))+(0.1,0.2,0.3)");
    OpContext ops;
    Value a = eval_expr(e, ops);
    Value b = eval_expr(e, ops);
    CHECK(a == b);
}

TEST_CASE("every operator signature is implemented") {
    Rng rng(3);
    gen::ExprGen g{rng};
    OpContext ops;
    for (const char* name : {"+", "-", "*", "glue"}) {
        const auto* sigs = op_signatures(name);
        REQUIRE(sigs != nullptr);
        for (const auto& sig : *sigs) {
            for (int i = 0; i < 50; ++i) {
                ExprPtr arg = g.gen(sig.arg, 1);
                Value v = eval_expr(arg, ops);
                Value r = apply_op(name, v, ops);
                TypePtr t = type_of_value(r, [](const std::string&) { return ty_top(); });
                CHECK(type_equal(t, sig.ret));
            }
        }
    }
}

TEST_CASE("substitution coherence: subst-then-eval equals environment evaluation") {
    Rng rng(19);
    gen::ExprGen g{rng};
    OpContext ops;
    for (int i = 0; i < 1000; ++i) {
        ExprPtr e = g.gen(g.random_type(2), 3);
        // graft `this` into the expression through a projection pair
        ExprPtr withThis = mk_proj(mk_pair(e, mk_this()), 1);
        Value thisV = Value::point_v(rng.uniform_in(-5, 5), rng.uniform_in(-5, 5), rng.uniform_in(-5, 5));

        Value viaSubst = eval_expr(subst_this(withThis, thisV), ops);
        oracle::EvalEnv env;
        env.this_value = thisV;
        env.glue_contact = ops.glue_contact;
        Value viaEnv = oracle::eval_env(withThis, env);
        CHECK(viaSubst == viaEnv);
    }
}

TEST_CASE("eval agrees exactly with the environment evaluator on closed terms") {
    Rng rng(29);
    gen::ExprGen g{rng};
    OpContext ops;
    for (int i = 0; i < 2000; ++i) {
        ExprPtr e = g.gen(g.random_type(2), 4);
        Value a = eval_expr(e, ops);
        Value b = oracle::eval_env(e, oracle::EvalEnv{{}, std::nullopt, ops.glue_contact});
        CHECK(a == b);
    }
}
