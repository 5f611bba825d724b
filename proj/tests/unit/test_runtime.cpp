#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "lbs/driver.hpp"
#include "lbs/runtime.hpp"
#include "../support/generators.hpp"
#include "../support/oracles.hpp"

using namespace lbs;

namespace {

const std::string kSourceDir = LBS_SOURCE_DIR;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

LoadedProgram load_src(const std::string& src, std::optional<Mode> mode = std::nullopt) {
    Program p = parse_program(src, "test");
    Mode m = mode.value_or(p.mode);
    auto diags = check_program(p, m);
    for (const auto& d : diags) UNSCOPED_INFO(format_diagnostic("test", d));
    REQUIRE(diags.empty());
    return load_program(p, m);
}

// Microtubule program with two parts separated by the given surface distance.
std::string mt_source(double surfaceGap, int extraParts = 0, double spacing = 2.1) {
    std::ostringstream run;
    std::ostringstream vals;
    vals << "val p1 = (20.0,25.0,40.0)\n";
    run << "run ( MTPart()_p1";
    double x = 20.0 + 2.0 + surfaceGap;
    vals << "val p2 = (" << x << ",25.0,40.0)\n";
    run << " | MTPart()_p2";
    for (int i = 0; i < extraParts; ++i) {
        x += spacing;
        vals << "val q" << i << " = (" << x << ",25.0,40.0)\n";
        run << " | MTPart()_q" << i;
    }
    run << " )\n";
    return "#mode base\n"
           "val Cytosol:space = cuboid(50.0,50.0,30.0) @ <1.0,2.0,24.0>\n"
           "val step = 0.0, stepP = 0.1, r = 0.0, rP = 0.2\n" +
           vals.str() +
           "new MTConstruction@0.116,rP:ch(ch(),fl*fl*fl)\n"
           "let MTPart()@Cytosol,stepP,sphere(1.0) = ( new y@0.27,r:ch()\n"
           "do ?MTConstruction(x,u); MTLeft(x)_glue(this,u)\n"
           "or !MTConstruction(y,this); MTRight(y)_this\n"
           "or mov. MTPart()_this )\n"
           "and MTRight(rht:chan())@Cytosol,step,sphere(1.0) =\n"
           "do delay@1.0; MTRight(rht)_this\n"
           "or ?rht; MTPart()_this\n"
           "and MTLeft(lft:chan())@Cytosol,step,sphere(1.0) = ( new z@0.27,r:ch()\n"
           "do delay@1.0; MTLeft(lft)_this\n"
           "or !MTConstruction(z,this); MTMiddle(lft,z)_this\n"
           "or !lft; MTPart()_this\n"
           "or ?lft; MTPart()_this )\n"
           "and MTMiddle(rht1:chan(),lft1:chan())@Cytosol,step,sphere(1.0) =\n"
           "do delay@1.0; MTMiddle(rht1,lft1)_this\n"
           "or !lft1; MTLeft(rht1)_this\n" +
           run.str();
}

CanonicalConfig init_of(const LoadedProgram& prog, Rng& rng) {
    std::optional<SCViolation> v;
    CanonicalConfig st = initial_configuration(prog, rng, &v);
    REQUIRE_FALSE(v.has_value());
    return st;
}

} // namespace

TEST_CASE("normalization distributes locations over parallel composition") {
    LoadedProgram prog = load_src(mt_source(0.15));
    ProcessPtr a = mk_instance("MTPart", mk_unit(), mk_this());
    ProcessPtr b = mk_instance("MTRight", mk_ident("y#9"), mk_this());
    Point p{3, 4, 5};

    PendingConfig joined;
    joined.groups.push_back(LocatedProcess{mk_par(a, b), p, 1.0});
    PendingConfig split;
    split.groups.push_back(LocatedProcess{a, p, 1.0});
    split.groups.push_back(LocatedProcess{b, p, 1.0});

    ChannelEnv n1, n2;
    PreCanonical c1 = normalize(joined, Mode::Base, n1, prog.ops);
    PreCanonical c2 = normalize(split, Mode::Base, n2, prog.ops);
    REQUIRE(c1.instances.size() == 2);
    REQUIRE(c2.instances.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(c1.instances[i].entity == c2.instances[i].entity);
        CHECK(c1.instances[i].parent_pos == c2.instances[i].parent_pos);
    }
    CHECK(c1.channels.empty());

    // nil groups vanish
    PendingConfig nil;
    nil.groups.push_back(LocatedProcess{mk_nil(), p, 1.0});
    CHECK(normalize(nil, Mode::Base, n1, prog.ops).instances.empty());
}

TEST_CASE("normalization hoists restrictions with evaluated attributes and fresh names") {
    LoadedProgram prog = load_src(mt_source(0.15));
    auto mkRestricted = [&](const char* inner) {
        Restriction r{"z", mk_const(0.27), mk_const(0.0), ty_top(), {}};
        return mk_restrict(r, mk_instance(inner, mk_ident("z"), mk_this()), Span{});
    };
    PendingConfig cfg;
    cfg.groups.push_back(LocatedProcess{mkRestricted("MTRight"), Point{1, 1, 1}, 1.0});
    cfg.groups.push_back(LocatedProcess{mkRestricted("MTLeft"), Point{2, 2, 2}, 1.0});

    ChannelEnv names;
    PreCanonical pre = normalize(cfg, Mode::Base, names, prog.ops);
    REQUIRE(pre.channels.size() == 2);
    CHECK(pre.channels[0].info.rate == 0.27);
    CHECK(pre.channels[0].info.radius == 0.0);
    CHECK(pre.channels[0].name != pre.channels[1].name);

    // each occurrence follows its own declaration
    REQUIRE(pre.instances.size() == 2);
    const auto* arg0 = std::get_if<Expr::Ident>(&pre.instances[0].arg->node);
    const auto* arg1 = std::get_if<Expr::Ident>(&pre.instances[1].arg->node);
    REQUIRE((arg0 && arg1));
    CHECK(arg0->name == pre.channels[0].name);
    CHECK(arg1->name == pre.channels[1].name);
}

TEST_CASE("restriction attributes may depend on this") {
    LoadedProgram prog = load_src(mt_source(0.15));
    Restriction r{"w", mk_proj(mk_this(), 1), mk_const(0.0), ty_top(), {}};
    PendingConfig cfg;
    cfg.groups.push_back(
        LocatedProcess{mk_restrict(r, mk_instance("MTRight", mk_ident("w"), mk_this()), Span{}), Point{0.5, 9, 9}, 1.0});
    ChannelEnv names;
    PreCanonical pre = normalize(cfg, Mode::Base, names, prog.ops);
    REQUIRE(pre.channels.size() == 1);
    CHECK(pre.channels[0].info.rate == 0.5);
}

TEST_CASE("place evaluates locations per mode") {
    SECTION("base: this is the parent barycentre") {
        LoadedProgram prog = load_src(mt_source(0.15));
        PreCanonical pre;
        pre.instances.push_back(PendingInstance{"MTRight", mk_ident("y#0"), mk_this(), Point{7, 8, 9}, 1.0});
        Rng rng(1);
        Placement out = place(pre, prog, rng);
        REQUIRE(out.entities.size() == 1);
        CHECK(out.entities[0].pos == Point{7, 8, 9});
        CHECK(out.entities[0].scale == 1.0);
        CHECK_FALSE(out.randomness);
    }
    SECTION("random translation: zero length is exact") {
        LoadedProgram prog = load_src(read_file(kSourceDir + "/programs/secretion.lbs"));
        PreCanonical pre;
        pre.instances.push_back(
            PendingInstance{"Bac", mk_unit(), mk_pair(mk_this(), mk_const(0.0)), Point{4, 5, 6}, 1.0});
        Rng rng(2);
        Placement out = place(pre, prog, rng);
        CHECK(out.entities[0].pos == Point{4, 5, 6});
        CHECK_FALSE(out.randomness);
    }
    SECTION("random scale composes translation length and scale with the parent") {
        LoadedProgram prog = load_src(read_file(kSourceDir + "/programs/bacterium.lbs"));
        const double rB = 1.0, parentScale = 0.5;
        PreCanonical pre;
        ExprPtr loc = mk_pair(mk_pair(mk_proj(mk_this(), 1), mk_const(rB)), mk_const(0.5));
        pre.instances.push_back(PendingInstance{"Bac", mk_unit(), loc, Point{10, 10, 10}, parentScale});
        Rng rng(3);
        Placement out = place(pre, prog, rng);
        REQUIRE(out.entities.size() == 1);
        CHECK(out.entities[0].scale == Catch::Approx(0.25));
        CHECK(distance(out.entities[0].pos, Point{10, 10, 10}) == Catch::Approx(rB * parentScale).margin(1e-12));
        CHECK(out.randomness);
    }
}

TEST_CASE("space consistency violations") {
    LoadedProgram prog = load_src(mt_source(0.15));
    Value unit = Value::unit_v();
    std::vector<LocatedEntity> same = {{"MTPart", unit, Point{25, 25, 40}, 1.0},
                                       {"MTPart", unit, Point{25, 25, 40}, 1.0}};
    auto v = sc_violation(same, prog);
    REQUIRE(v);
    CHECK(v->kind == SCViolation::Kind::Overlap);

    // a glued tangent pair is space consistent
    std::vector<LocatedEntity> glued = {{"MTRight", Value::chan_v("y#0"), Point{25, 25, 40}, 1.0},
                                        {"MTLeft", Value::chan_v("y#0"), Point{27, 25, 40}, 1.0}};
    CHECK(is_space_consistent(glued, prog));

    // escape from the confinement space
    std::vector<LocatedEntity> outside = {{"MTPart", unit, Point{1.5, 25, 40}, 1.0}};
    auto v2 = sc_violation(outside, prog);
    REQUIRE(v2);
    CHECK(v2->kind == SCViolation::Kind::Containment);

    LoadedProgram bac = load_src(read_file(kSourceDir + "/programs/bacterium.lbs"));
    std::vector<LocatedEntity> big = {{"Bac", unit, Point{20, 20, 20}, 1.2}};
    auto v3 = sc_violation(big, bac); // max-size is 1.1
    REQUIRE(v3);
    CHECK(v3->kind == SCViolation::Kind::MaxSize);
    std::vector<LocatedEntity> ok = {{"Bac", unit, Point{20, 20, 20}, 1.1}};
    CHECK(is_space_consistent(ok, bac));
}

TEST_CASE("event enumeration follows the communication radius") {
    SECTION("parts within the construction radius can communicate") {
        LoadedProgram prog = load_src(mt_source(0.15));
        Rng rng(4);
        CanonicalConfig st = init_of(prog, rng);
        EventSet set = enabled_events(st, prog, SchedulerConfig{0.0});
        REQUIRE(set.events.size() == 2); // both orientations of the Com
        for (const auto& e : set.events) {
            CHECK(e.kind == EventKind::Com);
            CHECK(e.channel == "MTConstruction");
            CHECK(e.propensity == 0.116);
        }
    }
    SECTION("parts past the radius cannot") {
        LoadedProgram prog = load_src(mt_source(0.25));
        Rng rng(5);
        CanonicalConfig st = init_of(prog, rng);
        EventSet set = enabled_events(st, prog, SchedulerConfig{0.0});
        CHECK(set.events.empty());
        EventSet withMov = enabled_events(st, prog, SchedulerConfig{1.0});
        CHECK(withMov.events.size() == 2); // the mov branches remain
    }
    SECTION("a lone end piece only delays; a contact partner enables the private channel") {
        LoadedProgram prog = load_src(mt_source(0.15));
        CanonicalConfig st;
        for (const auto& [n, i] : prog.channels) st.env.declare(n, i);
        st.env.declare("y#0", ChannelInfo{0.27, 0.0, ty_top()});
        st.entities.push_back(LocatedEntity{"MTRight", Value::chan_v("y#0"), Point{25, 25, 40}, 1.0});

        EventSet lone = enabled_events(st, prog, SchedulerConfig{0.0});
        REQUIRE(lone.events.size() == 1);
        CHECK(lone.events[0].kind == EventKind::Delay);
        CHECK(lone.events[0].propensity == 1.0);

        st.entities.push_back(LocatedEntity{"MTLeft", Value::chan_v("y#0"), Point{27, 25, 40}, 1.0});
        EventSet pair = enabled_events(st, prog, SchedulerConfig{0.0});
        int delays = 0, coms = 0;
        for (const auto& e : pair.events) {
            if (e.kind == EventKind::Delay) ++delays;
            if (e.kind == EventKind::Com) {
                ++coms;
                CHECK(e.channel == "y#0");
                CHECK(st.entities[e.entity_a].entity == "MTLeft");  // !lft sender
                CHECK(st.entities[e.entity_b].entity == "MTRight"); // ?rht receiver
            }
        }
        CHECK(delays == 2);
        CHECK(coms == 1);

        // out of contact, the private channel is gated away
        st.entities[1].pos = Point{27.5, 25, 40};
        EventSet apart = enabled_events(st, prog, SchedulerConfig{0.0});
        for (const auto& e : apart.events) CHECK(e.kind == EventKind::Delay);
    }
}

TEST_CASE("applying the construction event glues the new left piece in contact") {
    LoadedProgram prog = load_src(mt_source(0.15));
    Rng rng(6);
    CanonicalConfig st = init_of(prog, rng);
    EventSet set = enabled_events(st, prog, SchedulerConfig{0.0});
    REQUIRE_FALSE(set.events.empty());
    const EventDesc& ev = set.events[0];

    ApplyResult applied = apply_event(st, ev, prog, rng, st.env);
    PreCanonical pre = normalize(applied.pending, prog.mode, st.env, prog.ops);
    Placement placed = place(pre, prog, rng);
    REQUIRE(placed.entities.size() == 2);

    const LocatedEntity* right = nullptr;
    const LocatedEntity* left = nullptr;
    for (const auto& e : placed.entities) {
        if (e.entity == "MTRight") right = &e;
        if (e.entity == "MTLeft") left = &e;
    }
    REQUIRE((right && left));
    CHECK(right->pos == st.entities[ev.entity_a].pos);
    CHECK(min_distance(entity_shape(*right, prog), entity_shape(*left, prog)) <= 1e-9);
    CHECK(right->arg == left->arg); // the private channel is shared
    CHECK(right->arg.is_chan());
    CHECK(right->arg.chan().find('#') != std::string::npos);
}

TEST_CASE("delay self-loops and zero-step moves preserve the entity") {
    std::string src = "#mode base\n"
                      "val p = (5.0,5.0,5.0)\n"
                      "let X()@cuboid(10.0,10.0,10.0) @ <0.0,0.0,0.0>,0.0,sphere(1.0) =\n"
                      "do delay@1.0; X()_this\n"
                      "or mov. X()_this\n"
                      "run X()_p\n";
    LoadedProgram prog = load_src(src);
    Rng rng(7);
    CanonicalConfig st = init_of(prog, rng);
    StepOptions opt;
    opt.sched.lambda_mov = 1.0;
    for (int i = 0; i < 20; ++i) {
        StepRecord rec;
        REQUIRE(step(st, prog, rng, opt, &rec) == StepStatus::Committed);
        REQUIRE(st.entities.size() == 1);
        CHECK(st.entities[0].pos == Point{5, 5, 5}); // mov has step 0
        CHECK(st.entities[0].scale == 1.0);
    }
}

TEST_CASE("a division that can never fit blocks the step") {
    std::string src = "#mode scale\n"
                      "val pB = (0.0,0.0,0.0)\n"
                      "val Ball:space = sphere(1.2) @ <0.0,0.0,0.0>\n"
                      "let Bac()@Ball,0.0,sphere(1.0),2.0 =\n"
                      "do delay@0.2; ( Bac()_((fst(this),1.0),0.5) | Bac()_((fst(this),1.0),0.5) )\n"
                      "run Bac()_((pB,0.0),1.0)\n";
    LoadedProgram prog = load_src(src);
    Rng rng(8);
    CanonicalConfig st = init_of(prog, rng);
    StepRecord rec;
    CHECK(step(st, prog, rng, StepOptions{}, &rec) == StepStatus::Blocked);
    CHECK(st.entities.size() == 1); // nothing committed
}

TEST_CASE("committed steps grow the channel environment by the hoisted restrictions") {
    LoadedProgram prog = load_src(mt_source(0.15));
    Rng rng(9);
    CanonicalConfig st = init_of(prog, rng);
    size_t before = st.env.all().size();
    StepOptions opt;
    opt.sched.lambda_mov = 0.0;
    StepRecord rec;
    REQUIRE(step(st, prog, rng, opt, &rec) == StepStatus::Committed);
    CHECK(rec.event.kind == EventKind::Com); // the only reaction events are the construction Com
    // both parts re-attach their private restriction; the sender's is shared
    CHECK(st.env.all().size() == before + rec.new_channels.size());
    CHECK(rec.new_channels.size() == 2);
    for (const auto& c : rec.new_channels) {
        CHECK(c.info.rate == 0.27);
        CHECK(c.info.radius == 0.0);
        CHECK(st.env.has(c.name));
    }
}

TEST_CASE("entities outside the redex are preserved bit for bit") {
    LoadedProgram prog = load_src(mt_source(0.15, 3));
    Rng rng(10);
    CanonicalConfig st = init_of(prog, rng);
    StepOptions opt;
    for (int i = 0; i < 100; ++i) {
        std::vector<LocatedEntity> before = st.entities;
        StepRecord rec;
        if (step(st, prog, rng, opt, &rec) != StepStatus::Committed) break;
        size_t kept = 0;
        for (size_t idx = 0; idx < before.size(); ++idx) {
            if (std::find(rec.consumed.begin(), rec.consumed.end(), idx) != rec.consumed.end()) continue;
            const LocatedEntity& now = st.entities[kept++];
            CHECK(now.entity == before[idx].entity);
            CHECK(now.pos == before[idx].pos);
            CHECK(now.scale == before[idx].scale);
            CHECK(now.arg == before[idx].arg);
        }
    }
}

TEST_CASE("no committed communication ever exceeded its radius at selection time") {
    LoadedProgram prog = load_src(mt_source(0.15, 3));
    Rng rng(11);
    CanonicalConfig st = init_of(prog, rng);
    StepOptions opt;
    for (int i = 0; i < 300; ++i) {
        StepRecord rec;
        if (step(st, prog, rng, opt, &rec) != StepStatus::Committed) break;
        if (rec.event.kind != EventKind::Com) continue;
        const ChannelInfo* info = st.env.find(rec.event.channel);
        REQUIRE(info);
        double d = min_distance(PlacedShape{prog.defs.at(rec.participants[0].entity).shape, rec.participants[0].pos,
                                            rec.participants[0].scale},
                                PlacedShape{prog.defs.at(rec.participants[1].entity).shape, rec.participants[1].pos,
                                            rec.participants[1].scale});
        CHECK(d <= info->radius + kGeomEps);
    }
}

TEST_CASE("every committed configuration re-typechecks and stays canonical") {
    LoadedProgram prog = load_src(mt_source(0.15, 2));
    Rng rng(12);
    CanonicalConfig st = init_of(prog, rng);
    StepOptions opt;
    for (int i = 0; i < 400; ++i) {
        StepRecord rec;
        if (step(st, prog, rng, opt, &rec) != StepStatus::Committed) break;
        auto violation = config_type_violation(st, prog);
        if (violation) {
            CAPTURE(*violation);
            FAIL("run-time type preservation violated");
        }
        CHECK(is_space_consistent(st.entities, prog));
    }
}

TEST_CASE("a base program lifted into scale mode is statistically identical") {
    std::string src = mt_source(0.15, 2);
    Program base = parse_program(src, "base");
    Program lifted = gen::lift_base_to_scale(base);
    REQUIRE(check_program(lifted).empty());

    LoadedProgram progBase = load_program(base);
    LoadedProgram progLift = load_program(lifted);

    // One committed step sampled per independent run, so the two frequency
    // tables compare i.i.d. draws; a pooled single trajectory would be
    // dominated by when assemblies happen to form.
    auto histogram = [](const LoadedProgram& prog, std::uint64_t seedBase) {
        std::map<std::string, std::uint64_t> h;
        StepOptions opt;
        for (std::uint64_t run = 0; run < 10000; ++run) {
            Rng rng(seedBase + run);
            std::optional<SCViolation> v;
            CanonicalConfig st = initial_configuration(prog, rng, &v);
            REQUIRE_FALSE(v);
            StepRecord rec;
            bool ok = true;
            for (int i = 0; i < 3 && ok; ++i) ok = step(st, prog, rng, opt, &rec) == StepStatus::Committed;
            if (!ok) continue;
            std::string key = event_kind_name(rec.event.kind);
            if (rec.event.kind == EventKind::Com)
                key += ":" + rec.event.channel.substr(0, rec.event.channel.find('#'));
            ++h[key];
        }
        return h;
    };
    auto hBase = histogram(progBase, 20000);
    auto hLift = histogram(progLift, 40000);
    double p = oracle::chi2_homogeneity_pvalue(hBase, hLift);
    CAPTURE(p);
    CHECK(p > 0.001);

    // scale stays exactly 1 throughout the lifted run
    Rng rng(77);
    std::optional<SCViolation> v;
    CanonicalConfig st = initial_configuration(progLift, rng, &v);
    REQUIRE_FALSE(v);
    for (int i = 0; i < 200; ++i) {
        if (step(st, progLift, rng, StepOptions{}) != StepStatus::Committed) break;
        for (const auto& e : st.entities) CHECK(e.scale == 1.0);
    }
}

TEST_CASE("restrictions inside continuations hoist on commit") {
    std::string src = "#mode base\n"
                      "val p = (5.0,5.0,5.0)\n"
                      "let X()@cuboid(10.0,10.0,10.0) @ <0.0,0.0,0.0>,0.0,sphere(1.0) =\n"
                      "do delay@1.0; new w@0.5,0.0:ch(); X()_this\n"
                      "run X()_p\n";
    LoadedProgram prog = load_src(src);
    Rng rng(15);
    CanonicalConfig st = init_of(prog, rng);
    StepRecord rec;
    REQUIRE(step(st, prog, rng, StepOptions{}, &rec) == StepStatus::Committed);
    REQUIRE(rec.new_channels.size() == 1);
    CHECK(rec.new_channels[0].name.rfind("w#", 0) == 0);
    CHECK(rec.new_channels[0].info.rate == 0.5);
    CHECK(st.env.has(rec.new_channels[0].name));
}

TEST_CASE("delay rates may depend on the position in space") {
    std::string src = "#mode base\n"
                      "val p = (2.0,5.0,5.0)\n"
                      "let X()@cuboid(10.0,10.0,10.0) @ <0.0,0.0,0.0>,0.0,sphere(1.0) =\n"
                      "do delay@fst(this); X()_this\n"
                      "run X()_p\n";
    LoadedProgram prog = load_src(src);
    Rng rng(16);
    CanonicalConfig st = init_of(prog, rng);
    EventSet set = enabled_events(st, prog, SchedulerConfig{0.0});
    REQUIRE(set.events.size() == 1);
    CHECK(set.events[0].propensity == 2.0); // the x coordinate
}

TEST_CASE("delay rates may depend on the actual parameter") {
    std::string src = "#mode base\n"
                      "val p = (5.0,5.0,5.0)\n"
                      "let X(k:fl)@cuboid(10.0,10.0,10.0) @ <0.0,0.0,0.0>,0.0,sphere(1.0) =\n"
                      "do delay@k; X(k)_this\n"
                      "run X(3.0)_p\n";
    LoadedProgram prog = load_src(src);
    Rng rng(18);
    CanonicalConfig st = init_of(prog, rng);
    EventSet set = enabled_events(st, prog, SchedulerConfig{0.0});
    REQUIRE(set.events.size() == 1);
    CHECK(set.events[0].propensity == 3.0);
}

TEST_CASE("movement jumps scale with the entity") {
    LoadedProgram prog = load_src(read_file(kSourceDir + "/programs/bacterium.lbs"));
    Rng rng(19);
    CanonicalConfig st = init_of(prog, rng);
    StepOptions opt;
    int moves = 0;
    for (int i = 0; i < 400 && moves < 20; ++i) {
        StepRecord rec;
        if (step(st, prog, rng, opt, &rec) != StepStatus::Committed) break;
        if (rec.event.kind != EventKind::Move || rec.participants[0].entity != "Bac") continue;
        ++moves;
        double jump = distance(rec.products[0].pos, rec.participants[0].pos);
        double expected = rec.participants[0].scale * 0.1; // stepB, scaled by the mover
        CHECK(jump == Catch::Approx(expected).margin(1e-12));
    }
    CHECK(moves > 0);
}

TEST_CASE("a stuck location expression rejects the event, not the run") {
    std::string src = "#mode base\n"
                      "val p = (5.0,5.0,5.0)\n"
                      "let X()@cuboid(10.0,10.0,10.0) @ <0.0,0.0,0.0>,0.0,sphere(1.0) =\n"
                      "do delay@50.0; X()_glue(this,this)\n" // degenerate direction, always rejected
                      "or delay@1.0; X()_this\n"
                      "run X()_p\n";
    LoadedProgram prog = load_src(src);
    Rng rng(17);
    CanonicalConfig st = init_of(prog, rng);
    StepOptions opt;
    opt.sched.lambda_mov = 0.0;
    for (int i = 0; i < 30; ++i) {
        StepRecord rec;
        REQUIRE(step(st, prog, rng, opt, &rec) == StepStatus::Committed);
        CHECK(rec.event.branch_a == 1); // only the healthy branch ever commits
        CHECK(rec.rejected_events == 1);
    }
}

TEST_CASE("loading validates geometry and channel attributes") {
    auto loadOf = [](const std::string& src) {
        Program p = parse_program(src, "bad");
        REQUIRE(check_program(p).empty());
        return load_program(p);
    };
    const std::string head = "#mode base\nval p = (5.0,5.0,5.0)\n";
    const std::string tail = " = do delay@1.0; X()_this\nrun X()_p\n";
    CHECK_THROWS_AS(loadOf(head + "new a@1.0,-0.5:ch()\nlet X()@cuboid(10.0,10.0,10.0) @ <0.0,0.0,0.0>,0.0,sphere(1.0)" + tail),
                    LoadError);
    CHECK_THROWS_AS(loadOf(head + "let X()@cuboid(10.0,10.0,10.0) @ <0.0,0.0,0.0>,-0.1,sphere(1.0)" + tail),
                    LoadError);
    CHECK_THROWS_AS(loadOf(head + "let X()@cuboid(10.0,10.0,10.0) @ <0.0,0.0,0.0>,0.0,sphere(0.0)" + tail),
                    LoadError);
    CHECK_THROWS_AS(loadOf(head + "let X()@cuboid(10.0,10.0,10.0) @ <0.0,0.0,0.0>,0.0,sphere(1.0),0.0" + tail),
                    LoadError);
    CHECK_THROWS_AS(loadOf(head + "let X()@cuboid(-1.0,10.0,10.0) @ <0.0,0.0,0.0>,0.0,sphere(1.0)" + tail),
                    LoadError);
}

TEST_CASE("an initial overlap is reported, not silently accepted") {
    std::string src = "#mode base\n"
                      "val p = (5.0,5.0,5.0)\n"
                      "let X()@cuboid(10.0,10.0,10.0) @ <0.0,0.0,0.0>,0.0,sphere(1.0) = do delay@1.0; X()_this\n"
                      "run X()_p | X()_p\n";
    LoadedProgram prog = load_src(src);
    Rng rng(13);
    std::optional<SCViolation> v;
    initial_configuration(prog, rng, &v);
    REQUIRE(v);
    CHECK(v->kind == SCViolation::Kind::Overlap);
}

TEST_CASE("secreted ions appear exactly in contact with their parent") {
    LoadedProgram prog = load_src(read_file(kSourceDir + "/programs/secretion.lbs"));
    Rng rng(14);
    CanonicalConfig st = init_of(prog, rng);
    StepOptions opt;
    opt.sched.lambda_mov = 0.0;
    int secretions = 0;
    for (int i = 0; i < 600 && secretions < 12; ++i) {
        StepRecord rec;
        if (step(st, prog, rng, opt, &rec) != StepStatus::Committed) break;
        if (rec.products.size() != 2) continue;
        const LocatedEntity* bac = nullptr;
        const LocatedEntity* ion = nullptr;
        for (const auto& e : rec.products) {
            if (e.entity == "Bac") bac = &e;
            if (e.entity == "HIon") ion = &e;
        }
        if (!bac || !ion) continue;
        ++secretions;
        CHECK(distance(bac->pos, ion->pos) == Catch::Approx(1.25).margin(1e-9));
        CHECK(min_distance(entity_shape(*bac, prog), entity_shape(*ion, prog)) <= 1e-9);
    }
    CHECK(secretions > 0);
}
