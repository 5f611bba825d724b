#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lbs/parser.hpp"
#include "lbs/runtime.hpp"
#include "lbs/trace.hpp"
#include "lbs/typecheck.hpp"

// The check and run drivers behind the command-line tool. Exit codes:
// 0 ok, 1 static error, 2 the initial configuration is not space
// consistent, 3 I/O failure.

namespace lbs {

struct RunConfig {
    std::string source_path;
    std::optional<Mode> mode_override;
    std::uint64_t seed = 1;
    std::optional<double> max_time;
    std::optional<std::uint64_t> max_steps;
    double lambda_mov = 1.0;
    double snapshot_every = 0.0; // 0 disables snapshots
    std::string out_dir = "out";
    std::optional<double> glue_contact;
    std::optional<std::pair<std::string, std::uint64_t>> scatter; // SPACE=N
    unsigned replicates = 1;
};

namespace driver {

inline std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Parses and checks; on success also loads. Prints diagnostics to `err`.
inline int front_end(const std::string& path, std::optional<Mode> modeOverride,
                     std::optional<double> glueContact, std::optional<Program>& progOut,
                     std::optional<LoadedProgram>& loadedOut, std::ostream& err, bool jsonDiags = false) {
    auto text = read_file(path);
    if (!text) {
        err << path << ": cannot read file\n";
        return 3;
    }
    Program prog;
    try {
        prog = parse_program(*text, path);
    } catch (const ParseError& pe) {
        if (jsonDiags) {
            json arr = json::array();
            arr.push_back(json{{"file", path}, {"line", pe.line}, {"col", pe.col}, {"rule", "Parse"},
                               {"message", pe.what()}});
            std::cout << arr.dump() << "\n";
        } else {
            err << path << ":" << pe.line << ":" << pe.col << ": [Parse] " << pe.what() << "\n";
        }
        return 1;
    }
    Mode mode = modeOverride.value_or(prog.mode);
    std::vector<Diagnostic> diags = check_program(prog, mode);
    std::optional<LoadedProgram> loaded;
    if (diags.empty()) {
        try {
            loaded = load_program(prog, mode, glueContact);
        } catch (const LoadError& le) {
            diags.push_back(Diagnostic{Diagnostic::Severity::Error, le.span, "Load", le.what()});
        }
    }
    if (!diags.empty()) {
        if (jsonDiags) {
            json arr = json::array();
            for (const auto& d : diags)
                arr.push_back(json{{"file", path},
                                   {"line", d.span.line},
                                   {"col", d.span.col},
                                   {"rule", d.rule},
                                   {"message", d.message}});
            std::cout << arr.dump() << "\n";
        } else {
            for (const auto& d : diags) err << format_diagnostic(path, d) << "\n";
        }
        return 1;
    }
    if (jsonDiags) std::cout << "[]\n";
    progOut = std::move(prog);
    loadedOut = std::move(loaded);
    return 0;
}

// Scatter placement: N copies of the template instance, positions uniform in
// the named space with rejection sampling against space consistency.
inline CanonicalConfig scattered_initial(const LoadedProgram& prog, const std::string& spaceName, std::uint64_t n,
                                         Rng& rng, std::optional<SCViolation>* violation) {
    auto spIt = prog.spaces.find(spaceName);
    if (spIt == prog.spaces.end()) throw LoadError("unknown space '" + spaceName + "' in --scatter");
    const Space& sp = spIt->second;

    const Process::Instance* tmpl = nullptr;
    for (ProcessPtr p = prog.initial; p;) {
        if (const auto* inst = std::get_if<Process::Instance>(&p->node)) {
            tmpl = inst;
            break;
        }
        const auto* par = std::get_if<Process::Par>(&p->node);
        if (!par) break;
        p = par->left;
    }
    if (!tmpl) throw LoadError("--scatter needs at least one instance in the run process");
    if (contains_this(tmpl->arg)) throw LoadError("--scatter template argument must not mention 'this'");

    CanonicalConfig st;
    for (const auto& [name, info] : prog.channels) st.env.declare(name, info);
    Value arg = eval_expr(tmpl->arg, prog.ops);
    const LoadedDef& def = prog.defs.at(tmpl->entity);

    Point lo, hi;
    if (sp.shape.kind == Shape::Kind::Cuboid) {
        lo = sp.anchor;
        hi = sp.anchor + Point{sp.shape.w, sp.shape.h, sp.shape.d};
    } else {
        double r = sp.shape.radius;
        lo = sp.anchor - Point{r, r, r};
        hi = sp.anchor + Point{r, r, r};
    }
    for (std::uint64_t k = 0; k < n; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
            Point pos{rng.uniform_in(lo.x, hi.x), rng.uniform_in(lo.y, hi.y), rng.uniform_in(lo.z, hi.z)};
            LocatedEntity cand{tmpl->entity, arg, pos, 1.0};
            if (!contains(def.space, entity_shape(cand, prog))) continue;
            bool clash = false;
            for (const auto& other : st.entities)
                if (overlaps(entity_shape(cand, prog), entity_shape(other, prog))) {
                    clash = true;
                    break;
                }
            if (clash) continue;
            st.entities.push_back(std::move(cand));
            placed = true;
        }
        if (!placed) {
            if (violation) *violation = SCViolation{SCViolation::Kind::Overlap, k, k};
            return st;
        }
    }
    if (violation) *violation = std::nullopt;
    return st;
}

struct ReplicateOutcome {
    int exit_code = 0;
    std::string error;
    std::string cause;
    std::uint64_t steps = 0;
    double final_t = 0.0;
};

inline ReplicateOutcome run_replicate(const LoadedProgram& prog, const RunConfig& cfg, unsigned replicate,
                                      const std::string& suffix) {
    ReplicateOutcome out;
    try {
        Rng rng(cfg.seed + replicate);
        std::optional<SCViolation> violation;
        CanonicalConfig st = cfg.scatter
                                 ? scattered_initial(prog, cfg.scatter->first, cfg.scatter->second, rng, &violation)
                                 : initial_configuration(prog, rng, &violation);
        if (violation) {
            out.exit_code = 2;
            out.error = "initial configuration not space consistent: " + violation->describe();
            return out;
        }

        namespace fs = std::filesystem;
        JsonlWriter events((fs::path(cfg.out_dir) / ("events" + suffix + ".jsonl")).string());
        JsonlWriter populations((fs::path(cfg.out_dir) / ("populations" + suffix + ".jsonl")).string());
        std::optional<JsonlWriter> snapshots;
        if (cfg.snapshot_every > 0.0)
            snapshots.emplace((fs::path(cfg.out_dir) / ("snapshots" + suffix + ".jsonl")).string());

        populations.write(population_record(0.0, st.entities));
        if (snapshots) snapshots->write(snapshot_record(0.0, st.entities));
        double nextSnap = cfg.snapshot_every;

        double maxT = cfg.max_time.value_or(std::numeric_limits<double>::infinity());
        std::uint64_t maxSteps = cfg.max_steps.value_or(std::numeric_limits<std::uint64_t>::max());
        StepOptions opt;
        opt.sched.lambda_mov = cfg.lambda_mov;

        const bool timeBounded = std::isfinite(maxT);
        std::uint64_t steps = 0;
        std::string cause;
        while (true) {
            if (steps >= maxSteps) {
                cause = "max-steps";
                break;
            }
            CanonicalConfig before;
            if (timeBounded) before = st;
            StepRecord rec;
            StepStatus status = step(st, prog, rng, opt, &rec);
            if (status == StepStatus::NoEvent) {
                cause = "no-events";
                break;
            }
            if (status == StepStatus::Blocked) {
                cause = "blocked";
                break;
            }
            if (st.clock > maxT) {
                // the event fired past the horizon: it is not part of the run
                st = std::move(before);
                cause = "max-time";
                break;
            }
            ++steps;
            events.write(event_record(steps, st.clock, rec));
            populations.write(population_record(st.clock, st.entities));
            if (snapshots && st.clock >= nextSnap) {
                snapshots->write(snapshot_record(st.clock, st.entities));
                while (nextSnap <= st.clock) nextSnap += cfg.snapshot_every;
            }
        }
        double endT = std::min(st.clock, maxT);
        events.write(end_record(endT, steps, cause));
        if (snapshots) snapshots->write(snapshot_record(endT, st.entities));
        out.cause = cause;
        out.steps = steps;
        out.final_t = endT;
    } catch (const std::exception& e) {
        out.exit_code = 3;
        out.error = e.what();
    }
    return out;
}

} // namespace driver

inline int cmd_check(const std::string& path, bool jsonDiags = false, std::ostream& err = std::cerr) {
    std::optional<Program> prog;
    std::optional<LoadedProgram> loaded;
    return driver::front_end(path, std::nullopt, std::nullopt, prog, loaded, err, jsonDiags);
}

inline int cmd_run(const RunConfig& cfg, std::ostream& err = std::cerr) {
    std::optional<Program> prog;
    std::optional<LoadedProgram> loaded;
    int rc = driver::front_end(cfg.source_path, cfg.mode_override, cfg.glue_contact, prog, loaded, err);
    if (rc != 0) return rc;

    RunConfig effective = cfg;
    if (!effective.max_time && !effective.max_steps) effective.max_steps = 10000;
    if (effective.scatter) {
        if (!loaded->spaces.count(effective.scatter->first)) {
            err << cfg.source_path << ": --scatter names unknown space '" << effective.scatter->first << "'\n";
            return 1;
        }
        if (!std::holds_alternative<Process::Instance>(loaded->initial->node) &&
            !std::holds_alternative<Process::Par>(loaded->initial->node)) {
            err << cfg.source_path << ": --scatter needs at least one instance in the run process\n";
            return 1;
        }
    }
    try {
        std::filesystem::create_directories(effective.out_dir);
    } catch (const std::exception& e) {
        err << effective.out_dir << ": " << e.what() << "\n";
        return 3;
    }

    std::vector<driver::ReplicateOutcome> outcomes(effective.replicates);
    if (effective.replicates == 1) {
        outcomes[0] = driver::run_replicate(*loaded, effective, 0, "");
    } else {
        std::vector<std::thread> threads;
        threads.reserve(effective.replicates);
        for (unsigned k = 0; k < effective.replicates; ++k)
            threads.emplace_back([&, k] {
                outcomes[k] = driver::run_replicate(*loaded, effective, k, ".r" + std::to_string(k));
            });
        for (auto& t : threads) t.join();
    }
    int rcMax = 0;
    for (unsigned k = 0; k < effective.replicates; ++k) {
        const auto& o = outcomes[k];
        if (o.exit_code != 0) {
            err << cfg.source_path << ": replicate " << k << ": " << o.error << "\n";
            rcMax = std::max(rcMax, o.exit_code);
        } else {
            err << cfg.source_path << ": replicate " << k << ": " << o.steps << " steps, t=" << o.final_t
                << ", " << o.cause << "\n";
        }
    }
    return rcMax;
}

} // namespace lbs
