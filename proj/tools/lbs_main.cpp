#include <CLI11.hpp>

#include "lbs/driver.hpp"

// lbs: check and simulate spatial stochastic pi-calculus programs.

namespace {

bool parse_mode(const std::string& s, lbs::Mode& out) {
    if (s == "base") out = lbs::Mode::Base;
    else if (s == "random") out = lbs::Mode::RandomTranslation;
    else if (s == "scale") out = lbs::Mode::RandomScale;
    else return false;
    return true;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"lbs: spatial stochastic pi-calculus checker and simulator"};
    app.require_subcommand(1);

    std::string checkFile;
    bool jsonDiags = false;
    CLI::App* check = app.add_subcommand("check", "parse and type-check a program");
    check->add_option("FILE", checkFile, "program source (.lbs)")->required();
    check->add_flag("--json", jsonDiags, "print diagnostics as a JSON list on stdout");

    lbs::RunConfig cfg;
    std::string modeStr, scatterStr;
    double maxTime = -1.0;
    std::int64_t maxSteps = -1;
    double glueContact = -1.0;
    CLI::App* run = app.add_subcommand("run", "simulate a program and write JSON-lines traces");
    run->add_option("FILE", cfg.source_path, "program source (.lbs)")->required();
    run->add_option("--seed", cfg.seed, "random seed (defaults to $LBS_SEED, then 1)")->envname("LBS_SEED");
    run->add_option("--max-time", maxTime, "stop once the simulation clock passes this time");
    run->add_option("--max-steps", maxSteps, "stop after this many committed events");
    run->add_option("--lambda-mov", cfg.lambda_mov, "pseudo-rate of movement branches (default 1.0)");
    run->add_option("--snapshot-every", cfg.snapshot_every, "emit entity snapshots at this time spacing");
    run->add_option("--out", cfg.out_dir, "output directory (default ./out)");
    run->add_option("--mode", modeStr, "override the program's mode pragma: base|random|scale");
    run->add_option("--scatter", scatterStr, "SPACE=N: place N template instances uniformly in SPACE");
    run->add_option("--replicates", cfg.replicates, "independent runs with per-replicate seeds and traces");
    run->add_option("--glue-contact", glueContact, "contact distance used by the glue operator");

    CLI11_PARSE(app, argc, argv);

    if (check->parsed()) return lbs::cmd_check(checkFile, jsonDiags);

    if (!modeStr.empty()) {
        lbs::Mode m;
        if (!parse_mode(modeStr, m)) {
            std::cerr << "unknown mode '" << modeStr << "' (expected base|random|scale)\n";
            return 1;
        }
        cfg.mode_override = m;
    }
    if (maxTime >= 0.0) cfg.max_time = maxTime;
    if (maxSteps >= 0) cfg.max_steps = static_cast<std::uint64_t>(maxSteps);
    if (glueContact > 0.0) cfg.glue_contact = glueContact;
    if (!scatterStr.empty()) {
        auto eq = scatterStr.find('=');
        if (eq == std::string::npos) {
            std::cerr << "--scatter expects SPACE=N\n";
            return 1;
        }
        try {
            cfg.scatter = {scatterStr.substr(0, eq), std::stoull(scatterStr.substr(eq + 1))};
        } catch (const std::exception&) {
            std::cerr << "--scatter expects SPACE=N with integer N\n";
            return 1;
        }
    }
    if (cfg.replicates == 0) {
        std::cerr << "--replicates must be at least 1\n";
        return 1;
    }
    return lbs::cmd_run(cfg);
}
