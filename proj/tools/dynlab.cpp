// dynlab: experiment orchestration for the suspension-flow laboratory.
//
//   dynlab <subcommand> --config <path> [--out <dir>] [--seed <u64>]
//
// Subcommands: spectrum | perturb-scan | slice | flatness | kac | audit |
// delta-search. Writes summary.json, samples.csv and plots/*.svg into the
// output directory; exits nonzero when any acceptance entry fails. All
// randomness flows from the config seed; the environment is never read.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "dynlab/dynlab.hpp"

int main(int argc, char** argv) {
    CLI::App app{"dynlab: volume-preserving suspension-flow laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    uint64_t seed_override = 0;
    bool seed_set = false;

    const std::vector<std::string> names = {"spectrum", "perturb-scan", "slice",  "flatness",
                                            "kac",      "audit",        "delta-search"};
    for (const auto& n : names) {
        auto* sub = app.add_subcommand(n);
        sub->add_option("--config", config_path, "experiment config file");
        sub->add_option("--out", out_dir, "output directory (default: config output.dir)");
        sub->add_option("--seed", seed_override, "override the config seed")
            ->each([&](const std::string&) { seed_set = true; });
    }

    CLI11_PARSE(app, argc, argv);
    std::string sub = app.get_subcommands().front()->get_name();

    try {
        dynlab::ExperimentConfig cfg;
        if (!config_path.empty()) {
            cfg = dynlab::load_config(config_path);
        } else {
            cfg = dynlab::parse_config_text(dynlab::default_config_text());
        }
        if (seed_set) {
            cfg.seed = seed_override;
            cfg.seed_present = true;
        }
        std::string dir = out_dir.empty() ? cfg.out_dir : out_dir;
        auto rr = dynlab::run(cfg, sub, dir);
        for (const auto& entry : rr.summary["ledger"]) {
            std::printf("[%s] %s  value=%.6g  %s\n",
                        entry["pass"].get<bool>() ? "PASS" : "FAIL",
                        entry["name"].get<std::string>().c_str(), entry["value"].get<double>(),
                        entry["detail"].get<std::string>().c_str());
        }
        std::printf("%s: %s (summary: %s/summary.json)\n", sub.c_str(),
                    rr.all_pass ? "all checks passed" : "FAILURES present", dir.c_str());
        return rr.all_pass ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
