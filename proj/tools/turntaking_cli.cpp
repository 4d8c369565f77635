#include <cstdint>
#include <string>

#include "CLI11.hpp"
#include "turntaking/runner.hpp"

namespace run = turntaking::run;

int main(int argc, char** argv) {
    CLI::App app{"Continuous turn-taking prediction toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 1;
    bool fault = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config)
            cmd->add_option("-c,--config", config_path, "experiment config file")->required();
        cmd->add_option("-o,--out", out_dir, "output directory");
    };

    CLI::App* generate = app.add_subcommand("generate", "synthesize a conversation corpus");
    add_common(generate, true);
    generate->add_option("-s,--seed", seed, "generator seed override")
        ->each([&](const std::string&) { seed_set = true; });

    CLI::App* train = app.add_subcommand("train", "train one model per seed and evaluate");
    add_common(train, true);
    train->add_option("-s,--seed", seed, "train a single seed instead of the config list")
        ->each([&](const std::string&) { seed_set = true; });
    train->add_option("-j,--jobs", jobs, "parallel worker count");
    train->add_flag("--inject-backward-fault", fault)->group("");

    CLI::App* grid = app.add_subcommand("gridsearch", "hold-out search over model sizes");
    add_common(grid, true);
    grid->add_option("-j,--jobs", jobs, "parallel worker count");

    CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a saved checkpoint");
    add_common(evaluate, true);

    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference check of the backward pass");
    gradcheck->add_flag("--inject-backward-fault", fault)->group("");

    CLI::App* compare = app.add_subcommand("compare", "Welch t-test between two train reports");
    add_common(compare, true);

    CLI11_PARSE(app, argc, argv);

    turntaking::net::inject_backward_fault(fault);
    const std::uint64_t* seed_ptr = seed_set ? &seed : nullptr;

    if (generate->parsed()) return run::cmd_generate(config_path, out_dir, seed_ptr);
    if (train->parsed()) return run::cmd_train(config_path, out_dir, seed_ptr, jobs);
    if (grid->parsed()) return run::cmd_gridsearch(config_path, out_dir, jobs);
    if (evaluate->parsed()) return run::cmd_evaluate(config_path, out_dir);
    if (gradcheck->parsed()) return run::cmd_gradcheck();
    if (compare->parsed()) return run::cmd_compare(config_path, out_dir);
    return 1;
}
