#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "carnot/experiments.hpp"

namespace ex = carnot::experiments;

int main(int argc, char** argv)
{
    CLI::App app{"Run a numerical experiment on a Carnot frame and write summary.json plus CSV tables."};
    app.footer(ex::exit_code_help());

    std::string config_path, out, experiment;
    std::uint64_t seed = 0;
    bool list = false;
    auto* config_opt = app.add_option("--config", config_path, "Experiment config file (key = value, [sections])");
    auto* seed_opt = app.add_option("--seed", seed, "Seed, overrides the config");
    auto* out_opt = app.add_option("--out", out, "Output directory, overrides the config");
    auto* exp_opt = app.add_option("--experiment", experiment, "Experiment id, overrides the config");
    app.add_flag("--list", list, "List experiment ids, their parameters and what they verify");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (list) {
        std::cout << ex::list_experiments();
        return 0;
    }

    try {
        ex::Config cfg;
        if (config_opt->count())
            cfg = ex::load_config(config_path);
        if (exp_opt->count())
            cfg.experiment = experiment;
        if (seed_opt->count())
            cfg.seed = seed;
        if (out_opt->count())
            cfg.out = out;
        if (cfg.experiment.empty())
            throw carnot::ConfigError("no experiment given; use --config or --experiment");

        auto report = ex::run(cfg);
        ex::write_report(report, cfg.out);
        for (const auto& a : report.assertions)
            std::cout << (a.pass ? "PASS " : "FAIL ") << "[" << a.criterion << "] " << a.name << " = "
                      << ex::format_number(a.value) << '\n';
        std::cout << (report.pass() ? "all assertions passed" : "assertion failures") << "; report in " << cfg.out
                  << '\n';
        return ex::exit_code(report);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ex::exit_code(e);
    }
}
