#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "twomem/errors.hpp"

int main(int argc, char** argv) {
    using namespace twomem::cli;

    CLI::App app{"Two-membrane cavity optomechanics simulator"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", version());

    std::string config_path;
    std::string out = ".";
    unsigned workers = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> overrides;
    bool check = false;
    app.add_option("--config", config_path, "INI-style run configuration (or a result file to re-run)");
    app.add_option("--out", out, "output directory");
    app.add_option("--workers", workers, "worker threads (0 = all cores)");
    auto* seed_opt = app.add_option("--seed", seed, "master seed, same as --set noise.seed=S");
    app.add_option("--set", overrides, "override, section.key=value (repeatable)")->take_all();
    app.add_flag("--check", check, "exit with 4 when the run misses its acceptance threshold");

    app.add_subcommand("map", "coupling maps and strong-coupling regions");
    app.add_subcommand("sweep", "synchronization phase diagrams over splitting and power");
    app.add_subcommand("trajectory", "single trajectory with envelope and sync measures");
    app.add_subcommand("entangle", "stochastic ensembles, entanglement and the mean-field oracle");
    app.add_subcommand("meanfield", "linearized mean-field covariance evolution");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    RunConfig config;
    try {
        if (!config_path.empty()) config = RunConfig::load(config_path);
        for (const auto& o : overrides) config.set(o);
        if (*seed_opt) config.set("noise.seed", std::to_string(seed));
    } catch (const twomem::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }

    CommandOptions options;
    options.out = out;
    options.workers = workers;
    options.check = check;
    options.log = &std::cout;
    return dispatch(app.get_subcommands().front()->get_name(), config, options, std::cerr);
}
