// wigner2e: run, list and validate scenarios.
#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "wigner2e/errors.hpp"
#include "wigner2e/scenario.hpp"

namespace {

const char* category(wigner2e::RunStatus s) {
    switch (s) {
        case wigner2e::RunStatus::ok: return "ok";
        case wigner2e::RunStatus::schema: return "schema error";
        case wigner2e::RunStatus::cost_guard: return "cost guard";
        case wigner2e::RunStatus::numerical_guard: return "numerical guard";
    }
    return "error";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-electron Wigner transport: full solver, mean-field hierarchy and force model"};
    app.require_subcommand(1);

    std::string config, out_dir;
    std::optional<std::uint64_t> seed;
    int threads = 1;

    auto* run = app.add_subcommand("run", "Run a scenario file or bundled scenario name");
    run->add_option("config", config, "Scenario JSON file or bundled name")->required();
    run->add_option("--output-dir", out_dir, "Output directory (overrides the configured one)");
    run->add_option("--seed", seed, "Seed override");
    run->add_option("--threads", threads, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);

    auto* list = app.add_subcommand("list", "List bundled scenarios");

    auto* validate = app.add_subcommand("validate", "Check a scenario against the schema");
    validate->add_option("config", config, "Scenario JSON file or bundled name")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*list) {
            for (const auto& name : wigner2e::list_scenarios()) std::cout << name << '\n';
            return 0;
        }
        if (*validate) {
            const auto cfg = wigner2e::load_scenario(config);
            std::cout << cfg.name << ": ok\n";
            return 0;
        }
        wigner2e::ScenarioConfig cfg;
        try {
            cfg = wigner2e::load_scenario(config);
        } catch (const wigner2e::ValidationError& e) {
            std::cerr << "schema error: " << e.what() << '\n';
            return 2;
        }
        wigner2e::RunOptions opt;
        opt.output_directory = out_dir;
        opt.seed = seed;
        opt.threads = threads;
        const auto res = wigner2e::run_scenario(cfg, opt);
        if (res.status != wigner2e::RunStatus::ok) std::cerr << category(res.status) << ": " << res.message << '\n';
        if (!res.directory.empty()) std::cout << res.directory.string() << '\n';
        return res.exit_code();
    } catch (const wigner2e::ValidationError& e) {
        std::cerr << "schema error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
