#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "spinhj/cli.hpp"

int main(int argc, char** argv) {
    namespace cli = spinhj::cli;
    CLI::App app{"spin-hj: Hamilton-Jacobi view of mixed p-spin free energies"};
    app.footer(cli::schema_text());
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    for (const auto& spec : cli::commands()) {
        auto* sub = app.add_subcommand(spec.name, spec.summary);
        sub->add_option("--config", config, "JSON config file")->required();
        sub->add_option("--out", out, "write the report here instead of stdout");
        sub->add_option("--seed", seed, "base seed, overrides the config");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kValidation;
    }

    const auto* sub = app.get_subcommands().front();
    std::optional<std::string> out_file;
    if (sub->count("--out")) out_file = out;
    std::optional<std::uint64_t> seed_opt;
    if (sub->count("--seed")) seed_opt = seed;
    return cli::run_file(sub->get_name(), config, out_file, seed_opt, std::cout, std::cerr);
}
