#include "cli.hpp"

#include "CLI11.hpp"

#include <iomanip>

namespace gedmd::cli {

int main(int argc, char** argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"gEDMD experiments: generator estimation, identification, coarse-graining and control"};
    app.require_subcommand(1);

    std::string config;
    std::string out_dir;
    std::uint64_t seed = 0;
    auto* run_cmd = app.add_subcommand("run", "Run every experiment of a config file");
    run_cmd->add_option("config", config, "Experiment config (JSON)")->required();
    auto* out_opt = run_cmd->add_option("--out", out_dir, "Output directory");
    auto* seed_opt = run_cmd->add_option("--seed", seed, "Override the root seed");

    bool as_json = false;
    auto* list_cmd = app.add_subcommand("list", "List bundled configs");
    list_cmd->add_flag("--json", as_json, "Machine-readable output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n' << app.help();
        return 2;
    }

    try {
        if (*run_cmd) {
            RunOptions options;
            if (*out_opt)
                options.out_dir = out_dir;
            if (*seed_opt)
                options.seed = seed;
            run(config, options, out);
            return 0;
        }
        const auto configs = list_bundled();
        if (as_json) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& c : configs)
                arr.push_back({{"name", c.name},
                               {"description", c.description},
                               {"kinds", c.kinds},
                               {"file", c.file.filename().string()}});
            out << arr.dump(2) << '\n';
        } else {
            for (const auto& c : configs)
                out << std::left << std::setw(28) << c.name << c.description << '\n';
        }
        return 0;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace gedmd::cli
