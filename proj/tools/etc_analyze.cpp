#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "etc/errors.hpp"
#include "etc/experiment.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-triggered control trade-off analyzer"};
    app.require_subcommand(1);

    std::string config_path, modes, out_path;
    std::uint64_t seed = 0;
    int replications = 0;
    long horizon = 0;
    bool dump = false;

    CLI::App* analyze = app.add_subcommand("analyze", "Run the sweep described by a config file");
    analyze->add_option("config", config_path, "Path to the JSON experiment config")->required();
    analyze->add_option("--modes", modes, "Comma-separated subset of analytic,simulate,baseline");
    analyze->add_option("--out", out_path, "Output CSV path (overrides config; '-' for stdout)");
    analyze->add_option("--seed", seed, "Master RNG seed override");
    analyze->add_option("--replications", replications, "Replication count override");
    analyze->add_option("--horizon", horizon, "Per-replication horizon override");
    analyze->add_flag("--dump-config", dump, "Print the effective config as JSON and exit");

    CLI11_PARSE(app, argc, argv);

    try {
        etc::ExperimentSpec spec = etc::load_config(config_path);
        if (analyze->count("--modes"))
            spec.modes = split_csv(modes);
        if (analyze->count("--out"))
            spec.output = (out_path == "-") ? "" : out_path;
        if (analyze->count("--seed"))
            spec.seed = seed;
        if (analyze->count("--replications"))
            spec.replications = replications;
        if (analyze->count("--horizon"))
            spec.horizon = horizon;

        if (dump) {
            std::cout << etc::dump_config(spec);
            return 0;
        }
        const auto diags = etc::validate_config(spec);
        if (!diags.empty()) {
            for (const auto& d : diags)
                std::cerr << "config error: " << d << "\n";
            return 1;
        }
        etc::run_experiment(spec);
        return 0;
    } catch (const etc::ConfigInvalid& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const etc::Error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
