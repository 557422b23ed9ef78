// Command-line scenario runner: `run` executes a JSON scenario (or a named
// preset) and writes CSV outputs plus a checksummed manifest; `validate`
// checks a config without running it; `presets list` shows the catalog.
// Exit codes: 0 success, 1 embedded assertion failure, 2 configuration
// error, 3 engine error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include <ctwist/presets.hpp>
#include <ctwist/runner.hpp>
#include <ctwist/scenario.hpp>

#ifndef CTWIST_VERSION
#define CTWIST_VERSION "0.0.0-dev"
#endif

namespace {

ctwist::Scenario load_scenario(const std::string& config_path, const std::string& preset,
                               const std::vector<std::string>& overrides) {
    if (!config_path.empty() && !preset.empty())
        throw ctwist::ScenarioError("give either a config file or --preset, not both");
    if (config_path.empty() && preset.empty())
        throw ctwist::ScenarioError("a config file or --preset is required");

    nlohmann::json j;
    if (!preset.empty()) {
        j = ctwist::preset_json(preset);
    } else {
        std::ifstream in(config_path);
        if (!in) throw ctwist::ScenarioError("cannot open \"" + config_path + "\"");
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ctwist::ScenarioError(config_path + ": " + e.what());
        }
    }
    for (const std::string& ov : overrides) ctwist::apply_override(j, ov);
    return ctwist::scenario_from_json(j);
}

std::string describe(const ctwist::Scenario& s) {
    std::string text = s.name + ": " + std::to_string(s.engines.size()) + " engine(s), " +
                       std::to_string(s.time_grid.points) + " time points";
    if (s.sweep)
        text += ", sweep " + s.sweep->field + " over " +
                std::to_string(s.sweep->values.size()) + " value(s)";
    if (s.physical) text += ", physical section";
    return text;
}

int run_command(const std::string& config_path, const std::string& preset,
                const std::vector<std::string>& overrides, const std::string& out_dir) {
    const ctwist::Scenario s = load_scenario(config_path, preset, overrides);
    std::printf("running %s\n", describe(s).c_str());
    const ctwist::ScenarioResult result = ctwist::run_scenario(s);
    for (std::size_t k = 0; k < result.sweeps.size(); ++k) {
        const ctwist::SweepRun& run = result.sweeps[k];
        std::string line = "  run " + std::to_string(k);
        if (run.sweep_value)
            line += " (" + s.sweep->field + " = " + ctwist::detail::format_g17(*run.sweep_value) +
                    ")";
        line += ": " + std::to_string(run.records.size()) + " records";
        if (run.fock_cutoff) line += ", n_max " + std::to_string(*run.fock_cutoff);
        std::printf("%s\n", line.c_str());
    }
    const auto files = ctwist::write_outputs(s, result, out_dir, CTWIST_VERSION);
    for (const ctwist::WrittenFile& f : files)
        std::printf("  wrote %s/%s (%llu bytes)\n", out_dir.c_str(), f.name.c_str(),
                    static_cast<unsigned long long>(f.bytes));

    int failures = 0;
    for (const ctwist::AssertionOutcome& o : ctwist::evaluate_assertions(s, result)) {
        std::printf("[%s] %s\n", o.passed ? "PASS" : "FAIL", o.description.c_str());
        failures += o.passed ? 0 : 1;
    }
    if (failures > 0) {
        std::fprintf(stderr, "%d embedded assertion(s) failed\n", failures);
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cavity-twisting scenario runner (version " CTWIST_VERSION ")"};
    app.require_subcommand(1);

    std::string config_path, preset, out_dir = "out";
    std::vector<std::string> overrides;

    CLI::App* run = app.add_subcommand("run", "execute a scenario and write CSV outputs");
    run->add_option("config", config_path, "scenario JSON file");
    run->add_option("--preset", preset, "named preset from the built-in catalog");
    run->add_option("--out", out_dir, "output directory (default: out)");
    run->add_option("--override", overrides,
                    "dotted-path override, e.g. params.kappa=0.5 (repeatable)");

    CLI::App* validate = app.add_subcommand("validate", "parse and validate a scenario");
    validate->add_option("config", config_path, "scenario JSON file");
    validate->add_option("--preset", preset, "named preset from the built-in catalog");
    validate->add_option("--override", overrides,
                         "dotted-path override, e.g. params.kappa=0.5 (repeatable)");

    CLI::App* presets = app.add_subcommand("presets", "preset catalog operations");
    std::string verb;
    presets->add_option("verb", verb, "catalog operation (list)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(run)) return run_command(config_path, preset, overrides, out_dir);
        if (app.got_subcommand(validate)) {
            const ctwist::Scenario s = load_scenario(config_path, preset, overrides);
            std::printf("OK: %s\n", describe(s).c_str());
            return 0;
        }
        if (app.got_subcommand(presets)) {
            if (verb != "list") {
                std::fprintf(stderr, "unknown presets operation \"%s\" (try: list)\n",
                             verb.c_str());
                return 2;
            }
            for (const ctwist::PresetInfo& info : ctwist::preset_catalog())
                std::printf("%-18s %s\n", info.name.c_str(), info.description.c_str());
            return 0;
        }
    } catch (const ctwist::ScenarioError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ctwist::EngineFailure& e) {
        std::fprintf(stderr, "engine error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 2;
}
