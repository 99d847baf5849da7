#include <iostream>

#include <CLI11.hpp>

#include "runner.hpp"

using namespace embedlab;
using namespace embedlab::runner;
namespace fs = std::filesystem;

namespace {

constexpr int kConfigExit = 2;
constexpr int kNumericExit = 3;

int config_failure(const std::string& message, json extra = json::object()) {
    json j = {{"status", "error"}, {"error", {{"kind", "ConfigError"}, {"message", message}}}};
    j["error"].update(extra);
    std::cerr << j.dump(2) << '\n';
    return kConfigExit;
}

// A path to an existing file, else a bundled scenario name.
Scenario resolve(const std::string& arg) {
    if (fs::exists(arg)) return load_scenario(arg);
    const auto entries = catalog();
    for (const auto& e : entries)
        if (e.name == arg) return load_scenario(e.path);
    json sug = suggestions(arg, entries);
    throw std::pair<std::string, json>("unknown scenario '" + arg + "'", json{{"suggestions", sug}});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Embedded eigenvalue persistence lab"};
    app.require_subcommand(1);

    std::string target, out_dir;
    std::optional<std::uint64_t> seed;
    auto* run = app.add_subcommand("run", "Run a scenario file or bundled scenario");
    run->add_option("scenario", target, "Scenario JSON path or bundled name")->required();
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--seed", seed, "Override the scenario seed");

    app.add_subcommand("list", "List bundled scenarios");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a scenario file without running it");
    validate->add_option("scenario", validate_path, "Scenario JSON path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return config_failure(e.what());
    }

    if (app.got_subcommand("list")) {
        json list = json::array();
        for (const auto& e : catalog())
            list.push_back({{"name", e.name}, {"anchor", e.anchor}, {"description", e.description},
                            {"path", e.path.string()}});
        std::cout << list.dump(2) << '\n';
        return 0;
    }

    if (app.got_subcommand("validate")) {
        try {
            const Scenario s = load_scenario(validate_path);
            std::cout << json{{"status", "valid"}, {"name", s.name}, {"task", to_string(s.task)}}.dump(2) << '\n';
            return 0;
        } catch (const Error& e) {
            return config_failure(e.what());
        }
    }

    Scenario s;
    try {
        s = resolve(target);
        if (seed) {
            s.seed = *seed;
            s.raw["seed"] = *seed;
        }
    } catch (const Error& e) {
        return config_failure(e.what());
    } catch (const std::pair<std::string, json>& e) {
        return config_failure(e.first, e.second);
    }

    const fs::path dir = !out_dir.empty()        ? fs::path(out_dir)
                         : !s.output_dir.empty() ? fs::path(s.output_dir)
                                                 : fs::path("runs") / s.name;
    try {
        const RunResult r = run_scenario(s, dir);
        std::cout << json{{"status", "ok"},
                          {"scenario", s.name},
                          {"report", (dir / "report.json").string()},
                          {"results", r.report["results"]}}
                         .dump(2)
                  << '\n';
        return 0;
    } catch (const StageError& e) {
        if (e.kind() == ErrorKind::ConfigError) return config_failure(e.what());
        std::cerr << json{{"status", "error"},
                          {"error", {{"kind", to_string(e.kind())}, {"stage", e.stage()}, {"message", e.what()}}}}
                         .dump(2)
                  << '\n';
        return kNumericExit;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ConfigError) return config_failure(e.what());
        std::cerr << json{{"status", "error"}, {"error", {{"kind", to_string(e.kind())}, {"message", e.what()}}}}.dump(2)
                  << '\n';
        return kNumericExit;
    }
}
