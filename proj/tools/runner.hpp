#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "embedlab/error.hpp"
#include "embedlab/fermi.hpp"
#include "embedlab/persistence.hpp"

namespace embedlab::runner {

using json = nlohmann::json;

enum class Task { Spectrum, DeltaRank, FermiJacobian, SolveManifold, Trace, ConstructW, OffManifold, HypothesisCheck };

const char* to_string(Task t);

struct Scenario {
    std::string name;
    std::string description;
    std::string anchor;
    std::filesystem::path source;
    ModelSpec model;
    bool calibrate = true;
    bool has_eigenvalue = true;  // false for the zero potential
    Grid1D grid;
    Interval search{0.5, 1.5};
    double window_half = 0.2;
    std::vector<BumpSpec> bumps;
    std::vector<std::pair<std::string, std::vector<double>>> tables;
    Task task = Task::Spectrum;
    json options = json::object();
    std::map<std::string, double> tolerances;
    int probe_count = 8;
    double probe_span = 4.0;
    ResolventMethod method = ResolventMethod::RadiationBC;
    double rotation = 0.0;
    std::uint64_t seed = 7;
    std::string output_dir;
    json raw;

    double tol(const std::string& key) const;
};

// Keys accepted under "tolerances", with defaults.
const std::map<std::string, double>& default_tolerances();

// Throws Error(ConfigError) with a message naming the offending field.
Scenario parse_scenario(const json& j, const std::filesystem::path& source = {});
Scenario load_scenario(const std::filesystem::path& path);

struct RunResult {
    json report;
    std::vector<std::filesystem::path> artifacts;
};

// Runs the scenario and writes report.json plus CSV files into out_dir.
// Numerical errors propagate as Error with `stage` set to the failing module.
RunResult run_scenario(const Scenario& s, const std::filesystem::path& out_dir);

class StageError : public Error {
public:
    StageError(const Error& e, std::string stage) : Error(e), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct CatalogEntry {
    std::string name;
    std::string anchor;
    std::string description;
    std::filesystem::path path;
};

std::filesystem::path scenario_dir();
std::vector<CatalogEntry> catalog(const std::filesystem::path& dir = scenario_dir());
std::vector<std::string> suggestions(const std::string& name, const std::vector<CatalogEntry>& entries,
                                     std::size_t count = 3);

// EMBEDLAB_THREADS, else hardware concurrency.
int thread_cap();

// Full precision (17 significant digits).
std::string num(double v);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace embedlab::runner
