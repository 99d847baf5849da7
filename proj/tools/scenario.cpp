#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "runner.hpp"

namespace embedlab::runner {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& msg) { fail(ErrorKind::ConfigError, msg); }

void expect_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) config_error(where + " must be an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) config_error("unknown key '" + k + "' in " + where);
}

double get_number(const json& j, const std::string& key, double fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) config_error(where + "." + key + " must be a number");
    return j[key].get<double>();
}

int get_int(const json& j, const std::string& key, int fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) config_error(where + "." + key + " must be an integer");
    return j[key].get<int>();
}

bool get_bool(const json& j, const std::string& key, bool fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) config_error(where + "." + key + " must be true or false");
    return j[key].get<bool>();
}

std::string get_string(const json& j, const std::string& key, const std::string& fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_string()) config_error(where + "." + key + " must be a string");
    return j[key].get<std::string>();
}

// One number per line; a non-numeric first line is taken as a header.
std::vector<double> read_column(const fs::path& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot read " + path.string());
    std::vector<double> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        char* end = nullptr;
        const double v = std::strtod(line.c_str(), &end);
        if (end == line.c_str()) {
            if (first) {
                first = false;
                continue;
            }
            config_error("non-numeric line in " + path.string());
        }
        first = false;
        out.push_back(v);
    }
    return out;
}

std::vector<double> table_values(const json& j, const fs::path& base, const std::string& where) {
    if (j.contains("values") == j.contains("file")) config_error(where + " needs exactly one of 'values' or 'file'");
    if (j.contains("values")) {
        if (!j["values"].is_array()) config_error(where + ".values must be an array");
        std::vector<double> v;
        for (const auto& x : j["values"]) {
            if (!x.is_number()) config_error(where + ".values must hold numbers");
            v.push_back(x.get<double>());
        }
        return v;
    }
    fs::path file = get_string(j, "file", "", where);
    if (file.is_relative()) file = base / file;
    if (!fs::exists(file)) config_error(where + ".file does not exist: " + file.string());
    return read_column(file);
}

Task parse_task(const std::string& s) {
    static const std::map<std::string, Task> names = {
        {"spectrum", Task::Spectrum},           {"delta_rank", Task::DeltaRank},
        {"fermi_jacobian", Task::FermiJacobian}, {"solve_manifold", Task::SolveManifold},
        {"trace", Task::Trace},                 {"construct_w", Task::ConstructW},
        {"off_manifold", Task::OffManifold},     {"hypothesis_check", Task::HypothesisCheck}};
    const auto it = names.find(s);
    if (it == names.end()) {
        std::string all;
        for (const auto& [k, v] : names) all += (all.empty() ? "" : ", ") + k;
        config_error("unknown task '" + s + "' (expected one of " + all + ")");
    }
    return it->second;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

const std::map<Task, std::set<std::string>>& option_keys() {
    static const std::map<Task, std::set<std::string>> keys = {
        {Task::Spectrum, {}},
        {Task::DeltaRank, {"lambda"}},
        {Task::FermiJacobian, {"fd_step"}},
        {Task::SolveManifold, {"xi_norm"}},
        {Task::Trace, {"kernel_index", "steps", "step_size", "reverse"}},
        {Task::ConstructW, {"ball", "u", "norm", "samples"}},
        {Task::OffManifold, {"normal_index", "magnitudes", "samples"}},
        {Task::HypothesisCheck, {"expected_rank"}}};
    return keys;
}

}  // namespace

const char* to_string(Task t) {
    switch (t) {
        case Task::Spectrum: return "spectrum";
        case Task::DeltaRank: return "delta_rank";
        case Task::FermiJacobian: return "fermi_jacobian";
        case Task::SolveManifold: return "solve_manifold";
        case Task::Trace: return "trace";
        case Task::ConstructW: return "construct_w";
        case Task::OffManifold: return "off_manifold";
        case Task::HypothesisCheck: return "hypothesis_check";
    }
    return "?";
}

const std::map<std::string, double>& default_tolerances() {
    static const std::map<std::string, double> t = {
        {"tol_newton", 1e-12},     {"tol_manifold", 1e-10}, {"tol_eig_pert", 1e-7},
        {"rank_threshold", 1e-6},  {"edge_threshold", 1e-8}, {"q_tol", 1e-6},
        {"fd_rel", 1e-3},          {"isolation_radius", 0.2}};
    return t;
}

double Scenario::tol(const std::string& key) const {
    const auto it = tolerances.find(key);
    if (it != tolerances.end()) return it->second;
    return default_tolerances().at(key);
}

Scenario parse_scenario(const json& j, const fs::path& source) {
    expect_keys(j, {"name", "description", "anchor", "model", "grid", "search", "window_half_width", "basis", "task",
                    "options", "tolerances", "probes", "resolvent", "rotation", "seed", "output_dir"},
                "scenario");
    Scenario s;
    s.raw = j;
    s.source = source;
    const fs::path base = source.empty() ? fs::current_path() : source.parent_path();
    if (!j.contains("name")) config_error("scenario.name is required");
    if (!j.contains("task")) config_error("scenario.task is required");
    if (!j.contains("model")) config_error("scenario.model is required");
    s.name = get_string(j, "name", "", "scenario");
    s.description = get_string(j, "description", "", "scenario");
    s.anchor = get_string(j, "anchor", "", "scenario");
    s.task = parse_task(get_string(j, "task", "", "scenario"));
    s.output_dir = get_string(j, "output_dir", "", "scenario");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) config_error("scenario.seed must be a non-negative integer");
        s.seed = j["seed"].get<std::uint64_t>();
    }
    s.rotation = get_number(j, "rotation", 0.0, "scenario");
    s.window_half = get_number(j, "window_half_width", 0.2, "scenario");
    if (!(s.window_half > 0)) config_error("scenario.window_half_width must be positive");

    if (j.contains("grid")) {
        const json& g = j["grid"];
        expect_keys(g, {"x_min", "x_max", "n_points"}, "grid");
        s.grid.x_min = get_number(g, "x_min", s.grid.x_min, "grid");
        s.grid.x_max = get_number(g, "x_max", s.grid.x_max, "grid");
        s.grid.n_points = get_int(g, "n_points", s.grid.n_points, "grid");
    }
    try {
        s.grid.validate();
    } catch (const Error& e) {
        config_error(std::string("grid: ") + e.what());
    }

    const json& m = j["model"];
    expect_keys(m, {"kind", "potential", "calibrate", "angular_cutoff", "angular_index", "weight_index"}, "model");
    const std::string kind = get_string(m, "kind", "line", "model");
    if (kind == "line") s.model.kind = ModelKind::FourthOrderLine;
    else if (kind == "cylinder_even") s.model.kind = ModelKind::CylinderEvenSector;
    else if (kind == "cylinder_full") s.model.kind = ModelKind::CylinderFull;
    else config_error("model.kind must be line, cylinder_even or cylinder_full");
    s.model.angular_cutoff = get_int(m, "angular_cutoff", s.model.is_cylinder() ? 3 : 0, "model");
    s.model.angular_index = get_int(m, "angular_index", 1, "model");
    s.model.weight_index = get_number(m, "weight_index", 1.0, "model");
    s.calibrate = get_bool(m, "calibrate", true, "model");
    if (s.model.is_cylinder() && (s.model.angular_index < 1 || s.model.angular_index > s.model.angular_cutoff))
        config_error("model.angular_index must lie in 1..angular_cutoff");
    if (!m.contains("potential")) config_error("model.potential is required");
    {
        const json& p = m["potential"];
        const std::string type = get_string(p, "type", "", "model.potential");
        if (type == "sech_pair") {
            expect_keys(p, {"type", "a", "b"}, "model.potential");
            s.model.potential = SechPair{get_number(p, "a", 20.0, "model.potential"),
                                         get_number(p, "b", -24.0, "model.potential")};
        } else if (type == "sech_well") {
            expect_keys(p, {"type", "v0"}, "model.potential");
            s.model.potential = SechSquaredWell{get_number(p, "v0", 1.19, "model.potential")};
        } else if (type == "zero") {
            expect_keys(p, {"type"}, "model.potential");
            s.model.potential = Tabulated{std::vector<double>(s.grid.n_points, 0.0)};
            s.has_eigenvalue = false;
        } else if (type == "table") {
            expect_keys(p, {"type", "values", "file"}, "model.potential");
            auto v = table_values(p, base, "model.potential");
            if (static_cast<int>(v.size()) != s.grid.n_points)
                config_error("model.potential table length must equal grid.n_points");
            s.model.potential = Tabulated{std::move(v)};
        } else {
            config_error("model.potential.type must be sech_pair, sech_well, zero or table");
        }
    }

    if (j.contains("search")) {
        const json& w = j["search"];
        expect_keys(w, {"lo", "hi"}, "search");
        s.search = {get_number(w, "lo", 0, "search"), get_number(w, "hi", 0, "search")};
    } else if (s.model.is_cylinder()) {
        const double l0 = s.model.angular_index * s.model.angular_index - 0.49;
        s.search = {l0 - 0.2, l0 + 0.2};
    }
    if (!(s.search.hi > s.search.lo)) config_error("search.hi must exceed search.lo");

    if (j.contains("tolerances")) {
        const json& t = j["tolerances"];
        if (!t.is_object()) config_error("tolerances must be an object");
        for (const auto& [k, v] : t.items()) {
            if (!default_tolerances().count(k)) {
                std::string all;
                for (const auto& [name, d] : default_tolerances()) all += (all.empty() ? "" : ", ") + name;
                config_error("unknown tolerance '" + k + "' (allowed: " + all + ")");
            }
            if (!v.is_number() || !(v.get<double>() > 0)) config_error("tolerance " + k + " must be a positive number");
            s.tolerances[k] = v.get<double>();
        }
    }

    if (j.contains("probes")) {
        const json& p = j["probes"];
        expect_keys(p, {"count", "span"}, "probes");
        s.probe_count = get_int(p, "count", s.probe_count, "probes");
        s.probe_span = get_number(p, "span", s.probe_span, "probes");
        if (s.probe_count < 1) config_error("probes.count must be positive");
    }
    if (j.contains("resolvent")) {
        const std::string r = get_string(j, "resolvent", "radiation", "scenario");
        if (r == "radiation") s.method = ResolventMethod::RadiationBC;
        else if (r == "epsilon") s.method = ResolventMethod::EpsilonExtrapolation;
        else config_error("resolvent must be radiation or epsilon");
    }

    if (j.contains("basis")) {
        const json& b = j["basis"];
        expect_keys(b, {"bumps", "tables"}, "basis");
        if (b.contains("bumps")) {
            if (!b["bumps"].is_array()) config_error("basis.bumps must be an array");
            for (const auto& e : b["bumps"]) {
                expect_keys(e, {"center", "width", "harmonic", "sine", "amplitude"}, "basis.bumps[]");
                BumpSpec bs;
                bs.center = get_number(e, "center", 0.0, "basis.bumps[]");
                bs.width = get_number(e, "width", 1.0, "basis.bumps[]");
                bs.harmonic = get_int(e, "harmonic", 0, "basis.bumps[]");
                bs.sine = get_bool(e, "sine", false, "basis.bumps[]");
                bs.amplitude = get_number(e, "amplitude", 1.0, "basis.bumps[]");
                if (!(bs.width > 0)) config_error("basis.bumps[].width must be positive");
                if (bs.harmonic < 0 || (bs.harmonic > 0 && !s.model.is_cylinder()) ||
                    bs.harmonic > s.model.angular_cutoff)
                    config_error("basis.bumps[].harmonic is out of range for the model");
                s.bumps.push_back(bs);
            }
        }
        if (b.contains("tables")) {
            if (!b["tables"].is_array()) config_error("basis.tables must be an array");
            const int theta = s.model.is_cylinder() ? 2 * s.model.angular_cutoff + 1 : 1;
            for (const auto& e : b["tables"]) {
                expect_keys(e, {"label", "values", "file"}, "basis.tables[]");
                auto v = table_values(e, base, "basis.tables[]");
                if (static_cast<int>(v.size()) != s.grid.n_points * theta)
                    config_error("basis.tables[] length must equal n_points times the theta node count");
                s.tables.emplace_back(get_string(e, "label", "table", "basis.tables[]"), std::move(v));
            }
        }
    }

    if (j.contains("options")) {
        s.options = j["options"];
        std::set<std::string> allowed = option_keys().at(s.task);
        expect_keys(s.options, allowed, std::string("options for ") + to_string(s.task));
    }

    // task requirements
    const bool has_basis = !s.bumps.empty() || !s.tables.empty();
    switch (s.task) {
        case Task::DeltaRank:
            if (!s.has_eigenvalue && !s.options.contains("lambda"))
                config_error("delta_rank on a model without an eigenvalue needs options.lambda");
            break;
        case Task::FermiJacobian:
        case Task::SolveManifold:
        case Task::Trace:
        case Task::OffManifold:
            if (!has_basis) config_error(std::string(to_string(s.task)) + " needs a basis");
            [[fallthrough]];
        case Task::Spectrum:
        case Task::ConstructW:
        case Task::HypothesisCheck:
            if (!s.has_eigenvalue) config_error(std::string(to_string(s.task)) + " needs a model with an eigenvalue");
            break;
    }
    if (s.task == Task::ConstructW) {
        if (!s.options.contains("ball")) config_error("construct_w needs options.ball");
        expect_keys(s.options["ball"], {"center", "radius"}, "options.ball");
        if (!(get_number(s.options["ball"], "radius", 0, "options.ball") > 0))
            config_error("options.ball.radius must be positive");
        if (s.options.contains("u"))
            expect_keys(s.options["u"], {"center", "width", "harmonic", "sine"}, "options.u");
    }
    if (s.task == Task::OffManifold && s.options.contains("magnitudes")) {
        if (!s.options["magnitudes"].is_array()) config_error("options.magnitudes must be an array");
        for (const auto& v : s.options["magnitudes"])
            if (!v.is_number()) config_error("options.magnitudes must hold numbers");
    }
    return s;
}

Scenario load_scenario(const fs::path& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot open scenario " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        config_error(std::string("malformed JSON: ") + e.what());
    }
    return parse_scenario(j, fs::absolute(path));
}

fs::path scenario_dir() {
    if (const char* env = std::getenv("EMBEDLAB_SCENARIOS")) return env;
#ifdef EMBEDLAB_SCENARIO_DIR
    return EMBEDLAB_SCENARIO_DIR;
#else
    return "scenarios";
#endif
}

std::vector<CatalogEntry> catalog(const fs::path& dir) {
    std::vector<CatalogEntry> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() != ".json") continue;
        std::ifstream in(e.path());
        const json j = json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        out.push_back({j.value("name", e.path().stem().string()), j.value("anchor", ""),
                       j.value("description", ""), e.path()});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return out;
}

std::vector<std::string> suggestions(const std::string& name, const std::vector<CatalogEntry>& entries,
                                     std::size_t count) {
    std::vector<std::pair<std::size_t, std::string>> scored;
    for (const auto& e : entries) {
        std::size_t d = edit_distance(name, e.name);
        if (e.name.find(name) != std::string::npos) d = 0;
        scored.emplace_back(d, e.name);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < scored.size() && i < count; ++i) out.push_back(scored[i].second);
    return out;
}

int thread_cap() {
    if (const char* env = std::getenv("EMBEDLAB_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::InvalidArgument, "cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
        out << '\n';
    }
}

}  // namespace embedlab::runner
