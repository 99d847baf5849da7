#include "doctest.h"
#include "runner.hpp"

using namespace embedlab;
using namespace embedlab::runner;

namespace {

json minimal() {
    return json::parse(R"({
        "name": "t", "task": "spectrum",
        "model": {"kind": "line", "potential": {"type": "sech_pair", "a": 20, "b": -24}},
        "grid": {"x_min": -20, "x_max": 20, "n_points": 401}
    })");
}

ErrorKind parse_kind(const json& j) {
    try {
        parse_scenario(j);
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("scenario parsing applies defaults") {
    const Scenario s = parse_scenario(minimal());
    CHECK(s.task == Task::Spectrum);
    CHECK(s.seed == 7);
    CHECK(s.tol("tol_manifold") == 1e-10);
    CHECK(s.tol("rank_threshold") == 1e-6);
    CHECK(s.grid.n_points == 401);
}

TEST_CASE("scenario parsing rejects bad input") {
    json j = minimal();
    j["extra"] = 1;
    CHECK(parse_kind(j) == ErrorKind::ConfigError);

    j = minimal();
    j["task"] = "spectra";
    CHECK(parse_kind(j) == ErrorKind::ConfigError);

    j = minimal();
    j["tolerances"] = {{"tol_newtn", 1e-3}};
    CHECK(parse_kind(j) == ErrorKind::ConfigError);

    j = minimal();
    j["model"]["potential"] = {{"type", "table"}, {"values", {1.0, 2.0}}};
    CHECK(parse_kind(j) == ErrorKind::ConfigError);

    j = minimal();
    j["grid"]["n_points"] = 2;
    CHECK(parse_kind(j) == ErrorKind::ConfigError);

    j = minimal();
    j["task"] = "fermi_jacobian";
    CHECK(parse_kind(j) == ErrorKind::ConfigError);  // no basis

    j = minimal();
    j["basis"] = {{"bumps", {{{"center", 0.0}, {"width", 1.0}, {"harmonic", 1}}}}};
    CHECK(parse_kind(j) == ErrorKind::ConfigError);  // harmonic on the line

    j = minimal();
    j["task"] = "construct_w";
    CHECK(parse_kind(j) == ErrorKind::ConfigError);  // no ball
}

TEST_CASE("unknown names get close suggestions") {
    const std::vector<CatalogEntry> entries = {{"example51_spectrum", "", "", {}},
                                               {"free_delta_rank", "", "", {}},
                                               {"cylinder_construct_w", "", "", {}}};
    const auto s = suggestions("exmple51_spectrum", entries, 2);
    REQUIRE(s.size() == 2);
    CHECK(s[0] == "example51_spectrum");
    CHECK(suggestions("delta", entries, 1)[0] == "free_delta_rank");
}

TEST_CASE("numbers keep 17 significant digits") {
    CHECK(num(0.1) == "0.10000000000000001");
    CHECK(std::stod(num(1.0 / 3.0)) == 1.0 / 3.0);
}
