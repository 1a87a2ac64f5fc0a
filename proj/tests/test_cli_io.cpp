#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "rspde/cli_io.hpp"

using namespace rspde;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("rspde_cli_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json simulate_config(double eps) {
    return {{"command", "simulate"},
            {"grid", {{"T", 0.25}, {"L", 5.0}, {"nt", 250}, {"nx", 50}}},
            {"coefficients",
             {{"drift", {{"kind", "affine"}, {"a", -0.5}}}, {"diffusion", {{"R", 1.0}, {"delta", 0.5}, {"c", 1.0}, {"d", 0.2}}}}},
            {"initial", {{"kind", "hump"}, {"amplitude", 1.0}}},
            {"control", {{"kind", "separable"}, {"amplitude", 1.0}}},
            {"epsilons", {eps}},
            {"n_paths", 6},
            {"seed", 11}};
}

std::string field_of(const json& j) {
    try {
        parse_config(j.dump());
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<accepted>";
}

}  // namespace

TEST_CASE("configuration errors name the offending field") {
    json j = simulate_config(0.1);
    CHECK(field_of(j) == "<accepted>");

    json unknown = j;
    unknown["grid"]["dx"] = 0.1;
    CHECK(field_of(unknown) == "grid.dx");

    json bad_type = j;
    bad_type["grid"]["nt"] = "many";
    CHECK(field_of(bad_type) == "grid.nt");

    json bad_cmd = j;
    bad_cmd["command"] = "solve";
    CHECK(field_of(bad_cmd) == "command");

    json no_damping = j;
    no_damping["coefficients"]["diffusion"]["delta"] = 0.0;
    CHECK(field_of(no_damping) == "coefficients.diffusion.delta");

    json unstable = j;
    unstable["grid"]["nt"] = 10;
    CHECK(field_of(unstable) == "grid");

    json negative_eps = j;
    negative_eps["epsilons"] = {-0.1};
    CHECK(field_of(negative_eps).rfind("epsilons", 0) == 0);

    json kernel = {{"command", "kernel-suite"}, {"grid", {{"T", 1.0}, {"L", 4.0}, {"nt", 64}, {"nx", 16}}}, {"p", 4}};
    CHECK(field_of(kernel) == "p");

    // r < 0 with initial data that has not decayed by x = L.
    json growing = j;
    growing["coefficients"]["r"] = -0.5;
    std::vector<double> flat(51, 1.0);
    flat[0] = 0.0;
    growing["initial"] = {{"kind", "values"}, {"values", flat}};
    CHECK(field_of(growing) == "initial");
    growing["initial"] = {{"kind", "hump"}, {"amplitude", 1.0}};
    CHECK(field_of(growing) == "<accepted>");

    CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
}

TEST_CASE("overrides replace seed, threads and output directory") {
    RunConfig c = parse_config(simulate_config(0.1).dump());
    apply_overrides(c, 99, std::string("/tmp/somewhere"), 3);
    CHECK(c.master_seed == 99);
    CHECK(c.threads == 3);
    CHECK(c.out_dir == "/tmp/somewhere");
    CHECK(json::parse(c.echo)["seed"] == 99);
    CHECK_THROWS_AS(apply_overrides(c, std::nullopt, std::nullopt, 0), ConfigError);
}

TEST_CASE("zero-noise simulation reproduces the reference and records digests") {
    RunConfig c = parse_config(simulate_config(0.0).dump());
    const fs::path dir = scratch("zero");
    apply_overrides(c, std::nullopt, dir.string(), std::nullopt);
    const RunManifest m = run(c);
    CHECK(m.status == "ok");
    CHECK(exit_status(m) == 0);
    bool saw_identity = false;
    for (const auto& v : m.verdicts) {
        if (v.name.rfind("zero_noise_matches_reference", 0) == 0) {
            saw_identity = true;
            CHECK(v.passed);
        }
    }
    CHECK(saw_identity);

    REQUIRE(fs::exists(dir / "manifest.json"));
    CHECK_FALSE(fs::exists(dir / ".lock"));
    const json manifest = json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest["status"] == "ok");
    CHECK(manifest["config"]["command"] == "simulate");
    for (std::size_t k = 0; k < m.outputs.size(); ++k) {
        const auto& o = m.outputs[k];
        const std::string bytes = slurp(dir / o.name);
        CHECK(bytes.size() == o.bytes);
        CHECK(sha256_hex(bytes) == o.sha256);
        if (k > 0) CHECK(m.outputs[k - 1].name < o.name);
    }
    const json summary = json::parse(slurp(dir / "moments.json"));
    CHECK(summary["master_seed"] == 11);
    CHECK(summary["moments"].size() == 2);
}

TEST_CASE("digests do not depend on the thread count") {
    auto digests = [](unsigned threads, const std::string& name) {
        RunConfig c = parse_config(simulate_config(0.05).dump());
        apply_overrides(c, 7, scratch(name).string(), threads);
        const RunManifest m = run(c);
        REQUIRE(m.status == "ok");
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& o : m.outputs) out.emplace_back(o.name, o.sha256);
        return out;
    };
    CHECK(digests(1, "t1") == digests(3, "t3"));
}

TEST_CASE("the manifest is written when the suite throws") {
    json j = simulate_config(0.0);
    j["reference_csv"] = "/nonexistent/reference.csv";
    RunConfig c = parse_config(j.dump());
    const fs::path dir = scratch("error");
    apply_overrides(c, std::nullopt, dir.string(), std::nullopt);
    const RunManifest m = run(c);
    CHECK(m.status == "error");
    CHECK(exit_status(m) == 1);
    CHECK(m.error.find("reference_csv") != std::string::npos);
    const json manifest = json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest["status"] == "error");
}

TEST_CASE("a locked output directory is refused") {
    RunConfig c = parse_config(simulate_config(0.0).dump());
    const fs::path dir = scratch("locked");
    apply_overrides(c, std::nullopt, dir.string(), std::nullopt);
    fs::create_directories(dir);
    std::ofstream(dir / ".lock") << "busy";
    CHECK_THROWS_AS(run(c), std::runtime_error);
    fs::remove(dir / ".lock");
    CHECK(run(c).status == "ok");
}

TEST_CASE("kernel suite verdicts carry the fitted slopes") {
    json j = {{"command", "kernel-suite"},
              {"grid", {{"T", 1.0}, {"L", 4.0}, {"nt", 64}, {"nx", 16}}},
              {"coefficients", {{"r", 0.5}}},
              {"p", 6}};
    RunConfig c = parse_config(j.dump());
    apply_overrides(c, std::nullopt, scratch("kernel").string(), std::nullopt);
    const RunManifest m = run(c);
    CHECK(m.status == "ok");
    int slopes = 0;
    for (const auto& v : m.verdicts) {
        if (v.name.rfind("slope_", 0) == 0) {
            ++slopes;
            CHECK(v.detail.find("fitted_slope=") != std::string::npos);
        }
    }
    CHECK(slopes == 3);
}

TEST_CASE("the command-line tool maps outcomes to exit codes") {
    const fs::path dir = scratch("tool");
    fs::create_directories(dir);
    auto exit_code = [&](const std::string& args) {
        const std::string cmd = std::string(RSPDE_CLI_PATH) + " " + args + " > " + (dir / "log.txt").string() + " 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    std::ofstream(dir / "ok.json") << simulate_config(0.0).dump();
    json bad = simulate_config(0.0);
    bad["grid"]["nx"] = 1;
    std::ofstream(dir / "bad.json") << bad.dump();

    CHECK(exit_code("--config " + (dir / "ok.json").string() + " --out " + (dir / "out").string()) == 0);
    CHECK(exit_code("--config " + (dir / "bad.json").string() + " --out " + (dir / "out2").string()) == 2);
    CHECK(exit_code("--out " + (dir / "out3").string()) != 0);
}
