#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rspde/cli_io.hpp"

namespace {

constexpr int kUsageError = 2;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reflected stochastic heat equation laboratory"};
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    unsigned threads = 0;
    app.add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides the config)");
    auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides the config)");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads; affects speed only")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    std::ifstream in(config_path, std::ios::binary);
    std::stringstream text;
    text << in.rdbuf();

    rspde::RunConfig config;
    try {
        config = rspde::parse_config(text.str());
        rspde::apply_overrides(config, seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt,
                               out_opt->count() ? std::optional<std::string>(out_dir) : std::nullopt,
                               threads_opt->count() ? std::optional<unsigned>(threads) : std::nullopt);
    } catch (const rspde::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsageError;
    }

    try {
        const auto manifest = rspde::run(config);
        for (const auto& v : manifest.verdicts) {
            std::printf("%-40s %s  %s\n", v.name.c_str(), v.passed ? "PASS" : "FAIL", v.detail.c_str());
        }
        if (manifest.status == "error") std::fprintf(stderr, "error: %s\n", manifest.error.c_str());
        std::printf("status: %s (%s/manifest.json)\n", manifest.status.c_str(), config.out_dir.c_str());
        return rspde::exit_status(manifest);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
