#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rspde/coefficients.hpp"
#include "rspde/grid.hpp"
#include "rspde/ldp.hpp"

namespace rspde {

/// Invalid configuration; `field` is the dotted path of the offending entry.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct InitialSpec {
    std::string kind = "zero";  // zero | hump (amplitude * x e^{-x^2/2}) | values
    double amplitude = 1.0;
    std::vector<double> values;
};

struct ControlSpec {
    // zero | separable (amplitude e^{-decay x} (1 + growth t)) | oscillatory
    // | lattice (nt*nx row-major cell values) | coarse (hat coefficients on the rate lattice)
    std::string kind = "zero";
    double amplitude = 0.0;
    double decay = 1.0;
    double growth = 0.0;
    double n = 1.0;
    double support = 1.0;
    std::vector<double> values;
};

struct ObstacleSpec {
    // bump: amplitude * t * max(0, 1 - |x - center| / width); negative: -amplitude * x e^{-x} (never active)
    std::string kind = "bump";
    double amplitude = 1.0;
    double center = 2.0;
    double width = 1.0;
};

struct RunConfig {
    std::string command;
    Grid grid;
    DriftFamily drift;
    DiffusionFamily diffusion;
    double r = 0.0;
    InitialSpec initial;
    ControlSpec control;
    std::vector<double> epsilons;
    std::size_t n_paths = 100;
    std::uint64_t master_seed = 1;
    unsigned threads = 1;
    std::string out_dir;

    double p = 6.0;                    // kernel-suite
    ObstacleSpec obstacle;             // obstacle
    std::string stepper = "auto";      // obstacle, skeleton: auto | explicit | implicit
    std::string reference_csv;         // simulate: stored reference field
    double N = 4.0;                    // condition-a, condition-b, rate
    std::vector<double> n_list{2, 4, 8, 16, 32, 64};
    PerturbationFamily family;         // condition-a
    std::vector<double> ps{2.0};       // condition-b
    RateOptions rate;                  // rate
    ExceedanceEvent event;             // ldp-scan
    std::size_t min_hits = 30;         // ldp-scan
    double oracle_tolerance = 0.2;     // ldp-scan: relative error against the Gaussian reference

    /// Canonical JSON echo of the effective configuration.
    std::string echo;
};

/// Parses and validates a JSON configuration; flag overrides apply afterwards
/// through apply_overrides. Throws ConfigError.
RunConfig parse_config(std::string_view json_text);

/// Applies --seed / --out / --threads and refreshes the echo. Throws ConfigError.
void apply_overrides(RunConfig& config, std::optional<std::uint64_t> seed, std::optional<std::string> out_dir,
                     std::optional<unsigned> threads);

struct Verdict {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct OutputFile {
    std::string name;
    std::uintmax_t bytes = 0;
    std::string sha256;
};

struct RunManifest {
    std::string config_echo;
    std::string version;
    std::string started_at;  // UTC, ISO 8601
    double wall_clock_seconds = 0.0;
    unsigned threads = 1;
    std::vector<Verdict> verdicts;
    std::vector<OutputFile> outputs;
    /// ok | failed (an assertion did not hold) | error (an exception aborted the run)
    std::string status = "ok";
    std::string error;

    bool all_passed() const;
    std::string to_json() const;
};

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Executes the configured suite in config.out_dir, writes its artifacts and
/// manifest.json (also when the suite throws) and returns the manifest.
/// Throws std::runtime_error when the output directory is locked by another run.
RunManifest run(const RunConfig& config);

/// 0 iff every verdict passed and no error occurred.
int exit_status(const RunManifest& manifest);

}  // namespace rspde
