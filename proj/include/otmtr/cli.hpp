#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

// The otmtr command-line tool. Exit codes: 0 success, 1 config or I/O error,
// 2 a fit stopped at its iteration cap.
namespace otmtr::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kConfigError = 1, kNotConverged = 2 };

struct RunConfig {
    std::string command;              // simulate | fit | sweep | bench
    std::vector<std::string> models;  // fit: exactly one; sweep: empty means all
    fs::path problem_dir;
    fs::path out_dir;
    std::optional<fs::path> config;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool smoke = false;
    int count = 1;                    // simulate: consecutive seeds written to seed_<s>/
    std::optional<int> n_seeds;       // bench
    std::optional<double> overlap;    // simulate
    std::optional<double> mu;         // fit
    std::optional<double> lambda;     // fit
    int folds = 5;                    // sweep without truth.csv
};

/// --threads, then OTMTR_THREADS, then `fallback`, then the hardware concurrency.
int resolve_threads(const std::optional<int>& flag, const std::optional<int>& fallback = std::nullopt);

int cmd_simulate(const RunConfig& config);
int cmd_fit(const RunConfig& config);
int cmd_sweep(const RunConfig& config);
int cmd_bench(const RunConfig& config);

/// Parses argv, dispatches, and maps errors to exit codes with a message on stderr.
int run(int argc, const char* const* argv);

}  // namespace otmtr::cli
