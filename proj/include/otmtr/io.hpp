#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "otmtr/bench.hpp"
#include "otmtr/core.hpp"
#include "otmtr/simulate.hpp"

// Files and configs of the command-line tool. All failures throw Error{Io} for the file system
// and Error{InvalidParameter} for malformed or unknown config entries.
namespace otmtr::io {

namespace fs = std::filesystem;
using Json = nlohmann::json;

/// Comma-separated, no header, one matrix row per line.
Matrix read_csv(const fs::path& path);
/// Values printed with %.17g so that a read-back is exact.
void write_csv(const fs::path& path, const Matrix& m);

/// Reads X_0.csv, Y_0.csv, X_1.csv, ... until the next X file is missing.
/// Y files may hold a row or a column.
MultiTaskProblem load_problem(const fs::path& dir);
void save_problem(const fs::path& dir, const MultiTaskProblem& problem);

/// truth.csv (p x T) when present.
std::optional<Matrix> load_truth(const fs::path& dir);

/// Ground metric of a problem directory: metric.csv when present, otherwise the grid recorded
/// in meta.json ("height", "width"). Returned normalized to unit median cost.
GroundMetric load_metric(const fs::path& dir, Index p);

/// Writes the problem files, truth.csv and meta.json (scenario and realized sigma2).
void save_truth(const fs::path& dir, const simulate::GroundTruth& truth,
                const simulate::GridScenario& scenario);

void write_text(const fs::path& path, const std::string& text);
Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& value);

// Config sections. Keys absent from the JSON keep the value already in `into`.
void apply(const Json& j, MtwHyperparams& into);
void apply(const Json& j, simulate::GridScenario& into);
void apply(const Json& j, bench::GridOptions& into);
void apply(const Json& j, bench::BenchConfig& into);

Json to_json(const MtwHyperparams& params);
Json to_json(const simulate::GridScenario& scenario);
Json to_json(const FitReport& report);

}  // namespace otmtr::io
