#include "otmtr/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace otmtr::io {

namespace {

[[noreturn]] void io_error(const std::string& what) { throw Error(ErrorCode::Io, what); }
[[noreturn]] void config_error(const std::string& what) {
    throw Error(ErrorCode::InvalidParameter, what);
}

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& section) {
    if (!j.is_object()) config_error(section + ": expected a JSON object");
    for (const auto& item : j.items())
        if (!allowed.count(item.key())) config_error(section + ": unknown key '" + item.key() + "'");
}

template <typename T>
void read_key(const Json& j, const char* key, T& into, const std::string& section) {
    if (!j.contains(key)) return;
    try {
        into = j.at(key).get<T>();
    } catch (const Json::exception&) {
        config_error(section + ": bad value for '" + key + "'");
    }
}

// Numbers only: nlohmann converts booleans to numbers silently.
template <typename T>
void read_number(const Json& j, const char* key, T& into, const std::string& section) {
    if (j.contains(key) && !j.at(key).is_number())
        config_error(section + ": '" + std::string(key) + "' must be a number");
    read_key(j, key, into, section);
}

std::string format_number(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

fs::path task_file(const fs::path& dir, char prefix, std::size_t t) {
    return dir / (std::string(1, prefix) + "_" + std::to_string(t) + ".csv");
}

}  // namespace

Matrix read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) io_error("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream fields(line);
        std::string field;
        while (std::getline(fields, field, ',')) {
            const char* begin = field.c_str();
            char* end = nullptr;
            errno = 0;
            const double v = std::strtod(begin, &end);
            while (*end == ' ' || *end == '\t') ++end;
            if (end == begin || *end != '\0' || errno == ERANGE)
                io_error(path.string() + ":" + std::to_string(line_no) + ": not a number: '" + field + "'");
            row.push_back(v);
        }
        if (!line.empty() && line.back() == ',') io_error(path.string() + ": trailing comma");
        if (!rows.empty() && row.size() != rows.front().size())
            io_error(path.string() + ":" + std::to_string(line_no) + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) io_error(path.string() + " is empty");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    return m;
}

void write_csv(const fs::path& path, const Matrix& m) {
    std::string text;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) text += ',';
            text += format_number(m(i, j));
        }
        text += '\n';
    }
    write_text(path, text);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) io_error("cannot write " + path.string());
    out << text;
    if (!out) io_error("write failed for " + path.string());
}

Json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) io_error("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        config_error(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const Json& value) { write_text(path, value.dump(2) + "\n"); }

MultiTaskProblem load_problem(const fs::path& dir) {
    if (!fs::is_directory(dir)) io_error("problem directory not found: " + dir.string());
    MultiTaskProblem problem;
    for (std::size_t t = 0; fs::exists(task_file(dir, 'X', t)); ++t) {
        problem.designs.push_back(read_csv(task_file(dir, 'X', t)));
        const fs::path y_path = task_file(dir, 'Y', t);
        if (!fs::exists(y_path)) io_error("missing " + y_path.string());
        const Matrix y = read_csv(y_path);
        if (y.rows() != 1 && y.cols() != 1)
            io_error(y_path.string() + " must hold a single row or column");
        problem.targets.push_back(Eigen::Map<const Vector>(y.data(), y.size()));
    }
    if (problem.designs.empty()) io_error("no X_0.csv in " + dir.string());
    validate_problem(problem);
    return problem;
}

void save_problem(const fs::path& dir, const MultiTaskProblem& problem) {
    fs::create_directories(dir);
    for (std::size_t t = 0; t < problem.designs.size(); ++t) {
        write_csv(task_file(dir, 'X', t), problem.designs[t]);
        write_csv(task_file(dir, 'Y', t), problem.targets[t]);
    }
}

std::optional<Matrix> load_truth(const fs::path& dir) {
    const fs::path path = dir / "truth.csv";
    if (!fs::exists(path)) return std::nullopt;
    return read_csv(path);
}

GroundMetric load_metric(const fs::path& dir, Index p) {
    if (fs::exists(dir / "metric.csv")) {
        GroundMetric metric = GroundMetric::dense(read_csv(dir / "metric.csv"));
        if (metric.size() != p) throw Error(ErrorCode::ShapeMismatch, "metric.csv must be p x p");
        return metric.normalized();
    }
    if (fs::exists(dir / "meta.json")) {
        const Json meta = read_json(dir / "meta.json");
        const Json& s = meta.contains("scenario") ? meta.at("scenario") : meta;
        if (s.contains("height") && s.contains("width")) {
            const Index h = s.at("height").get<Index>();
            const Index w = s.at("width").get<Index>();
            if (h * w != p) throw Error(ErrorCode::ShapeMismatch, "meta.json grid does not match p");
            return GroundMetric::grid2d(h, w).normalized();
        }
    }
    io_error("no ground metric: provide metric.csv or a meta.json with height and width in " +
             dir.string());
}

void save_truth(const fs::path& dir, const simulate::GroundTruth& truth,
                const simulate::GridScenario& scenario) {
    save_problem(dir, truth.problem());
    write_csv(dir / "truth.csv", truth.coefficients);
    Json meta;
    meta["scenario"] = to_json(scenario);
    meta["sigma2"] = truth.sigma2;
    meta["n_samples"] = truth.design.rows();
    meta["n_features"] = truth.design.cols();
    write_json(dir / "meta.json", meta);
}

void apply(const Json& j, MtwHyperparams& into) {
    const std::string s = "hyperparams";
    check_keys(j, {"mu", "lambda", "epsilon", "gamma", "tau", "max_outer", "tol_outer",
                   "max_sinkhorn", "tol_sinkhorn", "max_cd", "tol_cd", "positive"},
               s);
    read_number(j, "mu", into.mu, s);
    read_number(j, "lambda", into.lambda, s);
    for (const char* key : {"epsilon", "gamma"}) {
        if (!j.contains(key)) continue;
        auto& field = std::string(key) == "epsilon" ? into.epsilon : into.gamma;
        if (j.at(key).is_null() || (j.at(key).is_string() && j.at(key) == "auto")) {
            field.reset();
        } else {
            double v = 0.0;
            read_number(j, key, v, s);
            field = v;
        }
    }
    read_number(j, "tau", into.tau, s);
    read_number(j, "max_outer", into.max_outer, s);
    read_number(j, "tol_outer", into.tol_outer, s);
    read_number(j, "max_sinkhorn", into.max_sinkhorn, s);
    read_number(j, "tol_sinkhorn", into.tol_sinkhorn, s);
    read_number(j, "max_cd", into.max_cd, s);
    read_number(j, "tol_cd", into.tol_cd, s);
    if (j.contains("positive") && !j.at("positive").is_boolean())
        config_error(s + ": 'positive' must be true or false");
    read_key(j, "positive", into.positive, s);
    validate_hyperparams(into);
}

void apply(const Json& j, simulate::GridScenario& into) {
    const std::string s = "scenario";
    check_keys(j, {"height", "width", "n_tasks", "sparsity", "overlap", "snr", "amp_low", "amp_high",
                   "blur_sigma", "pool_height", "pool_width", "seed"},
               s);
    read_number(j, "height", into.height, s);
    read_number(j, "width", into.width, s);
    read_number(j, "n_tasks", into.n_tasks, s);
    read_number(j, "sparsity", into.sparsity, s);
    read_number(j, "overlap", into.overlap, s);
    read_number(j, "snr", into.snr, s);
    read_number(j, "amp_low", into.amp_low, s);
    read_number(j, "amp_high", into.amp_high, s);
    read_number(j, "blur_sigma", into.blur_sigma, s);
    read_number(j, "pool_height", into.pool_height, s);
    read_number(j, "pool_width", into.pool_width, s);
    read_number(j, "seed", into.seed, s);
}

void apply(const Json& j, bench::GridOptions& into) {
    const std::string s = "grid";
    check_keys(j, {"n_lambda", "lambda_ratio", "n_mu", "mu_low", "mu_high", "dirty_base",
                   "dirty_depth", "n_group", "mtw", "max_iter", "tol", "normalize_design"},
               s);
    read_number(j, "n_lambda", into.n_lambda, s);
    read_number(j, "lambda_ratio", into.lambda_ratio, s);
    read_number(j, "n_mu", into.n_mu, s);
    read_number(j, "mu_low", into.mu_low, s);
    read_number(j, "mu_high", into.mu_high, s);
    read_number(j, "dirty_base", into.dirty_base, s);
    read_number(j, "dirty_depth", into.dirty_depth, s);
    read_number(j, "n_group", into.n_group, s);
    read_number(j, "max_iter", into.max_iter, s);
    read_number(j, "tol", into.tol, s);
    if (j.contains("normalize_design") && !j.at("normalize_design").is_boolean())
        config_error(s + ": 'normalize_design' must be true or false");
    read_key(j, "normalize_design", into.normalize_design, s);
    if (j.contains("mtw")) apply(j.at("mtw"), into.mtw);
    bench::validate_grid(into);
}

void apply(const Json& j, bench::BenchConfig& into) {
    const std::string s = "bench";
    check_keys(j, {"scenario", "overlaps", "n_seeds", "master_seed", "models", "grid", "threads"}, s);
    if (j.contains("scenario")) apply(j.at("scenario"), into.scenario);
    read_key(j, "overlaps", into.overlaps, s);
    read_number(j, "n_seeds", into.n_seeds, s);
    read_number(j, "master_seed", into.master_seed, s);
    read_number(j, "threads", into.threads, s);
    if (j.contains("models")) {
        std::vector<std::string> names;
        read_key(j, "models", names, s);
        into.models.clear();
        for (const auto& name : names) into.models.push_back(bench::parse_model(name));
    }
    if (j.contains("grid")) apply(j.at("grid"), into.grid);
    bench::validate_bench(into);
}

Json to_json(const MtwHyperparams& p) {
    Json j;
    j["mu"] = p.mu;
    j["lambda"] = p.lambda;
    j["epsilon"] = p.epsilon ? Json(*p.epsilon) : Json("auto");
    j["gamma"] = p.gamma ? Json(*p.gamma) : Json("auto");
    j["tau"] = p.tau;
    j["max_outer"] = p.max_outer;
    j["tol_outer"] = p.tol_outer;
    j["max_sinkhorn"] = p.max_sinkhorn;
    j["tol_sinkhorn"] = p.tol_sinkhorn;
    j["max_cd"] = p.max_cd;
    j["tol_cd"] = p.tol_cd;
    j["positive"] = p.positive;
    return j;
}

Json to_json(const simulate::GridScenario& s) {
    return Json{{"height", s.height},          {"width", s.width},
                {"n_tasks", s.n_tasks},        {"sparsity", s.sparsity},
                {"overlap", s.overlap},        {"snr", s.snr},
                {"amp_low", s.amp_low},        {"amp_high", s.amp_high},
                {"blur_sigma", s.blur_sigma},  {"pool_height", s.pool_height},
                {"pool_width", s.pool_width},  {"seed", s.seed}};
}

Json to_json(const FitReport& r) {
    Json j;
    j["converged"] = r.converged;
    j["iterations_used"] = r.iterations_used;
    j["objective_trace"] = r.objective_trace;
    j["delta_trace"] = r.delta_trace;
    j["seconds_cd"] = r.seconds_cd;
    j["seconds_ot"] = r.seconds_ot;
    j["log_domain_pos"] = r.log_domain_pos;
    j["log_domain_neg"] = r.log_domain_neg;
    return j;
}

}  // namespace otmtr::io
