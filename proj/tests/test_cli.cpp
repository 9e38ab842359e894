#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "otmtr/baselines.hpp"
#include "otmtr/cli.hpp"
#include "otmtr/io.hpp"

using namespace otmtr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("otmtr_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path operator/(const std::string& name) const { return path / name; }
};

int run(std::initializer_list<std::string> args) {
    std::vector<std::string> owned{"otmtr"};
    owned.insert(owned.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : owned) argv.push_back(a.c_str());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& path, const std::string& text) { std::ofstream(path) << text; }

const char* kSmallScenario =
    R"({"height": 8, "width": 8, "pool_height": 2, "pool_width": 2, "overlap": 0.5})";
const char* kTinyGrid = R"({"n_lambda": 4, "n_mu": 2, "dirty_base": 2, "dirty_depth": 2, "n_group": 3})";

}  // namespace

TEST_CASE("csv round trip is exact") {
    TempDir dir;
    Matrix m(2, 3);
    m << 0.1, -1e-300, 3.0, 1.0 / 3.0, 2e10, -0.0;
    io::write_csv(dir / "m.csv", m);
    CHECK(io::read_csv(dir / "m.csv") == m);
    write(dir / "ragged.csv", "1,2\n3\n");
    CHECK_THROWS_AS(io::read_csv(dir / "ragged.csv"), Error);
    write(dir / "text.csv", "1,abc\n");
    CHECK_THROWS_AS(io::read_csv(dir / "text.csv"), Error);
    write(dir / "crlf.csv", "1,2\r\n3,4\r\n");
    CHECK(io::read_csv(dir / "crlf.csv")(1, 1) == 4.0);
    CHECK_THROWS_AS(io::read_csv(dir / "missing.csv"), Error);
}

TEST_CASE("problem directories load targets as rows or columns") {
    TempDir dir;
    write(dir / "X_0.csv", "1,0\n0,1\n1,1\n");
    write(dir / "Y_0.csv", "1,2,3\n");
    write(dir / "X_1.csv", "2,0\n0,2\n1,1\n");
    write(dir / "Y_1.csv", "1\n2\n3\n");
    const auto problem = io::load_problem(dir.path);
    CHECK(problem.n_tasks() == 2);
    CHECK(problem.targets[0] == problem.targets[1]);
    write(dir / "X_2.csv", "1,0\n");
    CHECK_THROWS_AS(io::load_problem(dir.path), Error);  // Y_2 missing
    TempDir empty;
    CHECK_THROWS_AS(io::load_problem(empty.path), Error);
}

TEST_CASE("ground metric comes from metric.csv or the recorded grid") {
    TempDir dir;
    CHECK_THROWS_AS(io::load_metric(dir.path, 4), Error);
    write(dir / "meta.json", R"({"scenario": {"height": 2, "width": 2}})");
    const GroundMetric grid = io::load_metric(dir.path, 4);
    CHECK(grid.is_grid());
    CHECK(grid.median_cost() == doctest::Approx(1.0));
    CHECK_THROWS_AS(io::load_metric(dir.path, 5), Error);
    write(dir / "metric.csv", "0,2\n2,0\n");
    const GroundMetric dense = io::load_metric(dir.path, 2);
    CHECK_FALSE(dense.is_grid());
    CHECK(dense.cost(0, 1) == doctest::Approx(2.0));  // median 1 already
}

TEST_CASE("configs reject unknown keys and wrong types") {
    MtwHyperparams params;
    io::apply(io::Json::parse(R"({"mu": 2, "epsilon": "auto", "gamma": 0.5, "positive": true})"), params);
    CHECK(params.mu == 2.0);
    CHECK_FALSE(params.epsilon.has_value());
    CHECK(*params.gamma == 0.5);
    CHECK(params.positive);
    CHECK_THROWS_AS(io::apply(io::Json::parse(R"({"mu_typo": 1})"), params), Error);
    CHECK_THROWS_AS(io::apply(io::Json::parse(R"({"mu": "big"})"), params), Error);
    CHECK_THROWS_AS(io::apply(io::Json::parse(R"({"tau": 1.5})"), params), Error);
    simulate::GridScenario scenario;
    io::apply(io::Json::parse(kSmallScenario), scenario);
    CHECK(scenario.height == 8);
    const io::Json round = io::to_json(scenario);
    simulate::GridScenario back;
    io::apply(round, back);
    CHECK(io::to_json(back) == round);
}

TEST_CASE("thread count resolution") {
    ::unsetenv("OTMTR_THREADS");
    CHECK(cli::resolve_threads(3) == 3);
    CHECK(cli::resolve_threads(std::nullopt, 5) == 5);
    CHECK(cli::resolve_threads(std::nullopt) >= 1);
    ::setenv("OTMTR_THREADS", "2", 1);
    CHECK(cli::resolve_threads(std::nullopt, 5) == 2);
    CHECK(cli::resolve_threads(4, 5) == 4);
    ::setenv("OTMTR_THREADS", "two", 1);
    CHECK_THROWS_AS(cli::resolve_threads(std::nullopt), Error);
    ::unsetenv("OTMTR_THREADS");
    CHECK_THROWS_AS(cli::resolve_threads(0), Error);
}

TEST_CASE("simulate writes the default problem reproducibly") {
    TempDir dir;
    REQUIRE(run({"simulate", "--out", (dir / "a").string(), "--seed", "4"}) == 0);
    REQUIRE(run({"simulate", "--out", (dir / "b").string(), "--seed", "4"}) == 0);
    for (int t = 0; t < 3; ++t) {
        const std::string x = "X_" + std::to_string(t) + ".csv";
        const std::string y = "Y_" + std::to_string(t) + ".csv";
        const Matrix design = io::read_csv(dir / "a" / x);
        CHECK(design.rows() == 36);
        CHECK(design.cols() == 576);
        CHECK(slurp(dir / "a" / x) == slurp(dir / "b" / x));
        CHECK(slurp(dir / "a" / y) == slurp(dir / "b" / y));
    }
    CHECK_FALSE(fs::exists(dir / "a" / "X_3.csv"));
    CHECK(slurp(dir / "a" / "truth.csv") == slurp(dir / "b" / "truth.csv"));
    const auto meta = io::read_json(dir / "a" / "meta.json");
    CHECK(meta.at("sigma2").get<double>() > 0.0);
    CHECK(meta.at("scenario").at("seed") == 4);
}

TEST_CASE("simulate writes one directory per seed") {
    TempDir dir;
    write(dir / "s.json", kSmallScenario);
    REQUIRE(run({"simulate", "--config", (dir / "s.json").string(), "--out", (dir / "runs").string(),
                 "--seed", "1", "--count", "20"}) == 0);
    int n = 0;
    for (const auto& entry : fs::directory_iterator(dir / "runs")) n += entry.is_directory();
    CHECK(n == 20);
    CHECK(fs::exists(dir / "runs" / "seed_1" / "truth.csv"));
    CHECK(fs::exists(dir / "runs" / "seed_20" / "truth.csv"));
}

TEST_CASE("fit: lasso above lambda_max writes zeros") {
    TempDir dir;
    REQUIRE(run({"simulate", "--out", (dir / "p").string(), "--seed", "2"}) == 0);
    const double top = baselines::lasso_lambda_max(io::load_problem(dir / "p"));
    REQUIRE(run({"fit", "--problem", (dir / "p").string(), "--model", "lasso", "--lambda",
                 std::to_string(top * 1.01), "--out", (dir / "f").string()}) == 0);
    CHECK(io::read_csv(dir / "f" / "theta.csv").isZero(0.0));
    const auto report = io::read_json(dir / "f" / "report.json");
    CHECK(report.at("converged") == true);
    CHECK(report.at("theta").at("nonzeros") == 0);
}

TEST_CASE("fit: dirty regimes show up in the part files") {
    TempDir dir;
    write(dir / "s.json", kSmallScenario);
    REQUIRE(run({"simulate", "--config", (dir / "s.json").string(), "--out", (dir / "p").string()}) == 0);
    const auto bounds = baselines::dirty_bounds(io::load_problem(dir / "p"));
    const double mu = 0.2 * bounds.mu_max;
    // lambda above mu: everything goes to the common part.
    REQUIRE(run({"fit", "--problem", (dir / "p").string(), "--model", "dirty", "--mu", std::to_string(mu),
                 "--lambda", std::to_string(1.5 * mu), "--out", (dir / "hi").string()}) == 0);
    CHECK(io::read_csv(dir / "hi" / "specific.csv").isZero(0.0));
    CHECK_FALSE(io::read_csv(dir / "hi" / "common.csv").isZero(0.0));
    // mu above sqrt(T) lambda: everything goes to the specific part.
    REQUIRE(run({"fit", "--problem", (dir / "p").string(), "--model", "dirty", "--mu", std::to_string(mu),
                 "--lambda", std::to_string(0.5 * mu), "--out", (dir / "lo").string()}) == 0);
    CHECK(io::read_csv(dir / "lo" / "common.csv").isZero(0.0));
    const Matrix theta = io::read_csv(dir / "lo" / "theta.csv");
    CHECK((theta - io::read_csv(dir / "lo" / "specific.csv")).isZero(0.0));
}

TEST_CASE("fit: mtw converges on the default scenario") {
    TempDir dir;
    REQUIRE(run({"simulate", "--out", (dir / "p").string(), "--seed", "1"}) == 0);
    const double top = baselines::lasso_lambda_max(io::load_problem(dir / "p"));
    write(dir / "h.json", R"({"positive": true, "max_outer": 2000})");
    // mu = 10 and the middle of the 20-point Lasso grid.
    const int code = run({"fit", "--problem", (dir / "p").string(), "--model", "mtw", "--config",
                          (dir / "h.json").string(), "--mu", "10", "--lambda",
                          std::to_string(top * std::pow(0.01, 10.0 / 19.0)), "--out", (dir / "f").string()});
    CHECK(code == 0);
    const auto report = io::read_json(dir / "f" / "report.json");
    CHECK(report.at("converged") == true);
    CHECK(report.at("fit").at("iterations_used").get<int>() <= 2000);
    CHECK(report.contains("evaluation"));
    CHECK((io::read_csv(dir / "f" / "theta.csv").array() >= 0.0).all());
}

TEST_CASE("fit: exit code 2 when the iteration cap is hit") {
    TempDir dir;
    write(dir / "s.json", kSmallScenario);
    REQUIRE(run({"simulate", "--config", (dir / "s.json").string(), "--out", (dir / "p").string()}) == 0);
    write(dir / "h.json", R"({"mu": 1, "lambda": 0.01, "max_outer": 1})");
    CHECK(run({"fit", "--problem", (dir / "p").string(), "--model", "mtw", "--config",
               (dir / "h.json").string(), "--out", (dir / "f").string()}) == 2);
    CHECK(io::read_json(dir / "f" / "report.json").at("converged") == false);
}

TEST_CASE("config and I/O errors exit with 1") {
    TempDir dir;
    write(dir / "s.json", kSmallScenario);
    REQUIRE(run({"simulate", "--config", (dir / "s.json").string(), "--out", (dir / "p").string()}) == 0);
    const std::string p = (dir / "p").string(), out = (dir / "o").string();
    CHECK(run({}) == 1);
    CHECK(run({"frobnicate"}) == 1);
    CHECK(run({"fit", "--problem", (dir / "nope").string(), "--model", "lasso", "--lambda", "1", "--out", out}) == 1);
    CHECK(run({"fit", "--problem", p, "--model", "elastic", "--out", out}) == 1);
    CHECK(run({"fit", "--problem", p, "--model", "lasso", "--out", out}) == 1);  // no lambda
    CHECK(run({"fit", "--problem", p, "--model", "dirty", "--mu", "1", "--lambda", "0", "--out", out}) == 1);
    write(dir / "bad.json", R"({"lambda": 1, "alpha": 2})");
    CHECK(run({"fit", "--problem", p, "--model", "lasso", "--config", (dir / "bad.json").string(), "--out", out}) == 1);
    write(dir / "broken.json", "{");
    CHECK(run({"sweep", "--problem", p, "--config", (dir / "broken.json").string(), "--out", out}) == 1);
    write(dir / "empty.json", R"({"n_lambda": 0})");
    CHECK(run({"sweep", "--problem", p, "--config", (dir / "empty.json").string(), "--out", out}) == 1);
    CHECK(run({"bench", "--out", out, "--seeds", "0"}) == 1);
    CHECK(run({"simulate", "--out", out, "--overlap", "2"}) == 1);
    CHECK(run({"simulate", "--help"}) == 0);
}

TEST_CASE("sweep grid sizes and leaderboard") {
    TempDir dir;
    write(dir / "s.json", kSmallScenario);
    REQUIRE(run({"simulate", "--config", (dir / "s.json").string(), "--out", (dir / "p").string()}) == 0);
    const int code = run({"sweep", "--problem", (dir / "p").string(), "--out", (dir / "sw").string(),
                          "--threads", "2"});
    CHECK((code == 0 || code == 2));
    const auto board = io::read_json(dir / "sw" / "leaderboard.json");
    CHECK(board.at("scoring") == "auc_pr");
    std::map<std::string, int> sizes;
    for (const auto& m : board.at("models")) {
        sizes[m.at("model").get<std::string>()] = m.at("n_points").get<int>();
        const double best = m.at("best").at("score").get<double>();
        for (const auto& point : m.at("points")) CHECK(point.at("score").get<double>() <= best);
        CHECK(fs::exists(dir / "sw" / ("theta_" + m.at("model").get<std::string>() + ".csv")));
    }
    CHECK(sizes["lasso"] == 20);
    CHECK(sizes["mtw"] == 200);
    CHECK(sizes["dirty"] == 50);
    CHECK(sizes["grouplasso"] == 20);
}

TEST_CASE("sweep scores by cross-validation without truth") {
    TempDir dir;
    write(dir / "s.json", kSmallScenario);
    REQUIRE(run({"simulate", "--config", (dir / "s.json").string(), "--out", (dir / "p").string()}) == 0);
    fs::remove(dir / "p" / "truth.csv");
    write(dir / "g.json", kTinyGrid);
    const int code = run({"sweep", "--problem", (dir / "p").string(), "--model", "lasso", "--model", "mtw",
                          "--config", (dir / "g.json").string(), "--folds", "4", "--out", (dir / "sw").string()});
    CHECK((code == 0 || code == 2));
    const auto board = io::read_json(dir / "sw" / "leaderboard.json");
    CHECK(board.at("scoring") == "cv_mse");
    CHECK(board.at("models").size() == 2);
    for (const auto& m : board.at("models")) {
        const double best = m.at("best").at("score").get<double>();
        for (const auto& point : m.at("points")) CHECK(point.at("score").get<double>() >= best);
    }
}

TEST_CASE("group structure helps the dirty model under full overlap") {
    // Aggregate over 10 desk-scale scenarios with identical supports.
    TempDir dir;
    write(dir / "s.json", R"({"height": 8, "width": 8, "pool_height": 2, "pool_width": 2, "overlap": 1.0})");
    REQUIRE(run({"simulate", "--config", (dir / "s.json").string(), "--out", (dir / "runs").string(),
                 "--seed", "100", "--count", "10"}) == 0);
    double dirty = 0.0, lasso = 0.0;
    for (int s = 100; s < 110; ++s) {
        const fs::path problem = dir / "runs" / ("seed_" + std::to_string(s));
        const fs::path out = dir / ("sw" + std::to_string(s));
        const int code = run({"sweep", "--problem", problem.string(), "--model", "lasso", "--model", "dirty",
                              "--out", out.string(), "--threads", "1"});
        REQUIRE((code == 0 || code == 2));
        for (const auto& m : io::read_json(out / "leaderboard.json").at("models"))
            (m.at("model") == "dirty" ? dirty : lasso) += m.at("best").at("score").get<double>();
    }
    CHECK(dirty >= lasso);
}

TEST_CASE("bench rows and thread-independent output") {
    TempDir dir;
    write(dir / "b.json", std::string(R"({"scenario": )") + kSmallScenario + R"(, "n_seeds": 2, "grid": )" +
                              kTinyGrid + "}");
    REQUIRE(run({"bench", "--config", (dir / "b.json").string(), "--out", (dir / "one").string(),
                 "--threads", "1", "--seed", "9"}) == 0);
    REQUIRE(run({"bench", "--config", (dir / "b.json").string(), "--out", (dir / "many").string(),
                 "--threads", "3", "--seed", "9"}) == 0);
    const std::string csv = slurp(dir / "one" / "bench.csv");
    CHECK(csv == slurp(dir / "many" / "bench.csv"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 5 * 2 * 4);
    CHECK(csv.rfind("model,overlap,seed,auc\n", 0) == 0);
    const auto summary = io::read_json(dir / "one" / "summary.json");
    CHECK(summary.at("mean_auc_pr").at("mtw").size() == 5);
    CHECK(summary.at("threads") == 1);
}
