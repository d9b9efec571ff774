#include "surrbench/bench.hpp"
#include "surrbench/io.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

using namespace surrbench;

namespace {

std::filesystem::path work_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("surrbench_bench_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

constexpr const char* kTinyProblem = R"(
[problem]
grid_n = 10
s = 2.0
d_true = 24

[test_set]
k = 12
seed = 5

[eval]
batch_sizes = [1, 8]
repeats = 2
)";

}  // namespace

TEST_CASE("ensemble: empty grid yields an empty but valid report") {
    Config config = Config::parse_string(std::string(kTinyProblem) + R"(
[ensemble]
kinds = []
)");
    auto dir = work_dir("empty");
    auto result = run_ensemble(config, dir, 1);
    CHECK(result.records.empty());
    CHECK(std::filesystem::exists(dir / "records.csv"));
    CHECK(std::filesystem::exists(dir / "pareto.csv"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("ensemble: one sparse-grid config emits one record with n = |Lambda|") {
    Config config = Config::parse_string(std::string(kTinyProblem) + R"(
[ensemble]
kinds = ["sg"]
seeds = [1]

[sg]
a = [2.0]
b = [1.0]
n = [20]
d_in = 5
d_out = 8
)");
    auto dir = work_dir("single_sg");
    auto result = run_ensemble(config, dir, 1);
    REQUIRE(result.records.size() == 1);
    const auto& record = result.records[0];
    CHECK(record.status == "ok");
    CHECK(record.n == std::stol(record.hyper.at("n_lambda")));
    CHECK(record.eps_l2 > 0.0);
    CHECK(record.eps_l2 < 1.0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("ensemble: unbounded index-set configs are skipped with a reason") {
    Config config = Config::parse_string(std::string(kTinyProblem) + R"(
[ensemble]
kinds = ["sg"]
seeds = [1]

[sg]
a = [0.2]
b = [0.2]      # log(a + b) < 0: the set would be infinite
n = [20]
d_in = 5
d_out = 8
)");
    auto dir = work_dir("skipped");
    auto result = run_ensemble(config, dir, 1);
    REQUIRE(result.records.size() == 1);
    CHECK(result.records[0].status.rfind("skipped:", 0) == 0);
    CHECK(result.records[0].status.find("j=1") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("ensemble: two seeds for one network differ only in seed and outcomes") {
    Config config = Config::parse_string(std::string(kTinyProblem) + R"(
[ensemble]
kinds = ["nn_l2"]
seeds = [1, 2]

[nn]
width = [8]
depth = [2]
n = [24]
d_in = 6
d_out = 6
epochs = 15
)");
    auto dir = work_dir("two_seeds");
    auto result = run_ensemble(config, dir, 1);
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[0].seed != result.records[1].seed);
    CHECK(result.records[0].hyper == result.records[1].hyper);
    CHECK(result.records[0].eps_l2 != result.records[1].eps_l2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("eval-time amortization is not pathological for the sparse-grid surrogate") {
    ProblemSetup problem = make_problem(10, 2.0, 24, 0.1, 0.5);
    TestSet test = build_test_set(problem, 8, 0, 5);
    EvalSettings eval;
    eval.batch_sizes = {1, 64};
    eval.repeats = 3;
    SgSettings settings;
    settings.n_target = 20;
    settings.d_in = 5;
    settings.d_out = 8;
    BenchRecord record = run_sg(problem, test, settings, eval, 1);
    REQUIRE(record.status == "ok");

    // re-measure both batch sizes directly: per-sample time at batch 1 must
    // not beat the batched path by more than the 2x slack
    auto surrogate_dir = work_dir("timing");
    BenchRecord timed = run_sg(problem, test, settings, eval, 1, &surrogate_dir);
    auto loaded = SparseGridSurrogate::load(surrogate_dir / "surrogate");
    auto timing = measure_eval_time(
        [&](const Eigen::MatrixXd& points) { (void)loaded.eval_batch(points); }, 5,
        {1, 64}, 3, 42);
    CHECK(timing.at(1) >= 0.5 * timing.at(64));
    CHECK(timed.t_eval > 0.0);
    std::filesystem::remove_all(surrogate_dir);
}
