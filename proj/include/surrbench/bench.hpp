#pragma once

#include "surrbench/config.hpp"
#include "surrbench/datagen.hpp"
#include "surrbench/fem.hpp"
#include "surrbench/metrics.hpp"
#include "surrbench/mlp.hpp"
#include "surrbench/reduced_basis.hpp"
#include "surrbench/sparse_grid.hpp"
#include "surrbench/tensor_train.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace surrbench {

// Shared state for one (grid, s) problem instance: operators, the Matern
// input basis, and Gram matrices wrapped for the encoder/decoder machinery.
struct ProblemSetup {
    Grid2D grid{32};
    FemOperators ops;
    SmoothnessSpec spec;
    double gamma = 0.1;
    double delta = 0.5;
    std::shared_ptr<Eigen::MatrixXd> eigenbasis;  // dof x d_true, mass-orthonormal
    std::shared_ptr<SparseMat> mass;
    std::shared_ptr<SparseMat> h1;
};

ProblemSetup make_problem(int grid_n, double s, int d_true, double gamma, double delta);

// Fixed Monte-Carlo test set: raw coefficient draws, input/solution fields,
// and tangent solutions for the first h1_directions K^s directions.
struct TestSet {
    Eigen::MatrixXd coeffs;     // K x d_true
    Eigen::MatrixXd fields;     // K x dof
    Eigen::MatrixXd solutions;  // K x dof
    std::vector<Eigen::MatrixXd> tangents;  // K of (dof x h1_directions)
    int h1_directions = 0;
    std::uint64_t seed = 0;

    int size() const { return static_cast<int>(coeffs.rows()); }
};

TestSet build_test_set(const ProblemSetup& problem, int k, int h1_directions, std::uint64_t seed);
void save_test_set(const TestSet& set, const std::filesystem::path& dir);
std::optional<TestSet> try_load_test_set(const std::filesystem::path& dir,
                                         const ProblemSetup& problem, int k, int h1_directions,
                                         std::uint64_t seed);
// disk-cached wrapper around build/save/load
TestSet shared_test_set(const ProblemSetup& problem, int k, int h1_directions, std::uint64_t seed,
                        const std::filesystem::path& cache_dir);

struct EvalSettings {
    std::vector<int> batch_sizes = {1, 128};
    int repeats = 3;
};

struct SgSettings {
    double a = 2.0;
    double b = 1.0;
    double ell = 0.0;   // used when n_target == 0
    int n_target = 0;   // desired |Lambda|; searched when > 0
    int d_in = 16;
    int d_out = 25;
};

struct TtSettings {
    int nu_max = 4;
    bool anisotropic = true;
    int d_in = 16;
    int d_out = 25;
    int rank_cap = 4;
    int sweeps = 2;
    double round_tol = 1e-10;
    int n_pilot = 0;  // 0: 2*d_out + 8
};

struct NnSettings {
    int width = 48;
    int depth = 3;  // hidden layers
    Objective objective = Objective::l2;
    int n = 256;
    int d_in = 25;
    int d_out = 25;
    int epochs = 500;
    int batch_size = 32;
    std::string encoder = "pca";  // pca | analytic | analytic_unit
    double s_tilde = -1.0;        // <0: use problem s
    std::string activation = "gelu";
};

// Each runner builds one surrogate, scores it on the shared test set, and
// returns a fully populated record. PDE solves are never part of t_train_s.
BenchRecord run_sg(const ProblemSetup& problem, const TestSet& test, const SgSettings& settings,
                   const EvalSettings& eval, std::uint64_t seed,
                   const std::filesystem::path* save_dir = nullptr);
BenchRecord run_tt(const ProblemSetup& problem, const TestSet& test, const TtSettings& settings,
                   const EvalSettings& eval, std::uint64_t seed,
                   const std::filesystem::path* save_dir = nullptr);
BenchRecord run_nn(const ProblemSetup& problem, const TestSet& test, const NnSettings& settings,
                   const EvalSettings& eval, std::uint64_t seed,
                   const std::filesystem::path* save_dir = nullptr);

struct EnsembleResult {
    std::vector<BenchRecord> records;
};

// Iterates the hyperparameter grid from the config; individual failures are
// recorded, not fatal. Writes records + report files into out_dir.
EnsembleResult run_ensemble(const Config& config, const std::filesystem::path& out_dir,
                            int threads);

}  // namespace surrbench
