#include "surrbench/datagen.hpp"
#include "surrbench/io.hpp"
#include "surrbench/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace surrbench;

namespace {

struct Problem {
    FemOperators ops;
    std::shared_ptr<Eigen::MatrixXd> eigenbasis;
    std::shared_ptr<SparseMat> mass;
    std::shared_ptr<SparseMat> h1;
};

Problem make_problem(int grid_n, int basis_count) {
    Problem p{assemble_fem(Grid2D(grid_n)), nullptr, nullptr, nullptr};
    auto pairs = matern_eigenbasis(p.ops, 0.1, 0.5, basis_count);
    p.eigenbasis = std::make_shared<Eigen::MatrixXd>(eigenbasis_matrix(pairs));
    p.mass = std::make_shared<SparseMat>(p.ops.mass);
    p.h1 = std::make_shared<SparseMat>(p.ops.h1_gram);
    return p;
}

ReducedBasis output_basis_from_solves(const Problem& p, const SmoothnessSpec& spec, int n,
                                      int rank, std::uint64_t seed) {
    Eigen::MatrixXd solutions(p.ops.grid.dof_count(), n);
    for (int k = 0; k < n; ++k) {
        auto sample = sample_ks(spec, *p.eigenbasis, derive_seed(seed, static_cast<std::uint64_t>(k)));
        solutions.col(k) = solve_diffusion(p.ops, sample.field);
    }
    return empirical_pca(solutions, p.h1, "h1", rank);
}

std::uint64_t dir_hash(const std::filesystem::path& dir) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        const std::string text = io::read_text(file);
        h = io::fnv1a(text.data(), text.size(), h);
    }
    return h;
}

}  // namespace

TEST_CASE("dataset generation: analytic-unit encoder recovers the draw coefficients") {
    Problem p = make_problem(8, 12);
    SmoothnessSpec spec{2.0, 12};
    ReducedBasis out_basis = output_basis_from_solves(p, spec, 10, 5, 77);
    InputEncoder encoder = InputEncoder::analytic(p.eigenbasis, p.mass, spec.s, 12, true);

    TrainingDataset dataset =
        generate_dataset(4, spec, p.ops, *p.eigenbasis, encoder, out_basis, false, spec.s, 123);
    CHECK(dataset.n_solves == 4);
    CHECK(dataset.n_tangent == 0);

    // the unit-scaled encoder applied to x(c) returns c itself
    for (int k = 0; k < 4; ++k) {
        auto sample = sample_ks(spec, *p.eigenbasis, derive_seed(123, static_cast<std::uint64_t>(k)));
        CHECK((dataset.data.inputs.row(k).transpose() - sample.coeffs).lpNorm<Eigen::Infinity>() <
              1e-10);
        CHECK(dataset.data.inputs.row(k).lpNorm<Eigen::Infinity>() <= 1.0 + 1e-12);
    }
}

TEST_CASE("dataset jacobians match central differences of the encoded map") {
    Problem p = make_problem(8, 8);
    SmoothnessSpec spec{1.0, 8};
    ReducedBasis out_basis = output_basis_from_solves(p, spec, 12, 6, 99);
    InputEncoder encoder = InputEncoder::analytic(p.eigenbasis, p.mass, spec.s, 6, true);

    TrainingDataset dataset =
        generate_dataset(2, spec, p.ops, *p.eigenbasis, encoder, out_basis, true, spec.s, 2024);
    CHECK(dataset.n_tangent == 2 * 6);
    REQUIRE(dataset.data.has_jacobians());

    const double eps = 1e-5;
    for (int k = 0; k < 2; ++k) {
        auto sample = sample_ks(spec, *p.eigenbasis, derive_seed(2024, static_cast<std::uint64_t>(k)));
        for (int i = 0; i < 6; ++i) {
            ScalarField dir = encoder.direction(i);
            ScalarField y_hi = solve_diffusion(p.ops, sample.field + eps * dir);
            ScalarField y_lo = solve_diffusion(p.ops, sample.field - eps * dir);
            Eigen::VectorXd fd =
                (encode(out_basis, y_hi) - encode(out_basis, y_lo)) / (2 * eps);
            Eigen::VectorXd col = dataset.data.jacobians[static_cast<std::size_t>(k)].col(i);
            CHECK((col - fd).norm() / std::max(1e-12, fd.norm()) < 1e-4);
        }
    }
}

TEST_CASE("dataset files are byte-identical across runs with a fixed seed") {
    Problem p = make_problem(6, 6);
    SmoothnessSpec spec{1.5, 6};
    ReducedBasis out_basis = output_basis_from_solves(p, spec, 8, 4, 31);
    InputEncoder encoder = InputEncoder::analytic(p.eigenbasis, p.mass, spec.s, 6, true);

    auto base = std::filesystem::temp_directory_path() / "surrbench_dataset_test";
    std::filesystem::remove_all(base);
    std::uint64_t hashes[2];
    for (int run = 0; run < 2; ++run) {
        TrainingDataset dataset =
            generate_dataset(5, spec, p.ops, *p.eigenbasis, encoder, out_basis, true, spec.s, 555);
        auto dir = base / ("run" + std::to_string(run));
        save_dataset(dataset, dir);
        hashes[run] = dir_hash(dir);
    }
    CHECK(hashes[0] == hashes[1]);

    // round trip reproduces all arrays bit-exactly
    TrainingDataset dataset =
        generate_dataset(5, spec, p.ops, *p.eigenbasis, encoder, out_basis, true, spec.s, 555);
    TrainingDataset loaded = load_dataset(base / "run0");
    CHECK((loaded.data.inputs - dataset.data.inputs).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.data.outputs - dataset.data.outputs).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(loaded.data.jacobians.size() == dataset.data.jacobians.size());
    for (std::size_t k = 0; k < loaded.data.jacobians.size(); ++k)
        CHECK((loaded.data.jacobians[k] - dataset.data.jacobians[k]).cwiseAbs().maxCoeff() == 0.0);
    std::filesystem::remove_all(base);
}

TEST_CASE("probe operator: purity, counting, and optional cache") {
    Problem p = make_problem(6, 6);
    SmoothnessSpec spec{1.0, 6};
    ReducedBasis out_basis = output_basis_from_solves(p, spec, 8, 4, 41);
    InputEncoder encoder = InputEncoder::analytic(p.eigenbasis, p.mass, spec.s, 4, true);

    Eigen::VectorXd c(4);
    c << 0.3, -0.2, 0.9, -0.7;

    SECTION("no hidden caching by default") {
        ProbeOperator probe(p.ops, encoder, out_basis);
        Eigen::VectorXd first = probe(c);
        Eigen::VectorXd second = probe(c);
        CHECK(probe.solve_count() == 2);
        CHECK((first - second).lpNorm<Eigen::Infinity>() == 0.0);
    }
    SECTION("cache flag dedups identical points") {
        ProbeOperator probe(p.ops, encoder, out_basis, true);
        Eigen::VectorXd first = probe(c);
        Eigen::VectorXd second = probe(c);
        CHECK(probe.solve_count() == 1);
        CHECK((first - second).lpNorm<Eigen::Infinity>() == 0.0);
    }
}

TEST_CASE("probe operator agrees with dataset outputs at matching points") {
    Problem p = make_problem(8, 8);
    SmoothnessSpec spec{2.0, 8};
    ReducedBasis out_basis = output_basis_from_solves(p, spec, 10, 5, 51);
    InputEncoder encoder = InputEncoder::analytic(p.eigenbasis, p.mass, spec.s, 8, true);

    TrainingDataset dataset =
        generate_dataset(3, spec, p.ops, *p.eigenbasis, encoder, out_basis, false, spec.s, 808);
    ProbeOperator probe(p.ops, encoder, out_basis);
    for (int k = 0; k < 3; ++k) {
        Eigen::VectorXd out = probe(dataset.data.inputs.row(k).transpose());
        CHECK((out - dataset.data.outputs.row(k).transpose()).lpNorm<Eigen::Infinity>() < 1e-12);
    }
    CHECK(probe.solve_count() == 3);
}

TEST_CASE("probe at zero returns the encoded nominal solution") {
    Problem p = make_problem(6, 6);
    SmoothnessSpec spec{1.0, 6};
    ReducedBasis out_basis = output_basis_from_solves(p, spec, 8, 4, 61);
    InputEncoder encoder = InputEncoder::analytic(p.eigenbasis, p.mass, spec.s, 4, true);
    ProbeOperator probe(p.ops, encoder, out_basis);
    Eigen::VectorXd out = probe(Eigen::VectorXd::Zero(4));
    ScalarField y0 = solve_diffusion(p.ops, ScalarField::Zero(p.ops.grid.dof_count()));
    CHECK((out - encode(out_basis, y0)).lpNorm<Eigen::Infinity>() < 1e-13);
}
