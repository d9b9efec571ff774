#pragma once

#include "surrbench/fem.hpp"
#include "surrbench/mlp.hpp"  // Batch
#include "surrbench/reduced_basis.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace surrbench {

// Input-side coordinate system for surrogates. The analytic modes use the
// known generating basis; "unit" rescales the coefficients to [-1,1]^d so
// interpolation nodes can live on the standard cube.
class InputEncoder {
public:
    enum class Kind { pca, analytic, analytic_unit };

    static InputEncoder pca(std::shared_ptr<const ReducedBasis> basis);
    static InputEncoder analytic(std::shared_ptr<const Eigen::MatrixXd> eigenbasis,
                                 std::shared_ptr<const SparseMat> mass, double s, int d_in,
                                 bool unit_scaled);

    Kind kind() const { return kind_; }
    int dim() const;
    Eigen::VectorXd encode(const ScalarField& x) const;
    // field moved by a unit step of coordinate i; tangent directions for
    // jacobian data and the decode direction for probing
    ScalarField direction(int i) const;
    // assemble the field for a coefficient vector (inverse on the range)
    ScalarField decode(const Eigen::VectorXd& c) const;

private:
    Kind kind_ = Kind::pca;
    std::shared_ptr<const ReducedBasis> basis_;
    std::shared_ptr<const Eigen::MatrixXd> eigenbasis_;
    std::shared_ptr<const SparseMat> mass_;
    double s_ = 1.0;
    int d_in_ = 0;
    bool unit_scaled_ = false;
};

struct TrainingDataset {
    Batch data;                 // inputs n x d_in, outputs n x d_out, jacobians optional
    Eigen::VectorXd lambda_st;  // lambda_i^{s_tilde} weights for the inputs
    std::uint64_t seed = 0;
    double s = 1.0;
    int d_true = 0;
    long n_solves = 0;   // forward PDE solves
    long n_tangent = 0;  // tangent solves

    int n() const { return static_cast<int>(data.inputs.rows()); }
};

// Raw draws: K^s fields and their solutions, before any encoding. Column k
// holds sample k.
struct DrawnSamples {
    Eigen::MatrixXd coeffs;     // d_true x n
    Eigen::MatrixXd fields;     // dof x n
    Eigen::MatrixXd solutions;  // dof x n
    std::uint64_t seed = 0;
    double s = 1.0;
    int d_true = 0;
    long n_solves = 0;
};

DrawnSamples draw_and_solve(int n, const SmoothnessSpec& spec, const FemOperators& ops,
                            const Eigen::MatrixXd& eigenbasis, std::uint64_t seed);

// Encode drawn samples; with jacobians, one tangent solve per input direction
// reuses the per-sample forward factorization.
TrainingDataset assemble_dataset(const DrawnSamples& drawn, const FemOperators& ops,
                                 const InputEncoder& encoder, const ReducedBasis& output_basis,
                                 bool with_jacobians, double s_tilde);

// Draw n fields from K^s, solve, and encode both sides.
TrainingDataset generate_dataset(int n, const SmoothnessSpec& spec, const FemOperators& ops,
                                 const Eigen::MatrixXd& eigenbasis, const InputEncoder& encoder,
                                 const ReducedBasis& output_basis, bool with_jacobians,
                                 double s_tilde, std::uint64_t seed);

void save_dataset(const TrainingDataset& dataset, const std::filesystem::path& dir);
TrainingDataset load_dataset(const std::filesystem::path& dir);

// Coefficient-map probe c -> encoded solution coefficients, counting every
// forward solve. Optional memoization keyed by the quantized point.
class ProbeOperator {
public:
    ProbeOperator(const FemOperators& ops, const InputEncoder& encoder,
                  const ReducedBasis& output_basis, bool cache_enabled = false);

    Eigen::VectorXd operator()(const Eigen::VectorXd& c);
    long solve_count() const { return solves_; }
    double solve_seconds() const { return solve_seconds_; }
    int d_out() const { return output_basis_.rank(); }

private:
    const FemOperators& ops_;
    const InputEncoder& encoder_;
    const ReducedBasis& output_basis_;
    bool cache_enabled_;
    long solves_ = 0;
    double solve_seconds_ = 0.0;
    std::map<std::vector<long long>, Eigen::VectorXd> cache_;
};

}  // namespace surrbench
