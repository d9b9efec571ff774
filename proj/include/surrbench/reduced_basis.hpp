#pragma once

#include "surrbench/fem.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace surrbench {

// Input smoothness: fields are sums of basis functions with coefficients
// bounded by lambda_j^s, lambda_j = 1/j.
struct SmoothnessSpec {
    double s = 1.0;
    int d_true = 256;

    static double lambda(int j) { return 1.0 / static_cast<double>(j); }  // 1-based
    double lambda_pow_s(int j) const { return std::pow(lambda(j), s); }
};

// Mean shift plus Gram-orthonormal basis columns (B^T G B = I). Realizes the
// truncated encoder/decoder pair and their pseudoinverses.
struct ReducedBasis {
    Eigen::VectorXd mean;
    Eigen::MatrixXd basis;  // dof_count x r
    std::string gram_tag;   // "mass" (L2) or "h1"
    std::shared_ptr<const SparseMat> gram;
    Eigen::VectorXd captured_energy;  // top-r eigenvalues, non-increasing
    double discarded_energy = 0.0;

    int rank() const { return static_cast<int>(basis.cols()); }
};

using CoefficientVector = Eigen::VectorXd;

// Draw c uniform on [-1,1]^{d_true} and assemble x = sum_j c_j j^{-s} psi_j.
struct KsSample {
    Eigen::VectorXd coeffs;
    ScalarField field;
};
KsSample sample_ks(const SmoothnessSpec& spec, const Eigen::MatrixXd& basis_functions,
                   std::uint64_t seed);

// Best rank-r affine approximation of the sample cloud in the Gram inner
// product, via the N x N eigenproblem of Xc^T G Xc (sample-space route).
// The effective rank is reduced when trailing singular values fall below
// 1e-12 times the largest.
ReducedBasis empirical_pca(const Eigen::MatrixXd& samples, std::shared_ptr<const SparseMat> gram,
                           const std::string& gram_tag, int rank);

CoefficientVector encode(const ReducedBasis& basis, const ScalarField& x);
ScalarField decode(const ReducedBasis& basis, const CoefficientVector& c);

// Derivative of encode: projects a tangent field, no mean shift.
CoefficientVector encode_tangent(const ReducedBasis& basis, const ScalarField& z);

// Frobenius norm of J * diag(lambda_1^st, ..., lambda_d^st), lambda_i = 1/i.
double xs_weighted_seminorm(const Eigen::MatrixXd& jacobian, double s_tilde);

Eigen::VectorXd lambda_pow(int count, double exponent);  // (i^-1)^exponent, i = 1..count

void save_basis(const ReducedBasis& basis, const std::filesystem::path& dir,
                const std::string& stem);
ReducedBasis load_basis(const std::filesystem::path& dir, const std::string& stem,
                        std::shared_ptr<const SparseMat> gram);

}  // namespace surrbench
