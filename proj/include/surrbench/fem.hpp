#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>
#include <vector>

namespace surrbench {

using ScalarField = Eigen::VectorXd;  // nodal coefficients of a Q1 function
using SparseMat = Eigen::SparseMatrix<double>;

// Uniform Q1 grid on the unit square. Nodes are ordered row-major:
// node(ix, iy) = iy * (n_cells + 1) + ix, with coordinates (ix*h, iy*h),
// h = 1 / n_cells.
struct Grid2D {
    int n_cells = 32;

    Grid2D() = default;
    explicit Grid2D(int n) : n_cells(n) {}
    int nodes_per_side() const { return n_cells + 1; }
    int dof_count() const { return nodes_per_side() * nodes_per_side(); }
    int node_index(int ix, int iy) const { return iy * nodes_per_side() + ix; }
    double coord(int i) const { return static_cast<double>(i) / n_cells; }
    int center_node() const { return node_index(n_cells / 2, n_cells / 2); }
    bool on_boundary(int ix, int iy) const {
        return ix == 0 || iy == 0 || ix == n_cells || iy == n_cells;
    }
};

// Assembled Q1 operators: L2 Gram (mass), unit-coefficient stiffness, and the
// H1 Gram = mass + stiffness. dirichlet_dofs lists all boundary nodes.
struct FemOperators {
    Grid2D grid;
    SparseMat mass;
    SparseMat stiffness_unit;
    SparseMat h1_gram;
    std::vector<int> dirichlet_dofs;
    std::vector<int> interior_dofs;
    std::vector<int> interior_of_full;  // full index -> interior index, -1 on boundary
};

FemOperators assemble_fem(const Grid2D& grid);

// One diffusion problem -div(exp(x) grad y) = 1, y = 0 on the boundary, for a
// fixed log-coefficient field x. The interior Cholesky factorization is
// computed once and shared by the forward solve and all tangent solves.
// FemOperators are immutable after assembly; distinct DiffusionSystem
// instances may solve concurrently, one instance is not reentrant.
class DiffusionSystem {
public:
    DiffusionSystem(const FemOperators& ops, const ScalarField& x);

    // Nodal solution with exact zeros on boundary dofs. Cached after the
    // first call.
    const ScalarField& solve_forward();

    // Directional derivative of the solution map: z solves
    // -div(exp(x) grad z) = div(h exp(x) grad y), z = 0 on the boundary.
    ScalarField solve_tangent(const ScalarField& h);

    const SparseMat& system_matrix() const { return full_matrix_; }

private:
    ScalarField restrict_interior(const ScalarField& full) const;
    ScalarField extend_with_zeros(const ScalarField& interior) const;

    const FemOperators& ops_;
    SparseMat full_matrix_;      // A(x) over all dofs, used for residuals/rhs
    SparseMat interior_matrix_;  // symmetric reduction to interior dofs
    Eigen::SimplicialLDLT<SparseMat> factorization_;
    Eigen::MatrixXd coeff_at_qp_;  // exp(x) per (cell, quadrature point)
    ScalarField forward_;
    bool have_forward_ = false;
};

ScalarField solve_diffusion(const FemOperators& ops, const ScalarField& x);
ScalarField solve_tangent(const FemOperators& ops, const ScalarField& x, const ScalarField& y,
                          const ScalarField& h);

// Mass-orthonormal eigenfunctions of the Matern-type covariance
// (gamma*Id - delta*Laplace)^{-2} with natural boundary conditions, largest
// eigenvalues first. Realized through the pencil (gamma*M + delta*K, M).
struct EigenPair {
    double eigenvalue;  // mu_j of the covariance operator
    ScalarField field;
};

std::vector<EigenPair> matern_eigenbasis(const FemOperators& ops, double gamma, double delta,
                                         int count);

// Columns are the first `count` eigenfunctions; convenience for dense use.
Eigen::MatrixXd eigenbasis_matrix(const std::vector<EigenPair>& basis);

}  // namespace surrbench
