#include "surrbench/fem.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace surrbench {

namespace {

// 2x2 Gauss rule on the reference square [0,1]^2; exact for the Q1 mass and
// stiffness integrands.
struct QuadRule {
    static constexpr int n_points = 4;
    double pts[n_points][2];
    double weight;  // per point, on the reference square

    QuadRule() {
        const double lo = 0.5 - 0.5 / std::sqrt(3.0);
        const double hi = 0.5 + 0.5 / std::sqrt(3.0);
        const double coords[2] = {lo, hi};
        int q = 0;
        for (double v : coords)
            for (double u : coords) {
                pts[q][0] = u;
                pts[q][1] = v;
                ++q;
            }
        weight = 0.25;
    }
};

// Q1 shape functions on [0,1]^2, local node order (0,0),(1,0),(0,1),(1,1).
inline void shape_values(double u, double v, double phi[4]) {
    phi[0] = (1 - u) * (1 - v);
    phi[1] = u * (1 - v);
    phi[2] = (1 - u) * v;
    phi[3] = u * v;
}

inline void shape_gradients(double u, double v, double du[4], double dv[4]) {
    du[0] = -(1 - v);
    du[1] = (1 - v);
    du[2] = -v;
    du[3] = v;
    dv[0] = -(1 - u);
    dv[1] = -u;
    dv[2] = (1 - u);
    dv[3] = u;
}

struct ShapeTables {
    // per quadrature point: values and physical-space gradients / h
    double phi[QuadRule::n_points][4];
    double gx[QuadRule::n_points][4];  // d/dx * h (dimensionless)
    double gy[QuadRule::n_points][4];

    explicit ShapeTables(const QuadRule& rule) {
        for (int q = 0; q < QuadRule::n_points; ++q) {
            shape_values(rule.pts[q][0], rule.pts[q][1], phi[q]);
            shape_gradients(rule.pts[q][0], rule.pts[q][1], gx[q], gy[q]);
        }
    }
};

const QuadRule& quad_rule() {
    static const QuadRule rule;
    return rule;
}

const ShapeTables& shape_tables() {
    static const ShapeTables tables(quad_rule());
    return tables;
}

void cell_nodes(const Grid2D& grid, int cx, int cy, int nodes[4]) {
    nodes[0] = grid.node_index(cx, cy);
    nodes[1] = grid.node_index(cx + 1, cy);
    nodes[2] = grid.node_index(cx, cy + 1);
    nodes[3] = grid.node_index(cx + 1, cy + 1);
}

void check_symmetric(const SparseMat& m, const char* name) {
    SparseMat diff = SparseMat(m.transpose()) - m;
    double scale = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseMat::InnerIterator it(m, k); it; ++it)
            scale = std::max(scale, std::abs(it.value()));
    for (int k = 0; k < diff.outerSize(); ++k)
        for (SparseMat::InnerIterator it(diff, k); it; ++it)
            if (std::abs(it.value()) > 1e-12 * scale)
                throw std::runtime_error(std::string("assembled matrix not symmetric: ") + name);
}

}  // namespace

FemOperators assemble_fem(const Grid2D& grid) {
    if (grid.n_cells < 2) throw std::invalid_argument("grid needs at least 2 cells per side");

    const int n = grid.n_cells;
    const double h = 1.0 / n;
    const auto& rule = quad_rule();
    const auto& tables = shape_tables();

    std::vector<Eigen::Triplet<double>> mass_entries, stiff_entries;
    mass_entries.reserve(static_cast<std::size_t>(n) * n * 16);
    stiff_entries.reserve(static_cast<std::size_t>(n) * n * 16);

    for (int cy = 0; cy < n; ++cy) {
        for (int cx = 0; cx < n; ++cx) {
            int nodes[4];
            cell_nodes(grid, cx, cy, nodes);
            for (int q = 0; q < QuadRule::n_points; ++q) {
                const double wm = rule.weight * h * h;  // mass: w * |J|
                const double ws = rule.weight;           // stiffness: w * |J| / h^2
                for (int i = 0; i < 4; ++i) {
                    for (int j = 0; j < 4; ++j) {
                        mass_entries.emplace_back(nodes[i], nodes[j],
                                                  wm * tables.phi[q][i] * tables.phi[q][j]);
                        stiff_entries.emplace_back(
                            nodes[i], nodes[j],
                            ws * (tables.gx[q][i] * tables.gx[q][j] +
                                  tables.gy[q][i] * tables.gy[q][j]));
                    }
                }
            }
        }
    }

    FemOperators ops{grid, {}, {}, {}, {}, {}, {}};
    const int dofs = grid.dof_count();
    ops.mass.resize(dofs, dofs);
    ops.mass.setFromTriplets(mass_entries.begin(), mass_entries.end());
    ops.stiffness_unit.resize(dofs, dofs);
    ops.stiffness_unit.setFromTriplets(stiff_entries.begin(), stiff_entries.end());
    ops.h1_gram = ops.mass + ops.stiffness_unit;

    check_symmetric(ops.mass, "mass");
    check_symmetric(ops.h1_gram, "h1_gram");

    ops.interior_of_full.assign(dofs, -1);
    for (int iy = 0; iy <= n; ++iy) {
        for (int ix = 0; ix <= n; ++ix) {
            const int idx = grid.node_index(ix, iy);
            if (grid.on_boundary(ix, iy)) {
                ops.dirichlet_dofs.push_back(idx);
            } else {
                ops.interior_of_full[idx] = static_cast<int>(ops.interior_dofs.size());
                ops.interior_dofs.push_back(idx);
            }
        }
    }
    return ops;
}

DiffusionSystem::DiffusionSystem(const FemOperators& ops, const ScalarField& x) : ops_(ops) {
    if (x.size() != ops.grid.dof_count())
        throw std::invalid_argument("coefficient field has wrong length");
    if (!x.allFinite()) throw std::invalid_argument("coefficient field has non-finite entries");

    const Grid2D& grid = ops.grid;
    const int n = grid.n_cells;
    const auto& rule = quad_rule();
    const auto& tables = shape_tables();

    coeff_at_qp_.resize(n * n, QuadRule::n_points);
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(n) * n * 16);

    for (int cy = 0; cy < n; ++cy) {
        for (int cx = 0; cx < n; ++cx) {
            int nodes[4];
            cell_nodes(grid, cx, cy, nodes);
            const int cell = cy * n + cx;
            for (int q = 0; q < QuadRule::n_points; ++q) {
                double xq = 0.0;
                for (int i = 0; i < 4; ++i) xq += tables.phi[q][i] * x[nodes[i]];
                const double aq = std::exp(xq);
                coeff_at_qp_(cell, q) = aq;
                const double w = rule.weight * aq;  // |J|/h^2 = 1
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j)
                        entries.emplace_back(nodes[i], nodes[j],
                                             w * (tables.gx[q][i] * tables.gx[q][j] +
                                                  tables.gy[q][i] * tables.gy[q][j]));
            }
        }
    }

    const int dofs = grid.dof_count();
    full_matrix_.resize(dofs, dofs);
    full_matrix_.setFromTriplets(entries.begin(), entries.end());

    // symmetric reduction to the interior block
    const auto& interior = ops.interior_dofs;
    std::vector<Eigen::Triplet<double>> reduced;
    reduced.reserve(entries.size());
    for (int k = 0; k < full_matrix_.outerSize(); ++k) {
        for (SparseMat::InnerIterator it(full_matrix_, k); it; ++it) {
            const int ri = ops.interior_of_full[it.row()];
            const int rj = ops.interior_of_full[it.col()];
            if (ri >= 0 && rj >= 0) reduced.emplace_back(ri, rj, it.value());
        }
    }
    interior_matrix_.resize(static_cast<int>(interior.size()), static_cast<int>(interior.size()));
    interior_matrix_.setFromTriplets(reduced.begin(), reduced.end());

    factorization_.compute(interior_matrix_);
    if (factorization_.info() != Eigen::Success)
        throw std::runtime_error("diffusion system factorization failed (singular matrix?)");
}

ScalarField DiffusionSystem::restrict_interior(const ScalarField& full) const {
    ScalarField out(static_cast<Eigen::Index>(ops_.interior_dofs.size()));
    for (std::size_t i = 0; i < ops_.interior_dofs.size(); ++i)
        out[static_cast<Eigen::Index>(i)] = full[ops_.interior_dofs[i]];
    return out;
}

ScalarField DiffusionSystem::extend_with_zeros(const ScalarField& interior) const {
    ScalarField out = ScalarField::Zero(ops_.grid.dof_count());
    for (std::size_t i = 0; i < ops_.interior_dofs.size(); ++i)
        out[ops_.interior_dofs[i]] = interior[static_cast<Eigen::Index>(i)];
    return out;
}

const ScalarField& DiffusionSystem::solve_forward() {
    if (have_forward_) return forward_;

    // rhs for f = 1: integral of each basis function
    ScalarField b_full = ops_.mass * ScalarField::Ones(ops_.grid.dof_count());
    ScalarField b = restrict_interior(b_full);
    ScalarField y_int = factorization_.solve(b);
    if (factorization_.info() != Eigen::Success)
        throw std::runtime_error("diffusion forward solve failed");

    const double residual = (interior_matrix_ * y_int - b).norm() / b.norm();
    if (!(residual < 1e-10))
        throw std::runtime_error("diffusion forward solve residual too large: " +
                                 std::to_string(residual));

    forward_ = extend_with_zeros(y_int);
    have_forward_ = true;
    return forward_;
}

ScalarField DiffusionSystem::solve_tangent(const ScalarField& h) {
    if (h.size() != ops_.grid.dof_count())
        throw std::invalid_argument("direction field has wrong length");
    const ScalarField& y = solve_forward();

    const Grid2D& grid = ops_.grid;
    const int n = grid.n_cells;
    const auto& rule = quad_rule();
    const auto& tables = shape_tables();

    // weak form: int exp(x) grad z . grad phi = -int h exp(x) grad y . grad phi
    ScalarField rhs = ScalarField::Zero(grid.dof_count());
    for (int cy = 0; cy < n; ++cy) {
        for (int cx = 0; cx < n; ++cx) {
            int nodes[4];
            cell_nodes(grid, cx, cy, nodes);
            const int cell = cy * n + cx;
            for (int q = 0; q < QuadRule::n_points; ++q) {
                double hq = 0.0, yx = 0.0, yy = 0.0;
                for (int i = 0; i < 4; ++i) {
                    hq += tables.phi[q][i] * h[nodes[i]];
                    yx += tables.gx[q][i] * y[nodes[i]];
                    yy += tables.gy[q][i] * y[nodes[i]];
                }
                const double w = -rule.weight * coeff_at_qp_(cell, q) * hq;
                for (int i = 0; i < 4; ++i)
                    rhs[nodes[i]] += w * (tables.gx[q][i] * yx + tables.gy[q][i] * yy);
            }
        }
    }

    ScalarField b = restrict_interior(rhs);
    ScalarField z_int = factorization_.solve(b);
    if (factorization_.info() != Eigen::Success)
        throw std::runtime_error("diffusion tangent solve failed");
    const double bnorm = b.norm();
    if (bnorm > 0.0) {
        const double residual = (interior_matrix_ * z_int - b).norm() / bnorm;
        if (!(residual < 1e-10))
            throw std::runtime_error("diffusion tangent solve residual too large: " +
                                     std::to_string(residual));
    }
    return extend_with_zeros(z_int);
}

ScalarField solve_diffusion(const FemOperators& ops, const ScalarField& x) {
    DiffusionSystem system(ops, x);
    return system.solve_forward();
}

ScalarField solve_tangent(const FemOperators& ops, const ScalarField& x, const ScalarField& y,
                          const ScalarField& h) {
    DiffusionSystem system(ops, x);
    const ScalarField& y_check = system.solve_forward();
    if ((y_check - y).norm() > 1e-8 * std::max(1.0, y.norm()))
        throw std::invalid_argument("provided y is not the forward solution for x");
    return system.solve_tangent(h);
}

std::vector<EigenPair> matern_eigenbasis(const FemOperators& ops, double gamma, double delta,
                                         int count) {
    if (gamma <= 0.0 || delta <= 0.0)
        throw std::invalid_argument("matern_eigenbasis requires gamma > 0 and delta > 0");
    const int dofs = ops.grid.dof_count();
    if (count < 1 || count > dofs)
        throw std::invalid_argument("matern_eigenbasis count out of range");

    Eigen::MatrixXd a = Eigen::MatrixXd(gamma * ops.mass + delta * ops.stiffness_unit);
    Eigen::MatrixXd m = Eigen::MatrixXd(ops.mass);

    // pencil A v = sigma M v; the covariance eigenvalues are mu = sigma^{-2},
    // so the smallest sigma come first.
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, m);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("matern eigenproblem did not converge");

    std::vector<EigenPair> basis;
    basis.reserve(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
        const double sigma = solver.eigenvalues()[j];
        if (!(sigma > 0.0)) throw std::runtime_error("matern pencil produced a non-positive eigenvalue");
        ScalarField v = solver.eigenvectors().col(j);
        // deterministic sign: largest-magnitude entry positive
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0.0) v = -v;
        basis.push_back({1.0 / (sigma * sigma), std::move(v)});
    }
    return basis;
}

Eigen::MatrixXd eigenbasis_matrix(const std::vector<EigenPair>& basis) {
    if (basis.empty()) return {};
    Eigen::MatrixXd m(basis.front().field.size(), static_cast<Eigen::Index>(basis.size()));
    for (std::size_t j = 0; j < basis.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = basis[j].field;
    return m;
}

}  // namespace surrbench
