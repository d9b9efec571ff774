#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace surrbench {

using MultiIndex = std::vector<int>;

struct MultiIndexHash {
    std::size_t operator()(const MultiIndex& idx) const {
        std::size_t h = 0xcbf29ce484222325ULL;
        for (int v : idx) {
            h ^= static_cast<std::size_t>(v) + 0x9e3779b9;
            h *= 0x100000001b3ULL;
        }
        return h;
    }
};

// Downward-closed multi-index set. `position` maps a member to its slot in
// `indices`; the slot order is the enumeration order and is stable.
class MultiIndexSet {
public:
    MultiIndexSet() = default;
    MultiIndexSet(int dim, std::vector<MultiIndex> indices);

    int dim() const { return dim_; }
    std::size_t size() const { return indices_.size(); }
    const std::vector<MultiIndex>& indices() const { return indices_; }
    const MultiIndex& operator[](std::size_t i) const { return indices_[i]; }
    bool contains(const MultiIndex& idx) const { return position_.count(idx) > 0; }
    int position(const MultiIndex& idx) const;
    bool is_downward_closed() const;
    int max_entry() const;

    // generator parameters when built from the log-weight rule
    double a = 0.0, b = 0.0, ell = 0.0;
    bool has_generator = false;

private:
    int dim_ = 0;
    std::vector<MultiIndex> indices_;
    std::unordered_map<MultiIndex, int, MultiIndexHash> position_;
};

// All nu with sum_j log(a + j*b) * nu_j < ell (j = 1..d). Throws if some
// weight log(a + j*b) is non-positive, which would make the set infinite.
MultiIndexSet build_index_set(double a, double b, double ell, int d);

// Smallest ell such that |Lambda_{a,b,ell}| >= target, together with the set.
MultiIndexSet build_index_set_with_size(double a, double b, int d, int target_size);

// Nested 1-D interpolation nodes on [-1,1] with per-level barycentric
// weights; level l uses nodes[0..l].
struct NodeFamily {
    std::vector<double> nodes;
    std::vector<std::vector<double>> weights;  // weights[l], length l+1

    int levels() const { return static_cast<int>(nodes.size()); }
};

// Greedy Leja sequence started from 0, 1, -1, argmax over a uniform grid of
// 1e5+1 candidates, ties broken by the leftmost candidate.
NodeFamily leja_nodes(int count);

// Barycentric interpolation on nodes[0..l] given values at those nodes.
double interp_eval_1d(std::span<const double> nodes, std::span<const double> weights,
                      std::span<const double> values, double point);

// Cardinal basis values L_i(point) resp. their derivatives, i = 0..l.
void basis_values_1d(std::span<const double> nodes, std::span<const double> weights, double point,
                     std::span<double> out);
void basis_derivatives_1d(std::span<const double> nodes, std::span<const double> weights,
                          double point, std::span<double> out);

// Combination coefficients zeta_nu aligned with set.indices(); exact signed
// counts, zeros included.
std::vector<double> smolyak_coefficients(const MultiIndexSet& set);

// Lower bound of the Lebesgue constant on [-1,1] from a 1e4-point scan.
double lebesgue_estimate(std::span<const double> nodes);
double lebesgue_estimate(const NodeFamily& family, int level);

using VectorProbe = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Smolyak interpolant of a vector-valued map, all output components sharing
// one index set. Grid values are stored densely (points x d_out).
class SparseGridSurrogate {
public:
    SparseGridSurrogate() = default;

    int d_in() const { return set_.dim(); }
    int d_out() const { return d_out_; }
    std::size_t probe_count() const { return set_.size(); }
    const MultiIndexSet& index_set() const { return set_; }
    const Eigen::MatrixXd& grid_values() const { return values_; }
    const NodeFamily& nodes() const { return nodes_; }
    std::int64_t parameter_count() const { return static_cast<std::int64_t>(values_.size()); }

    Eigen::VectorXd eval(const Eigen::VectorXd& c) const;
    Eigen::MatrixXd eval_batch(const Eigen::MatrixXd& points) const;  // rows = samples
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& c) const;

    void save(const std::filesystem::path& dir) const;
    static SparseGridSurrogate load(const std::filesystem::path& dir);

    friend SparseGridSurrogate build_sg_surrogate(const VectorProbe& probe,
                                                  const MultiIndexSet& set,
                                                  const NodeFamily& nodes);

private:
    struct ActiveTerm {
        MultiIndex nu;
        double zeta;
        std::vector<int> box_rows;  // value rows of the tensor grid of nu, lex order
    };

    void finalize();  // builds active terms from set_/values_

    MultiIndexSet set_;
    Eigen::MatrixXd values_;
    NodeFamily nodes_;
    int d_out_ = 0;
    std::vector<ActiveTerm> active_;
    std::vector<bool> levels_used_;  // shared by all per-point basis tables
    int max_level_ = 0;
};

// Evaluates the probe once per unique grid point; for nested nodes and a
// downward-closed set the points are in bijection with the set members.
SparseGridSurrogate build_sg_surrogate(const VectorProbe& probe, const MultiIndexSet& set,
                                       const NodeFamily& nodes);

}  // namespace surrbench
