#include "surrbench/sparse_grid.hpp"

#include "surrbench/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

namespace surrbench {

using nlohmann::json;

MultiIndexSet::MultiIndexSet(int dim, std::vector<MultiIndex> indices)
    : dim_(dim), indices_(std::move(indices)) {
    position_.reserve(indices_.size());
    for (std::size_t i = 0; i < indices_.size(); ++i) {
        const auto& idx = indices_[i];
        if (static_cast<int>(idx.size()) != dim_)
            throw std::invalid_argument("multi-index has wrong dimension");
        if (!position_.emplace(idx, static_cast<int>(i)).second)
            throw std::invalid_argument("duplicate multi-index");
    }
}

int MultiIndexSet::position(const MultiIndex& idx) const {
    auto it = position_.find(idx);
    if (it == position_.end()) throw std::out_of_range("multi-index not in set");
    return it->second;
}

bool MultiIndexSet::is_downward_closed() const {
    for (const auto& idx : indices_) {
        MultiIndex lower = idx;
        for (int j = 0; j < dim_; ++j) {
            if (idx[j] == 0) continue;
            lower[j] -= 1;
            if (!contains(lower)) return false;
            lower[j] += 1;
        }
    }
    return true;
}

int MultiIndexSet::max_entry() const {
    int m = 0;
    for (const auto& idx : indices_)
        for (int v : idx) m = std::max(m, v);
    return m;
}

MultiIndexSet build_index_set(double a, double b, double ell, int d) {
    if (d < 1) throw std::invalid_argument("dimension must be positive");
    if (!(ell > 0)) throw std::invalid_argument("ell must be positive");
    std::vector<double> weights(d);
    for (int j = 1; j <= d; ++j) {
        const double w = std::log(a + j * b);
        if (!(w > 0.0))
            throw std::invalid_argument("log(a + j*b) <= 0 at j=" + std::to_string(j) +
                                        "; the index set would be unbounded");
        weights[j - 1] = w;
    }

    std::vector<MultiIndex> indices;
    MultiIndex current(d, 0);
    std::function<void(int, double)> enumerate = [&](int j, double partial) {
        if (j == d) {
            indices.push_back(current);
            return;
        }
        for (int v = 0; partial + v * weights[j] < ell; ++v) {
            current[j] = v;
            enumerate(j + 1, partial + v * weights[j]);
        }
        current[j] = 0;
    };
    enumerate(0, 0.0);

    MultiIndexSet set(d, std::move(indices));
    set.a = a;
    set.b = b;
    set.ell = ell;
    set.has_generator = true;
    return set;
}

MultiIndexSet build_index_set_with_size(double a, double b, int d, int target_size) {
    if (target_size < 1) throw std::invalid_argument("target size must be positive");
    build_index_set(a, b, 1.0, d);  // weight validation; names the offending j
    double lo = 0.0, hi = std::max(1.0, std::log(a + b)) * 1.000001;
    for (int guard = 0; static_cast<int>(build_index_set(a, b, hi, d).size()) < target_size;
         ++guard) {
        hi *= 1.5;
        if (guard > 200) throw std::runtime_error("index set size search failed to bracket");
    }
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= 0.0) break;
        if (static_cast<int>(build_index_set(a, b, mid, d).size()) >= target_size)
            hi = mid;
        else
            lo = mid;
    }
    return build_index_set(a, b, hi, d);
}

namespace {

constexpr int kLejaCandidates = 100000;  // grid of kLejaCandidates+1 points
constexpr double kNodeSnap = 1e-14;

// Greedy objective prod_k |x - xi_k| with factors multiplied in ascending
// order, so symmetric candidates produce bitwise-equal values and ties are
// resolved by the scan order (leftmost wins).
double leja_objective(double x, const std::vector<double>& nodes, std::vector<double>& scratch) {
    scratch.clear();
    for (double node : nodes) scratch.push_back(std::abs(x - node));
    std::sort(scratch.begin(), scratch.end());
    double product = 1.0;
    for (double f : scratch) product *= f;
    return product;
}

void extend_leja(NodeFamily& family, int count) {
    auto& nodes = family.nodes;
    if (nodes.empty()) nodes.push_back(0.0);
    if (count >= 2 && nodes.size() < 2) nodes.push_back(1.0);
    if (count >= 3 && nodes.size() < 3) nodes.push_back(-1.0);

    std::vector<double> scratch;
    while (static_cast<int>(nodes.size()) < count) {
        double best_value = -1.0;
        double best_x = 0.0;
        for (int i = 0; i <= kLejaCandidates; ++i) {
            const double x = static_cast<double>(2 * i - kLejaCandidates) / kLejaCandidates;
            const double value = leja_objective(x, nodes, scratch);
            if (value > best_value) {
                best_value = value;
                best_x = x;
            }
        }
        nodes.push_back(best_x);
    }

    family.weights.resize(nodes.size());
    for (std::size_t level = 0; level < nodes.size(); ++level) {
        auto& w = family.weights[level];
        if (w.size() == level + 1) continue;  // already computed
        w.assign(level + 1, 1.0);
        for (std::size_t i = 0; i <= level; ++i)
            for (std::size_t k = 0; k <= level; ++k)
                if (k != i) w[i] /= (nodes[i] - nodes[k]);
    }
}

}  // namespace

NodeFamily leja_nodes(int count) {
    if (count < 1) throw std::invalid_argument("node count must be positive");
    static NodeFamily cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    if (static_cast<int>(cache.nodes.size()) < count) extend_leja(cache, count);
    NodeFamily out;
    out.nodes.assign(cache.nodes.begin(), cache.nodes.begin() + count);
    out.weights.assign(cache.weights.begin(), cache.weights.begin() + count);
    return out;
}

double interp_eval_1d(std::span<const double> nodes, std::span<const double> weights,
                      std::span<const double> values, double point) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double diff = point - nodes[i];
        if (diff == 0.0 || std::abs(diff) < kNodeSnap) return values[i];
        const double q = weights[i] / diff;
        num += q * values[i];
        den += q;
    }
    return num / den;
}

void basis_values_1d(std::span<const double> nodes, std::span<const double> weights, double point,
                     std::span<double> out) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double diff = point - nodes[i];
        if (diff == 0.0 || std::abs(diff) < kNodeSnap) {
            std::fill(out.begin(), out.end(), 0.0);
            out[i] = 1.0;
            return;
        }
    }
    double den = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        out[i] = weights[i] / (point - nodes[i]);
        den += out[i];
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) out[i] /= den;
}

void basis_derivatives_1d(std::span<const double> nodes, std::span<const double> weights,
                          double point, std::span<double> out) {
    const std::size_t n = nodes.size();
    for (std::size_t j = 0; j < n; ++j) {
        const double diff = point - nodes[j];
        if (diff == 0.0 || std::abs(diff) < kNodeSnap) {
            // differentiation-matrix row at node j
            double diag = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (i == j) continue;
                out[i] = (weights[i] / weights[j]) / (nodes[j] - nodes[i]);
                diag -= out[i];
            }
            out[j] = diag;
            return;
        }
    }
    // rational derivative of L_i = (w_i/(c-x_i)) / sum_k w_k/(c-x_k)
    double den = 0.0, dden = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double inv = 1.0 / (point - nodes[i]);
        const double q = weights[i] * inv;
        den += q;
        dden -= q * inv;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double inv = 1.0 / (point - nodes[i]);
        const double q = weights[i] * inv;
        const double dq = -q * inv;
        out[i] = (dq * den - q * dden) / (den * den);
    }
}

std::vector<double> smolyak_coefficients(const MultiIndexSet& set) {
    const int d = set.dim();
    std::vector<double> zeta(set.size(), 0.0);
    MultiIndex cursor;
    for (std::size_t slot = 0; slot < set.size(); ++slot) {
        cursor = set[slot];
        double total = 0.0;
        // DFS over e in {0,1}^d with nu+e required to stay inside the set;
        // downward closure makes the prefix check sufficient for pruning.
        std::function<void(int, int)> visit = [&](int j, int parity) {
            if (j == d) {
                total += parity;
                return;
            }
            visit(j + 1, parity);
            cursor[j] += 1;
            if (set.contains(cursor)) visit(j + 1, -parity);
            cursor[j] -= 1;
        };
        visit(0, 1);
        zeta[slot] = total;
    }
    return zeta;
}

double lebesgue_estimate(std::span<const double> nodes) {
    std::vector<double> weights(nodes.size(), 1.0);
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (std::size_t k = 0; k < nodes.size(); ++k)
            if (k != i) weights[i] /= (nodes[i] - nodes[k]);
    std::vector<double> basis(nodes.size());
    constexpr int kScan = 10000;
    double worst = 0.0;
    for (int i = 0; i <= kScan; ++i) {
        const double c = -1.0 + 2.0 * static_cast<double>(i) / kScan;
        basis_values_1d(nodes, weights, c, basis);
        double sum = 0.0;
        for (double v : basis) sum += std::abs(v);
        worst = std::max(worst, sum);
    }
    return worst;
}

double lebesgue_estimate(const NodeFamily& family, int level) {
    if (level < 0 || level >= family.levels()) throw std::invalid_argument("level out of range");
    return lebesgue_estimate(
        std::span<const double>(family.nodes.data(), static_cast<std::size_t>(level + 1)));
}

void SparseGridSurrogate::finalize() {
    max_level_ = set_.max_entry();
    if (nodes_.levels() < max_level_ + 1)
        throw std::invalid_argument("node family too short for the index set");

    const auto zeta = smolyak_coefficients(set_);
    active_.clear();
    levels_used_.assign(max_level_ + 1, false);
    const int d = set_.dim();
    for (std::size_t slot = 0; slot < set_.size(); ++slot) {
        if (zeta[slot] == 0.0) continue;
        ActiveTerm term;
        term.nu = set_[slot];
        term.zeta = zeta[slot];
        // tensor box {0..nu_1} x ... in lexicographic order
        MultiIndex j(d, 0);
        bool done = false;
        while (!done) {
            term.box_rows.push_back(set_.position(j));
            int k = d - 1;
            while (k >= 0) {
                if (j[k] < term.nu[k]) {
                    ++j[k];
                    std::fill(j.begin() + k + 1, j.end(), 0);
                    break;
                }
                --k;
            }
            if (k < 0) done = true;
        }
        for (int v : term.nu) levels_used_[v] = true;
        active_.push_back(std::move(term));
    }
}

namespace {

// per-dimension cardinal basis rows for every level appearing in the set
struct BasisTable {
    std::vector<std::vector<std::vector<double>>> values;  // [dim][level][i]

    BasisTable(const Eigen::VectorXd& c, const NodeFamily& nodes, int max_level,
               const std::vector<bool>& level_used, bool derivatives) {
        const int d = static_cast<int>(c.size());
        values.resize(d);
        for (int k = 0; k < d; ++k) {
            values[k].resize(max_level + 1);
            for (int level = 0; level <= max_level; ++level) {
                if (!level_used[level]) continue;
                auto& row = values[k][level];
                row.resize(level + 1);
                const std::span<const double> nds(nodes.nodes.data(),
                                                  static_cast<std::size_t>(level + 1));
                const std::span<const double> wts(nodes.weights[level].data(),
                                                  static_cast<std::size_t>(level + 1));
                if (derivatives)
                    basis_derivatives_1d(nds, wts, c[k], row);
                else
                    basis_values_1d(nds, wts, c[k], row);
            }
        }
    }
};

}  // namespace

Eigen::VectorXd SparseGridSurrogate::eval(const Eigen::VectorXd& c) const {
    if (c.size() != d_in()) throw std::invalid_argument("sg_eval: point has wrong dimension");
    const BasisTable table(c, nodes_, max_level_, levels_used_, false);

    const int d = d_in();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d_out_);
    MultiIndex j(d, 0);
    std::vector<double> prefix(d + 1, 1.0);
    for (const auto& term : active_) {
        std::fill(j.begin(), j.end(), 0);
        int restart = 0;
        for (std::size_t pos = 0; pos < term.box_rows.size(); ++pos) {
            for (int k = restart; k < d; ++k)
                prefix[k + 1] = prefix[k] * table.values[k][term.nu[k]][j[k]];
            out.noalias() += (term.zeta * prefix[d]) * values_.row(term.box_rows[pos]).transpose();
            int k = d - 1;
            while (k >= 0) {
                if (j[k] < term.nu[k]) {
                    ++j[k];
                    std::fill(j.begin() + k + 1, j.end(), 0);
                    break;
                }
                --k;
            }
            restart = std::max(k, 0);
        }
    }
    return out;
}

Eigen::MatrixXd SparseGridSurrogate::eval_batch(const Eigen::MatrixXd& points) const {
    Eigen::MatrixXd out(points.rows(), d_out_);
    for (Eigen::Index r = 0; r < points.rows(); ++r)
        out.row(r) = eval(points.row(r).transpose()).transpose();
    return out;
}

Eigen::MatrixXd SparseGridSurrogate::jacobian(const Eigen::VectorXd& c) const {
    if (c.size() != d_in()) throw std::invalid_argument("sg_jacobian: point has wrong dimension");
    const BasisTable table(c, nodes_, max_level_, levels_used_, false);
    const BasisTable dtable(c, nodes_, max_level_, levels_used_, true);

    const int d = d_in();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(d_out_, d);
    MultiIndex j(d, 0);
    std::vector<double> prefix(d + 1, 1.0), suffix(d + 1, 1.0);
    for (const auto& term : active_) {
        std::fill(j.begin(), j.end(), 0);
        for (std::size_t pos = 0; pos < term.box_rows.size(); ++pos) {
            for (int k = 0; k < d; ++k)
                prefix[k + 1] = prefix[k] * table.values[k][term.nu[k]][j[k]];
            suffix[d] = 1.0;
            for (int k = d - 1; k >= 0; --k)
                suffix[k] = suffix[k + 1] * table.values[k][term.nu[k]][j[k]];
            const auto row = values_.row(term.box_rows[pos]);
            for (int m = 0; m < d; ++m) {
                const double factor = term.zeta * prefix[m] * suffix[m + 1] *
                                      dtable.values[m][term.nu[m]][j[m]];
                if (factor != 0.0) jac.col(m).noalias() += factor * row.transpose();
            }
            int k = d - 1;
            while (k >= 0) {
                if (j[k] < term.nu[k]) {
                    ++j[k];
                    std::fill(j.begin() + k + 1, j.end(), 0);
                    break;
                }
                --k;
            }
        }
    }
    return jac;
}

SparseGridSurrogate build_sg_surrogate(const VectorProbe& probe, const MultiIndexSet& set,
                                       const NodeFamily& nodes) {
    if (!set.is_downward_closed())
        throw std::invalid_argument("index set must be downward closed");
    if (nodes.levels() < set.max_entry() + 1)
        throw std::invalid_argument("node family too short for the index set");

    SparseGridSurrogate s;
    s.set_ = set;
    s.nodes_ = nodes;

    // nested nodes: unique grid points are exactly the set members
    const int d = set.dim();
    const std::size_t n = set.size();
    Eigen::VectorXd point(d);
    for (std::size_t row = 0; row < n; ++row) {
        for (int k = 0; k < d; ++k) point[k] = nodes.nodes.at(set[row][k]);
        Eigen::VectorXd value = probe(point);
        if (row == 0) {
            s.d_out_ = static_cast<int>(value.size());
            s.values_.resize(static_cast<Eigen::Index>(n), s.d_out_);
        } else if (value.size() != s.d_out_) {
            throw std::runtime_error("probe returned inconsistent output dimension");
        }
        s.values_.row(static_cast<Eigen::Index>(row)) = value.transpose();
    }
    s.finalize();
    return s;
}

void SparseGridSurrogate::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    json manifest;
    manifest["kind"] = "sparse_grid";
    manifest["d_in"] = d_in();
    manifest["d_out"] = d_out_;
    manifest["indices"] = set_.indices();
    if (set_.has_generator) {
        manifest["a"] = set_.a;
        manifest["b"] = set_.b;
        manifest["ell"] = set_.ell;
    }
    manifest["node_count"] = nodes_.levels();
    manifest["nodes"] = nodes_.nodes;
    manifest["values_layout"] = "row-major points x d_out float64 LE";
    io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    io::write_matrix_rowmajor(dir / "values.bin", values_);
}

SparseGridSurrogate SparseGridSurrogate::load(const std::filesystem::path& dir) {
    const json manifest = json::parse(io::read_text(dir / "manifest.json"));
    SparseGridSurrogate s;
    const int d_in = manifest.at("d_in").get<int>();
    s.d_out_ = manifest.at("d_out").get<int>();
    auto indices = manifest.at("indices").get<std::vector<MultiIndex>>();
    s.set_ = MultiIndexSet(d_in, std::move(indices));
    if (manifest.contains("a")) {
        s.set_.a = manifest["a"].get<double>();
        s.set_.b = manifest["b"].get<double>();
        s.set_.ell = manifest["ell"].get<double>();
        s.set_.has_generator = true;
    }
    s.nodes_ = leja_nodes(manifest.at("node_count").get<int>());
    const auto stored_nodes = manifest.at("nodes").get<std::vector<double>>();
    if (stored_nodes != s.nodes_.nodes)
        throw std::runtime_error("stored node family does not match the Leja sequence");
    s.values_ = io::read_matrix_rowmajor(dir / "values.bin",
                                         static_cast<Eigen::Index>(s.set_.size()), s.d_out_);
    s.finalize();
    return s;
}

}  // namespace surrbench
