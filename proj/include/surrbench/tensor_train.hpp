#pragma once

#include "surrbench/sparse_grid.hpp"  // NodeFamily, barycentric kernels

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

namespace surrbench {

// One TT core of shape r_left x mode x r_right, stored as mode slices.
struct TtCore {
    std::vector<Eigen::MatrixXd> slices;

    int r_left() const { return slices.empty() ? 0 : static_cast<int>(slices.front().rows()); }
    int mode() const { return static_cast<int>(slices.size()); }
    int r_right() const { return slices.empty() ? 0 : static_cast<int>(slices.front().cols()); }
    std::int64_t entry_count() const {
        return static_cast<std::int64_t>(r_left()) * mode() * r_right();
    }
};

// Chain of cores with boundary ranks 1. For vector-valued use, core 0 carries
// the output dimension and is contracted without interpolation.
struct TensorTrain {
    std::vector<TtCore> cores;

    std::vector<int> ranks() const;       // r_0 .. r_{K-2} (interface ranks)
    std::vector<int> mode_sizes() const;  // per-core mode sizes
    std::int64_t entry_count() const;
};

// Contract every core with one factor vector (factor k has length mode_k).
double tt_contract_full(const TensorTrain& tt, const std::vector<Eigen::VectorXd>& factors);

// Vector-valued evaluation: factors cover cores 1..K-1, core 0 is the output
// core; returns a vector of length mode_0.
Eigen::VectorXd tt_eval(const TensorTrain& tt, const std::vector<Eigen::VectorXd>& factors);

// Entry of the represented tensor at a full multi-index (one index per core).
double tt_entry(const TensorTrain& tt, const std::vector<int>& index);
// All output components at a parametric multi-index (cores 1..K-1).
Eigen::VectorXd tt_entry_vector(const TensorTrain& tt, const std::vector<int>& index);

double tt_norm(const TensorTrain& tt);  // Frobenius norm of the full tensor

// SVD rounding: right-to-left orthogonalization, then left-to-right truncation
// with per-interface threshold rel_tol/sqrt(K-1)*norm. The result satisfies
// |T - round(T)|_F <= rel_tol * |T|_F.
TensorTrain tt_round(const TensorTrain& tt, double rel_tol);

// Per-dimension polynomial degrees for the collocation tensor.
struct DegreeSchedule {
    std::vector<int> nu;
    bool anisotropic = false;
    int nu_max = 0;

    int dims() const { return static_cast<int>(nu.size()); }
    std::vector<int> mode_sizes() const {
        std::vector<int> m(nu.size());
        for (std::size_t k = 0; k < nu.size(); ++k) m[k] = nu[k] + 1;
        return m;
    }
};

// isotropic: nu_k = nu_max. anisotropic: nu_k = ceil(nu_max/log2(k+1)) - 1
// with the dimension capped at the last k where nu_k > 0.
DegreeSchedule degree_schedule(int nu_max, bool anisotropic, int d);

// Black-box cross interpolation of the vector-valued collocation tensor.
// The probe maps a parametric grid multi-index (j_1..j_d) to all d_out output
// components at once; probes are cached, and n counts unique parametric
// points only.
using IndexProbe = std::function<Eigen::VectorXd(const std::vector<int>&)>;

struct TtCrossOptions {
    int rank_cap = 4;
    int sweeps = 2;
    int start_rank = 0;           // 0: start at rank_cap (fixed-rank init)
    bool adapt_ranks = false;     // grow ranks +1 per sweep while improving
    double maxvol_tol = 1e-2;     // pivot acceptance threshold
    double fit_tol = 1e-12;       // early exit when the cross samples are met
    double change_tol = 1e-8;     // inter-sweep relative change for convergence
    int check_points = 64;        // change-detector index count (no probes)
    std::uint64_t seed = 0x5eedULL;
};

struct TtCrossResult {
    TensorTrain tt;
    long probe_count = 0;  // unique parametric points evaluated
    bool converged = false;
    int sweeps_done = 0;
    std::vector<std::vector<int>> final_left_set;  // parametric prefixes of I_{d-1}
};

TtCrossResult tt_cross(const IndexProbe& probe, int d_out, const std::vector<int>& mode_sizes,
                       const TtCrossOptions& options);

// maxvol row selection on a tall matrix (returns r row indices).
std::vector<int> maxvol(const Eigen::MatrixXd& a, double tol = 1e-2);

// TT collocation surrogate: cross-built cores plus the nested node prefixes
// used per dimension.
class TensorTrainSurrogate {
public:
    TensorTrainSurrogate() = default;
    TensorTrainSurrogate(TensorTrain tt, DegreeSchedule schedule, NodeFamily nodes);

    int d_in() const { return schedule_.dims(); }
    int d_out() const { return tt_.cores.empty() ? 0 : tt_.cores.front().mode(); }
    const TensorTrain& tt() const { return tt_; }
    const DegreeSchedule& schedule() const { return schedule_; }
    std::int64_t parameter_count() const { return tt_.entry_count(); }
    long probe_count() const { return probe_count_; }
    bool converged() const { return converged_; }

    Eigen::VectorXd eval(const Eigen::VectorXd& c) const;
    Eigen::MatrixXd eval_batch(const Eigen::MatrixXd& points) const;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& c) const;

    void save(const std::filesystem::path& dir) const;
    static TensorTrainSurrogate load(const std::filesystem::path& dir);

    friend TensorTrainSurrogate build_tt_surrogate(const VectorProbe& probe, int d_out,
                                                   const DegreeSchedule& schedule,
                                                   const NodeFamily& nodes,
                                                   const TtCrossOptions& options,
                                                   double round_tol);

private:
    std::vector<Eigen::VectorXd> factors_at(const Eigen::VectorXd& c, bool derivatives) const;

    TensorTrain tt_;
    DegreeSchedule schedule_;
    NodeFamily nodes_;
    long probe_count_ = 0;
    bool converged_ = false;
};

// Cross-interpolates probe(c) on the tensor grid of Leja nodes given by the
// schedule; round_tol > 0 applies a final SVD rounding.
TensorTrainSurrogate build_tt_surrogate(const VectorProbe& probe, int d_out,
                                        const DegreeSchedule& schedule, const NodeFamily& nodes,
                                        const TtCrossOptions& options, double round_tol = 0.0);

}  // namespace surrbench
