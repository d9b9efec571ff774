#include "surrbench/tensor_train.hpp"

#include "surrbench/io.hpp"
#include "surrbench/rng.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace surrbench {

using nlohmann::json;

std::vector<int> TensorTrain::ranks() const {
    std::vector<int> r;
    for (std::size_t k = 0; k + 1 < cores.size(); ++k) r.push_back(cores[k].r_right());
    return r;
}

std::vector<int> TensorTrain::mode_sizes() const {
    std::vector<int> m;
    for (const auto& core : cores) m.push_back(core.mode());
    return m;
}

std::int64_t TensorTrain::entry_count() const {
    std::int64_t total = 0;
    for (const auto& core : cores) total += core.entry_count();
    return total;
}

namespace {

void check_chain(const TensorTrain& tt) {
    if (tt.cores.empty()) throw std::invalid_argument("empty tensor train");
    if (tt.cores.front().r_left() != 1 || tt.cores.back().r_right() != 1)
        throw std::invalid_argument("boundary ranks must be 1");
    for (std::size_t k = 0; k + 1 < tt.cores.size(); ++k)
        if (tt.cores[k].r_right() != tt.cores[k + 1].r_left())
            throw std::invalid_argument("rank mismatch between cores");
}

Eigen::MatrixXd contract_core(const TtCore& core, const Eigen::VectorXd& factor) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(core.r_left(), core.r_right());
    for (int j = 0; j < core.mode(); ++j)
        if (factor[j] != 0.0) out.noalias() += factor[j] * core.slices[j];
    return out;
}

// left unfolding: (r_left * mode) x r_right with row = j * r_left + alpha
Eigen::MatrixXd left_unfold(const TtCore& core) {
    Eigen::MatrixXd out(core.r_left() * core.mode(), core.r_right());
    for (int j = 0; j < core.mode(); ++j)
        out.middleRows(j * core.r_left(), core.r_left()) = core.slices[j];
    return out;
}

TtCore left_fold(const Eigen::MatrixXd& m, int r_left, int mode) {
    TtCore core;
    core.slices.reserve(mode);
    for (int j = 0; j < mode; ++j) core.slices.push_back(m.middleRows(j * r_left, r_left));
    return core;
}

// right unfolding: r_left x (mode * r_right) with col = j * r_right + beta
Eigen::MatrixXd right_unfold(const TtCore& core) {
    Eigen::MatrixXd out(core.r_left(), core.mode() * core.r_right());
    for (int j = 0; j < core.mode(); ++j)
        out.middleCols(j * core.r_right(), core.r_right()) = core.slices[j];
    return out;
}

TtCore right_fold(const Eigen::MatrixXd& m, int mode, int r_right) {
    TtCore core;
    core.slices.reserve(mode);
    for (int j = 0; j < mode; ++j) core.slices.push_back(m.middleCols(j * r_right, r_right));
    return core;
}

// make core k right-orthogonal, absorbing the triangular factor into core k-1
void right_orthogonalize_step(TensorTrain& tt, std::size_t k) {
    TtCore& core = tt.cores[k];
    const int mode = core.mode();
    const int rr = core.r_right();
    Eigen::MatrixXd r = right_unfold(core);  // rl x (mode*rr)
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(r.transpose());
    const int keep = static_cast<int>(std::min(r.rows(), r.cols()));
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r.cols(), keep);
    Eigen::MatrixXd rfac = qr.matrixQR().topRows(keep).triangularView<Eigen::Upper>();
    Eigen::MatrixXd l = rfac.transpose();  // rl x keep
    tt.cores[k] = right_fold(q.transpose(), mode, rr);
    TtCore& left = tt.cores[k - 1];
    for (auto& slice : left.slices) slice = slice * l;
}

double frobenius(const TtCore& core) {
    double total = 0.0;
    for (const auto& slice : core.slices) total += slice.squaredNorm();
    return std::sqrt(total);
}

}  // namespace

double tt_contract_full(const TensorTrain& tt, const std::vector<Eigen::VectorXd>& factors) {
    check_chain(tt);
    if (factors.size() != tt.cores.size())
        throw std::invalid_argument("factor count must match core count");
    Eigen::MatrixXd chain = contract_core(tt.cores[0], factors[0]);
    for (std::size_t k = 1; k < tt.cores.size(); ++k)
        chain = chain * contract_core(tt.cores[k], factors[k]);
    return chain(0, 0);
}

Eigen::VectorXd tt_eval(const TensorTrain& tt, const std::vector<Eigen::VectorXd>& factors) {
    check_chain(tt);
    if (factors.size() + 1 != tt.cores.size())
        throw std::invalid_argument("vector-valued eval needs one factor per parametric core");
    const std::size_t last = tt.cores.size() - 1;
    // chain right-to-left so every step is a matrix-vector product
    Eigen::VectorXd v = contract_core(tt.cores[last], factors[last - 1]).col(0);
    for (std::size_t k = last - 1; k >= 1; --k)
        v = contract_core(tt.cores[k], factors[k - 1]) * v;
    const TtCore& head = tt.cores[0];
    Eigen::VectorXd out(head.mode());
    for (int i = 0; i < head.mode(); ++i) out[i] = head.slices[i].row(0).dot(v);
    return out;
}

double tt_entry(const TensorTrain& tt, const std::vector<int>& index) {
    check_chain(tt);
    if (index.size() != tt.cores.size()) throw std::invalid_argument("index length mismatch");
    Eigen::MatrixXd chain = tt.cores[0].slices.at(index[0]);
    for (std::size_t k = 1; k < tt.cores.size(); ++k)
        chain = chain * tt.cores[k].slices.at(index[k]);
    return chain(0, 0);
}

Eigen::VectorXd tt_entry_vector(const TensorTrain& tt, const std::vector<int>& index) {
    check_chain(tt);
    if (index.size() + 1 != tt.cores.size()) throw std::invalid_argument("index length mismatch");
    const std::size_t last = tt.cores.size() - 1;
    Eigen::VectorXd v = tt.cores[last].slices.at(index[last - 1]).col(0);
    for (std::size_t k = last - 1; k >= 1; --k) v = tt.cores[k].slices.at(index[k - 1]) * v;
    const TtCore& head = tt.cores[0];
    Eigen::VectorXd out(head.mode());
    for (int i = 0; i < head.mode(); ++i) out[i] = head.slices[i].row(0).dot(v);
    return out;
}

double tt_norm(const TensorTrain& tt) {
    check_chain(tt);
    TensorTrain work = tt;
    for (std::size_t k = work.cores.size() - 1; k >= 1; --k) right_orthogonalize_step(work, k);
    return frobenius(work.cores[0]);
}

TensorTrain tt_round(const TensorTrain& tt, double rel_tol) {
    check_chain(tt);
    if (!(rel_tol > 0.0) || rel_tol >= 1.0)
        throw std::invalid_argument("rounding tolerance must lie in (0,1)");
    TensorTrain out = tt;
    const std::size_t count = out.cores.size();
    if (count == 1) return out;

    for (std::size_t k = count - 1; k >= 1; --k) right_orthogonalize_step(out, k);
    const double norm = frobenius(out.cores[0]);
    const double threshold = rel_tol * norm / std::sqrt(static_cast<double>(count - 1));

    for (std::size_t k = 0; k + 1 < count; ++k) {
        TtCore& core = out.cores[k];
        Eigen::MatrixXd a = left_unfold(core);
        Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::VectorXd& sv = svd.singularValues();
        int keep = static_cast<int>(sv.size());
        double tail = 0.0;
        while (keep > 1) {
            const double candidate = tail + sv[keep - 1] * sv[keep - 1];
            if (std::sqrt(candidate) > threshold) break;
            tail = candidate;
            --keep;
        }
        out.cores[k] = left_fold(svd.matrixU().leftCols(keep), core.r_left(), core.mode());
        Eigen::MatrixXd carry =
            sv.head(keep).asDiagonal() * svd.matrixV().leftCols(keep).transpose();
        for (auto& slice : out.cores[k + 1].slices) slice = carry * slice;
    }
    return out;
}

DegreeSchedule degree_schedule(int nu_max, bool anisotropic, int d) {
    if (d < 1) throw std::invalid_argument("dimension must be positive");
    DegreeSchedule schedule;
    schedule.anisotropic = anisotropic;
    schedule.nu_max = nu_max;
    if (!anisotropic) {
        if (nu_max < 1) throw std::invalid_argument("nu_max must be >= 1");
        schedule.nu.assign(d, nu_max);
        return schedule;
    }
    if (nu_max < 2) throw std::invalid_argument("anisotropic schedule needs nu_max >= 2");
    for (int k = 1; k <= d; ++k) {
        const int nu_k =
            static_cast<int>(std::ceil(nu_max / std::log2(static_cast<double>(k + 1)))) - 1;
        if (nu_k <= 0) break;  // degrees are non-increasing: cap the dimension here
        schedule.nu.push_back(nu_k);
    }
    return schedule;
}

std::vector<int> maxvol(const Eigen::MatrixXd& a, double tol) {
    const int n = static_cast<int>(a.rows());
    const int r = static_cast<int>(a.cols());
    if (r > n) throw std::invalid_argument("maxvol needs at least as many rows as columns");

    // initial well-conditioned row set: column pivots of a^T
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a.transpose());
    std::vector<int> rows(r);
    for (int i = 0; i < r; ++i) rows[i] = qr.colsPermutation().indices()[i];

    Eigen::MatrixXd sel(r, r);
    for (int iter = 0; iter < 200; ++iter) {
        for (int i = 0; i < r; ++i) sel.row(i) = a.row(rows[i]);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(sel.transpose());
        Eigen::MatrixXd b = lu.solve(a.transpose()).transpose();  // b = a * sel^{-1}
        Eigen::Index bi = 0, bj = 0;
        const double worst = b.cwiseAbs().maxCoeff(&bi, &bj);
        if (worst <= 1.0 + tol) break;
        rows[bj] = static_cast<int>(bi);
    }
    return rows;
}

namespace {

struct VectorIntHash {
    std::size_t operator()(const std::vector<int>& v) const {
        std::size_t h = 0xcbf29ce484222325ULL;
        for (int x : v) {
            h ^= static_cast<std::size_t>(x) + 0x9e3779b9;
            h *= 0x100000001b3ULL;
        }
        return h;
    }
};

class FiberCache {
public:
    FiberCache(const IndexProbe& probe, int d_out) : probe_(probe), d_out_(d_out) {}

    const Eigen::VectorXd& fetch(const std::vector<int>& parametric) {
        auto it = cache_.find(parametric);
        if (it != cache_.end()) return it->second;
        Eigen::VectorXd value = probe_(parametric);
        if (value.size() != d_out_) throw std::runtime_error("probe returned wrong output size");
        return cache_.emplace(parametric, std::move(value)).first->second;
    }

    long unique_count() const { return static_cast<long>(cache_.size()); }
    const auto& entries() const { return cache_; }

private:
    const IndexProbe& probe_;
    int d_out_;
    std::unordered_map<std::vector<int>, Eigen::VectorXd, VectorIntHash> cache_;
};

std::vector<int> concat(const std::vector<int>& a, int mid, const std::vector<int>& b) {
    std::vector<int> out;
    out.reserve(a.size() + 1 + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.push_back(mid);
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

// relative fit of the TT on every cached fiber
double cache_fit(const TensorTrain& tt, const FiberCache& cache) {
    double num = 0.0, den = 0.0;
    for (const auto& [index, value] : cache.entries()) {
        Eigen::VectorXd approx = tt_entry_vector(tt, index);
        num += (approx - value).squaredNorm();
        den += value.squaredNorm();
    }
    if (den == 0.0) return std::sqrt(num);
    return std::sqrt(num / den);
}

}  // namespace

TtCrossResult tt_cross(const IndexProbe& probe, int d_out, const std::vector<int>& mode_sizes,
                       const TtCrossOptions& options) {
    const int d = static_cast<int>(mode_sizes.size());
    if (d < 1) throw std::invalid_argument("tt_cross needs at least one parametric dimension");
    if (d_out < 1) throw std::invalid_argument("d_out must be positive");
    if (options.rank_cap < 1) throw std::invalid_argument("rank_cap must be >= 1");
    if (options.sweeps < 1) throw std::invalid_argument("sweeps must be >= 1");
    for (int m : mode_sizes)
        if (m < 1) throw std::invalid_argument("mode sizes must be positive");

    // modes of the full tensor, output dimension as mode 0
    std::vector<int> modes(static_cast<std::size_t>(d) + 1);
    modes[0] = d_out;
    for (int k = 0; k < d; ++k) modes[static_cast<std::size_t>(k) + 1] = mode_sizes[k];
    const int core_count = d + 1;
    const int interfaces = core_count - 1;

    auto clamp_rank = [&](int interface, int r) {
        double left = 1.0, right = 1.0;
        for (int t = 0; t <= interface; ++t) left = std::min(1e9, left * modes[t]);
        for (int t = interface + 1; t < core_count; ++t) right = std::min(1e9, right * modes[t]);
        return std::max(1, std::min({r, static_cast<int>(left), static_cast<int>(right)}));
    };

    const int base_rank = options.start_rank > 0 ? std::min(options.start_rank, options.rank_cap)
                                                 : options.rank_cap;
    std::vector<int> target_rank(interfaces);
    for (int k = 0; k < interfaces; ++k) target_rank[k] = clamp_rank(k, base_rank);

    Rng rng(options.seed);
    FiberCache cache(probe, d_out);

    // master tuples: initial right sets are suffixes of shared tuples so the
    // first sweep's supercores reuse each other's probes
    const int master_count = *std::max_element(target_rank.begin(), target_rank.end());
    std::vector<std::vector<int>> masters;
    for (int t = 0; t < master_count * 8 && static_cast<int>(masters.size()) < master_count; ++t) {
        std::vector<int> tuple(d);
        for (int k = 0; k < d; ++k) tuple[k] = static_cast<int>(rng.below(modes[k + 1]));
        if (std::find(masters.begin(), masters.end(), tuple) == masters.end())
            masters.push_back(tuple);
    }

    // right_sets[k]: tuples over parametric modes k+1..d (empty at k=d-1... the
    // last interface has suffix length d-1-k)
    std::vector<std::vector<std::vector<int>>> right_sets(interfaces);
    std::vector<std::vector<std::vector<int>>> left_sets(interfaces);

    auto grow_right_set = [&](int interface) {
        auto& set = right_sets[interface];
        const std::size_t suffix_len = static_cast<std::size_t>(d - 1 - interface) + 1;
        // suffix over modes interface+1 .. d  (parametric indices k >= interface+1)
        std::size_t tried_master = std::numeric_limits<std::size_t>::max();
        int attempts = 0;
        while (static_cast<int>(set.size()) < target_rank[interface]) {
            std::vector<int> tuple;
            if (set.size() < masters.size() && tried_master != set.size()) {
                const auto& m = masters[set.size()];
                tuple.assign(m.end() - static_cast<long>(suffix_len), m.end());
                tried_master = set.size();
            } else {
                tuple.resize(suffix_len);
                for (std::size_t t = 0; t < suffix_len; ++t)
                    tuple[t] = static_cast<int>(
                        rng.below(modes[interface + 1 + static_cast<int>(t)]));
            }
            if (std::find(set.begin(), set.end(), tuple) == set.end()) set.push_back(tuple);
            if (++attempts > 10000)
                throw std::runtime_error("tt_cross could not draw distinct index tuples");
        }
    };
    for (int k = 0; k < interfaces; ++k) {
        // suffix of interface k covers modes k+1..d: length d-k ... except the
        // very last interface (k = interfaces-1 = d-1) whose suffix is mode d only
        grow_right_set(k);
    }

    TensorTrain tt;
    TtCrossResult result;
    TensorTrain previous;
    bool have_previous = false;
    double best_fit = std::numeric_limits<double>::infinity();
    TensorTrain best_tt;
    std::vector<std::vector<int>> best_left;
    double previous_fit = std::numeric_limits<double>::infinity();

    auto left_to_right = [&]() {
        tt.cores.assign(core_count, {});
        std::vector<std::vector<int>> prev_left = {{}};
        for (int k = 0; k < interfaces; ++k) {
            const int rl = static_cast<int>(prev_left.size());
            const int m = modes[k];
            const int rr = static_cast<int>(right_sets[k].size());
            Eigen::MatrixXd c(rl * m, rr);
            for (int alpha = 0; alpha < rl; ++alpha) {
                for (int j = 0; j < m; ++j) {
                    for (int beta = 0; beta < rr; ++beta) {
                        std::vector<int> full = concat(prev_left[alpha], j, right_sets[k][beta]);
                        std::vector<int> parametric(full.begin() + 1, full.end());
                        c(alpha * m + j, beta) = cache.fetch(parametric)[full[0]];
                    }
                }
            }
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
            const int keep = static_cast<int>(std::min(c.rows(), c.cols()));
            Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(c.rows(), keep);
            std::vector<int> sel = maxvol(q, options.maxvol_tol);
            Eigen::MatrixXd qsel(keep, keep);
            for (int i = 0; i < keep; ++i) qsel.row(i) = q.row(sel[i]);
            Eigen::MatrixXd qsel_t = qsel.transpose();
            Eigen::MatrixXd g = qsel_t.partialPivLu().solve(q.transpose()).transpose();

            TtCore core;
            core.slices.assign(m, Eigen::MatrixXd(rl, keep));
            for (int alpha = 0; alpha < rl; ++alpha)
                for (int j = 0; j < m; ++j) core.slices[j].row(alpha) = g.row(alpha * m + j);
            tt.cores[k] = std::move(core);

            std::vector<std::vector<int>> new_left;
            new_left.reserve(sel.size());
            for (int row : sel) {
                const int alpha = row / m;
                const int j = row % m;
                std::vector<int> tuple = prev_left[alpha];
                tuple.push_back(j);
                new_left.push_back(std::move(tuple));
            }
            left_sets[k] = new_left;
            prev_left = std::move(new_left);
        }
        // last core: direct copy of the sampled fibers
        const int m = modes[core_count - 1];
        const int rl = static_cast<int>(prev_left.size());
        TtCore core;
        core.slices.assign(m, Eigen::MatrixXd(rl, 1));
        for (int alpha = 0; alpha < rl; ++alpha) {
            for (int j = 0; j < m; ++j) {
                std::vector<int> full = prev_left[alpha];
                full.push_back(j);
                std::vector<int> parametric(full.begin() + 1, full.end());
                core.slices[j](alpha, 0) = cache.fetch(parametric)[full[0]];
            }
        }
        tt.cores[core_count - 1] = std::move(core);
    };

    auto right_to_left = [&]() {
        std::vector<std::vector<int>> next_right = {{}};
        for (int k = core_count - 1; k >= 1; --k) {
            const auto& lset = left_sets[k - 1];
            const int rl = static_cast<int>(lset.size());
            const int m = modes[k];
            const int rr = static_cast<int>(next_right.size());
            Eigen::MatrixXd c(rl, m * rr);
            for (int alpha = 0; alpha < rl; ++alpha) {
                for (int j = 0; j < m; ++j) {
                    for (int beta = 0; beta < rr; ++beta) {
                        std::vector<int> full = concat(lset[alpha], j, next_right[beta]);
                        std::vector<int> parametric(full.begin() + 1, full.end());
                        c(alpha, j * rr + beta) = cache.fetch(parametric)[full[0]];
                    }
                }
            }
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(c.transpose());
            const int keep = static_cast<int>(std::min(c.rows(), c.cols()));
            Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(c.cols(), keep);
            std::vector<int> sel = maxvol(q, options.maxvol_tol);
            std::vector<std::vector<int>> new_right;
            new_right.reserve(sel.size());
            for (int col : sel) {
                const int j = col / rr;
                const int beta = col % rr;
                std::vector<int> tuple;
                tuple.push_back(j);
                tuple.insert(tuple.end(), next_right[beta].begin(), next_right[beta].end());
                new_right.push_back(std::move(tuple));
            }
            right_sets[k - 1] = new_right;
            target_rank[k - 1] = static_cast<int>(new_right.size());
            next_right = std::move(new_right);
        }
    };

    for (int sweep = 1; sweep <= options.sweeps; ++sweep) {
        left_to_right();
        result.sweeps_done = sweep;

        const double fit = cache_fit(tt, cache);
        if (fit < best_fit) {
            best_fit = fit;
            best_tt = tt;
            best_left.clear();
            for (const auto& tuple : left_sets[interfaces - 1])
                best_left.emplace_back(tuple.begin() + 1, tuple.end());
        }

        bool converged = fit <= options.fit_tol;
        if (have_previous && !converged) {
            // relative change at random grid indices; no probes involved
            Rng check_rng(options.seed ^ 0xabcdefULL);
            double num = 0.0, den = 0.0;
            for (int t = 0; t < options.check_points; ++t) {
                std::vector<int> index(d);
                for (int k = 0; k < d; ++k)
                    index[k] = static_cast<int>(check_rng.below(modes[k + 1]));
                Eigen::VectorXd now = tt_entry_vector(tt, index);
                Eigen::VectorXd before = tt_entry_vector(previous, index);
                num += (now - before).squaredNorm();
                den += now.squaredNorm();
            }
            converged = den > 0.0 ? std::sqrt(num / den) <= options.change_tol
                                  : std::sqrt(num) <= options.change_tol;
        }
        if (converged) {
            result.converged = true;
            break;
        }
        previous = tt;
        have_previous = true;
        if (sweep == options.sweeps) break;

        right_to_left();

        const bool improving =
            previous_fit == std::numeric_limits<double>::infinity() || fit < 0.9 * previous_fit;
        previous_fit = fit;
        if (options.adapt_ranks && improving) {
            for (int k = 0; k < interfaces; ++k) {
                target_rank[k] = clamp_rank(k, std::min(target_rank[k] + 1, options.rank_cap));
                grow_right_set(k);
            }
        }
    }

    result.tt = std::move(best_tt);
    result.final_left_set = std::move(best_left);
    result.probe_count = cache.unique_count();
    return result;
}

TensorTrainSurrogate::TensorTrainSurrogate(TensorTrain tt, DegreeSchedule schedule,
                                           NodeFamily nodes)
    : tt_(std::move(tt)), schedule_(std::move(schedule)), nodes_(std::move(nodes)) {
    if (static_cast<int>(tt_.cores.size()) != schedule_.dims() + 1)
        throw std::invalid_argument("core count does not match the schedule");
}

std::vector<Eigen::VectorXd> TensorTrainSurrogate::factors_at(const Eigen::VectorXd& c,
                                                              bool derivatives) const {
    std::vector<Eigen::VectorXd> factors(schedule_.dims());
    for (int k = 0; k < schedule_.dims(); ++k) {
        const int level = schedule_.nu[k];
        factors[k].resize(level + 1);
        const std::span<const double> nds(nodes_.nodes.data(), static_cast<std::size_t>(level + 1));
        const std::span<const double> wts(nodes_.weights[level].data(),
                                          static_cast<std::size_t>(level + 1));
        std::span<double> out(factors[k].data(), static_cast<std::size_t>(level + 1));
        if (derivatives)
            basis_derivatives_1d(nds, wts, c[k], out);
        else
            basis_values_1d(nds, wts, c[k], out);
    }
    return factors;
}

Eigen::VectorXd TensorTrainSurrogate::eval(const Eigen::VectorXd& c) const {
    if (c.size() != d_in()) throw std::invalid_argument("tt eval: wrong input dimension");
    return tt_eval(tt_, factors_at(c, false));
}

Eigen::MatrixXd TensorTrainSurrogate::eval_batch(const Eigen::MatrixXd& points) const {
    Eigen::MatrixXd out(points.rows(), d_out());
    for (Eigen::Index r = 0; r < points.rows(); ++r)
        out.row(r) = eval(points.row(r).transpose()).transpose();
    return out;
}

Eigen::MatrixXd TensorTrainSurrogate::jacobian(const Eigen::VectorXd& c) const {
    if (c.size() != d_in()) throw std::invalid_argument("tt jacobian: wrong input dimension");
    const auto values = factors_at(c, false);
    const auto derivs = factors_at(c, true);
    const int d = d_in();

    std::vector<Eigen::MatrixXd> contracted(d);
    for (int k = 0; k < d; ++k) contracted[k] = contract_core(tt_.cores[k + 1], values[k]);

    // suffix[k] = contracted[k] * ... * contracted[d-1], as a column vector
    std::vector<Eigen::VectorXd> suffix(d + 1);
    suffix[d] = Eigen::VectorXd::Ones(1);
    for (int k = d - 1; k >= 0; --k) suffix[k] = contracted[k] * suffix[k + 1];

    const TtCore& head = tt_.cores[0];
    Eigen::MatrixXd output_core(head.mode(), head.r_right());
    for (int i = 0; i < head.mode(); ++i) output_core.row(i) = head.slices[i].row(0);

    Eigen::MatrixXd prefix = output_core;  // output_core * contracted[0..k-1]
    Eigen::MatrixXd jac(d_out(), d);
    for (int k = 0; k < d; ++k) {
        Eigen::MatrixXd dcore = contract_core(tt_.cores[k + 1], derivs[k]);
        jac.col(k) = prefix * (dcore * suffix[k + 1]);
        if (k + 1 < d) prefix = prefix * contracted[k];
    }
    return jac;
}

TensorTrainSurrogate build_tt_surrogate(const VectorProbe& probe, int d_out,
                                        const DegreeSchedule& schedule, const NodeFamily& nodes,
                                        const TtCrossOptions& options, double round_tol) {
    const int d = schedule.dims();
    if (d < 1) throw std::invalid_argument("schedule must have at least one dimension");
    const int max_nu = *std::max_element(schedule.nu.begin(), schedule.nu.end());
    if (nodes.levels() < max_nu + 1)
        throw std::invalid_argument("node family too short for the degree schedule");

    IndexProbe index_probe = [&](const std::vector<int>& index) {
        Eigen::VectorXd c(d);
        for (int k = 0; k < d; ++k) c[k] = nodes.nodes.at(static_cast<std::size_t>(index[k]));
        return probe(c);
    };

    TtCrossResult result = tt_cross(index_probe, d_out, schedule.mode_sizes(), options);
    TensorTrain tt = std::move(result.tt);
    if (round_tol > 0.0) tt = tt_round(tt, round_tol);

    TensorTrainSurrogate s(std::move(tt), schedule, nodes);
    s.probe_count_ = result.probe_count;
    s.converged_ = result.converged;
    return s;
}

void TensorTrainSurrogate::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    json manifest;
    manifest["kind"] = "tensor_train";
    manifest["d_in"] = d_in();
    manifest["d_out"] = d_out();
    manifest["nu"] = schedule_.nu;
    manifest["anisotropic"] = schedule_.anisotropic;
    manifest["nu_max"] = schedule_.nu_max;
    manifest["node_count"] = nodes_.levels();
    manifest["nodes"] = nodes_.nodes;
    manifest["probe_count"] = probe_count_;
    manifest["converged"] = converged_;
    json core_shapes = json::array();
    for (std::size_t k = 0; k < tt_.cores.size(); ++k) {
        const auto& core = tt_.cores[k];
        core_shapes.push_back({core.r_left(), core.mode(), core.r_right()});
        Eigen::MatrixXd flat(core.r_left(), core.mode() * core.r_right());
        for (int j = 0; j < core.mode(); ++j)
            flat.middleCols(j * core.r_right(), core.r_right()) = core.slices[j];
        io::write_matrix_colmajor(dir / ("core_" + std::to_string(k) + ".bin"), flat);
    }
    manifest["core_shapes"] = core_shapes;
    manifest["core_layout"] = "per-core file, slices concatenated along columns, column-major";
    io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

TensorTrainSurrogate TensorTrainSurrogate::load(const std::filesystem::path& dir) {
    const json manifest = json::parse(io::read_text(dir / "manifest.json"));
    DegreeSchedule schedule;
    schedule.nu = manifest.at("nu").get<std::vector<int>>();
    schedule.anisotropic = manifest.at("anisotropic").get<bool>();
    schedule.nu_max = manifest.at("nu_max").get<int>();
    NodeFamily nodes = leja_nodes(manifest.at("node_count").get<int>());
    if (manifest.at("nodes").get<std::vector<double>>() != nodes.nodes)
        throw std::runtime_error("stored node family does not match the Leja sequence");
    TensorTrain tt;
    const auto shapes = manifest.at("core_shapes").get<std::vector<std::vector<int>>>();
    for (std::size_t k = 0; k < shapes.size(); ++k) {
        const int rl = shapes[k][0], m = shapes[k][1], rr = shapes[k][2];
        Eigen::MatrixXd flat = io::read_matrix_colmajor(
            dir / ("core_" + std::to_string(k) + ".bin"), rl, static_cast<Eigen::Index>(m) * rr);
        TtCore core;
        for (int j = 0; j < m; ++j) core.slices.push_back(flat.middleCols(j * rr, rr));
        tt.cores.push_back(std::move(core));
    }
    TensorTrainSurrogate s(std::move(tt), std::move(schedule), std::move(nodes));
    s.probe_count_ = manifest.at("probe_count").get<long>();
    s.converged_ = manifest.at("converged").get<bool>();
    return s;
}

}  // namespace surrbench
