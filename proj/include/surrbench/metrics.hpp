#pragma once

#include "surrbench/fem.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace surrbench {

// Relative RMS error sqrt(sum |y_k - yhat_k|_G^2 / sum |y_k|_G^2); rows are
// samples, norms in the given Gram matrix.
double eps_l2mu(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& predicted,
                const SparseMat& gram);

// Relative RMS of the weighted Jacobian mismatch: columns of each Jacobian
// are scaled by lambda^s before the Frobenius norm.
double eps_h1mu(const std::vector<Eigen::MatrixXd>& reference,
                const std::vector<Eigen::MatrixXd>& predicted,
                const Eigen::VectorXd& lambda_pow_s);

// Median per-sample wall time over `repeats` runs per batch size, first
// (warm-up) run excluded from the median.
using BatchEval = std::function<void(const Eigen::MatrixXd&)>;
std::map<int, double> measure_eval_time(const BatchEval& eval, int d_in,
                                        const std::vector<int>& batch_sizes, int repeats,
                                        std::uint64_t seed);

struct BenchRecord {
    std::string kind;                         // sg | tt | nn_l2 | nn_h1
    std::map<std::string, std::string> hyper; // resolved hyperparameters
    long n = 0;                                // forward solves used to build
    long n_jac = 0;                            // tangent solves
    std::int64_t parameter_count = 0;          // N
    double t_train = 0.0;                      // setup seconds (excl. solves)
    double t_eval = 0.0;                       // seconds per sample
    int t_eval_batch = 0;                      // batch size used for t_eval
    double eps_l2 = 0.0;
    std::optional<double> eps_h1;
    std::uint64_t seed = 0;
    std::string status = "ok";                 // ok | skipped:<reason> | failed:<reason>
};

enum class CostAxis { n, parameter_count, t_train, t_eval };
enum class ErrorAxis { l2, h1 };

double cost_of(const BenchRecord& record, CostAxis axis);
std::optional<double> error_of(const BenchRecord& record, ErrorAxis axis);

// Records not dominated by any other (cost <= and error <=, one strict).
// Output sorted by cost, ties kept, original relative order preserved
// within equal cost.
std::vector<BenchRecord> pareto_frontier(const std::vector<BenchRecord>& records, CostAxis cost,
                                         ErrorAxis error);

void write_records_csv(const std::vector<BenchRecord>& records, const std::filesystem::path& file);
void write_records_json(const std::vector<BenchRecord>& records,
                        const std::filesystem::path& file);
std::vector<BenchRecord> read_records_json(const std::filesystem::path& file);

// Plot-ready per-figure CSVs (error vs n / t_eval / N / t_train) plus
// pareto.csv with one frontier per cost axis.
void write_report(const std::vector<BenchRecord>& records, const std::filesystem::path& dir);

}  // namespace surrbench
