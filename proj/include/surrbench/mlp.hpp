#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace surrbench {

enum class Activation { gelu, tanh };

Activation activation_from_string(const std::string& name);
std::string activation_name(Activation act);

// Fully connected network g = A_L o sigma o ... o sigma o A_0 acting on
// encoded coefficients. GELU uses the exact Gaussian-CDF form so the input
// Jacobian and its parameter gradients stay consistent to machine precision.
struct MlpSurrogate {
    std::vector<Eigen::MatrixXd> weights;  // W_l: d_{l+1} x d_l
    std::vector<Eigen::VectorXd> biases;
    Activation activation = Activation::gelu;

    int layer_count() const { return static_cast<int>(weights.size()); }
    int d_in() const { return static_cast<int>(weights.front().cols()); }
    int d_out() const { return static_cast<int>(weights.back().rows()); }
    std::int64_t parameter_count() const;
    std::vector<int> dims() const;
};

// Glorot-uniform weights, zero biases, deterministic in the seed.
MlpSurrogate make_mlp(const std::vector<int>& dims, Activation act, std::uint64_t seed);

Eigen::VectorXd mlp_forward(const MlpSurrogate& net, const Eigen::VectorXd& input);
// batched: samples are rows
Eigen::MatrixXd mlp_forward_batch(const MlpSurrogate& net, const Eigen::MatrixXd& inputs);

Eigen::MatrixXd mlp_input_jacobian(const MlpSurrogate& net, const Eigen::VectorXd& input);

// Gradient container mirroring the parameter layout.
struct MlpGradient {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    static MlpGradient zeros_like(const MlpSurrogate& net);
    void axpy(double scale, const MlpGradient& other);
};

struct Batch {
    Eigen::MatrixXd inputs;                 // n x d_in
    Eigen::MatrixXd outputs;                // n x d_out
    std::vector<Eigen::MatrixXd> jacobians;  // optional, n of d_out x d_in
    bool has_jacobians() const { return !jacobians.empty(); }
};

enum class Objective { l2, h1 };

Objective objective_from_string(const std::string& name);
std::string objective_name(Objective objective);

// L2: mean over the batch of squared output error. H1 adds the weighted
// squared Jacobian mismatch sum_ij lambda_i^{2*s_tilde} (dJ_ji)^2.
double loss_l2(const MlpSurrogate& net, const Batch& batch);
double loss_h1(const MlpSurrogate& net, const Batch& batch, const Eigen::VectorXd& lambda_st);
double loss_value(const MlpSurrogate& net, const Batch& batch, Objective objective,
                  const Eigen::VectorXd& lambda_st);

// Exact gradient of the selected loss for every weight and bias; the H1 path
// differentiates through the input Jacobian with closed-form recursions.
MlpGradient param_gradient(const MlpSurrogate& net, const Batch& batch, Objective objective,
                           const Eigen::VectorXd& lambda_st);

struct LearningRateStep {
    int from_epoch = 0;
    double rate = 1e-3;
};

struct TrainConfig {
    Objective objective = Objective::l2;
    double s_tilde = 1.0;  // exponent for the lambda weights
    int epochs = 500;
    int batch_size = 32;
    std::vector<LearningRateStep> schedule;  // empty: 1e-3/1e-4/1e-5 at 0/50/80%
    double validation_fraction = 0.05;
    std::uint64_t seed = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    MlpSurrogate net;  // snapshot with the best validation loss
    std::vector<EpochRecord> trace;
    double train_seconds = 0.0;
    double best_val_loss = 0.0;
    int best_epoch = 0;
};

// ADAM with shuffled mini-batches; the last ceil(fraction*n) samples are held
// out for validation. Deterministic given the seed (single-threaded).
TrainResult train(const MlpSurrogate& init, const Batch& data, const TrainConfig& config);

void save_mlp(const MlpSurrogate& net, const std::filesystem::path& dir);
MlpSurrogate load_mlp(const std::filesystem::path& dir);
void write_trace_csv(const std::vector<EpochRecord>& trace, const std::filesystem::path& file);

}  // namespace surrbench
