#include "surrbench/mlp.hpp"

#include "surrbench/io.hpp"
#include "surrbench/rng.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace surrbench {

using nlohmann::json;

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }
inline double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double act_value(Activation act, double x) {
    switch (act) {
        case Activation::gelu: return x * std_normal_cdf(x);
        case Activation::tanh: return std::tanh(x);
    }
    return 0.0;
}

inline double act_deriv(Activation act, double x) {
    switch (act) {
        case Activation::gelu: return std_normal_cdf(x) + x * std_normal_pdf(x);
        case Activation::tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
    }
    return 0.0;
}

inline double act_second(Activation act, double x) {
    switch (act) {
        case Activation::gelu: return std_normal_pdf(x) * (2.0 - x * x);
        case Activation::tanh: {
            const double t = std::tanh(x);
            return -2.0 * t * (1.0 - t * t);
        }
    }
    return 0.0;
}

struct ForwardState {
    std::vector<Eigen::VectorXd> a;   // a[l]: input of layer l, l = 0..L
    std::vector<Eigen::VectorXd> z;   // z[l] = W_l a[l] + b_l, l = 0..L-1 (pre-activation)
    Eigen::VectorXd output;           // z at the final affine layer
    std::vector<Eigen::VectorXd> d1;  // sigma'(z[l])
    std::vector<Eigen::VectorXd> d2;  // sigma''(z[l]) (filled only when needed)
};

ForwardState run_forward(const MlpSurrogate& net, const Eigen::VectorXd& input,
                         bool with_second) {
    const int layers = net.layer_count();
    ForwardState state;
    state.a.resize(layers);
    state.z.resize(layers - 1);
    state.d1.resize(layers - 1);
    if (with_second) state.d2.resize(layers - 1);

    Eigen::VectorXd current = input;
    for (int l = 0; l < layers; ++l) {
        state.a[l] = current;
        Eigen::VectorXd affine = net.weights[l] * current + net.biases[l];
        if (l == layers - 1) {
            state.output = affine;
            break;
        }
        state.z[l] = affine;
        state.d1[l] = affine.unaryExpr(
            [&](double x) { return act_deriv(net.activation, x); });
        if (with_second)
            state.d2[l] = affine.unaryExpr(
                [&](double x) { return act_second(net.activation, x); });
        current = affine.unaryExpr([&](double x) { return act_value(net.activation, x); });
    }
    return state;
}

}  // namespace

Activation activation_from_string(const std::string& name) {
    if (name == "gelu") return Activation::gelu;
    if (name == "tanh") return Activation::tanh;
    throw std::invalid_argument("unknown activation: " + name);
}

std::string activation_name(Activation act) {
    return act == Activation::gelu ? "gelu" : "tanh";
}

Objective objective_from_string(const std::string& name) {
    if (name == "l2") return Objective::l2;
    if (name == "h1") return Objective::h1;
    throw std::invalid_argument("unknown objective: " + name);
}

std::string objective_name(Objective objective) {
    return objective == Objective::l2 ? "l2" : "h1";
}

std::int64_t MlpSurrogate::parameter_count() const {
    std::int64_t total = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        total += weights[l].size() + biases[l].size();
    return total;
}

std::vector<int> MlpSurrogate::dims() const {
    std::vector<int> out;
    out.push_back(d_in());
    for (const auto& w : weights) out.push_back(static_cast<int>(w.rows()));
    return out;
}

MlpSurrogate make_mlp(const std::vector<int>& dims, Activation act, std::uint64_t seed) {
    if (dims.size() < 2) throw std::invalid_argument("network needs at least two dims");
    MlpSurrogate net;
    net.activation = act;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l], fan_out = dims[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int i = 0; i < fan_out; ++i)
            for (int j = 0; j < fan_in; ++j) w(i, j) = limit * rng.symmetric();
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return net;
}

Eigen::VectorXd mlp_forward(const MlpSurrogate& net, const Eigen::VectorXd& input) {
    if (input.size() != net.d_in()) throw std::invalid_argument("mlp_forward: dimension mismatch");
    Eigen::VectorXd current = input;
    for (int l = 0; l < net.layer_count(); ++l) {
        current = net.weights[l] * current + net.biases[l];
        if (l + 1 < net.layer_count())
            current = current.unaryExpr(
                [&](double x) { return act_value(net.activation, x); });
    }
    return current;
}

Eigen::MatrixXd mlp_forward_batch(const MlpSurrogate& net, const Eigen::MatrixXd& inputs) {
    Eigen::MatrixXd current = inputs.transpose();  // d x n
    for (int l = 0; l < net.layer_count(); ++l) {
        current = (net.weights[l] * current).colwise() + net.biases[l];
        if (l + 1 < net.layer_count())
            current = current.unaryExpr(
                [&](double x) { return act_value(net.activation, x); });
    }
    return current.transpose();
}

Eigen::MatrixXd mlp_input_jacobian(const MlpSurrogate& net, const Eigen::VectorXd& input) {
    ForwardState state = run_forward(net, input, false);
    Eigen::MatrixXd jac = net.weights[0];
    for (int l = 1; l < net.layer_count(); ++l)
        jac = net.weights[l] * state.d1[l - 1].asDiagonal() * jac;
    return jac;
}

MlpGradient MlpGradient::zeros_like(const MlpSurrogate& net) {
    MlpGradient grad;
    for (int l = 0; l < net.layer_count(); ++l) {
        grad.weights.emplace_back(
            Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        grad.biases.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return grad;
}

void MlpGradient::axpy(double scale, const MlpGradient& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] += scale * other.weights[l];
        biases[l] += scale * other.biases[l];
    }
}

double loss_l2(const MlpSurrogate& net, const Batch& batch) {
    if (batch.inputs.rows() == 0) throw std::invalid_argument("empty batch");
    Eigen::MatrixXd pred = mlp_forward_batch(net, batch.inputs);
    return (pred - batch.outputs).squaredNorm() / static_cast<double>(batch.inputs.rows());
}

double loss_h1(const MlpSurrogate& net, const Batch& batch, const Eigen::VectorXd& lambda_st) {
    if (!batch.has_jacobians())
        throw std::invalid_argument("h1 loss needs jacobians in the batch");
    const auto n = batch.inputs.rows();
    double total = loss_l2(net, batch);
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::MatrixXd jac = mlp_input_jacobian(net, batch.inputs.row(k).transpose());
        Eigen::MatrixXd diff = jac - batch.jacobians[static_cast<std::size_t>(k)];
        for (Eigen::Index i = 0; i < diff.cols(); ++i)
            total += lambda_st[i] * lambda_st[i] * diff.col(i).squaredNorm() /
                     static_cast<double>(n);
    }
    return total;
}

double loss_value(const MlpSurrogate& net, const Batch& batch, Objective objective,
                  const Eigen::VectorXd& lambda_st) {
    return objective == Objective::l2 ? loss_l2(net, batch) : loss_h1(net, batch, lambda_st);
}

MlpGradient param_gradient(const MlpSurrogate& net, const Batch& batch, Objective objective,
                           const Eigen::VectorXd& lambda_st) {
    const int layers = net.layer_count();
    const auto n = batch.inputs.rows();
    if (n == 0) throw std::invalid_argument("empty batch");
    const bool with_jac = objective == Objective::h1;
    if (with_jac && !batch.has_jacobians())
        throw std::invalid_argument("h1 gradient needs jacobians in the batch");
    const double inv_n = 1.0 / static_cast<double>(n);

    MlpGradient grad = MlpGradient::zeros_like(net);

    for (Eigen::Index sample = 0; sample < n; ++sample) {
        const Eigen::VectorXd input = batch.inputs.row(sample).transpose();
        ForwardState state = run_forward(net, input, with_jac);

        // value term: standard backpropagation of 2/n * error
        Eigen::VectorXd delta =
            2.0 * inv_n * (state.output - batch.outputs.row(sample).transpose());
        for (int l = layers - 1; l >= 0; --l) {
            grad.weights[l].noalias() += delta * state.a[l].transpose();
            grad.biases[l] += delta;
            if (l > 0) delta = state.d1[l - 1].cwiseProduct(net.weights[l].transpose() * delta);
        }

        if (!with_jac) continue;

        // jacobian term: S = sum_ij ebar_ji J_ji with ebar held fixed.
        // forward chains G_l = da_l/dc, backward chains M_l = dy/dz_l.
        std::vector<Eigen::MatrixXd> g(layers);  // g[l]: d_l x d_in
        g[0] = Eigen::MatrixXd::Identity(net.d_in(), net.d_in());
        for (int l = 0; l + 1 < layers; ++l)
            g[l + 1] = state.d1[l].asDiagonal() * (net.weights[l] * g[l]);

        std::vector<Eigen::MatrixXd> m(layers);  // m[l]: d_out x dim(z_l)
        m[layers - 1] = Eigen::MatrixXd::Identity(net.d_out(), net.d_out());
        for (int l = layers - 2; l >= 0; --l)
            m[l] = m[l + 1] * net.weights[l + 1] * state.d1[l].asDiagonal();

        Eigen::MatrixXd jac = net.weights[layers - 1] * g[layers - 1];
        Eigen::MatrixXd ebar =
            2.0 * inv_n * (jac - batch.jacobians[static_cast<std::size_t>(sample)]);
        for (Eigen::Index i = 0; i < ebar.cols(); ++i) ebar.col(i) *= lambda_st[i] * lambda_st[i];

        // explicit occurrence of W_l inside the chain product
        for (int l = 0; l < layers; ++l)
            grad.weights[l].noalias() += m[l].transpose() * ebar * g[l].transpose();

        // activation path: zeta_l = dS/dz_l accumulated top-down
        Eigen::VectorXd zeta;
        for (int l = layers - 2; l >= 0; --l) {
            // u_l = diag(A^T ebar B^T) with A = dy/da_{l+1}, B = dz_l/dc
            Eigen::MatrixXd a_chain = m[l + 1] * net.weights[l + 1];  // d_out x d_{l+1}
            Eigen::MatrixXd b_chain = net.weights[l] * g[l];          // d_{l+1} x d_in
            Eigen::VectorXd u =
                ((a_chain.transpose() * ebar).cwiseProduct(b_chain)).rowwise().sum();
            if (l == layers - 2) {
                zeta = u.cwiseProduct(state.d2[l]);
            } else {
                zeta = u.cwiseProduct(state.d2[l]) +
                       state.d1[l].cwiseProduct(net.weights[l + 1].transpose() * zeta);
            }
            grad.weights[l].noalias() += zeta * state.a[l].transpose();
            grad.biases[l] += zeta;
        }
    }
    return grad;
}

namespace {

std::vector<LearningRateStep> default_schedule(int epochs) {
    return {{0, 1e-3}, {epochs / 2, 1e-4}, {epochs * 8 / 10, 1e-5}};
}

double rate_for_epoch(const std::vector<LearningRateStep>& schedule, int epoch) {
    double rate = schedule.front().rate;
    for (const auto& step : schedule)
        if (epoch >= step.from_epoch) rate = step.rate;
    return rate;
}

Batch take_rows(const Batch& data, const std::vector<int>& rows) {
    Batch out;
    out.inputs.resize(static_cast<Eigen::Index>(rows.size()), data.inputs.cols());
    out.outputs.resize(static_cast<Eigen::Index>(rows.size()), data.outputs.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.inputs.row(static_cast<Eigen::Index>(i)) = data.inputs.row(rows[i]);
        out.outputs.row(static_cast<Eigen::Index>(i)) = data.outputs.row(rows[i]);
        if (data.has_jacobians())
            out.jacobians.push_back(data.jacobians[static_cast<std::size_t>(rows[i])]);
    }
    return out;
}

}  // namespace

TrainResult train(const MlpSurrogate& init, const Batch& data, const TrainConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    const auto n_total = static_cast<int>(data.inputs.rows());
    if (n_total < 2) throw std::invalid_argument("training needs at least two samples");
    if (config.validation_fraction < 0.0 || config.validation_fraction > 0.5)
        throw std::invalid_argument("validation fraction must lie in [0, 0.5]");
    if (config.objective == Objective::h1 && !data.has_jacobians())
        throw std::invalid_argument("h1 training needs jacobian data");

    const int n_val = static_cast<int>(std::ceil(config.validation_fraction * n_total));
    const int n_train = n_total - n_val;
    if (n_train < 1) throw std::invalid_argument("no training samples left after validation split");

    Eigen::VectorXd lambda_st(data.inputs.cols());
    for (Eigen::Index i = 0; i < lambda_st.size(); ++i)
        lambda_st[i] = std::pow(1.0 / static_cast<double>(i + 1), config.s_tilde);

    std::vector<int> train_rows(static_cast<std::size_t>(n_train));
    for (int i = 0; i < n_train; ++i) train_rows[static_cast<std::size_t>(i)] = i;
    std::vector<int> val_rows;
    for (int i = n_train; i < n_total; ++i) val_rows.push_back(i);
    Batch val = n_val > 0 ? take_rows(data, val_rows) : Batch{};

    const auto schedule =
        config.schedule.empty() ? default_schedule(config.epochs) : config.schedule;

    MlpSurrogate net = init;
    MlpGradient m1 = MlpGradient::zeros_like(net);
    MlpGradient m2 = MlpGradient::zeros_like(net);
    long step = 0;

    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    Rng rng(config.seed);

    std::vector<int> order = train_rows;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // Fisher-Yates with the library rng, so the shuffle is seed-stable
        for (int i = n_train - 1; i > 0; --i) {
            const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }

        const double rate = rate_for_epoch(schedule, epoch);
        double epoch_loss = 0.0;
        int batches = 0;
        for (int begin = 0; begin < n_train; begin += config.batch_size) {
            const int end = std::min(begin + config.batch_size, n_train);
            std::vector<int> rows(order.begin() + begin, order.begin() + end);
            Batch minibatch = take_rows(data, rows);

            const double batch_loss =
                loss_value(net, minibatch, config.objective, lambda_st);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error(
                    "training diverged (non-finite loss); reduce the learning rate");
            epoch_loss += batch_loss;
            ++batches;

            MlpGradient grad = param_gradient(net, minibatch, config.objective, lambda_st);
            ++step;
            const double correction1 = 1.0 - std::pow(config.adam_beta1, step);
            const double correction2 = 1.0 - std::pow(config.adam_beta2, step);
            for (int l = 0; l < net.layer_count(); ++l) {
                m1.weights[l] = config.adam_beta1 * m1.weights[l] +
                                (1.0 - config.adam_beta1) * grad.weights[l];
                m1.biases[l] =
                    config.adam_beta1 * m1.biases[l] + (1.0 - config.adam_beta1) * grad.biases[l];
                m2.weights[l] = config.adam_beta2 * m2.weights[l] +
                                (1.0 - config.adam_beta2) * grad.weights[l].cwiseAbs2();
                m2.biases[l] = config.adam_beta2 * m2.biases[l] +
                               (1.0 - config.adam_beta2) * grad.biases[l].cwiseAbs2();
                net.weights[l] -=
                    rate * ((m1.weights[l] / correction1).array() /
                            ((m2.weights[l] / correction2).array().sqrt() + config.adam_epsilon))
                               .matrix();
                net.biases[l] -=
                    rate * ((m1.biases[l] / correction1).array() /
                            ((m2.biases[l] / correction2).array().sqrt() + config.adam_epsilon))
                               .matrix();
            }
        }

        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = epoch_loss / std::max(1, batches);
        record.val_loss = n_val > 0 ? loss_value(net, val, config.objective, lambda_st)
                                    : record.train_loss;
        result.trace.push_back(record);
        if (record.val_loss < result.best_val_loss) {
            result.best_val_loss = record.val_loss;
            result.best_epoch = epoch;
            result.net = net;
        }
    }
    if (!std::isfinite(result.best_val_loss)) result.net = net;

    result.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

void save_mlp(const MlpSurrogate& net, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json manifest;
    manifest["kind"] = "mlp";
    manifest["dims"] = net.dims();
    manifest["activation"] = activation_name(net.activation);
    manifest["layout"] = "per layer: W row-major then b, concatenated, float64 LE";
    io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");

    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(net.parameter_count()));
    for (int l = 0; l < net.layer_count(); ++l) {
        const auto& w = net.weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) flat.push_back(w(i, j));
        for (Eigen::Index i = 0; i < net.biases[l].size(); ++i)
            flat.push_back(net.biases[l][i]);
    }
    io::write_f64(dir / "params.bin", flat.data(), flat.size());
}

MlpSurrogate load_mlp(const std::filesystem::path& dir) {
    const json manifest = json::parse(io::read_text(dir / "manifest.json"));
    const auto dims = manifest.at("dims").get<std::vector<int>>();
    MlpSurrogate net = make_mlp(dims, activation_from_string(manifest.at("activation")), 0);
    const auto flat = io::read_f64(dir / "params.bin");
    std::size_t pos = 0;
    for (int l = 0; l < net.layer_count(); ++l) {
        auto& w = net.weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = flat.at(pos++);
        for (Eigen::Index i = 0; i < net.biases[l].size(); ++i)
            net.biases[l][i] = flat.at(pos++);
    }
    if (pos != flat.size()) throw std::runtime_error("trailing data in params.bin");
    return net;
}

void write_trace_csv(const std::vector<EpochRecord>& trace, const std::filesystem::path& file) {
    std::string text = "epoch,train_loss,val_loss\n";
    char line[128];
    for (const auto& record : trace) {
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g\n", record.epoch, record.train_loss,
                      record.val_loss);
        text += line;
    }
    io::write_text(file, text);
}

}  // namespace surrbench
