#include "surrbench/datagen.hpp"

#include "surrbench/io.hpp"
#include "surrbench/rng.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace surrbench {

using nlohmann::json;

InputEncoder InputEncoder::pca(std::shared_ptr<const ReducedBasis> basis) {
    InputEncoder enc;
    enc.kind_ = Kind::pca;
    enc.basis_ = std::move(basis);
    enc.d_in_ = enc.basis_->rank();
    return enc;
}

InputEncoder InputEncoder::analytic(std::shared_ptr<const Eigen::MatrixXd> eigenbasis,
                                    std::shared_ptr<const SparseMat> mass, double s, int d_in,
                                    bool unit_scaled) {
    if (!eigenbasis || eigenbasis->cols() < d_in)
        throw std::invalid_argument("analytic encoder needs at least d_in basis functions");
    InputEncoder enc;
    enc.kind_ = unit_scaled ? Kind::analytic_unit : Kind::analytic;
    enc.eigenbasis_ = std::move(eigenbasis);
    enc.mass_ = std::move(mass);
    enc.s_ = s;
    enc.d_in_ = d_in;
    enc.unit_scaled_ = unit_scaled;
    return enc;
}

int InputEncoder::dim() const { return d_in_; }

Eigen::VectorXd InputEncoder::encode(const ScalarField& x) const {
    if (kind_ == Kind::pca) return surrbench::encode(*basis_, x);
    Eigen::VectorXd raw = eigenbasis_->leftCols(d_in_).transpose() * (*mass_ * x);
    if (!unit_scaled_) return raw;
    for (int j = 0; j < d_in_; ++j) raw[j] *= std::pow(static_cast<double>(j + 1), s_);
    return raw;
}

ScalarField InputEncoder::direction(int i) const {
    if (i < 0 || i >= d_in_) throw std::out_of_range("encoder direction index");
    if (kind_ == Kind::pca) return basis_->basis.col(i);
    if (!unit_scaled_) return eigenbasis_->col(i);
    return std::pow(static_cast<double>(i + 1), -s_) * eigenbasis_->col(i);
}

ScalarField InputEncoder::decode(const Eigen::VectorXd& c) const {
    if (c.size() > d_in_) throw std::invalid_argument("encoder decode: too many coefficients");
    if (kind_ == Kind::pca) return surrbench::decode(*basis_, c);
    Eigen::VectorXd scaled = c;
    if (unit_scaled_)
        for (Eigen::Index j = 0; j < c.size(); ++j)
            scaled[j] *= std::pow(static_cast<double>(j + 1), -s_);
    return eigenbasis_->leftCols(c.size()) * scaled;
}

DrawnSamples draw_and_solve(int n, const SmoothnessSpec& spec, const FemOperators& ops,
                            const Eigen::MatrixXd& eigenbasis, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("dataset size must be positive");
    DrawnSamples drawn;
    drawn.seed = seed;
    drawn.s = spec.s;
    drawn.d_true = spec.d_true;
    drawn.coeffs.resize(spec.d_true, n);
    drawn.fields.resize(ops.grid.dof_count(), n);
    drawn.solutions.resize(ops.grid.dof_count(), n);
    for (int k = 0; k < n; ++k) {
        const auto sample =
            sample_ks(spec, eigenbasis, derive_seed(seed, static_cast<std::uint64_t>(k)));
        drawn.coeffs.col(k) = sample.coeffs;
        drawn.fields.col(k) = sample.field;
        DiffusionSystem system(ops, sample.field);
        drawn.solutions.col(k) = system.solve_forward();
        ++drawn.n_solves;
    }
    return drawn;
}

TrainingDataset assemble_dataset(const DrawnSamples& drawn, const FemOperators& ops,
                                 const InputEncoder& encoder, const ReducedBasis& output_basis,
                                 bool with_jacobians, double s_tilde) {
    const int n = static_cast<int>(drawn.fields.cols());
    const int d_in = encoder.dim();
    const int d_out = output_basis.rank();

    TrainingDataset dataset;
    dataset.seed = drawn.seed;
    dataset.s = drawn.s;
    dataset.d_true = drawn.d_true;
    dataset.n_solves = drawn.n_solves;
    dataset.lambda_st = lambda_pow(d_in, s_tilde);
    dataset.data.inputs.resize(n, d_in);
    dataset.data.outputs.resize(n, d_out);
    for (int k = 0; k < n; ++k) {
        dataset.data.inputs.row(k) = encoder.encode(drawn.fields.col(k)).transpose();
        dataset.data.outputs.row(k) = encode(output_basis, drawn.solutions.col(k)).transpose();
    }

    if (with_jacobians) {
        dataset.data.jacobians.reserve(static_cast<std::size_t>(n));
        // one factorization alive at a time, shared by all d_in directions
        for (int k = 0; k < n; ++k) {
            DiffusionSystem system(ops, drawn.fields.col(k));
            system.solve_forward();  // same matrix as the stored solve; not counted again
            Eigen::MatrixXd jac(d_out, d_in);
            for (int i = 0; i < d_in; ++i) {
                ScalarField z = system.solve_tangent(encoder.direction(i));
                ++dataset.n_tangent;
                jac.col(i) = encode_tangent(output_basis, z);
            }
            dataset.data.jacobians.push_back(std::move(jac));
        }
    }
    return dataset;
}

TrainingDataset generate_dataset(int n, const SmoothnessSpec& spec, const FemOperators& ops,
                                 const Eigen::MatrixXd& eigenbasis, const InputEncoder& encoder,
                                 const ReducedBasis& output_basis, bool with_jacobians,
                                 double s_tilde, std::uint64_t seed) {
    DrawnSamples drawn = draw_and_solve(n, spec, ops, eigenbasis, seed);
    return assemble_dataset(drawn, ops, encoder, output_basis, with_jacobians, s_tilde);
}

void save_dataset(const TrainingDataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const int n = dataset.n();
    const auto d_in = dataset.data.inputs.cols();
    const auto d_out = dataset.data.outputs.cols();

    json manifest;
    manifest["kind"] = "dataset";
    manifest["n"] = n;
    manifest["d_in"] = d_in;
    manifest["d_out"] = d_out;
    manifest["seed"] = dataset.seed;
    manifest["s"] = dataset.s;
    manifest["d_true"] = dataset.d_true;
    manifest["n_solves"] = dataset.n_solves;
    manifest["n_tangent"] = dataset.n_tangent;
    manifest["with_jacobians"] = dataset.data.has_jacobians();
    manifest["layout"] = "row-major float64 LE; jacobians.bin rows are d_out x d_in row-major";
    io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");

    io::write_matrix_rowmajor(dir / "inputs.bin", dataset.data.inputs);
    io::write_matrix_rowmajor(dir / "outputs.bin", dataset.data.outputs);
    io::write_vector(dir / "lambda.bin", dataset.lambda_st);
    if (dataset.data.has_jacobians()) {
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(n) * d_out * d_in);
        for (const auto& jac : dataset.data.jacobians)
            for (Eigen::Index i = 0; i < jac.rows(); ++i)
                for (Eigen::Index j = 0; j < jac.cols(); ++j) flat.push_back(jac(i, j));
        io::write_f64(dir / "jacobians.bin", flat.data(), flat.size());
    }
}

TrainingDataset load_dataset(const std::filesystem::path& dir) {
    const json manifest = json::parse(io::read_text(dir / "manifest.json"));
    TrainingDataset dataset;
    const auto n = manifest.at("n").get<Eigen::Index>();
    const auto d_in = manifest.at("d_in").get<Eigen::Index>();
    const auto d_out = manifest.at("d_out").get<Eigen::Index>();
    dataset.seed = manifest.at("seed").get<std::uint64_t>();
    dataset.s = manifest.at("s").get<double>();
    dataset.d_true = manifest.at("d_true").get<int>();
    dataset.n_solves = manifest.at("n_solves").get<long>();
    dataset.n_tangent = manifest.at("n_tangent").get<long>();
    dataset.data.inputs = io::read_matrix_rowmajor(dir / "inputs.bin", n, d_in);
    dataset.data.outputs = io::read_matrix_rowmajor(dir / "outputs.bin", n, d_out);
    dataset.lambda_st = io::read_vector(dir / "lambda.bin");
    if (manifest.at("with_jacobians").get<bool>()) {
        const auto flat = io::read_f64(dir / "jacobians.bin");
        if (static_cast<Eigen::Index>(flat.size()) != n * d_out * d_in)
            throw std::runtime_error("jacobians.bin has unexpected size");
        std::size_t pos = 0;
        for (Eigen::Index k = 0; k < n; ++k) {
            Eigen::MatrixXd jac(d_out, d_in);
            for (Eigen::Index i = 0; i < d_out; ++i)
                for (Eigen::Index j = 0; j < d_in; ++j) jac(i, j) = flat[pos++];
            dataset.data.jacobians.push_back(std::move(jac));
        }
    }
    return dataset;
}

ProbeOperator::ProbeOperator(const FemOperators& ops, const InputEncoder& encoder,
                             const ReducedBasis& output_basis, bool cache_enabled)
    : ops_(ops), encoder_(encoder), output_basis_(output_basis), cache_enabled_(cache_enabled) {}

Eigen::VectorXd ProbeOperator::operator()(const Eigen::VectorXd& c) {
    std::vector<long long> key;
    if (cache_enabled_) {
        key.resize(static_cast<std::size_t>(c.size()));
        for (Eigen::Index i = 0; i < c.size(); ++i)
            key[static_cast<std::size_t>(i)] = std::llround(c[i] * 1e14);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    const auto start = std::chrono::steady_clock::now();
    ScalarField x = encoder_.decode(c);
    DiffusionSystem system(ops_, x);
    const ScalarField& y = system.solve_forward();
    ++solves_;
    solve_seconds_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Eigen::VectorXd out = encode(output_basis_, y);
    if (cache_enabled_) cache_.emplace(std::move(key), out);
    return out;
}

}  // namespace surrbench
