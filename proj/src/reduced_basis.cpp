#include "surrbench/reduced_basis.hpp"

#include "surrbench/io.hpp"
#include "surrbench/rng.hpp"

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>

namespace surrbench {

using nlohmann::json;

KsSample sample_ks(const SmoothnessSpec& spec, const Eigen::MatrixXd& basis_functions,
                   std::uint64_t seed) {
    if (spec.d_true < 1) throw std::invalid_argument("d_true must be positive");
    if (basis_functions.cols() < spec.d_true)
        throw std::invalid_argument("basis has fewer functions than d_true");

    Rng rng(seed);
    Eigen::VectorXd c(spec.d_true);
    for (int j = 0; j < spec.d_true; ++j) c[j] = rng.symmetric();

    Eigen::VectorXd scaled(spec.d_true);
    for (int j = 0; j < spec.d_true; ++j) scaled[j] = c[j] * spec.lambda_pow_s(j + 1);

    return {c, basis_functions.leftCols(spec.d_true) * scaled};
}

ReducedBasis empirical_pca(const Eigen::MatrixXd& samples, std::shared_ptr<const SparseMat> gram,
                           const std::string& gram_tag, int rank) {
    const Eigen::Index m = samples.rows();
    const Eigen::Index n = samples.cols();
    if (n < 2) throw std::invalid_argument("empirical_pca needs at least 2 samples");
    if (rank < 0 || rank > std::min<Eigen::Index>(m, n - 1))
        throw std::invalid_argument("empirical_pca rank out of range");
    if (!gram || gram->rows() != m) throw std::invalid_argument("gram matrix shape mismatch");

    ReducedBasis out;
    out.gram_tag = gram_tag;
    out.gram = gram;
    out.mean = samples.rowwise().mean();

    Eigen::MatrixXd centered = samples.colwise() - out.mean;
    Eigen::MatrixXd cov = centered.transpose() * (*gram * centered);  // N x N

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw std::runtime_error("pca eigendecomposition failed");

    // eigenvalues come ascending; walk from the top
    const Eigen::VectorXd& values = eig.eigenvalues();
    const double sigma_max = std::sqrt(std::max(0.0, values[n - 1]));

    int effective = 0;
    Eigen::VectorXd energy(rank);
    Eigen::MatrixXd basis(m, rank);
    for (int k = 0; k < rank; ++k) {
        const double ev = values[n - 1 - k];
        const double sigma = std::sqrt(std::max(0.0, ev));
        if (!(sigma > 1e-12 * sigma_max) || sigma == 0.0) break;  // rank-deficient tail
        Eigen::VectorXd dir = centered * eig.eigenvectors().col(n - 1 - k) / sigma;
        // deterministic sign: largest-magnitude entry positive
        Eigen::Index arg = 0;
        dir.cwiseAbs().maxCoeff(&arg);
        if (dir[arg] < 0.0) dir = -dir;
        basis.col(k) = dir;
        energy[k] = ev;
        ++effective;
    }
    out.basis = basis.leftCols(effective);
    out.captured_energy = energy.head(effective);
    out.discarded_energy = 0.0;
    for (Eigen::Index k = effective; k < n; ++k)
        out.discarded_energy += std::max(0.0, values[n - 1 - k]);
    return out;
}

CoefficientVector encode(const ReducedBasis& basis, const ScalarField& x) {
    if (x.size() != basis.mean.size()) throw std::invalid_argument("encode: dimension mismatch");
    return basis.basis.transpose() * (*basis.gram * (x - basis.mean));
}

ScalarField decode(const ReducedBasis& basis, const CoefficientVector& c) {
    if (c.size() > basis.rank()) throw std::invalid_argument("decode: too many coefficients");
    return basis.mean + basis.basis.leftCols(c.size()) * c;
}

CoefficientVector encode_tangent(const ReducedBasis& basis, const ScalarField& z) {
    if (z.size() != basis.mean.size())
        throw std::invalid_argument("encode_tangent: dimension mismatch");
    return basis.basis.transpose() * (*basis.gram * z);
}

double xs_weighted_seminorm(const Eigen::MatrixXd& jacobian, double s_tilde) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < jacobian.cols(); ++i) {
        const double w = std::pow(1.0 / static_cast<double>(i + 1), s_tilde);
        total += (w * jacobian.col(i)).squaredNorm();
    }
    return std::sqrt(total);
}

Eigen::VectorXd lambda_pow(int count, double exponent) {
    Eigen::VectorXd out(count);
    for (int i = 0; i < count; ++i)
        out[i] = std::pow(1.0 / static_cast<double>(i + 1), exponent);
    return out;
}

void save_basis(const ReducedBasis& basis, const std::filesystem::path& dir,
                const std::string& stem) {
    std::filesystem::create_directories(dir);
    io::write_vector(dir / (stem + "_mean.bin"), basis.mean);
    io::write_matrix_colmajor(dir / (stem + "_basis.bin"), basis.basis);

    json manifest;
    manifest["dof_count"] = basis.mean.size();
    manifest["rank"] = basis.rank();
    manifest["gram"] = basis.gram_tag;
    manifest["layout"] = "basis column-major float64 LE, mean float64 LE";
    manifest["captured_energy"] = std::vector<double>(
        basis.captured_energy.data(), basis.captured_energy.data() + basis.captured_energy.size());
    manifest["discarded_energy"] = basis.discarded_energy;
    io::write_text(dir / (stem + "_manifest.json"), manifest.dump(2) + "\n");
}

ReducedBasis load_basis(const std::filesystem::path& dir, const std::string& stem,
                        std::shared_ptr<const SparseMat> gram) {
    const json manifest = json::parse(io::read_text(dir / (stem + "_manifest.json")));
    ReducedBasis out;
    out.gram_tag = manifest.at("gram").get<std::string>();
    out.gram = std::move(gram);
    const auto dofs = manifest.at("dof_count").get<Eigen::Index>();
    const auto rank = manifest.at("rank").get<Eigen::Index>();
    out.mean = io::read_vector(dir / (stem + "_mean.bin"));
    out.basis = io::read_matrix_colmajor(dir / (stem + "_basis.bin"), dofs, rank);
    const auto energy = manifest.at("captured_energy").get<std::vector<double>>();
    out.captured_energy =
        Eigen::Map<const Eigen::VectorXd>(energy.data(), static_cast<Eigen::Index>(energy.size()));
    out.discarded_energy = manifest.at("discarded_energy").get<double>();
    if (out.mean.size() != dofs) throw std::runtime_error("basis mean has unexpected size");
    return out;
}

}  // namespace surrbench
