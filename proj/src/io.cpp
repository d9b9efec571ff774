#include "surrbench/io.hpp"

#include <bit>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "raw array files are little-endian; big-endian hosts are unsupported");

namespace surrbench::io {

namespace fs = std::filesystem;

void write_f64(const fs::path& file, const double* data, std::size_t count) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * sizeof(double)));
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

std::vector<double> read_f64(const fs::path& file) {
    std::ifstream in(file, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("cannot open for reading: " + file.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes % sizeof(double) != 0)
        throw std::runtime_error("file size not a multiple of 8: " + file.string());
    std::vector<double> data(bytes / sizeof(double));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw std::runtime_error("read failed: " + file.string());
    return data;
}

void write_matrix_rowmajor(const fs::path& file, const Eigen::MatrixXd& m) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    write_f64(file, rm.data(), static_cast<std::size_t>(rm.size()));
}

Eigen::MatrixXd read_matrix_rowmajor(const fs::path& file, Eigen::Index rows, Eigen::Index cols) {
    auto data = read_f64(file);
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw std::runtime_error("unexpected element count in " + file.string());
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    std::copy(data.begin(), data.end(), rm.data());
    return rm;
}

void write_matrix_colmajor(const fs::path& file, const Eigen::MatrixXd& m) {
    write_f64(file, m.data(), static_cast<std::size_t>(m.size()));
}

Eigen::MatrixXd read_matrix_colmajor(const fs::path& file, Eigen::Index rows, Eigen::Index cols) {
    auto data = read_f64(file);
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw std::runtime_error("unexpected element count in " + file.string());
    Eigen::MatrixXd m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

void write_vector(const fs::path& file, const Eigen::VectorXd& v) {
    write_f64(file, v.data(), static_cast<std::size_t>(v.size()));
}

Eigen::VectorXd read_vector(const fs::path& file) {
    auto data = read_f64(file);
    return Eigen::Map<Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
    out << text;
}

std::string read_text(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + file.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t hash_file(const fs::path& file) {
    const std::string text = read_text(file);
    return fnv1a(text.data(), text.size());
}

std::string hex64(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return s;
}

}  // namespace surrbench::io
