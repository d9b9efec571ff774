#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace surrbench::io {

// Raw little-endian float64 arrays. Matrices are written row-major with the
// shape recorded in the accompanying JSON manifest.
void write_f64(const std::filesystem::path& file, const double* data, std::size_t count);
std::vector<double> read_f64(const std::filesystem::path& file);

void write_matrix_rowmajor(const std::filesystem::path& file, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_rowmajor(const std::filesystem::path& file, Eigen::Index rows,
                                     Eigen::Index cols);

void write_matrix_colmajor(const std::filesystem::path& file, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_colmajor(const std::filesystem::path& file, Eigen::Index rows,
                                     Eigen::Index cols);

void write_vector(const std::filesystem::path& file, const Eigen::VectorXd& v);
Eigen::VectorXd read_vector(const std::filesystem::path& file);

void write_text(const std::filesystem::path& file, const std::string& text);
std::string read_text(const std::filesystem::path& file);

// FNV-1a content hashes; used to fingerprint run inputs and artifacts.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::filesystem::path& file);
std::string hex64(std::uint64_t value);

}  // namespace surrbench::io
