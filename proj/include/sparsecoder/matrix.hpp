#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sparsecoder/util.hpp"

namespace sparsecoder {

/// Dense row-major matrix of doubles. The whole numeric core works in
/// double precision; checkpoints store f32 (see TensorArchive).
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }
    double& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
    size_t size() const { return a.size(); }
    void zero() { std::fill(a.begin(), a.end(), 0.0); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

/// C = A * B
Matrix matmul(const Matrix& A, const Matrix& B);
/// C = A^T * B
Matrix matmul_tn(const Matrix& A, const Matrix& B);
/// C = A * B^T
Matrix matmul_nt(const Matrix& A, const Matrix& B);
/// C += A * B
void matmul_acc(const Matrix& A, const Matrix& B, Matrix& C);
/// C += A^T * B
void matmul_tn_acc(const Matrix& A, const Matrix& B, Matrix& C);
/// C += A * B^T
void matmul_nt_acc(const Matrix& A, const Matrix& B, Matrix& C);

void add_inplace(Matrix& A, const Matrix& B);
double max_abs_diff(const Matrix& A, const Matrix& B);

void fill_gaussian(Matrix& m, std::mt19937_64& rng, double stddev);
void fill_uniform(Matrix& m, std::mt19937_64& rng, double lo, double hi);

/// Trainable tensor with gradient and Adam moments.
struct Param {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix m1;  // first moment
    Matrix m2;  // second moment

    Param() = default;
    Param(std::string n, int r, int c)
        : name(std::move(n)), value(r, c), grad(r, c), m1(r, c), m2(r, c) {}

    void zero_grad() { grad.zero(); }
    size_t count() const { return value.size(); }
};

struct AdamConfig {
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One Adam update over the given parameters; `step` is 1-based.
void adam_step(std::vector<Param*>& params, const AdamConfig& cfg, int64_t step);

/// Flat binary tensor archive: little-endian f32 payload plus a JSON
/// manifest [{name, shape, dtype, byte_offset}]. Values are converted
/// from/to the double-precision in-memory representation on the way
/// through.
struct TensorArchive {
    static void save(const std::string& dir, const std::vector<const Param*>& params);
    static void load(const std::string& dir, std::vector<Param*>& params);
};

}  // namespace sparsecoder
