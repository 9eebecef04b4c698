#include "sparsecoder/matrix.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sparsecoder {

namespace {
void check_inner(int a, int b, const char* op) {
    if (a != b) throw ShapeError(std::string("matmul inner dimension mismatch in ") + op);
}
}  // namespace

void matmul_acc(const Matrix& A, const Matrix& B, Matrix& C) {
    check_inner(A.cols, B.rows, "matmul");
    if (C.rows != A.rows || C.cols != B.cols) throw ShapeError("matmul output shape mismatch");
#pragma omp parallel for schedule(static) if (A.rows > 8)
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row(i);
        double* crow = C.row(i);
        for (int k = 0; k < A.cols; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = B.row(k);
            for (int j = 0; j < B.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

Matrix matmul(const Matrix& A, const Matrix& B) {
    Matrix C(A.rows, B.cols);
    matmul_acc(A, B, C);
    return C;
}

void matmul_tn_acc(const Matrix& A, const Matrix& B, Matrix& C) {
    check_inner(A.rows, B.rows, "matmul_tn");
    if (C.rows != A.cols || C.cols != B.cols) throw ShapeError("matmul_tn output shape mismatch");
#pragma omp parallel for schedule(static) if (A.cols > 8)
    for (int i = 0; i < A.cols; ++i) {
        double* crow = C.row(i);
        for (int k = 0; k < A.rows; ++k) {
            const double av = A.at(k, i);
            if (av == 0.0) continue;
            const double* brow = B.row(k);
            for (int j = 0; j < B.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

Matrix matmul_tn(const Matrix& A, const Matrix& B) {
    Matrix C(A.cols, B.cols);
    matmul_tn_acc(A, B, C);
    return C;
}

void matmul_nt_acc(const Matrix& A, const Matrix& B, Matrix& C) {
    check_inner(A.cols, B.cols, "matmul_nt");
    if (C.rows != A.rows || C.cols != B.rows) throw ShapeError("matmul_nt output shape mismatch");
#pragma omp parallel for schedule(static) if (A.rows > 8)
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row(i);
        double* crow = C.row(i);
        for (int j = 0; j < B.rows; ++j) {
            const double* brow = B.row(j);
            double s = 0.0;
            for (int k = 0; k < A.cols; ++k) s += arow[k] * brow[k];
            crow[j] += s;
        }
    }
}

Matrix matmul_nt(const Matrix& A, const Matrix& B) {
    Matrix C(A.rows, B.rows);
    matmul_nt_acc(A, B, C);
    return C;
}

void add_inplace(Matrix& A, const Matrix& B) {
    if (!A.same_shape(B)) throw ShapeError("add shape mismatch");
    for (size_t i = 0; i < A.a.size(); ++i) A.a[i] += B.a[i];
}

double max_abs_diff(const Matrix& A, const Matrix& B) {
    if (!A.same_shape(B)) throw ShapeError("max_abs_diff shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < A.a.size(); ++i) m = std::max(m, std::fabs(A.a[i] - B.a[i]));
    return m;
}

void fill_gaussian(Matrix& m, std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : m.a) v = dist(rng);
}

void fill_uniform(Matrix& m, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : m.a) v = dist(rng);
}

void adam_step(std::vector<Param*>& params, const AdamConfig& cfg, int64_t step) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (Param* p : params) {
        for (size_t i = 0; i < p->value.a.size(); ++i) {
            const double g = p->grad.a[i];
            double& m1 = p->m1.a[i];
            double& m2 = p->m2.a[i];
            m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * g;
            m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * g * g;
            const double mhat = m1 / bc1;
            const double vhat = m2 / bc2;
            p->value.a[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

void TensorArchive::save(const std::string& dir, const std::vector<const Param*>& params) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream bin(dir + "/tensors.bin", std::ios::binary);
    if (!bin) throw IoError("cannot write " + dir + "/tensors.bin");
    nlohmann::json manifest = nlohmann::json::array();
    uint64_t offset = 0;
    for (const Param* p : params) {
        std::vector<float> buf(p->value.a.size());
        for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(p->value.a[i]);
        bin.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
        manifest.push_back({{"name", p->name},
                            {"shape", {p->value.rows, p->value.cols}},
                            {"dtype", "f32"},
                            {"byte_offset", offset}});
        offset += buf.size() * sizeof(float);
    }
    write_file(dir + "/manifest.json", manifest.dump(1));
}

void TensorArchive::load(const std::string& dir, std::vector<Param*>& params) {
    const std::string raw = read_file(dir + "/tensors.bin");
    nlohmann::json manifest = nlohmann::json::parse(read_file(dir + "/manifest.json"));
    if (manifest.size() != params.size())
        throw DataError("tensor archive entry count mismatch");
    for (size_t k = 0; k < params.size(); ++k) {
        const auto& entry = manifest[k];
        Param* p = params[k];
        if (entry.at("name").get<std::string>() != p->name)
            throw DataError("tensor archive name mismatch: " + p->name);
        if (entry.at("dtype").get<std::string>() != "f32")
            throw DataError("unsupported dtype in tensor archive");
        const auto shape = entry.at("shape").get<std::vector<int>>();
        if (shape.size() != 2 || shape[0] != p->value.rows || shape[1] != p->value.cols)
            throw ShapeError("tensor archive shape mismatch: " + p->name);
        const uint64_t off = entry.at("byte_offset").get<uint64_t>();
        const size_t bytes = p->value.a.size() * sizeof(float);
        if (off + bytes > raw.size()) throw DataError("tensor archive truncated");
        const float* src = reinterpret_cast<const float*>(raw.data() + off);
        for (size_t i = 0; i < p->value.a.size(); ++i) p->value.a[i] = static_cast<double>(src[i]);
    }
}

}  // namespace sparsecoder
