#include "sparsecoder/sparse_attention.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sparsecoder {

void AttentionConfig::validate() const {
    if (d_h < 1 || heads < 1 || d_h % heads != 0)
        throw ConfigError("attention: heads must divide d_h");
    if (r < 1 || r > std::min(d_h, d_k()))
        throw ConfigError("attention: rank must satisfy 1 <= r <= min(d_h, d_k)");
    if (w < 2) throw ConfigError("attention: window must be >= 2");
}

SparseAttentionLayer SparseAttentionLayer::init(const AttentionConfig& config,
                                                std::mt19937_64& rng,
                                                const std::string& prefix) {
    config.validate();
    SparseAttentionLayer layer;
    layer.config = config;
    const int dk = config.d_k();
    const double scale = 0.02;
    auto make_params = [&](std::vector<Param>& vec, const char* tag, int rows, int cols,
                           bool gaussian) {
        for (int h = 0; h < config.heads; ++h) {
            vec.emplace_back(prefix + "." + tag + std::to_string(h), rows, cols);
            if (gaussian) fill_gaussian(vec.back().value, rng, scale);
        }
    };
    make_params(layer.W_Q, "w_q", config.d_h, dk, true);
    make_params(layer.W_K, "w_k", config.d_h, dk, true);
    make_params(layer.W_V, "w_v", config.d_h, dk, true);
    // LoRA pairs: B zero so B*A vanishes at init, A gaussian.
    make_params(layer.B_Q, "b_q", config.d_h, config.r, false);
    make_params(layer.B_K, "b_k", config.d_h, config.r, false);
    make_params(layer.B_V, "b_v", config.d_h, config.r, false);
    make_params(layer.A_Q, "a_q", config.r, dk, true);
    make_params(layer.A_K, "a_k", config.r, dk, true);
    make_params(layer.A_V, "a_v", config.r, dk, true);
    layer.W_O = Param(prefix + ".w_o", config.d_h, config.d_h);
    fill_gaussian(layer.W_O.value, rng, scale);
    return layer;
}

void SparseAttentionLayer::collect_params(std::vector<Param*>& out) {
    for (auto* vec : {&W_Q, &W_K, &W_V, &B_Q, &B_K, &B_V, &A_Q, &A_K, &A_V})
        for (Param& p : *vec) out.push_back(&p);
    out.push_back(&W_O);
}

int64_t adapter_param_count(const AttentionConfig& config) {
    return static_cast<int64_t>(3) * config.r * (config.d_h + config.d_k()) * config.heads;
}

int64_t attention_block_param_count(const AttentionConfig& config) {
    const int64_t qkv = static_cast<int64_t>(3) * config.d_h * config.d_k() * config.heads;
    return qkv + static_cast<int64_t>(config.d_h) * config.d_h;
}

namespace {

/// q_row = h_row * W, plus (h_row * B) * A when adapted.
void project_rows(const Matrix& H, const Matrix& W, const Matrix& B, const Matrix& A,
                  const std::vector<bool>& adapted, Matrix& out) {
    const int n = H.rows;
    const int dk = W.cols;
    const int r = B.cols;
#pragma omp parallel for schedule(static) if (n > 16)
    for (int i = 0; i < n; ++i) {
        const double* h = H.row(i);
        double* q = out.row(i);
        for (int c = 0; c < dk; ++c) {
            double s = 0.0;
            for (int d = 0; d < H.cols; ++d) s += h[d] * W.at(d, c);
            q[c] = s;
        }
        if (adapted[i]) {
            for (int k = 0; k < r; ++k) {
                double u = 0.0;
                for (int d = 0; d < H.cols; ++d) u += h[d] * B.at(d, k);
                if (u == 0.0) continue;
                for (int c = 0; c < dk; ++c) q[c] += u * A.at(k, c);
            }
        }
    }
}

std::vector<bool> global_row_flags(const AttentionMaskSpec& spec) {
    std::vector<bool> flags(spec.n, false);
    for (int p : spec.global_positions) flags[p] = true;
    return flags;
}

}  // namespace

HeadProjections project(const SparseAttentionLayer& layer, const Matrix& H,
                        const AttentionMaskSpec& spec) {
    if (H.cols != layer.config.d_h) throw ShapeError("project: H width != d_h");
    if (H.rows != spec.n) throw ShapeError("project: H rows != mask n");
    const int dk = layer.config.d_k();
    const auto adapted = global_row_flags(spec);
    HeadProjections proj;
    for (int h = 0; h < layer.config.heads; ++h) {
        proj.Q.emplace_back(H.rows, dk);
        proj.K.emplace_back(H.rows, dk);
        proj.V.emplace_back(H.rows, dk);
        project_rows(H, layer.W_Q[h].value, layer.B_Q[h].value, layer.A_Q[h].value, adapted,
                     proj.Q.back());
        project_rows(H, layer.W_K[h].value, layer.B_K[h].value, layer.A_K[h].value, adapted,
                     proj.K.back());
        project_rows(H, layer.W_V[h].value, layer.B_V[h].value, layer.A_V[h].value, adapted,
                     proj.V.back());
    }
    return proj;
}

std::vector<Matrix> attend(const SparseAttentionLayer& layer, const HeadProjections& proj,
                           const AttentionMaskSpec& spec) {
    const MaskCsr csr = to_csr(spec);
    const int dk = layer.config.d_k();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
    std::vector<Matrix> out;
    for (int h = 0; h < layer.config.heads; ++h) {
        const Matrix& Q = proj.Q[h];
        const Matrix& K = proj.K[h];
        const Matrix& V = proj.V[h];
        if (Q.rows != spec.n) throw ShapeError("attend: Q rows != mask n");
        Matrix O(spec.n, dk);
#pragma omp parallel
        {
            std::vector<double> scores;
#pragma omp for schedule(dynamic, 16)
            for (int i = 0; i < spec.n; ++i) {
                const int len = csr.row_len(i);
                const int* cols = csr.row(i);
                scores.resize(len);
                const double* q = Q.row(i);
                double max_s = -1e300;
                for (int t = 0; t < len; ++t) {
                    const double* k = K.row(cols[t]);
                    double s = 0.0;
                    for (int d = 0; d < dk; ++d) s += q[d] * k[d];
                    scores[t] = s * inv_sqrt;
                    max_s = std::max(max_s, scores[t]);
                }
                double denom = 0.0;
                for (int t = 0; t < len; ++t) {
                    scores[t] = std::exp(scores[t] - max_s);
                    denom += scores[t];
                }
                double* o = O.row(i);
                for (int t = 0; t < len; ++t) {
                    const double p = scores[t] / denom;
                    const double* v = V.row(cols[t]);
                    for (int d = 0; d < dk; ++d) o[d] += p * v[d];
                }
            }
        }
        out.push_back(std::move(O));
    }
    return out;
}

Matrix attention_forward(const SparseAttentionLayer& layer, const Matrix& H,
                         const AttentionMaskSpec& spec, AttentionCache* cache) {
    const int dk = layer.config.d_k();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
    HeadProjections proj = project(layer, H, spec);
    MaskCsr csr = to_csr(spec);

    Matrix concat(spec.n, layer.config.d_h);
    std::vector<std::vector<double>> weights(layer.config.heads);
    for (int h = 0; h < layer.config.heads; ++h) {
        const Matrix& Q = proj.Q[h];
        const Matrix& K = proj.K[h];
        const Matrix& V = proj.V[h];
        std::vector<double>& wts = weights[h];
        wts.resize(csr.nnz());
#pragma omp parallel for schedule(dynamic, 16)
        for (int i = 0; i < spec.n; ++i) {
            const int len = csr.row_len(i);
            const int* cols = csr.row(i);
            double* row_w = wts.data() + csr.row_ptr[i];
            const double* q = Q.row(i);
            double max_s = -1e300;
            for (int t = 0; t < len; ++t) {
                const double* k = K.row(cols[t]);
                double s = 0.0;
                for (int d = 0; d < dk; ++d) s += q[d] * k[d];
                row_w[t] = s * inv_sqrt;
                max_s = std::max(max_s, row_w[t]);
            }
            double denom = 0.0;
            for (int t = 0; t < len; ++t) {
                row_w[t] = std::exp(row_w[t] - max_s);
                denom += row_w[t];
            }
            double* o = concat.row(i) + h * dk;
            for (int t = 0; t < len; ++t) {
                row_w[t] /= denom;
                const double* v = V.row(cols[t]);
                for (int d = 0; d < dk; ++d) o[d] += row_w[t] * v[d];
            }
        }
    }

    Matrix out = matmul(concat, layer.W_O.value);
    if (cache) {
        cache->H_in = H;
        cache->proj = std::move(proj);
        cache->csr = std::move(csr);
        cache->weights = std::move(weights);
        cache->concat = std::move(concat);
    }
    return out;
}

Matrix attention_backward(SparseAttentionLayer& layer, const AttentionCache& cache,
                          const Matrix& d_out, const AttentionMaskSpec& spec) {
    const int n = spec.n;
    const int dk = layer.config.d_k();
    const int heads = layer.config.heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
    const auto adapted = global_row_flags(spec);

    // Output projection.
    matmul_tn_acc(cache.concat, d_out, layer.W_O.grad);
    Matrix d_concat = matmul_nt(d_out, layer.W_O.value);

    // Heads run in parallel into private dH buffers; the final reduction is
    // serial in head order so results are bitwise reproducible.
    std::vector<Matrix> dH_heads(heads);
#pragma omp parallel for schedule(static) if (heads > 1)
    for (int h = 0; h < heads; ++h) {
        Matrix& dH = dH_heads[h];
        dH = Matrix(n, layer.config.d_h);
        const Matrix& Q = cache.proj.Q[h];
        const Matrix& K = cache.proj.K[h];
        const Matrix& V = cache.proj.V[h];
        const std::vector<double>& wts = cache.weights[h];
        Matrix dQ(n, dk), dK(n, dk), dV(n, dk);
        std::vector<double> dp;

        for (int i = 0; i < n; ++i) {
            const int len = cache.csr.row_len(i);
            const int* cols = cache.csr.row(i);
            const double* row_w = wts.data() + cache.csr.row_ptr[i];
            const double* go = d_concat.row(i) + h * dk;
            // dp_j = go . v_j ;  ds_j = p_j (dp_j - sum_k p_k dp_k)
            double dot = 0.0;
            dp.resize(len);
            for (int t = 0; t < len; ++t) {
                const double* v = V.row(cols[t]);
                double s = 0.0;
                for (int d = 0; d < dk; ++d) s += go[d] * v[d];
                dp[t] = s;
                dot += row_w[t] * s;
                double* dv = dV.row(cols[t]);
                for (int d = 0; d < dk; ++d) dv[d] += row_w[t] * go[d];
            }
            const double* q = Q.row(i);
            double* dq = dQ.row(i);
            for (int t = 0; t < len; ++t) {
                const double ds = row_w[t] * (dp[t] - dot) * inv_sqrt;
                if (ds == 0.0) continue;
                const double* k = K.row(cols[t]);
                double* dkr = dK.row(cols[t]);
                for (int d = 0; d < dk; ++d) {
                    dq[d] += ds * k[d];
                    dkr[d] += ds * q[d];
                }
            }
        }

        // Back through the projections; adapted rows add the low-rank path.
        auto back_projection = [&](const Matrix& dX, Param& W, Param& B, Param& A) {
            for (int i = 0; i < n; ++i) {
                const double* dx = dX.row(i);
                const double* hrow = cache.H_in.row(i);
                double* dh = dH.row(i);
                for (int c = 0; c < dk; ++c) {
                    const double dxc = dx[c];
                    if (dxc == 0.0) continue;
                    for (int d = 0; d < layer.config.d_h; ++d) {
                        W.grad.at(d, c) += hrow[d] * dxc;   // dW += H^T dX
                        dh[d] += dxc * W.value.at(d, c);    // dH += dX W^T
                    }
                }
                if (!adapted[i]) continue;
                // u = h B (r-vector); dA += u^T dX_i ; dB += h^T (dX_i A^T);
                // dH_i += (dX_i A^T) B^T
                for (int k = 0; k < layer.config.r; ++k) {
                    double u = 0.0;
                    for (int d = 0; d < layer.config.d_h; ++d) u += hrow[d] * B.value.at(d, k);
                    double vra = 0.0;  // (dX_i A^T)_k
                    const double* arow = A.value.row(k);
                    for (int c = 0; c < dk; ++c) vra += dx[c] * arow[c];
                    double* da = A.grad.row(k);
                    for (int c = 0; c < dk; ++c) da[c] += u * dx[c];
                    for (int d = 0; d < layer.config.d_h; ++d) {
                        B.grad.at(d, k) += hrow[d] * vra;
                        dh[d] += vra * B.value.at(d, k);
                    }
                }
            }
        };
        back_projection(dQ, layer.W_Q[h], layer.B_Q[h], layer.A_Q[h]);
        back_projection(dK, layer.W_K[h], layer.B_K[h], layer.A_K[h]);
        back_projection(dV, layer.W_V[h], layer.B_V[h], layer.A_V[h]);
    }
    Matrix dH(n, layer.config.d_h);
    for (int h = 0; h < heads; ++h) add_inplace(dH, dH_heads[h]);
    return dH;
}

Matrix dense_attention_forward(const SparseAttentionLayer& layer, const Matrix& H,
                               size_t* workspace_bytes) {
    const int n = H.rows;
    const int dk = layer.config.d_k();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
    const AttentionMaskSpec no_globals(n, 2, {}, {});
    const auto adapted = global_row_flags(no_globals);

    Matrix concat(n, layer.config.d_h);
    // One n x n score matrix, reused across heads: the quadratic term.
    Matrix scores(n, n);
    size_t ws = scores.size() * sizeof(double);
    for (int h = 0; h < layer.config.heads; ++h) {
        Matrix Q(n, dk), K(n, dk), V(n, dk);
        project_rows(H, layer.W_Q[h].value, layer.B_Q[h].value, layer.A_Q[h].value, adapted, Q);
        project_rows(H, layer.W_K[h].value, layer.B_K[h].value, layer.A_K[h].value, adapted, K);
        project_rows(H, layer.W_V[h].value, layer.B_V[h].value, layer.A_V[h].value, adapted, V);
        ws += 3 * Q.size() * sizeof(double);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
            double* srow = scores.row(i);
            const double* q = Q.row(i);
            double max_s = -1e300;
            for (int j = 0; j < n; ++j) {
                const double* k = K.row(j);
                double s = 0.0;
                for (int d = 0; d < dk; ++d) s += q[d] * k[d];
                srow[j] = s * inv_sqrt;
                max_s = std::max(max_s, srow[j]);
            }
            double denom = 0.0;
            for (int j = 0; j < n; ++j) {
                srow[j] = std::exp(srow[j] - max_s);
                denom += srow[j];
            }
            double* o = concat.row(i) + h * dk;
            for (int j = 0; j < n; ++j) {
                const double p = srow[j] / denom;
                const double* v = V.row(j);
                for (int d = 0; d < dk; ++d) o[d] += p * v[d];
            }
        }
    }
    if (workspace_bytes) *workspace_bytes = ws;
    return matmul(concat, layer.W_O.value);
}

Matrix sparse_attention_infer(const SparseAttentionLayer& layer, const Matrix& H,
                              const AttentionMaskSpec& spec, size_t* workspace_bytes) {
    const MaskCsr csr = to_csr(spec);
    HeadProjections proj = project(layer, H, spec);
    const int dk = layer.config.d_k();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
    Matrix concat(spec.n, layer.config.d_h);
    int max_row = 0;
    for (int i = 0; i < spec.n; ++i) max_row = std::max(max_row, csr.row_len(i));
    size_t ws = csr.cols.size() * sizeof(int) + csr.row_ptr.size() * sizeof(int64_t) +
                3 * static_cast<size_t>(layer.config.heads) * spec.n * dk * sizeof(double);
    for (int h = 0; h < layer.config.heads; ++h) {
        const Matrix& Q = proj.Q[h];
        const Matrix& K = proj.K[h];
        const Matrix& V = proj.V[h];
#pragma omp parallel
        {
            std::vector<double> scores(max_row);
#pragma omp for schedule(dynamic, 16)
            for (int i = 0; i < spec.n; ++i) {
                const int len = csr.row_len(i);
                const int* cols = csr.row(i);
                const double* q = Q.row(i);
                double max_s = -1e300;
                for (int t = 0; t < len; ++t) {
                    const double* k = K.row(cols[t]);
                    double s = 0.0;
                    for (int d = 0; d < dk; ++d) s += q[d] * k[d];
                    scores[t] = s * inv_sqrt;
                    max_s = std::max(max_s, scores[t]);
                }
                double denom = 0.0;
                for (int t = 0; t < len; ++t) {
                    scores[t] = std::exp(scores[t] - max_s);
                    denom += scores[t];
                }
                double* o = concat.row(i) + h * dk;
                for (int t = 0; t < len; ++t) {
                    const double p = scores[t] / denom;
                    const double* v = V.row(cols[t]);
                    for (int d = 0; d < dk; ++d) o[d] += p * v[d];
                }
            }
        }
    }
    if (workspace_bytes) *workspace_bytes = ws;
    return matmul(concat, layer.W_O.value);
}

}  // namespace sparsecoder
