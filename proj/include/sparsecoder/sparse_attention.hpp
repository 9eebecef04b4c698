#pragma once

#include <random>
#include <vector>

#include "sparsecoder/attention_mask.hpp"
#include "sparsecoder/matrix.hpp"

namespace sparsecoder {

struct AttentionConfig {
    int d_h = 128;
    int heads = 4;
    int r = 8;
    int w = 128;
    int cap_G = 64;
    int cap_I = 768;
    double cap_I_fraction = 0.25;

    int d_k() const { return d_h / heads; }
    void validate() const;
};

/// Masked multi-head self-attention with shared per-head projections and
/// rank-r adapters that activate on global rows: rows at positions in G are
/// projected with W + B*A, everything else with the shared W. B starts at
/// zero so a fresh layer computes exactly the shared projection.
struct SparseAttentionLayer {
    AttentionConfig config;
    std::vector<Param> W_Q, W_K, W_V;  // per head, d_h x d_k
    std::vector<Param> B_Q, B_K, B_V;  // per head, d_h x r (zero at init)
    std::vector<Param> A_Q, A_K, A_V;  // per head, r x d_k (gaussian at init)
    Param W_O;                         // d_h x d_h

    static SparseAttentionLayer init(const AttentionConfig& config, std::mt19937_64& rng,
                                     const std::string& name_prefix);
    void collect_params(std::vector<Param*>& out);
};

/// Number of adapter parameters held by one layer: 3 * r * (d_h + d_k) per
/// head (the Q, K and V adapter factor pairs).
int64_t adapter_param_count(const AttentionConfig& config);
/// Shared projection + output parameters of the attention block (no adapters).
int64_t attention_block_param_count(const AttentionConfig& config);

struct HeadProjections {
    std::vector<Matrix> Q, K, V;  // per head, n x d_k
};

/// Eq. 1 with the low-rank global branch; `spec` supplies the global rows.
HeadProjections project(const SparseAttentionLayer& layer, const Matrix& H,
                        const AttentionMaskSpec& spec);

/// Scaled-dot-product attention restricted to the allowed pairs of `spec`.
/// Softmax is stabilized by subtracting the per-row max over allowed scores.
std::vector<Matrix> attend(const SparseAttentionLayer& layer, const HeadProjections& proj,
                           const AttentionMaskSpec& spec);

struct AttentionCache {
    Matrix H_in;
    HeadProjections proj;
    MaskCsr csr;
    std::vector<std::vector<double>> weights;  // per head, softmax weights per nnz
    Matrix concat;                             // n x d_h, heads side by side
};

/// Full layer: project -> attend -> concat -> W_O. Pass a cache to enable
/// attention_backward.
Matrix attention_forward(const SparseAttentionLayer& layer, const Matrix& H,
                         const AttentionMaskSpec& spec, AttentionCache* cache = nullptr);

/// Accumulates parameter gradients and returns dL/dH.
Matrix attention_backward(SparseAttentionLayer& layer, const AttentionCache& cache,
                          const Matrix& d_out, const AttentionMaskSpec& spec);

/// Baseline kernel for the scaling benchmark: full self-attention with the
/// per-head n x n score matrix actually materialized. Reports the peak
/// transient workspace through `workspace_bytes` when non-null.
Matrix dense_attention_forward(const SparseAttentionLayer& layer, const Matrix& H,
                               size_t* workspace_bytes = nullptr);

/// Sparse inference kernel used by the benchmark: no training cache, only
/// per-thread row buffers plus the CSR column structure.
Matrix sparse_attention_infer(const SparseAttentionLayer& layer, const Matrix& H,
                              const AttentionMaskSpec& spec, size_t* workspace_bytes = nullptr);

}  // namespace sparsecoder
