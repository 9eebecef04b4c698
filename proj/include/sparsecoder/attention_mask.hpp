#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sparsecoder/util.hpp"

namespace sparsecoder {

/// Structural description of the allowed attention pairs: a sliding-window
/// band of width w, full rows/columns for global token positions, and a
/// clique over non-global identifier positions. The dense n-by-n matrix is
/// never materialized here; a pair is either enumerable or absent.
struct AttentionMaskSpec {
    int n = 0;
    int w = 2;
    std::vector<int> global_positions;      // sorted, disjoint from ident_positions
    std::vector<int> ident_positions;       // sorted; the I-G set

    AttentionMaskSpec() = default;
    AttentionMaskSpec(int n_, int w_, std::vector<int> global_pos, std::vector<int> ident_pos);

    int half_window() const { return w / 2; }

    /// Full attention over n positions (window covers everything).
    static AttentionMaskSpec full(int n);
    /// Pure sliding-window band.
    static AttentionMaskSpec local_only(int n, int w);
};

bool allows_local(const AttentionMaskSpec& spec, int i, int j);
bool allows_global(const AttentionMaskSpec& spec, int i, int j);
bool allows_identifier(const AttentionMaskSpec& spec, int i, int j);
/// Union of the three patterns (element-wise max over {0, -inf} masks).
bool allows(const AttentionMaskSpec& spec, int i, int j);

/// Exact number of allowed pairs. Bounded by n*(w+1) + 2*n*|G| + |I-G|^2.
int64_t nonzero_count(const AttentionMaskSpec& spec);

/// Per-pattern pair counts (each pattern alone, before union).
struct PatternCounts {
    int64_t local = 0;
    int64_t global = 0;
    int64_t identifier = 0;   // |I-G|^2
    int64_t union_total = 0;  // == nonzero_count
};
PatternCounts count_by_pattern(const AttentionMaskSpec& spec);

/// Invokes fn(i, j) for each allowed pair exactly once, row-major order.
void iter_allowed_pairs(const AttentionMaskSpec& spec, const std::function<void(int, int)>& fn);

/// Appends the allowed columns of row i, ascending and deduplicated.
void row_columns(const AttentionMaskSpec& spec, int i, std::vector<int>& out);

/// Compressed sparse row view of the allowed-pair set; drives the kernels.
struct MaskCsr {
    std::vector<int64_t> row_ptr;  // size n+1
    std::vector<int> cols;
    int64_t nnz() const { return static_cast<int64_t>(cols.size()); }
    int row_len(int i) const { return static_cast<int>(row_ptr[i + 1] - row_ptr[i]); }
    const int* row(int i) const { return cols.data() + row_ptr[i]; }
};
MaskCsr to_csr(const AttentionMaskSpec& spec);

}  // namespace sparsecoder
