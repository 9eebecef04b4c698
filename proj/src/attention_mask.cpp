#include "sparsecoder/attention_mask.hpp"

#include <algorithm>
#include <cstdlib>

namespace sparsecoder {

namespace {

void validate_positions(const std::vector<int>& pos, int n, const char* what) {
    int prev = -1;
    for (int p : pos) {
        if (p < 0 || p >= n) throw ConfigError(std::string(what) + " position out of range");
        if (p <= prev) throw ConfigError(std::string(what) + " positions must be strictly increasing");
        prev = p;
    }
}

bool contains(const std::vector<int>& sorted, int v) {
    return std::binary_search(sorted.begin(), sorted.end(), v);
}

// Number of elements of `sorted` inside [lo, hi].
int count_in_range(const std::vector<int>& sorted, int lo, int hi) {
    auto a = std::lower_bound(sorted.begin(), sorted.end(), lo);
    auto b = std::upper_bound(sorted.begin(), sorted.end(), hi);
    return static_cast<int>(b - a);
}

}  // namespace

AttentionMaskSpec::AttentionMaskSpec(int n_, int w_, std::vector<int> global_pos,
                                     std::vector<int> ident_pos)
    : n(n_), w(w_), global_positions(std::move(global_pos)), ident_positions(std::move(ident_pos)) {
    if (n < 0) throw ConfigError("mask: n must be non-negative");
    if (w < 2) throw ConfigError("mask: window size must be >= 2");
    std::sort(global_positions.begin(), global_positions.end());
    std::sort(ident_positions.begin(), ident_positions.end());
    validate_positions(global_positions, n, "global");
    validate_positions(ident_positions, n, "identifier");
    for (int p : ident_positions)
        if (contains(global_positions, p))
            throw ConfigError("mask: identifier set must be disjoint from global set");
}

AttentionMaskSpec AttentionMaskSpec::full(int n) {
    return AttentionMaskSpec(n, std::max(2, 2 * n), {}, {});
}

AttentionMaskSpec AttentionMaskSpec::local_only(int n, int w) {
    return AttentionMaskSpec(n, w, {}, {});
}

bool allows_local(const AttentionMaskSpec& spec, int i, int j) {
    return std::abs(i - j) <= spec.half_window();
}

bool allows_global(const AttentionMaskSpec& spec, int i, int j) {
    return contains(spec.global_positions, i) || contains(spec.global_positions, j);
}

bool allows_identifier(const AttentionMaskSpec& spec, int i, int j) {
    return contains(spec.ident_positions, i) && contains(spec.ident_positions, j);
}

bool allows(const AttentionMaskSpec& spec, int i, int j) {
    return allows_local(spec, i, j) || allows_global(spec, i, j) || allows_identifier(spec, i, j);
}

int64_t nonzero_count(const AttentionMaskSpec& spec) {
    const int n = spec.n;
    const int h = spec.half_window();
    const bool band_is_full = h >= n - 1;
    int64_t total = 0;
    for (int i = 0; i < n; ++i) {
        if (band_is_full || contains(spec.global_positions, i)) {
            total += n;
            continue;
        }
        const int lo = std::max(0, i - h);
        const int hi = std::min(n - 1, i + h);
        int64_t row = hi - lo + 1;
        row += spec.global_positions.size() - count_in_range(spec.global_positions, lo, hi);
        if (contains(spec.ident_positions, i))
            row += spec.ident_positions.size() - count_in_range(spec.ident_positions, lo, hi);
        total += row;
    }
    return total;
}

PatternCounts count_by_pattern(const AttentionMaskSpec& spec) {
    PatternCounts out;
    const int n = spec.n;
    const int h = spec.half_window();
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - h);
        const int hi = std::min(n - 1, i + h);
        out.local += hi - lo + 1;
    }
    // Rows and columns of G: 2*n*|G| minus the doubly counted |G|x|G| block.
    const int64_t g = static_cast<int64_t>(spec.global_positions.size());
    out.global = 2 * static_cast<int64_t>(n) * g - g * g;
    const int64_t id = static_cast<int64_t>(spec.ident_positions.size());
    out.identifier = id * id;
    out.union_total = nonzero_count(spec);
    return out;
}

void row_columns(const AttentionMaskSpec& spec, int i, std::vector<int>& out) {
    out.clear();
    const int n = spec.n;
    const int h = spec.half_window();
    if (h >= n - 1 || contains(spec.global_positions, i)) {
        out.resize(n);
        for (int j = 0; j < n; ++j) out[j] = j;
        return;
    }
    const int lo = std::max(0, i - h);
    const int hi = std::min(n - 1, i + h);
    const bool ident_row = contains(spec.ident_positions, i);
    const auto& G = spec.global_positions;
    const auto& I = spec.ident_positions;
    // G and I-G are disjoint, so merging two sorted streams plus the band
    // range yields each column exactly once in ascending order.
    auto merge_outside = [&](int from, int to) {  // half-open [from, to)
        auto g = std::lower_bound(G.begin(), G.end(), from);
        auto it = ident_row ? std::lower_bound(I.begin(), I.end(), from) : I.end();
        while ((g != G.end() && *g < to) || (ident_row && it != I.end() && *it < to)) {
            const bool take_g = g != G.end() && *g < to &&
                                (!ident_row || it == I.end() || *it >= to || *g < *it);
            if (take_g) {
                out.push_back(*g++);
            } else {
                out.push_back(*it++);
            }
        }
    };
    merge_outside(0, lo);
    for (int j = lo; j <= hi; ++j) out.push_back(j);
    merge_outside(hi + 1, n);
}

void iter_allowed_pairs(const AttentionMaskSpec& spec,
                        const std::function<void(int, int)>& fn) {
    std::vector<int> cols;
    for (int i = 0; i < spec.n; ++i) {
        row_columns(spec, i, cols);
        for (int j : cols) fn(i, j);
    }
}

MaskCsr to_csr(const AttentionMaskSpec& spec) {
    MaskCsr csr;
    csr.row_ptr.assign(spec.n + 1, 0);
    std::vector<int> cols;
    for (int i = 0; i < spec.n; ++i) {
        row_columns(spec, i, cols);
        csr.row_ptr[i + 1] = csr.row_ptr[i] + static_cast<int64_t>(cols.size());
        csr.cols.insert(csr.cols.end(), cols.begin(), cols.end());
    }
    return csr;
}

}  // namespace sparsecoder
