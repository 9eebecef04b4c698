#include "sparsecoder/tokenization.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace sparsecoder {

namespace {

bool is_ws(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

/// Splits text into maximal whitespace / non-whitespace runs. Merges are
/// confined to one run, so subwords never span a word boundary.
std::vector<std::pair<uint32_t, uint32_t>> segment(const std::string& text) {
    std::vector<std::pair<uint32_t, uint32_t>> out;
    size_t i = 0;
    while (i < text.size()) {
        size_t start = i;
        const bool ws = is_ws(static_cast<unsigned char>(text[i]));
        while (i < text.size() && is_ws(static_cast<unsigned char>(text[i])) == ws) ++i;
        out.emplace_back(static_cast<uint32_t>(start), static_cast<uint32_t>(i));
    }
    return out;
}

struct PairHash {
    size_t operator()(const std::pair<int, int>& p) const {
        return std::hash<int64_t>()((static_cast<int64_t>(p.first) << 32) ^ p.second);
    }
};

}  // namespace

BpeTokenizer BpeTokenizer::train(const std::vector<std::string>& corpus, int vocab_size) {
    if (corpus.empty()) throw ConfigError("tokenizer training corpus is empty");
    if (vocab_size < 256) throw ConfigError("vocab_size must be at least 256");

    BpeTokenizer tok;
    tok.vocab_.reserve(vocab_size);
    for (int b = 0; b < 256; ++b) tok.vocab_.push_back(std::string(1, static_cast<char>(b)));

    // Working segments as id sequences.
    std::vector<std::vector<int>> segs;
    for (const std::string& doc : corpus) {
        for (auto [start, end] : segment(doc)) {
            std::vector<int> ids(end - start);
            for (uint32_t k = start; k < end; ++k)
                ids[k - start] = static_cast<unsigned char>(doc[k]);
            segs.push_back(std::move(ids));
        }
    }

    while (static_cast<int>(tok.vocab_.size()) < vocab_size) {
        // Count adjacent pairs; ties break on the smaller (left, right) pair
        // for determinism.
        std::unordered_map<std::pair<int, int>, int64_t, PairHash> counts;
        for (const auto& seg : segs)
            for (size_t k = 0; k + 1 < seg.size(); ++k)
                ++counts[{seg[k], seg[k + 1]}];
        std::pair<int, int> best{-1, -1};
        int64_t best_count = 0;
        for (const auto& [pair, count] : counts) {
            if (count > best_count || (count == best_count && pair < best)) {
                best = pair;
                best_count = count;
            }
        }
        if (best_count == 0) break;  // nothing left to merge
        const int new_id = static_cast<int>(tok.vocab_.size());
        tok.vocab_.push_back(tok.vocab_[best.first] + tok.vocab_[best.second]);
        tok.merges_.push_back(best);
        for (auto& seg : segs) {
            size_t w = 0;
            for (size_t k = 0; k < seg.size();) {
                if (k + 1 < seg.size() && seg[k] == best.first && seg[k + 1] == best.second) {
                    seg[w++] = new_id;
                    k += 2;
                } else {
                    seg[w++] = seg[k++];
                }
            }
            seg.resize(w);
        }
    }
    return tok;
}

TokenizedSequence BpeTokenizer::encode(const std::string& source, int max_len) const {
    if (max_len < 1) throw ConfigError("max_len must be >= 1");
    // Merge ranks for the classic lowest-rank-first application order.
    std::unordered_map<std::pair<int, int>, int, PairHash> rank;
    for (size_t r = 0; r < merges_.size(); ++r) rank[merges_[r]] = static_cast<int>(r);

    TokenizedSequence out;
    struct Piece {
        int id;
        uint32_t start, end;
    };
    std::vector<Piece> pieces;
    for (auto [seg_start, seg_end] : segment(source)) {
        pieces.clear();
        for (uint32_t k = seg_start; k < seg_end; ++k)
            pieces.push_back({static_cast<int>(static_cast<unsigned char>(source[k])), k, k + 1});
        while (pieces.size() > 1) {
            int best_rank = INT32_MAX;
            size_t best_at = 0;
            for (size_t k = 0; k + 1 < pieces.size(); ++k) {
                auto it = rank.find({pieces[k].id, pieces[k + 1].id});
                if (it != rank.end() && it->second < best_rank) {
                    best_rank = it->second;
                    best_at = k;
                }
            }
            if (best_rank == INT32_MAX) break;
            const auto merged = merges_[best_rank];
            // Apply this merge at every eligible site, left to right.
            std::vector<Piece> next;
            next.reserve(pieces.size());
            for (size_t k = 0; k < pieces.size();) {
                if (k + 1 < pieces.size() && pieces[k].id == merged.first &&
                    pieces[k + 1].id == merged.second) {
                    next.push_back({256 + best_rank, pieces[k].start, pieces[k + 1].end});
                    k += 2;
                } else {
                    next.push_back(pieces[k++]);
                }
            }
            pieces = std::move(next);
        }
        for (const Piece& p : pieces) {
            if (out.n() >= max_len) return out;
            out.token_ids.push_back(p.id);
            out.spans.push_back({p.start, p.end});
        }
    }
    return out;
}

std::string BpeTokenizer::decode_token(int id) const {
    if (id < 0 || id >= vocab_size()) throw DataError("token id out of range");
    return vocab_[id];
}

void BpeTokenizer::save(const std::string& path) const {
    nlohmann::json j;
    // Vocabulary entries are raw byte strings, stored as arrays of byte
    // values so the JSON stays valid for non-UTF-8 merges.
    nlohmann::json vocab = nlohmann::json::array();
    for (const std::string& entry : vocab_) {
        nlohmann::json bytes = nlohmann::json::array();
        for (unsigned char c : entry) bytes.push_back(static_cast<int>(c));
        vocab.push_back(std::move(bytes));
    }
    j["vocab"] = std::move(vocab);
    nlohmann::json merges = nlohmann::json::array();
    for (const auto& [l, r] : merges_) merges.push_back({l, r});
    j["merges"] = std::move(merges);
    write_file(path, j.dump());
}

BpeTokenizer BpeTokenizer::load(const std::string& path) {
    nlohmann::json j = nlohmann::json::parse(read_file(path));
    BpeTokenizer tok;
    for (const auto& entry : j.at("vocab")) {
        std::string s;
        for (const auto& b : entry) s.push_back(static_cast<char>(b.get<int>()));
        tok.vocab_.push_back(std::move(s));
    }
    for (const auto& m : j.at("merges")) tok.merges_.emplace_back(m[0].get<int>(), m[1].get<int>());
    if (tok.vocab_.size() < 256 || tok.merges_.size() + 256 != tok.vocab_.size())
        throw DataError("inconsistent tokenizer file: " + path);
    return tok;
}

PositionSets project_positions(const TokenizedSequence& seq, const IdentifierAnalysis& analysis,
                               const PositionCaps& caps) {
    if (caps.cap_I_fraction <= 0.0 || caps.cap_I_fraction > 1.0)
        throw ConfigError("cap_I_fraction must be in (0, 1]");
    PositionSets out;
    if (!analysis.parse_ok || seq.n() == 0) return out;

    const int n = seq.n();
    const size_t ident_cap = std::min<size_t>(
        caps.cap_I, static_cast<size_t>(std::ceil(caps.cap_I_fraction * n)));

    // First token whose span intersects [start, end), or -1.
    auto first_token = [&](uint32_t start, uint32_t end) -> int {
        int lo = 0, hi = n - 1, found = -1;
        while (lo <= hi) {
            const int mid = (lo + hi) / 2;
            if (seq.spans[mid].end <= start) {
                lo = mid + 1;
            } else {
                if (seq.spans[mid].start < end) found = mid;
                hi = mid - 1;
            }
        }
        if (found >= 0 && seq.spans[found].start < end && seq.spans[found].end > start) return found;
        return -1;
    };

    std::vector<bool> in_G(n, false), in_I(n, false);
    // Global occurrences claim positions first so the sets stay disjoint.
    for (const auto& occ : analysis.occurrences) {
        if (!occ.is_global) continue;
        if (out.G.size() >= static_cast<size_t>(caps.cap_G)) break;
        const int pos = first_token(occ.start, occ.end);
        if (pos < 0 || in_G[pos]) continue;
        in_G[pos] = true;
        out.G.push_back(pos);
    }
    for (const auto& occ : analysis.occurrences) {
        if (occ.is_global) continue;
        if (out.I_minus_G.size() >= ident_cap) break;
        const int pos = first_token(occ.start, occ.end);
        if (pos < 0 || in_G[pos] || in_I[pos]) continue;
        in_I[pos] = true;
        out.I_minus_G.push_back(pos);
    }
    std::sort(out.G.begin(), out.G.end());
    std::sort(out.I_minus_G.begin(), out.I_minus_G.end());
    return out;
}

}  // namespace sparsecoder
