#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparsecoder/code_analysis.hpp"
#include "sparsecoder/util.hpp"

namespace sparsecoder {

struct ByteSpan {
    uint32_t start = 0;
    uint32_t end = 0;  // half-open
};

struct TokenizedSequence {
    std::vector<int> token_ids;
    std::vector<ByteSpan> spans;
    int n() const { return static_cast<int>(token_ids.size()); }
};

/// Token positions driving the sparse attention patterns. G holds the first
/// sub-tokens of global identifiers, I_minus_G those of all other
/// identifiers; the two sets are disjoint.
struct PositionSets {
    std::vector<int> G;
    std::vector<int> I_minus_G;
};

struct PositionCaps {
    int cap_G = 64;
    int cap_I = 768;             // absolute cap on |I-G|
    double cap_I_fraction = 0.25;  // additional cap: |I-G| <= ceil(fraction * n)
};

/// Byte-pair subword tokenizer. Ids 0..255 are the raw bytes (so any input
/// is encodable); later ids are learned merges. Merges never cross the
/// whitespace/non-whitespace segment boundary.
class BpeTokenizer {
  public:
    /// Trains merges until the vocabulary reaches vocab_size entries or no
    /// pair repeats. Deterministic: ties break on the smaller pair.
    static BpeTokenizer train(const std::vector<std::string>& corpus, int vocab_size);

    TokenizedSequence encode(const std::string& source, int max_len) const;
    std::string decode_token(int id) const;

    int vocab_size() const { return static_cast<int>(vocab_.size()); }

    void save(const std::string& path) const;
    static BpeTokenizer load(const std::string& path);

  private:
    std::vector<std::string> vocab_;                 // id -> byte string
    std::vector<std::pair<int, int>> merges_;        // rank -> (left id, right id)

    friend class BpeTrainer;
};

/// Maps identifier occurrences onto token positions: the first token whose
/// span intersects an occurrence carries its role. Earliest occurrences win
/// when a cap overflows; a position already claimed by G never enters I-G.
PositionSets project_positions(const TokenizedSequence& seq, const IdentifierAnalysis& analysis,
                               const PositionCaps& caps);

}  // namespace sparsecoder
