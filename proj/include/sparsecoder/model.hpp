#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sparsecoder/dataset.hpp"
#include "sparsecoder/matrix.hpp"
#include "sparsecoder/sparse_attention.hpp"
#include "sparsecoder/tokenization.hpp"

namespace sparsecoder {

struct ModelConfig {
    int encoder_layers = 4;
    int decoder_layers = 2;
    int d_h = 128;
    int heads = 4;
    int r = 8;
    int w = 128;
    int cap_G = 64;
    int cap_I = 768;
    double cap_I_fraction = 0.25;
    int ffn_mult = 4;
    int max_code_len = 4096;
    int max_summary_len = 128;
    int vocab_size = 0;  // includes the four specials at the top
    uint64_t seed = 42;

    int pad_id() const { return vocab_size - 4; }
    int bos_id() const { return vocab_size - 3; }
    int eos_id() const { return vocab_size - 2; }
    int unk_id() const { return vocab_size - 1; }

    AttentionConfig attention() const {
        return {d_h, heads, r, w, cap_G, cap_I, cap_I_fraction};
    }
    void validate() const;

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

struct LayerNorm {
    Param gamma, beta;
    LayerNorm() = default;
    LayerNorm(const std::string& name, int dim);

    struct Cache {
        Matrix x;
        std::vector<double> mean, rstd;
    };
    Matrix forward(const Matrix& x, Cache* cache = nullptr) const;
    Matrix backward(const Cache& cache, const Matrix& d_out);
};

struct FeedForward {
    Param W1, b1, W2, b2;
    FeedForward() = default;
    FeedForward(const std::string& name, int d_h, int hidden, std::mt19937_64& rng);

    struct Cache {
        Matrix x, pre_act, act;
    };
    Matrix forward(const Matrix& x, Cache* cache = nullptr) const;
    Matrix backward(const Cache& cache, const Matrix& d_out);
};

/// Dense multi-head attention for the decoder: causal self-attention over
/// summary tokens and full cross-attention onto the encoder states.
struct DenseAttention {
    int d_h = 0, heads = 0;
    std::vector<Param> W_Q, W_K, W_V;
    Param W_O;
    DenseAttention() = default;
    DenseAttention(const std::string& name, int d_h, int heads, std::mt19937_64& rng);

    struct Cache {
        Matrix q_in, kv_in;
        std::vector<Matrix> Q, K, V;       // per head
        std::vector<Matrix> weights;       // per head, n_q x n_kv
        Matrix concat;
    };
    /// With zero key/value rows the output is all zeros.
    Matrix forward(const Matrix& q_in, const Matrix& kv_in, bool causal,
                   Cache* cache = nullptr) const;
    /// Returns {d_q_in, d_kv_in}.
    std::pair<Matrix, Matrix> backward(const Cache& cache, const Matrix& d_out, bool causal);
};

struct EncoderLayer {
    LayerNorm ln1, ln2;
    SparseAttentionLayer attn;
    FeedForward ffn;
};

struct DecoderLayer {
    LayerNorm ln1, ln2, ln3;
    DenseAttention self_attn, cross_attn;
    FeedForward ffn;
};

// ---------------------------------------------------------------------------
// Training data
// ---------------------------------------------------------------------------

/// One prepared example: code tokens plus their sparse-attention position
/// sets, and the target summary tokens (no BOS/EOS; those are added by the
/// teacher-forcing step).
struct TrainExample {
    std::vector<int> code_ids;
    PositionSets positions;
    std::vector<int> summary_ids;
};

struct TrainHyper {
    double lr = 5e-5;
    int batch = 16;
    int epochs = 10;
    int patience = 2;       // early stopping on dev BLEU
    int max_steps = -1;     // optional hard cap, -1 = none
    uint64_t seed = 42;
};

struct TrainState {
    int64_t step = 0;
    double first_loss = 0.0;
    double final_loss = 0.0;
    double best_dev_metric = -1.0;
    int epochs_since_improvement = 0;
    int epochs_run = 0;
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

class Model {
  public:
    explicit Model(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }

    /// Encoder over code tokens; trailing PAD tokens are dropped from the
    /// computation entirely. Throws LengthError when n > max_code_len.
    Matrix encode_file(const std::vector<int>& code_ids, const PositionSets& positions) const;

    /// Teacher-forced loss in nats per summary token.
    double loss(const TrainExample& example);

    enum class Decoding { Greedy, Beam };
    std::vector<int> generate(const std::vector<int>& code_ids, const PositionSets& positions,
                              Decoding strategy = Decoding::Greedy, int beam_width = 1) const;

    /// Adam training with per-epoch dev BLEU early stopping. When
    /// checkpoint_dir is non-empty the best-dev checkpoint is kept there.
    TrainState train(const std::vector<TrainExample>& train_split,
                     const std::vector<TrainExample>& dev_split, const TrainHyper& hyper,
                     const std::string& checkpoint_dir = "");

    double dev_bleu(const std::vector<TrainExample>& dev_split) const;

    void save(const std::string& dir) const;
    static Model load(const std::string& dir);

    std::vector<Param*> parameters();
    int64_t parameter_count() const;

    /// Builds the mask spec this model would use for the given input.
    AttentionMaskSpec mask_for(int n, const PositionSets& positions) const;

  private:
    ModelConfig config_;
    Param tok_emb_;      // vocab x d_h
    Param pos_emb_enc_;  // max_code_len x d_h
    Param pos_emb_dec_;  // max_summary_len x d_h
    std::vector<EncoderLayer> encoder_;
    std::vector<DecoderLayer> decoder_;
    LayerNorm ln_enc_f_, ln_dec_f_;
    Param W_out_, b_out_;

    struct EncCache;
    struct DecCache;
    Matrix encode_cached(const std::vector<int>& ids, const PositionSets& positions,
                         EncCache* cache) const;
    Matrix decode_logits(const std::vector<int>& dec_input, const Matrix& enc_out,
                         DecCache* cache) const;
    double forward_backward(const TrainExample& example, double scale);

    friend struct ModelTestAccess;
};

/// Turns dataset records into train examples with the given tokenizer.
/// The record code is re-analyzed for identifier positions.
std::vector<TrainExample> prepare_examples(const std::vector<SummaryRecord>& records,
                                           const BpeTokenizer& tokenizer,
                                           const ModelConfig& config);

std::string decode_ids(const BpeTokenizer& tokenizer, const std::vector<int>& ids,
                       const ModelConfig& config);

}  // namespace sparsecoder
