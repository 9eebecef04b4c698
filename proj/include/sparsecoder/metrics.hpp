#pragma once

#include <string>
#include <vector>

#include "sparsecoder/util.hpp"

namespace sparsecoder {

/// Metric-side tokenization: lowercase + whitespace split.
std::vector<std::string> metric_tokens(const std::string& text);

/// BLEU-N with uniform weights, add-one smoothing on the n >= 2 precisions
/// and the brevity penalty e^(1 - r/c) for c <= r. Zero for an empty
/// candidate or reference.
double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
            int max_n = 4);

/// Rouge-L F-score, the beta-weighted harmonic mean of LCS precision and
/// recall. Zero when the LCS is empty.
double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference, double beta = 1.2);

/// Meteor with exact unigram matching: the alignment maximizes matches and
/// then minimizes chunks; score = F * (1 - gamma * (ch/m)^beta).
double meteor(const std::vector<std::string>& candidate,
              const std::vector<std::string>& reference, double alpha = 0.9, double beta = 3.0,
              double gamma = 0.5);

struct ExampleScores {
    double bleu = 0.0;
    double rouge_l = 0.0;
    double meteor = 0.0;
};

struct EvalReport {
    double bleu = 0.0;     // macro averages over examples
    double rouge_l = 0.0;
    double meteor = 0.0;
    double corpus_bleu = 0.0;  // pooled n-gram counts variant
    std::vector<ExampleScores> per_example;

    std::string to_json() const;
};

/// Macro-averaged report over (candidate, reference) text pairs; the pooled
/// corpus-level BLEU is reported alongside. DataError on an empty list.
EvalReport evaluate_corpus(const std::vector<std::pair<std::string, std::string>>& pairs);

/// Corpus-level BLEU over pooled n-gram counts (the flag-selectable
/// aggregation mode).
double corpus_bleu(const std::vector<std::pair<std::string, std::string>>& pairs, int max_n = 4);

}  // namespace sparsecoder
