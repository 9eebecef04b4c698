#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sparsecoder/util.hpp"

namespace sparsecoder {

enum class Split { Train, Dev, Test };
const char* to_string(Split split);

/// One <code file, summary> pair with the filter decisions that let it
/// through.
struct SummaryRecord {
    std::string id;       // stable content hash
    std::string code;
    std::string summary;
    int summary_token_count = 0;
    Split split = Split::Train;
    std::vector<std::string> filter_trace;
};

struct Rejection {
    std::string id;
    std::string path;
    std::string reason;
};

struct CorpusStats {
    size_t count = 0;
    double code_mean = 0.0;
    int code_p25 = 0, code_p50 = 0, code_p75 = 0;
    double summary_mean = 0.0;
    int summary_p25 = 0, summary_p50 = 0, summary_p75 = 0;
};

/// Leading module docstring: the first statement must be a triple-quoted
/// string; returns its content trimmed of surrounding whitespace.
std::optional<std::string> extract_summary(const std::string& source);

/// Source with the leading docstring removed (summary leakage guard).
std::string strip_leading_docstring(const std::string& source);

struct FilterDecision {
    bool keep = false;
    std::string reason;  // "ok" or the rejection reason
};

/// Rules 2-3: summary length in [5, 128] whitespace tokens, and no
/// license/copyright boilerplate.
FilterDecision apply_filters(const std::string& code, const std::string& summary);

/// Rule 4: drops exact duplicates and near-duplicates with token-multiset
/// Jaccard >= threshold; the first record in stable id order survives.
/// Removed records are appended to `rejections` when non-null.
std::vector<SummaryRecord> deduplicate(std::vector<SummaryRecord> records,
                                       double jaccard_threshold = 0.8,
                                       std::vector<Rejection>* rejections = nullptr);

double token_multiset_jaccard(const std::string& a, const std::string& b);

/// Deterministic shuffled split. Dev and test sizes are the ratios rounded
/// to the nearest integer; the remainder trains.
void assign_splits(std::vector<SummaryRecord>& records, double train_ratio, double dev_ratio,
                   double test_ratio, uint64_t seed);

/// Nearest-rank quartiles over tokenized code length and whitespace summary
/// length. code_tokens falls back to whitespace splitting when null.
CorpusStats compute_stats(const std::vector<SummaryRecord>& records,
                          const std::function<int(const std::string&)>* code_tokens = nullptr);

struct PipelineOptions {
    double jaccard_threshold = 0.8;
    double train_ratio = 0.8, dev_ratio = 0.1, test_ratio = 0.1;
    uint64_t seed = 42;
    bool strip_docstring = true;
};

struct PipelineResult {
    std::vector<SummaryRecord> records;
    std::vector<Rejection> rejections;
    CorpusStats stats;
};

/// The four construction rules over (path, content) pairs.
PipelineResult build_dataset(const std::vector<std::pair<std::string, std::string>>& files,
                             const PipelineOptions& options);

/// Reads a directory tree of .py files or a JSONL of {path, content}.
std::vector<std::pair<std::string, std::string>> load_corpus(const std::string& input_path);

void write_dataset(const PipelineResult& result, const std::string& out_dir);
std::vector<SummaryRecord> read_jsonl_records(const std::string& path);

}  // namespace sparsecoder
