#!/usr/bin/env python3
"""Independent reference implementation of the summary metrics.

Computes BLEU-4 (+1 smoothing on n >= 2), Rouge-L (beta = 1.2) and Meteor
(alpha = 0.9, beta = 3.0, gamma = 0.5) for the golden fixture pairs and
writes tests/data/metrics_golden.json. Run from the repository root:

    python3 tests/oracle/metrics_oracle.py

This script is the oracle for the C++ metrics module and must stay
independent of it: everything here is computed from first principles with
plain Python data structures.
"""

import itertools
import json
import math
import os


def tokenize(text):
    return text.lower().split()


def ngram_counts(tokens, n):
    counts = {}
    for i in range(len(tokens) - n + 1):
        g = tuple(tokens[i : i + n])
        counts[g] = counts.get(g, 0) + 1
    return counts


def bleu(cand, ref, max_n=4):
    c, r = len(cand), len(ref)
    if c == 0 or r == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cc = ngram_counts(cand, n)
        rc = ngram_counts(ref, n)
        clipped = sum(min(v, rc.get(g, 0)) for g, v in cc.items())
        total = sum(cc.values())
        if n >= 2:
            clipped += 1
            total += 1
        if clipped == 0 or total == 0:
            return 0.0
        log_sum += math.log(clipped / total) / max_n
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum)


def lcs(a, b):
    m, n = len(a), len(b)
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            if a[i - 1] == b[j - 1]:
                dp[i][j] = dp[i - 1][j - 1] + 1
            else:
                dp[i][j] = max(dp[i - 1][j], dp[i][j - 1])
    return dp[m][n]


def rouge_l(cand, ref, beta=1.2):
    c, r = len(cand), len(ref)
    if c == 0 or r == 0:
        return 0.0
    l = lcs(cand, ref)
    if l == 0:
        return 0.0
    p, rec = l / c, l / r
    return (1 + beta * beta) * p * rec / (rec + beta * beta * p)


def count_chunks(pairs):
    """pairs: list of (cand_pos, ref_pos) sorted by cand_pos."""
    chunks = 0
    prev = None
    for ci, ri in pairs:
        if prev is None or ci != prev[0] + 1 or ri != prev[1] + 1:
            chunks += 1
        prev = (ci, ri)
    return chunks


def meteor_alignment(cand, ref):
    """Exhaustive max-matches then min-chunks alignment on exact unigrams."""
    words = set(cand) & set(ref)
    groups = []
    for w in sorted(words):
        cpos = [i for i, t in enumerate(cand) if t == w]
        rpos = [j for j, t in enumerate(ref) if t == w]
        k = min(len(cpos), len(rpos))
        groups.append((cpos, rpos, k))
    m = sum(k for _, _, k in groups)
    if m == 0:
        return 0, 0

    best = [None]

    def options(cpos, rpos, k):
        for csub in itertools.combinations(cpos, k):
            for rsub in itertools.permutations(rpos, k):
                yield list(zip(csub, rsub))

    def rec(idx, acc):
        if idx == len(groups):
            ch = count_chunks(sorted(acc))
            if best[0] is None or ch < best[0]:
                best[0] = ch
            return
        cpos, rpos, k = groups[idx]
        for opt in options(cpos, rpos, k):
            rec(idx + 1, acc + opt)

    rec(0, [])
    return m, best[0]


def meteor(cand, ref, alpha=0.9, beta=3.0, gamma=0.5):
    c, r = len(cand), len(ref)
    if c == 0 or r == 0:
        return 0.0
    m, ch = meteor_alignment(cand, ref)
    if m == 0:
        return 0.0
    p, rec = m / c, m / r
    f = p * rec / (alpha * p + (1 - alpha) * rec)
    pen = gamma * (ch / m) ** beta
    return f * (1.0 - pen)


PAIRS = [
    ("a b c", "a b c"),
    ("a b c", "a c"),
    ("b a", "a b"),
    ("the cat sat on the mat", "the cat sat on a mat"),
    ("a b", "c d"),
    ("", "a b"),
    ("a", ""),
    ("generate summary for code file", "generate a summary for the code file"),
    ("parse the input file and report errors", "parse input files and report all errors"),
    ("compute the longest common subsequence", "compute longest common subsequence quickly"),
    ("a a a b", "a b a"),
    ("x x x x x", "x x"),
    ("alpha beta gamma delta", "delta gamma beta alpha"),
    ("load data from disk", "load data from disk and cache it afterwards"),
    ("initialize the network weights and biases then train", "initialize network weights then train"),
    ("one two three four five six seven", "one two three four five six seven"),
    ("a b c d e", "a b c d e"),
    ("read config then start server", "start server after reading config"),
    ("convert tokens to ids", "convert the tokens into ids"),
    ("this function sorts a list of integers using quicksort", "sorts integer lists with the quicksort algorithm"),
]


def main():
    rows = []
    for cand_text, ref_text in PAIRS:
        cand, ref = tokenize(cand_text), tokenize(ref_text)
        rows.append(
            {
                "candidate": cand_text,
                "reference": ref_text,
                "bleu": bleu(cand, ref),
                "rouge_l": rouge_l(cand, ref),
                "meteor": meteor(cand, ref),
            }
        )
    report = {
        "pairs": rows,
        "mean_bleu": sum(r["bleu"] for r in rows) / len(rows),
        "mean_rouge_l": sum(r["rouge_l"] for r in rows) / len(rows),
        "mean_meteor": sum(r["meteor"] for r in rows) / len(rows),
    }
    out = os.path.join(os.path.dirname(__file__), "..", "data", "metrics_golden.json")
    os.makedirs(os.path.dirname(out), exist_ok=True)
    with open(out, "w") as f:
        json.dump(report, f, indent=1)
    print("wrote", os.path.normpath(out))
    for r in rows:
        print(f"  bleu={r['bleu']:.6f} rouge={r['rouge_l']:.6f} meteor={r['meteor']:.6f}  {r['candidate']!r} / {r['reference']!r}")


if __name__ == "__main__":
    main()
