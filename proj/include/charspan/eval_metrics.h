// Copyright 2026 The charspan-forge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "charspan/text_core.h"

namespace charspan {

struct ScoreReport {
  std::string metric;
  double corpus_score = 0.0;
  std::vector<double> sentence_scores;
  // Canonical parameter string; two reports with equal signatures were
  // computed the same way.
  std::string signature;
};

// Record file: "metric\t<name>", "signature\t<sig>", "corpus_score\t<x>",
// then optionally one "sentence\t<i>\t<x>" line per sentence.
std::string format_report(const ScoreReport& report, bool with_sentences);

// ---------------------------------------------------------------------------
// chrF

struct ChrfOptions {
  int char_order = 6;
  int word_order = 0;
  double beta = 2.0;
  bool effective_order = true;
};

// Per-order (hyp total, ref total, matches); characters first, then words.
struct ChrfStats {
  std::vector<std::array<std::int64_t, 3>> orders;
  ChrfStats& operator+=(const ChrfStats& other);
};

ChrfStats chrf_sentence_stats(const Sentence& hyp, const Sentence& ref,
                              const ChrfOptions& opts);
// 0..100. F_beta is computed per order and averaged; with effective_order,
// orders where either side has no n-grams are left out of the average.
double chrf_from_stats(const ChrfStats& stats, const ChrfOptions& opts);
std::string chrf_signature(const ChrfOptions& opts);

// Corpus score micro-averages the n-gram counts over all sentences.
ScoreReport chrf(const std::vector<Sentence>& hyp,
                 const std::vector<Sentence>& ref,
                 const ChrfOptions& opts = {});

// ---------------------------------------------------------------------------
// BLEU

// Approximation of mteval-v13a: normalize whitespace, split off ASCII
// punctuation (keeping '.' and ',' inside numbers and '-' inside words),
// split on whitespace.
std::vector<std::string> tokenize_13a_approx(std::string_view text);

struct BleuStats {
  std::array<std::int64_t, 4> matches{};
  std::array<std::int64_t, 4> totals{};
  std::int64_t hyp_len = 0;
  std::int64_t ref_len = 0;
  BleuStats& operator+=(const BleuStats& other);
};

BleuStats bleu_sentence_stats(const Sentence& hyp, const Sentence& ref);
// Exponential smoothing: the k-th order with zero matches gets precision
// 1 / (2^k * total).
double bleu_from_stats(const BleuStats& stats);
std::string bleu_signature();

ScoreReport bleu(const std::vector<Sentence>& hyp,
                 const std::vector<Sentence>& ref);

// ---------------------------------------------------------------------------
// Lexical similarity

std::size_t lcs_length(std::u32string_view a, std::u32string_view b);
// LCS / max length, over code points. 1 when both are empty, 0 when only
// one is.
double lcsr(const Sentence& a, const Sentence& b);

struct SimilarityMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;
};

struct LabeledSide {
  std::string label;
  std::vector<Sentence> sentences;
};

// Entry (i, j) is the mean line-wise LCSR of corpora i and j; the diagonal
// is 1. In aligned mode all corpora must have the same line count;
// otherwise pairs are compared over their common prefix.
SimilarityMatrix similarity_matrix(const std::vector<LabeledSide>& corpora,
                                   bool aligned, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Significance

enum class BootstrapMetric { kChrf, kBleu };
BootstrapMetric parse_bootstrap_metric(std::string_view name);
std::string_view to_string(BootstrapMetric metric);

struct BootstrapResult {
  double p_value = 1.0;
  double score_a = 0.0;
  double score_b = 0.0;
  std::size_t resamples = 0;
  // Resamples in which the baseline b scored at least as high as a.
  std::size_t baseline_wins = 0;
};

// p = (baseline_wins + 1) / (B + 1), resampling sentence indices with
// replacement from the substream derive_seed(seed, 0).
BootstrapResult paired_bootstrap(const std::vector<Sentence>& hyp_a,
                                 const std::vector<Sentence>& hyp_b,
                                 const std::vector<Sentence>& ref,
                                 BootstrapMetric metric, std::size_t resamples,
                                 const SeedSpec& seed);

// ---------------------------------------------------------------------------
// Cosine over exported vectors

// One vector per line, tab-separated decimals.
std::vector<std::vector<double>> parse_vectors(std::string_view text,
                                               std::string_view origin);
std::vector<std::vector<double>> load_vectors(const std::filesystem::path& p);

ScoreReport cosine_report(const std::vector<std::vector<double>>& a,
                          const std::vector<std::vector<double>>& b);
ScoreReport cosine_report(const std::filesystem::path& a,
                          const std::filesystem::path& b);

}  // namespace charspan
