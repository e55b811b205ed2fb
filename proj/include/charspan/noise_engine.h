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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "charspan/text_core.h"

namespace charspan {

enum class NoiseOp { kDelete, kReplace, kInsert };

std::string_view to_string(NoiseOp op);
NoiseOp parse_noise_op(std::string_view name);

// The candidate set C that replacement and insertion characters are drawn
// from. Characters are unique and kept in file order.
class CandidateAlphabet {
 public:
  CandidateAlphabet() = default;
  // Throws ValidationError on an empty list, duplicates, or whitespace and
  // control characters.
  CandidateAlphabet(std::string id, std::u32string chars);

  // "latin-basic" or "devanagari-basic".
  static CandidateAlphabet builtin(std::string_view id);
  // One character per line.
  static CandidateAlphabet from_file(const std::filesystem::path& path);
  static CandidateAlphabet parse(std::string id, std::string_view text);

  const std::string& id() const noexcept { return id_; }
  const std::u32string& chars() const noexcept { return chars_; }
  bool contains(char32_t c) const;

 private:
  std::string id_;
  std::u32string chars_;
};

enum class NoiseMode {
  // Spans are drawn until a per-sentence character budget is used up.
  kBudget,
  // A fixed site count S = N * int(I_p / N) per sentence.
  kLiteral,
};

enum class OverlapPolicy { kForbid, kAllow };

std::string_view to_string(NoiseMode mode);
NoiseMode parse_noise_mode(std::string_view name);
std::string_view to_string(OverlapPolicy policy);
OverlapPolicy parse_overlap_policy(std::string_view name);

// Operation weights; a zero weight removes the operation.
struct OperationWeights {
  double del = 0.5;
  double replace = 0.5;
  double insert = 0.0;
};

struct NoiseConfig {
  double p1 = 9.0;  // percent
  double p2 = 11.0;
  int max_span = 3;  // N
  OperationWeights operations;
  CandidateAlphabet alphabet = CandidateAlphabet::builtin("latin-basic");
  NoiseMode mode = NoiseMode::kBudget;
  // Defaults to 2 * ceil(N / 2) + 1 when unset.
  std::optional<std::size_t> min_sentence_len;
  OverlapPolicy overlap_policy = OverlapPolicy::kForbid;
  SeedSpec seed_spec{0, "noise"};
  UnitMode unit_mode = UnitMode::kCodePoint;
  // Ablation: a replaced span becomes span_len random characters instead
  // of a single one.
  bool multi_char_replacement = false;

  // Insert/delete/replace at 1/3 each with single-character spans.
  static NoiseConfig unigram_defaults();

  std::size_t effective_min_sentence_len() const;
  // ceil(N / 2): the margin kept free at both ends of a sentence.
  std::size_t edge_margin() const;
  // Throws ValidationError describing the first violated constraint.
  void validate() const;
};

struct NoiseEvent {
  std::size_t sentence_ordinal = 0;
  std::size_t start = 0;     // 0-based character index
  std::size_t span_len = 1;  // realized extent
  NoiseOp op = NoiseOp::kDelete;
  // Empty for delete. One character for replace/insert, span_len characters
  // under multi_char_replacement.
  std::u32string replacement;
  // The span size drawn from {1..N} before clipping or the literal-mode
  // centering arithmetic.
  std::size_t sampled_span = 1;

  friend bool operator==(const NoiseEvent&, const NoiseEvent&) = default;
};

struct SentencePlan {
  std::size_t sentence_ordinal = 0;
  std::size_t char_count = 0;  // sz
  double sampled_percent = 0.0;  // I_p
  std::int64_t alpha = 0;        // literal mode only
  std::int64_t site_count = 0;   // S, literal mode only
  std::vector<std::size_t> site_indices;  // I_s, in sampling order
  std::vector<NoiseEvent> events;         // sorted by start
  bool skipped_short = false;
  // Character budget round(I_p / 100 * sz); budget mode only.
  std::size_t budget = 0;
  // Placements abandoned after the rejection cap (budget mode) or events
  // dropped for overlapping an earlier one (literal mode, forbid).
  std::size_t rejected = 0;

  // Sum of span_len over delete and replace events.
  std::size_t affected_chars() const;

  friend bool operator==(const SentencePlan&, const SentencePlan&) = default;
};

// The per-corpus augmentation percentage used by literal mode. It depends
// only on the config, so every sentence sees the same value.
double literal_corpus_percent(const NoiseConfig& cfg);

SentencePlan plan_noise(const Sentence& s, std::size_t ordinal,
                        const NoiseConfig& cfg);

// Requires events sorted by start, in bounds and non-overlapping. Indices
// are code points.
Sentence apply_events(const Sentence& s, const std::vector<NoiseEvent>& events);

// Unit-aware variant: indices refer to the character units of `mode`.
Sentence apply_events(const Sentence& s, const std::vector<NoiseEvent>& events,
                      UnitMode mode);

// Union semantics for plans built under OverlapPolicy::kAllow: a character
// is dropped if any delete/replace extent covers it, and every
// replacement/insertion is emitted in front of its start position.
// Coincides with apply_events on non-overlapping input.
Sentence apply_events_overlapping(const Sentence& s,
                                  const std::vector<NoiseEvent>& events,
                                  UnitMode mode = UnitMode::kCodePoint);

struct AugmentResult {
  ParallelCorpus corpus;
  std::vector<SentencePlan> plans;
};

// The source side is replaced by its noised copy; the target side is
// carried over untouched.
AugmentResult charspan_augment(const ParallelCorpus& corpus,
                               const NoiseConfig& cfg, unsigned threads = 1);

// The unigram baseline: same machinery with every span forced to one
// character.
AugmentResult unigram_char_noise(const ParallelCorpus& corpus,
                                 const NoiseConfig& cfg, unsigned threads = 1);

// Trace file: one event per line,
//   sentence_ordinal \t start \t span_len \t op \t replacement \t sampled_span
// preceded by a single '#'-prefixed header line. `replacement` is empty for
// deletions.
inline constexpr std::string_view kTraceHeader =
    "#sentence_ordinal\tstart\tspan_len\top\treplacement\tsampled_span";
std::string format_trace(const std::vector<SentencePlan>& plans);
std::vector<NoiseEvent> parse_trace(std::string_view text);

}  // namespace charspan
