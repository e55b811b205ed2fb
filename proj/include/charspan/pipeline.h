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
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "charspan/eval_metrics.h"
#include "charspan/noise_engine.h"
#include "charspan/script_map.h"
#include "charspan/subword_bpe.h"
#include "charspan/text_core.h"
#include "charspan/token_augmenters.h"
#include "json.hpp"

namespace charspan {

// ---------------------------------------------------------------------------
// Augmentation statistics

struct AugmentationReport {
  std::size_t sentences = 0;
  std::size_t processed = 0;
  std::size_t skipped_short = 0;
  std::size_t total_chars = 0;
  // Sum of span_len over delete and replace events.
  std::size_t affected_chars = 0;
  std::size_t events = 0;
  std::map<std::string, std::size_t> op_counts;  // delete, replace, insert
  std::map<std::size_t, std::size_t> span_counts;          // realized
  std::map<std::size_t, std::size_t> sampled_span_counts;  // before clipping
  double realized_percent = 0.0;  // 100 * affected / total
  double corpus_lcsr = 1.0;       // mean line-wise lcsr(original, noised)

  double affected_fraction() const {
    return total_chars == 0 ? 0.0
                            : static_cast<double>(affected_chars) /
                                  static_cast<double>(total_chars);
  }

  nlohmann::ordered_json to_json() const;
};

// Throws ValidationError when the plans do not describe `original`.
AugmentationReport compute_stats(const ParallelCorpus& original,
                                 const ParallelCorpus& noised,
                                 const std::vector<SentencePlan>& plans,
                                 UnitMode mode = UnitMode::kCodePoint,
                                 unsigned threads = 1);

// Groups trace events into one plan per sentence. Sentences shorter than
// min_sentence_len are marked skipped.
std::vector<SentencePlan> plans_from_trace(const std::vector<NoiseEvent>& events,
                                           const ParallelCorpus& original,
                                           std::size_t min_sentence_len,
                                           UnitMode mode = UnitMode::kCodePoint);

// ---------------------------------------------------------------------------
// Heatmaps

// TSV: a header row "\t<label>..." then one "<label>\t<value>..." row per
// corpus. Values use the shortest round-trip decimal form.
std::string format_similarity_tsv(const SimilarityMatrix& m);
SimilarityMatrix parse_similarity_tsv(std::string_view text);

// n x n grid of <rect class="cell"> elements with the value printed in each
// cell. Fill interpolates linearly in RGB from #f7fbff (0.0) to #08306b (1.0).
std::string format_similarity_svg(const SimilarityMatrix& m);

void emit_heatmap(const SimilarityMatrix& m, const std::filesystem::path& tsv,
                  const std::optional<std::filesystem::path>& svg =
                      std::nullopt);

// ---------------------------------------------------------------------------
// Manifest-driven runs

enum class NoiseKind { kNone, kCharSpan, kUnigram, kToken };
enum class VocabSource { kNoisy, kClean, kExternal };

std::string_view to_string(VocabSource source);

struct PipelineManifest {
  // Paths as written in the manifest; relative ones resolve against
  // base_dir.
  std::string source;
  std::optional<std::string> target;
  std::string output_dir;
  std::filesystem::path base_dir;

  NoiseKind noise_kind = NoiseKind::kNone;
  NoiseConfig noise;                   // kCharSpan / kUnigram
  std::optional<std::string> alphabet_file;
  TokenAugmentConfig token;            // kToken
  std::optional<std::string> token_vocab_file;

  VocabSource vocab_source = VocabSource::kClean;
  std::optional<std::string> external_merges;
  std::optional<std::string> external_vocab;
  std::size_t vocab_size = 16000;
  std::int64_t min_pair_freq = 2;
  bool shared_vocab = true;
  double segmentation_dropout = 0.0;
  int dropout_epochs = 1;
  bool keep_clean = false;
  bool normalize_nfc = false;
  std::optional<std::pair<Script, Script>> script_conversion;
  std::uint64_t master_seed = 1;

  std::filesystem::path resolve(const std::string& p) const;
  // Throws ValidationError naming the offending key.
  void validate() const;
};

// Unknown keys, wrong types and invalid combinations are ValidationErrors.
PipelineManifest parse_manifest(const nlohmann::json& j,
                                const std::filesystem::path& base_dir);
PipelineManifest load_manifest(const std::filesystem::path& path);

// Resolved manifest with every default filled in plus the toolkit version.
nlohmann::ordered_json manifest_echo(const PipelineManifest& m);

struct RunOptions {
  unsigned threads = 1;
  bool force = false;  // replace an existing output_dir
};

struct RunSummary {
  std::filesystem::path output_dir;
  std::vector<std::string> artifacts;  // file names, sorted
};

// Artifact names inside output_dir.
namespace artifact {
inline constexpr const char kSource[] = "train.src";
inline constexpr const char kTarget[] = "train.tgt";
inline constexpr const char kCleanSource[] = "train.clean.src";
inline constexpr const char kMerges[] = "bpe.merges";
inline constexpr const char kVocab[] = "bpe.vocab";
inline constexpr const char kTrace[] = "noise.trace.tsv";
inline constexpr const char kStats[] = "stats.json";
inline constexpr const char kManifest[] = "manifest.json";
// train.bpe.{src,tgt} for a single epoch, train.bpe.e<k>.{src,tgt} with
// k = 1..dropout_epochs otherwise.
std::string segmented(int epoch, int epochs, bool target);
}  // namespace artifact

// Writes everything into a sibling temporary directory and renames it into
// place only after every stage succeeded. Stage failures are rethrown with
// the stage name prefixed.
RunSummary run_manifest(const PipelineManifest& m, const RunOptions& opts = {});

}  // namespace charspan
