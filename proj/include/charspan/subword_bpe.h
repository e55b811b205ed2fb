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
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "charspan/text_core.h"

namespace charspan {

// Suffix on every non-final subword of a word.
inline constexpr std::string_view kContinuationMarker = "@@";
inline constexpr std::string_view kMergesHeader = "#charspan-forge bpe v1";

using Merge = std::pair<std::string, std::string>;

// Ordered merge list plus the token inventory it was learned with.
//
// `vocab` maps every character of the training data and every merge product
// to a count: the character's occurrence count, or the pair frequency at the
// moment the merge was chosen.
class BpeModel {
 public:
  BpeModel() = default;
  BpeModel(std::vector<Merge> merges, std::map<std::string, std::int64_t> vocab);

  const std::vector<Merge>& merges() const noexcept { return merges_; }
  const std::map<std::string, std::int64_t>& vocab() const noexcept {
    return vocab_;
  }
  std::string_view continuation_marker() const noexcept {
    return kContinuationMarker;
  }
  const std::vector<std::string>& specials() const noexcept {
    return specials_;
  }
  void set_specials(std::vector<std::string> specials) {
    specials_ = std::move(specials);
  }

  // Learning-order rank of the merge (left, right), if any.
  std::optional<std::size_t> rank(std::string_view left,
                                  std::string_view right) const;

  friend bool operator==(const BpeModel& a, const BpeModel& b) {
    return a.merges_ == b.merges_ && a.vocab_ == b.vocab_ &&
           a.specials_ == b.specials_;
  }

 private:
  std::vector<Merge> merges_;
  std::map<std::string, std::int64_t> vocab_;
  std::vector<std::string> specials_;
  std::unordered_map<std::string, std::size_t> ranks_;
};

struct Segmentation {
  std::vector<std::string> tokens;
  Sentence source;
  // Whitespace runs around the words (leading, between, trailing), so the
  // exact source spacing survives a round trip. When empty, words are
  // rejoined with single spaces.
  std::vector<std::string> gaps;

  // Tokens joined with single spaces: the segmented corpus line.
  std::string line() const;
};

// Standard BPE over whitespace-delimited words: start from characters and
// repeatedly merge the most frequent adjacent pair (ties: smallest
// (left, right) bytewise) until the inventory of characters plus merge
// products reaches vocab_size, or the best pair occurs fewer than
// min_pair_freq times.
BpeModel learn_bpe(const std::vector<const std::vector<Sentence>*>& sides,
                   std::size_t vocab_size, std::int64_t min_pair_freq);
// Learns on source and target together when `shared`, source only
// otherwise.
BpeModel learn_bpe(const ParallelCorpus& corpus, std::size_t vocab_size,
                   std::int64_t min_pair_freq, bool shared = true);

// dropout_p == 0 applies merges greedily by rank. With dropout_p > 0 every
// candidate merge is skipped with probability dropout_p at each step, using
// the substream derive_seed(seed, ordinal).
Segmentation segment(const BpeModel& model, const Sentence& s,
                     double dropout_p = 0.0, const SeedSpec& seed = {},
                     std::size_t ordinal = 0);

std::vector<Segmentation> segment_corpus(const BpeModel& model,
                                         const std::vector<Sentence>& sentences,
                                         double dropout_p, const SeedSpec& seed,
                                         unsigned threads = 1);

// Throws ValidationError when a word's final token carries the marker.
Sentence desegment(const Segmentation& g);
Sentence desegment_line(std::string_view segmented_line);

std::string format_merges(const BpeModel& model);
// token \t count, by descending count then bytewise token.
std::string format_vocab(const BpeModel& model);
BpeModel parse_model(std::string_view merges_text,
                     std::optional<std::string_view> vocab_text = std::nullopt);

void save_model(const BpeModel& model, const std::filesystem::path& merges_path,
                const std::filesystem::path& vocab_path);
BpeModel load_model(const std::filesystem::path& merges_path,
                    const std::optional<std::filesystem::path>& vocab_path =
                        std::nullopt);

}  // namespace charspan
