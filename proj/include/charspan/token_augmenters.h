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
#include <string>
#include <string_view>
#include <vector>

#include "charspan/text_core.h"

namespace charspan {

enum class TokenLevel { kWord, kSubword };
enum class TokenStrategy { kSwitchOut, kDropout };

std::string_view to_string(TokenLevel level);
TokenLevel parse_token_level(std::string_view name);
std::string_view to_string(TokenStrategy strategy);
TokenStrategy parse_token_strategy(std::string_view name);

struct TokenAugmentConfig {
  double rate = 0.10;
  TokenLevel level = TokenLevel::kWord;
  TokenStrategy strategy = TokenStrategy::kSwitchOut;
  // Replacement candidates for switchout, in file order.
  std::vector<std::string> vocab;
  SeedSpec seed_spec{0, "token-augment"};
  std::size_t min_tokens_kept = 1;

  void validate() const;
};

// Splits on runs of Unicode whitespace; punctuation stays attached.
std::vector<std::string> split_tokens(std::string_view text);

// Each source token is replaced with probability `rate` by a token drawn
// uniformly from cfg.vocab. At subword level the continuation marker of the
// original position is kept, so segmented text stays well formed.
ParallelCorpus switchout(const ParallelCorpus& corpus,
                         const TokenAugmentConfig& cfg, unsigned threads = 1);

// Each source token is deleted with probability `rate`. If fewer than
// min_tokens_kept would survive, the rightmost deleted tokens are restored.
ParallelCorpus token_dropout(const ParallelCorpus& corpus,
                             const TokenAugmentConfig& cfg,
                             unsigned threads = 1);

// Dispatches on cfg.strategy.
ParallelCorpus token_augment(const ParallelCorpus& corpus,
                             const TokenAugmentConfig& cfg,
                             unsigned threads = 1);

// Distinct whitespace tokens of the source side, sorted bytewise. At
// subword level continuation markers are stripped first.
std::vector<std::string> collect_vocab(const std::vector<Sentence>& sentences,
                                       TokenLevel level);
std::vector<std::string> load_token_list(const std::filesystem::path& path);

}  // namespace charspan
