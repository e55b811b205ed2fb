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

#include "charspan/token_augmenters.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "charspan/error.h"
#include "charspan/subword_bpe.h"

namespace charspan {

std::string_view to_string(TokenLevel level) {
  return level == TokenLevel::kSubword ? "subword" : "word";
}

TokenLevel parse_token_level(std::string_view name) {
  if (name == "word") return TokenLevel::kWord;
  if (name == "subword") return TokenLevel::kSubword;
  throw ValidationError("unknown token level '" + std::string(name) +
                        "' (expected word or subword)");
}

std::string_view to_string(TokenStrategy strategy) {
  return strategy == TokenStrategy::kDropout ? "dropout" : "switchout";
}

TokenStrategy parse_token_strategy(std::string_view name) {
  if (name == "switchout") return TokenStrategy::kSwitchOut;
  if (name == "dropout") return TokenStrategy::kDropout;
  throw ValidationError("unknown token strategy '" + std::string(name) +
                        "' (expected switchout or dropout)");
}

void TokenAugmentConfig::validate() const {
  if (!std::isfinite(rate) || rate < 0.0 || rate > 1.0) {
    throw ValidationError("token augment rate must lie in [0, 1]");
  }
  if (strategy == TokenStrategy::kSwitchOut && vocab.empty()) {
    throw ValidationError("switchout needs a non-empty vocabulary");
  }
}

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  const std::u32string cps = decode_utf8(text);
  std::u32string current;
  for (char32_t c : cps) {
    if (is_whitespace(c)) {
      if (!current.empty()) tokens.push_back(encode_utf8(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(encode_utf8(current));
  return tokens;
}

namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

bool has_marker(std::string_view token) {
  return token.size() > kContinuationMarker.size() &&
         token.ends_with(kContinuationMarker);
}

std::string_view strip_marker(std::string_view token) {
  if (has_marker(token)) token.remove_suffix(kContinuationMarker.size());
  return token;
}

template <typename PerSentence>
ParallelCorpus map_source(const ParallelCorpus& corpus, unsigned threads,
                          PerSentence&& fn) {
  corpus.check_aligned();
  ParallelCorpus out;
  out.name = corpus.name;
  out.target = corpus.target;
  out.source.resize(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    out.source[i] = Sentence::from_utf8(fn(corpus.source[i], i));
  });
  return out;
}

}  // namespace

ParallelCorpus switchout(const ParallelCorpus& corpus,
                         const TokenAugmentConfig& cfg, unsigned threads) {
  cfg.validate();
  return map_source(corpus, threads, [&](const Sentence& s, std::size_t i) {
    Rng rng(cfg.seed_spec, i);
    auto tokens = split_tokens(s.text());
    for (auto& tok : tokens) {
      if (!rng.bernoulli(cfg.rate)) continue;
      const std::string& pick = cfg.vocab[rng.below(cfg.vocab.size())];
      if (cfg.level == TokenLevel::kSubword) {
        const bool continued = has_marker(tok);
        tok = std::string(strip_marker(pick));
        if (continued) tok += kContinuationMarker;
      } else {
        tok = pick;
      }
    }
    return join_tokens(tokens);
  });
}

ParallelCorpus token_dropout(const ParallelCorpus& corpus,
                             const TokenAugmentConfig& cfg, unsigned threads) {
  cfg.validate();
  return map_source(corpus, threads, [&](const Sentence& s, std::size_t i) {
    Rng rng(cfg.seed_spec, i);
    const auto tokens = split_tokens(s.text());
    std::vector<bool> keep(tokens.size(), true);
    std::size_t kept = tokens.size();
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (rng.bernoulli(cfg.rate)) {
        keep[t] = false;
        --kept;
      }
    }
    const std::size_t floor = std::min(cfg.min_tokens_kept, tokens.size());
    for (std::size_t t = tokens.size(); t-- > 0 && kept < floor;) {
      if (!keep[t]) {
        keep[t] = true;
        ++kept;
      }
    }
    std::vector<std::string> out;
    out.reserve(kept);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (keep[t]) out.push_back(tokens[t]);
    }
    // A dangling marker on the sentence-final token would be unparseable.
    if (cfg.level == TokenLevel::kSubword && !out.empty()) {
      out.back() = std::string(strip_marker(out.back()));
    }
    return join_tokens(out);
  });
}

ParallelCorpus token_augment(const ParallelCorpus& corpus,
                             const TokenAugmentConfig& cfg, unsigned threads) {
  return cfg.strategy == TokenStrategy::kSwitchOut
             ? switchout(corpus, cfg, threads)
             : token_dropout(corpus, cfg, threads);
}

std::vector<std::string> collect_vocab(const std::vector<Sentence>& sentences,
                                       TokenLevel level) {
  std::set<std::string> seen;
  for (const auto& s : sentences) {
    for (auto& tok : split_tokens(s.text())) {
      if (level == TokenLevel::kSubword) {
        seen.insert(std::string(strip_marker(tok)));
      } else {
        seen.insert(std::move(tok));
      }
    }
  }
  return {seen.begin(), seen.end()};
}

std::vector<std::string> load_token_list(const std::filesystem::path& path) {
  std::vector<std::string> tokens;
  for (const auto& s : load_sentences(path)) {
    // A bpe.vocab file ("token\tcount") is accepted as well.
    std::string_view line = s.text();
    if (const auto tab = line.find('\t'); tab != std::string_view::npos) {
      line = line.substr(0, tab);
    }
    auto parts = split_tokens(line);
    if (parts.empty()) continue;
    if (parts.size() != 1) {
      throw ValidationError(path.string() +
                            ": vocabulary lines must hold a single token");
    }
    tokens.push_back(std::move(parts[0]));
  }
  return tokens;
}

}  // namespace charspan
