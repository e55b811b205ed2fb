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

#include "charspan/subword_bpe.h"

#include <algorithm>
#include <charconv>
#include <set>
#include <unordered_set>

#include "charspan/error.h"

namespace charspan {

namespace {

std::string rank_key(std::string_view left, std::string_view right) {
  std::string key;
  key.reserve(left.size() + right.size() + 1);
  key.append(left);
  key.push_back(' ');
  key.append(right);
  return key;
}

// Splits text into words (code point strings) and the whitespace runs
// around them.
void split_words(const std::u32string& cps, std::vector<std::u32string>* words,
                 std::vector<std::string>* gaps) {
  std::u32string word;
  std::string gap;
  for (char32_t c : cps) {
    if (is_whitespace(c)) {
      if (!word.empty()) {
        words->push_back(std::move(word));
        word.clear();
        if (gaps) gaps->push_back(std::move(gap));
        gap.clear();
      }
      if (gaps) append_utf8(gap, c);
    } else {
      word.push_back(c);
    }
  }
  if (!word.empty()) {
    words->push_back(std::move(word));
    if (gaps) gaps->push_back(std::move(gap));
    gap.clear();
  }
  if (gaps) gaps->push_back(std::move(gap));
}

}  // namespace

BpeModel::BpeModel(std::vector<Merge> merges,
                   std::map<std::string, std::int64_t> vocab)
    : merges_(std::move(merges)), vocab_(std::move(vocab)) {
  ranks_.reserve(merges_.size());
  for (std::size_t i = 0; i < merges_.size(); ++i) {
    // Keep the first rank if a pair is listed twice.
    ranks_.emplace(rank_key(merges_[i].first, merges_[i].second), i);
  }
}

std::optional<std::size_t> BpeModel::rank(std::string_view left,
                                          std::string_view right) const {
  auto it = ranks_.find(rank_key(left, right));
  if (it == ranks_.end()) return std::nullopt;
  return it->second;
}

std::string Segmentation::line() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Learning

namespace {

class BpeLearner {
 public:
  BpeLearner(const std::map<std::u32string, std::int64_t>& word_counts) {
    std::map<std::string, std::int64_t> char_counts;
    for (const auto& [word, freq] : word_counts) {
      Word w;
      w.freq = freq;
      for (char32_t c : word) {
        std::string s;
        append_utf8(s, c);
        char_counts[s] += freq;
        w.symbols.push_back(intern(s));
      }
      words_.push_back(std::move(w));
    }
    for (const auto& [s, n] : char_counts) vocab_[s] = n;
    inventory_ = char_counts.size();
    for (std::size_t w = 0; w < words_.size(); ++w) add_pairs(w);
  }

  std::size_t inventory() const { return inventory_; }

  BpeModel run(std::size_t vocab_size, std::int64_t min_pair_freq) {
    std::vector<Merge> merges;
    while (inventory_ < vocab_size && !queue_.empty()) {
      const Entry best = *queue_.begin();
      if (best.count < min_pair_freq) break;
      const std::string merged = names_[best.left] + names_[best.right];
      merges.emplace_back(names_[best.left], names_[best.right]);
      if (!vocab_.contains(merged)) {
        vocab_[merged] = best.count;
        ++inventory_;
      }
      apply_merge(best.left, best.right, intern(merged));
    }
    return BpeModel(std::move(merges), std::move(vocab_));
  }

 private:
  struct Word {
    std::vector<int> symbols;
    std::int64_t freq = 0;
  };
  struct Entry {
    std::int64_t count;
    int left;
    int right;
  };
  struct EntryOrder {
    const std::vector<std::string>* names;
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.count != b.count) return a.count > b.count;
      const auto& n = *names;
      if (a.left != b.left) {
        if (int c = n[a.left].compare(n[b.left]); c != 0) return c < 0;
      }
      if (a.right != b.right) return n[a.right] < n[b.right];
      return false;
    }
  };

  static std::uint64_t key(int left, int right) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(left))
            << 32) |
           static_cast<std::uint32_t>(right);
  }

  int intern(const std::string& s) {
    auto [it, inserted] = ids_.emplace(s, static_cast<int>(names_.size()));
    if (inserted) names_.push_back(s);
    return it->second;
  }

  void bump(int left, int right, std::int64_t delta) {
    auto& count = counts_[key(left, right)];
    if (count > 0) queue_.erase(Entry{count, left, right});
    count += delta;
    if (count > 0) {
      queue_.insert(Entry{count, left, right});
    } else {
      counts_.erase(key(left, right));
    }
  }

  void add_pairs(std::size_t w) {
    const auto& sym = words_[w].symbols;
    for (std::size_t i = 0; i + 1 < sym.size(); ++i) {
      bump(sym[i], sym[i + 1], words_[w].freq);
      where_[key(sym[i], sym[i + 1])].push_back(static_cast<int>(w));
    }
  }

  void remove_pairs(std::size_t w) {
    const auto& sym = words_[w].symbols;
    for (std::size_t i = 0; i + 1 < sym.size(); ++i) {
      bump(sym[i], sym[i + 1], -words_[w].freq);
    }
  }

  void apply_merge(int left, int right, int merged) {
    // The index may hold stale or repeated word ids; dedupe and recheck.
    std::vector<int> candidates = std::move(where_[key(left, right)]);
    where_.erase(key(left, right));
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());
    for (int w : candidates) {
      auto& sym = words_[w].symbols;
      bool present = false;
      for (std::size_t i = 0; i + 1 < sym.size(); ++i) {
        if (sym[i] == left && sym[i + 1] == right) {
          present = true;
          break;
        }
      }
      if (!present) continue;
      remove_pairs(w);
      std::vector<int> out;
      out.reserve(sym.size());
      for (std::size_t i = 0; i < sym.size();) {
        if (i + 1 < sym.size() && sym[i] == left && sym[i + 1] == right) {
          out.push_back(merged);
          i += 2;
        } else {
          out.push_back(sym[i]);
          ++i;
        }
      }
      sym = std::move(out);
      add_pairs(w);
    }
  }

  std::vector<std::string> names_;
  std::unordered_map<std::string, int> ids_;
  std::vector<Word> words_;
  std::unordered_map<std::uint64_t, std::int64_t> counts_;
  std::unordered_map<std::uint64_t, std::vector<int>> where_;
  std::set<Entry, EntryOrder> queue_{EntryOrder{&names_}};
  std::map<std::string, std::int64_t> vocab_;
  std::size_t inventory_ = 0;
};

}  // namespace

BpeModel learn_bpe(const std::vector<const std::vector<Sentence>*>& sides,
                   std::size_t vocab_size, std::int64_t min_pair_freq) {
  if (min_pair_freq < 1) {
    throw ValidationError("min_pair_freq must be >= 1");
  }
  std::map<std::u32string, std::int64_t> word_counts;
  for (const auto* side : sides) {
    for (const auto& s : *side) {
      std::vector<std::u32string> words;
      split_words(s.code_points(), &words, nullptr);
      for (auto& w : words) ++word_counts[std::move(w)];
    }
  }
  BpeLearner learner(word_counts);
  if (vocab_size < learner.inventory()) {
    throw ValidationError("vocab_size " + std::to_string(vocab_size) +
                          " is smaller than the character inventory (" +
                          std::to_string(learner.inventory()) +
                          " distinct characters)");
  }
  return learner.run(vocab_size, min_pair_freq);
}

BpeModel learn_bpe(const ParallelCorpus& corpus, std::size_t vocab_size,
                   std::int64_t min_pair_freq, bool shared) {
  std::vector<const std::vector<Sentence>*> sides{&corpus.source};
  if (shared && corpus.has_target()) sides.push_back(&corpus.target);
  return learn_bpe(sides, vocab_size, min_pair_freq);
}

// ---------------------------------------------------------------------------
// Segmentation

namespace {

std::vector<std::string> segment_word(const BpeModel& model,
                                      const std::u32string& word,
                                      double dropout_p, Rng* rng) {
  std::vector<std::string> parts;
  parts.reserve(word.size());
  for (char32_t c : word) {
    std::string s;
    append_utf8(s, c);
    parts.push_back(std::move(s));
  }
  if (dropout_p < 1.0) {
    for (;;) {
      std::size_t best_pos = 0;
      std::optional<std::size_t> best_rank;
      for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        const auto r = model.rank(parts[i], parts[i + 1]);
        if (!r) continue;
        if (dropout_p > 0.0 && rng->bernoulli(dropout_p)) continue;
        if (!best_rank || *r < *best_rank) {
          best_rank = r;
          best_pos = i;
        }
      }
      if (!best_rank) break;
      parts[best_pos] += parts[best_pos + 1];
      parts.erase(parts.begin() + static_cast<std::ptrdiff_t>(best_pos) + 1);
    }
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    parts[i] += kContinuationMarker;
  }
  return parts;
}

}  // namespace

Segmentation segment(const BpeModel& model, const Sentence& s,
                     double dropout_p, const SeedSpec& seed,
                     std::size_t ordinal) {
  if (!(dropout_p >= 0.0 && dropout_p <= 1.0)) {
    throw ValidationError("dropout probability must lie in [0, 1]");
  }
  Segmentation g;
  g.source = s;
  std::vector<std::u32string> words;
  split_words(s.code_points(), &words, &g.gaps);
  Rng rng(seed, ordinal);
  for (const auto& w : words) {
    auto parts = segment_word(model, w, dropout_p, &rng);
    for (auto& p : parts) g.tokens.push_back(std::move(p));
  }
  return g;
}

std::vector<Segmentation> segment_corpus(const BpeModel& model,
                                         const std::vector<Sentence>& sentences,
                                         double dropout_p, const SeedSpec& seed,
                                         unsigned threads) {
  std::vector<Segmentation> out(sentences.size());
  if (dropout_p > 0.0) {
    parallel_for(sentences.size(), threads, [&](std::size_t i) {
      out[i] = segment(model, sentences[i], dropout_p, seed, i);
    });
    return out;
  }
  // Deterministic segmentation: segment each distinct word once.
  std::vector<std::vector<std::u32string>> words(sentences.size());
  std::vector<std::vector<std::string>> gaps(sentences.size());
  std::map<std::u32string, std::vector<std::string>> cache;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    split_words(sentences[i].code_points(), &words[i], &gaps[i]);
    for (const auto& w : words[i]) cache.try_emplace(w);
  }
  std::vector<decltype(cache)::iterator> entries;
  entries.reserve(cache.size());
  for (auto it = cache.begin(); it != cache.end(); ++it) entries.push_back(it);
  parallel_for(entries.size(), threads, [&](std::size_t i) {
    entries[i]->second = segment_word(model, entries[i]->first, 0.0, nullptr);
  });
  parallel_for(sentences.size(), threads, [&](std::size_t i) {
    Segmentation& g = out[i];
    g.source = sentences[i];
    g.gaps = std::move(gaps[i]);
    for (const auto& w : words[i]) {
      const auto& parts = cache.at(w);
      g.tokens.insert(g.tokens.end(), parts.begin(), parts.end());
    }
  });
  return out;
}

Sentence desegment(const Segmentation& g) {
  std::vector<std::string> words;
  std::string current;
  bool open = false;
  for (const auto& tok : g.tokens) {
    if (tok.size() > kContinuationMarker.size() &&
        tok.ends_with(kContinuationMarker)) {
      current.append(tok, 0, tok.size() - kContinuationMarker.size());
      open = true;
    } else {
      current += tok;
      words.push_back(std::move(current));
      current.clear();
      open = false;
    }
  }
  if (open) {
    throw ValidationError("malformed segmentation: final token '" +
                          g.tokens.back() + "' carries the continuation marker");
  }
  std::string text;
  const bool exact = g.gaps.size() == words.size() + 1;
  if (exact) text += g.gaps.front();
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) text += exact ? g.gaps[i] : " ";
    text += words[i];
  }
  if (exact && !words.empty()) text += g.gaps.back();
  return Sentence::from_utf8(std::move(text));
}

Sentence desegment_line(std::string_view segmented_line) {
  Segmentation g;
  std::vector<std::u32string> words;
  split_words(decode_utf8(segmented_line), &words, nullptr);
  for (const auto& w : words) g.tokens.push_back(encode_utf8(w));
  return desegment(g);
}

// ---------------------------------------------------------------------------
// Persistence

std::string format_merges(const BpeModel& model) {
  std::string out(kMergesHeader);
  out += '\n';
  for (const auto& [left, right] : model.merges()) {
    out += left;
    out += ' ';
    out += right;
    out += '\n';
  }
  return out;
}

std::string format_vocab(const BpeModel& model) {
  std::vector<std::pair<std::string, std::int64_t>> entries(
      model.vocab().begin(), model.vocab().end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  std::string out;
  for (const auto& [token, count] : entries) {
    out += token;
    out += '\t';
    out += std::to_string(count);
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

}  // namespace

BpeModel parse_model(std::string_view merges_text,
                     std::optional<std::string_view> vocab_text) {
  const auto lines = lines_of(merges_text);
  if (lines.empty() || lines[0] != kMergesHeader) {
    throw ValidationError("merges file must start with the header '" +
                          std::string(kMergesHeader) + "'");
  }
  std::vector<Merge> merges;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    const std::size_t sp = line.find(' ');
    if (sp == std::string_view::npos || sp == 0 || sp + 1 >= line.size() ||
        line.find(' ', sp + 1) != std::string_view::npos) {
      throw ValidationError("merges file line " + std::to_string(i + 1) +
                            ": expected 'left right'");
    }
    decode_utf8(line);
    merges.emplace_back(std::string(line.substr(0, sp)),
                        std::string(line.substr(sp + 1)));
  }

  std::map<std::string, std::int64_t> vocab;
  if (vocab_text) {
    const auto vlines = lines_of(*vocab_text);
    for (std::size_t i = 0; i < vlines.size(); ++i) {
      const std::string_view line = vlines[i];
      const std::size_t tab = line.find('\t');
      std::int64_t count = 0;
      bool ok = tab != std::string_view::npos && tab > 0;
      if (ok) {
        const auto digits = line.substr(tab + 1);
        const auto [ptr, ec] = std::from_chars(
            digits.data(), digits.data() + digits.size(), count);
        ok = ec == std::errc() && ptr == digits.data() + digits.size() &&
             !digits.empty();
      }
      if (!ok) {
        throw ValidationError("vocab file line " + std::to_string(i + 1) +
                              ": expected 'token<TAB>count'");
      }
      vocab[std::string(line.substr(0, tab))] = count;
    }
  } else {
    // Without counts, rebuild the inventory the merges imply.
    for (const auto& [left, right] : merges) {
      for (const std::string* tok : {&left, &right}) {
        for (char32_t c : decode_utf8(*tok)) {
          std::string s;
          append_utf8(s, c);
          vocab.try_emplace(s, 0);
        }
      }
      vocab.try_emplace(left + right, 0);
    }
  }
  return BpeModel(std::move(merges), std::move(vocab));
}

void save_model(const BpeModel& model, const std::filesystem::path& merges_path,
                const std::filesystem::path& vocab_path) {
  write_file(merges_path, format_merges(model));
  write_file(vocab_path, format_vocab(model));
}

BpeModel load_model(const std::filesystem::path& merges_path,
                    const std::optional<std::filesystem::path>& vocab_path) {
  const std::string merges = read_file(merges_path);
  try {
    if (vocab_path) return parse_model(merges, read_file(*vocab_path));
    return parse_model(merges);
  } catch (const ValidationError& e) {
    throw ValidationError(merges_path.string() + ": " + e.what());
  }
}

}  // namespace charspan
