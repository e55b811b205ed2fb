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
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace charspan {

// How "one character" is counted. Code points keep the noise arithmetic
// literal; grapheme mode keeps combining marks attached to their base.
enum class UnitMode { kCodePoint, kGrapheme };

std::string_view to_string(UnitMode mode);
UnitMode parse_unit_mode(std::string_view name);

// Strict UTF-8 decoding. Throws ValidationError on malformed input; the
// message carries the byte offset.
std::u32string decode_utf8(std::string_view bytes);
std::string encode_utf8(std::u32string_view code_points);
void append_utf8(std::string& out, char32_t cp);

// LF, CR, VT, FF, NEL, LS and PS.
bool is_line_break(char32_t cp);
// Unicode White_Space property.
bool is_whitespace(char32_t cp);

// One line of a corpus. Holds both the UTF-8 text and its code points;
// immutable once built.
class Sentence {
 public:
  Sentence() = default;

  // Throws ValidationError on invalid UTF-8 or an embedded line break.
  static Sentence from_utf8(std::string text);
  static Sentence from_code_points(std::u32string code_points);

  const std::string& text() const noexcept { return text_; }
  const std::u32string& code_points() const noexcept { return code_points_; }
  std::size_t size() const noexcept { return code_points_.size(); }
  bool empty() const noexcept { return code_points_.empty(); }

  friend bool operator==(const Sentence& a, const Sentence& b) {
    return a.text_ == b.text_;
  }

 private:
  std::string text_;
  std::u32string code_points_;
};

// Half-open range of code points forming one character unit.
struct UnitSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const UnitSpan&, const UnitSpan&) = default;
};

std::vector<UnitSpan> split_units(const Sentence& s, UnitMode mode);
std::size_t char_length(const Sentence& s,
                        UnitMode mode = UnitMode::kCodePoint);

Sentence normalize_nfc(const Sentence& s);

// Aligned source/target sentence lists. A monolingual corpus has an empty
// target list.
struct ParallelCorpus {
  std::vector<Sentence> source;
  std::vector<Sentence> target;
  std::string name;

  bool has_target() const noexcept { return !target.empty(); }
  std::size_t size() const noexcept { return source.size(); }
  // Throws ValidationError when both sides are present and misaligned.
  void check_aligned() const;

  friend bool operator==(const ParallelCorpus& a, const ParallelCorpus& b) {
    return a.source == b.source && a.target == b.target;
  }
};

// One sentence per line, LF separated. A trailing newline does not create
// an empty final sentence.
std::vector<Sentence> load_sentences(const std::filesystem::path& path);
ParallelCorpus load_corpus(
    const std::filesystem::path& source_path,
    const std::optional<std::filesystem::path>& target_path = std::nullopt);
void write_sentences(const std::filesystem::path& path,
                     std::span<const Sentence> sentences);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

// Randomness contract: every random draw in the toolkit comes from a
// generator seeded with derive_seed(spec, ordinal), so results depend only
// on (master_seed, stream_label, ordinal) and never on scheduling.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::string stream_label;
};

// SplitMix64 finalizer; a bijection on 64-bit integers.
std::uint64_t mix64(std::uint64_t x);
// FNV-1a over the label bytes.
std::uint64_t hash_label(std::string_view label);

// derive_seed(spec, i) =
//   mix64(mix64(master ^ mix64(fnv1a(label))) + 0x9E3779B97F4A7C15 * (i + 1))
// The golden-ratio multiplier is odd, so distinct ordinals of one stream
// always map to distinct seeds.
std::uint64_t derive_seed(const SeedSpec& spec, std::uint64_t ordinal);

// Thin wrapper over mt19937_64. The distributions are spelled out here
// rather than taken from <random> because the standard leaves their
// algorithms implementation-defined, which would break cross-platform
// reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(const SeedSpec& spec, std::uint64_t ordinal)
      : engine_(derive_seed(spec, ordinal)) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  // Uniform in [lo, hi], inclusive.
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  // Uniform in [0, 1) with 53 random bits.
  double unit();
  double uniform(double lo, double hi);
  bool bernoulli(double p);

 private:
  std::mt19937_64 engine_;
};

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). Work is split into contiguous chunks; the first exception
// thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace charspan
