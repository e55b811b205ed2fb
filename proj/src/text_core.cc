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

#include "charspan/text_core.h"

#include <unicode/brkiter.h>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "charspan/error.h"

namespace charspan {

std::string_view to_string(UnitMode mode) {
  return mode == UnitMode::kGrapheme ? "grapheme" : "codepoint";
}

UnitMode parse_unit_mode(std::string_view name) {
  if (name == "codepoint") return UnitMode::kCodePoint;
  if (name == "grapheme") return UnitMode::kGrapheme;
  throw ValidationError("unknown unit mode '" + std::string(name) +
                        "' (expected codepoint or grapheme)");
}

std::u32string decode_utf8(std::string_view bytes) {
  std::u32string out;
  out.reserve(bytes.size());
  const auto* data = reinterpret_cast<const uint8_t*>(bytes.data());
  const int32_t length = static_cast<int32_t>(bytes.size());
  int32_t i = 0;
  while (i < length) {
    const int32_t at = i;
    UChar32 c;
    U8_NEXT(data, i, length, c);
    if (c < 0) {
      throw ValidationError("invalid UTF-8 at byte offset " +
                            std::to_string(at));
    }
    out.push_back(static_cast<char32_t>(c));
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode_utf8(std::u32string_view code_points) {
  std::string out;
  out.reserve(code_points.size());
  for (char32_t cp : code_points) append_utf8(out, cp);
  return out;
}

bool is_line_break(char32_t cp) {
  switch (cp) {
    case U'\n':
    case U'\r':
    case U'\v':
    case U'\f':
    case 0x0085:
    case 0x2028:
    case 0x2029:
      return true;
    default:
      return false;
  }
}

bool is_whitespace(char32_t cp) {
  return u_isUWhiteSpace(static_cast<UChar32>(cp));
}

namespace {

void reject_line_breaks(const std::u32string& cps) {
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (is_line_break(cps[i])) {
      throw ValidationError("line-break character at code point " +
                            std::to_string(i) + " inside a sentence");
    }
  }
}

}  // namespace

Sentence Sentence::from_utf8(std::string text) {
  Sentence s;
  s.code_points_ = decode_utf8(text);
  reject_line_breaks(s.code_points_);
  s.text_ = std::move(text);
  return s;
}

Sentence Sentence::from_code_points(std::u32string code_points) {
  for (char32_t cp : code_points) {
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw ValidationError("invalid Unicode scalar value");
    }
  }
  reject_line_breaks(code_points);
  Sentence s;
  s.text_ = encode_utf8(code_points);
  s.code_points_ = std::move(code_points);
  return s;
}

namespace {

// BreakIterator instances are not thread-safe; keep one per thread.
icu::BreakIterator& grapheme_iterator() {
  thread_local std::unique_ptr<icu::BreakIterator> it = [] {
    UErrorCode status = U_ZERO_ERROR;
    std::unique_ptr<icu::BreakIterator> bi(
        icu::BreakIterator::createCharacterInstance(icu::Locale::getRoot(),
                                                    status));
    if (U_FAILURE(status)) {
      throw InvariantError(std::string("ICU break iterator: ") +
                           u_errorName(status));
    }
    return bi;
  }();
  return *it;
}

}  // namespace

std::vector<UnitSpan> split_units(const Sentence& s, UnitMode mode) {
  const auto& cps = s.code_points();
  std::vector<UnitSpan> units;
  if (mode == UnitMode::kCodePoint) {
    units.reserve(cps.size());
    for (std::size_t i = 0; i < cps.size(); ++i) units.push_back({i, i + 1});
    return units;
  }
  if (cps.empty()) return units;

  // Walk UTF-16 boundaries and translate them back to code point indices.
  icu::UnicodeString ustr = icu::UnicodeString::fromUTF32(
      reinterpret_cast<const UChar32*>(cps.data()),
      static_cast<int32_t>(cps.size()));
  std::vector<std::size_t> cp_at_utf16(ustr.length() + 1, 0);
  {
    std::size_t cp = 0;
    int32_t u = 0;
    while (u < ustr.length()) {
      cp_at_utf16[u] = cp;
      u = ustr.moveIndex32(u, 1);
      ++cp;
    }
    cp_at_utf16[ustr.length()] = cp;
  }
  auto& it = grapheme_iterator();
  it.setText(ustr);
  int32_t start = it.first();
  for (int32_t end = it.next(); end != icu::BreakIterator::DONE;
       start = end, end = it.next()) {
    units.push_back({cp_at_utf16[start], cp_at_utf16[end]});
  }
  return units;
}

std::size_t char_length(const Sentence& s, UnitMode mode) {
  if (mode == UnitMode::kCodePoint) return s.size();
  return split_units(s, mode).size();
}

Sentence normalize_nfc(const Sentence& s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) {
    throw InvariantError(std::string("ICU NFC: ") + u_errorName(status));
  }
  icu::UnicodeString in = icu::UnicodeString::fromUTF8(s.text());
  icu::UnicodeString out = nfc->normalize(in, status);
  if (U_FAILURE(status)) {
    throw InvariantError(std::string("ICU NFC: ") + u_errorName(status));
  }
  std::string text;
  out.toUTF8String(text);
  return Sentence::from_utf8(std::move(text));
}

void ParallelCorpus::check_aligned() const {
  if (!target.empty() && target.size() != source.size()) {
    throw ValidationError("corpus '" + name + "' is misaligned: source has " +
                          std::to_string(source.size()) +
                          " sentences, target has " +
                          std::to_string(target.size()));
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failure on " + path.string());
  return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

std::vector<Sentence> load_sentences(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::vector<Sentence> sentences;
  std::size_t pos = 0;
  std::size_t line_no = 1;
  while (pos < bytes.size()) {
    std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) nl = bytes.size();
    try {
      sentences.push_back(Sentence::from_utf8(bytes.substr(pos, nl - pos)));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": " + e.what());
    }
    pos = nl + 1;
    ++line_no;
  }
  return sentences;
}

ParallelCorpus load_corpus(
    const std::filesystem::path& source_path,
    const std::optional<std::filesystem::path>& target_path) {
  ParallelCorpus corpus;
  corpus.name = source_path.filename().string();
  corpus.source = load_sentences(source_path);
  if (target_path) {
    corpus.target = load_sentences(*target_path);
    if (corpus.target.size() != corpus.source.size()) {
      throw ValidationError(
          "line count mismatch: " + source_path.string() + " has " +
          std::to_string(corpus.source.size()) + " lines, " +
          target_path->string() + " has " +
          std::to_string(corpus.target.size()));
    }
  }
  return corpus;
}

void write_sentences(const std::filesystem::path& path,
                     std::span<const Sentence> sentences) {
  std::string bytes;
  for (const auto& s : sentences) {
    bytes += s.text();
    bytes += '\n';
  }
  write_file(path, bytes);
}

std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t derive_seed(const SeedSpec& spec, std::uint64_t ordinal) {
  const std::uint64_t stream =
      mix64(spec.master_seed ^ mix64(hash_label(spec.stream_label)));
  return mix64(stream + 0x9E3779B97F4A7C15ULL * (ordinal + 1));
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw InvariantError("Rng::below called with n == 0");
  // Reject the low residue class so every outcome has equal weight.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = next();
    if (r >= threshold) return r % n;
  }
}

std::int64_t Rng::between(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw InvariantError("Rng::between with empty range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(next());
  return lo + static_cast<std::int64_t>(below(span));
}

double Rng::unit() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  if (lo == hi) return lo;
  return lo + (hi - lo) * unit();
}

bool Rng::bernoulli(double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return unit() < p;
}

void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(threads, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace charspan
