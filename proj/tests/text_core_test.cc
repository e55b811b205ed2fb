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

#include <gtest/gtest.h>

#include <atomic>
#include <set>

#include "charspan/error.h"
#include "test_util.h"

namespace charspan {
namespace {

using testing::Gen;
using testing::TempDir;

TEST(Utf8, DecodesAndEncodes) {
  const std::string text = "a\xC3\xA9\xE0\xA4\x95\xF0\x9F\x98\x80";
  const std::u32string cps = decode_utf8(text);
  EXPECT_EQ(cps, (std::u32string{U'a', 0xE9, 0x0915, 0x1F600}));
  EXPECT_EQ(encode_utf8(cps), text);
}

TEST(Utf8, RejectsMalformed) {
  EXPECT_THROW(decode_utf8("\xC3"), ValidationError);
  EXPECT_THROW(decode_utf8("\xC0\xAF"), ValidationError);        // overlong
  EXPECT_THROW(decode_utf8("\xED\xA0\x80"), ValidationError);    // surrogate
  EXPECT_THROW(decode_utf8("ok\xFF"), ValidationError);
  try {
    decode_utf8("abc\xFF");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find('3'), std::string::npos);
  }
}

TEST(SentenceTest, RejectsLineBreaks) {
  EXPECT_THROW(Sentence::from_utf8("a\nb"), ValidationError);
  EXPECT_THROW(Sentence::from_utf8("a\rb"), ValidationError);
  EXPECT_THROW(Sentence::from_utf8("a\xE2\x80\xA8" "b"), ValidationError);
  EXPECT_NO_THROW(Sentence::from_utf8("a\tb"));
}

TEST(CharLength, Basics) {
  EXPECT_EQ(char_length(Sentence::from_utf8("")), 0u);
  EXPECT_EQ(char_length(Sentence::from_utf8("abc")), 3u);
}

TEST(CharLength, DevanagariWordWithMatra) {
  // "kitab": KA, VOWEL SIGN I, TA, VOWEL SIGN AA, BA.
  const Sentence word = Sentence::from_utf8("किताब");
  EXPECT_EQ(word.code_points(),
            (std::u32string{0x0915, 0x093F, 0x0924, 0x093E, 0x092C}));
  EXPECT_EQ(char_length(word), 5u);
  // Each matra joins its consonant in grapheme mode.
  EXPECT_EQ(char_length(word, UnitMode::kGrapheme), 3u);
  const auto units = split_units(word, UnitMode::kGrapheme);
  ASSERT_EQ(units.size(), 3u);
  EXPECT_EQ(units[0], (UnitSpan{0, 2}));
  EXPECT_EQ(units[1], (UnitSpan{2, 4}));
  EXPECT_EQ(units[2], (UnitSpan{4, 5}));
}

TEST(CharLength, AdditiveOverConcatenation) {
  Gen gen(11);
  for (int i = 0; i < 500; ++i) {
    const std::string a = gen.unicode_text(30);
    const std::string b = gen.unicode_text(30);
    EXPECT_EQ(char_length(Sentence::from_utf8(a + b)),
              char_length(Sentence::from_utf8(a)) +
                  char_length(Sentence::from_utf8(b)));
  }
}

TEST(Normalize, ComposesToNfc) {
  const Sentence decomposed = Sentence::from_utf8("e\xCC\x81");
  EXPECT_EQ(normalize_nfc(decomposed).text(), "\xC3\xA9");
  // Devanagari QA (U+0958) is a composition exclusion and decomposes.
  EXPECT_EQ(normalize_nfc(Sentence::from_utf8("\xE0\xA5\x98")).code_points(),
            (std::u32string{0x0915, 0x093C}));
}

TEST(Corpus, LoadsAlignedPair) {
  TempDir dir;
  testing::spit(dir / "s", "one\ntwo\n");
  testing::spit(dir / "t", "uno\ndos\n");
  const auto c = load_corpus(dir / "s", dir / "t");
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(c.target[1].text(), "dos");
}

TEST(Corpus, FinalNewlineAddsNoSentence) {
  TempDir dir;
  testing::spit(dir / "a", "x\ny\n");
  testing::spit(dir / "b", "x\ny");
  EXPECT_EQ(load_sentences(dir / "a").size(), 2u);
  EXPECT_EQ(load_sentences(dir / "b").size(), 2u);
  testing::spit(dir / "c", "x\n\ny\n");
  const auto c = load_sentences(dir / "c");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_TRUE(c[1].empty());
}

TEST(Corpus, MisalignmentNamesBothCounts) {
  TempDir dir;
  testing::spit(dir / "s", "a\nb\nc\n");
  testing::spit(dir / "t", "a\nb\n");
  try {
    load_corpus(dir / "s", dir / "t");
    FAIL() << "expected a ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2"), std::string::npos) << msg;
  }
}

TEST(Corpus, ErrorsCarryLineNumber) {
  TempDir dir;
  testing::spit(dir / "bad", "fine\nbroken \xFF\n");
  try {
    load_sentences(dir / "bad");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
}

TEST(Corpus, MissingFileIsIoError) {
  EXPECT_THROW(load_sentences("/nonexistent/charspan/file"), IoError);
}

TEST(Corpus, RoundTripIsByteExact) {
  TempDir dir;
  Gen gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Sentence> lines;
    const std::size_t n = gen.size(0, 40);
    for (std::size_t i = 0; i < n; ++i) {
      lines.push_back(Sentence::from_utf8(gen.unicode_text(50)));
    }
    write_sentences(dir / "c", lines);
    const std::string bytes = testing::slurp(dir / "c");
    const auto back = load_sentences(dir / "c");
    // A final empty line cannot be told apart from the trailing newline.
    if (!lines.empty() && lines.back().empty()) continue;
    EXPECT_EQ(back, lines);
    write_sentences(dir / "d", back);
    EXPECT_EQ(testing::slurp(dir / "d"), bytes);
  }
}

// Independent copy of the documented seed derivation.
// SplitMix64 finalizer.
std::uint64_t oracle_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t oracle_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t i) {
  const std::uint64_t h = testing::fnv1a64(label);
  return oracle_mix(oracle_mix(master ^ oracle_mix(h)) +
                    0x9E3779B97F4A7C15ULL * (i + 1));
}

TEST(DeriveSeed, MatchesDocumentedFormula) {
  for (std::uint64_t master : {0ULL, 7ULL, 123456789ULL, ~0ULL}) {
    for (const char* label : {"noise", "bpe", "", "token-augment/epoch-3"}) {
      for (std::uint64_t i : {0ULL, 1ULL, 99ULL}) {
        EXPECT_EQ(derive_seed({master, label}, i), oracle_seed(master, label, i));
      }
    }
  }
}

TEST(DeriveSeed, DistinctStreams) {
  const SeedSpec noise{7, "noise"};
  EXPECT_EQ(derive_seed(noise, 0), derive_seed(noise, 0));
  EXPECT_NE(derive_seed(noise, 0), derive_seed(noise, 1));
  EXPECT_NE(derive_seed(noise, 0), derive_seed({7, "bpe"}, 0));
  EXPECT_NE(derive_seed(noise, 0), derive_seed({8, "noise"}, 0));
}

TEST(DeriveSeed, PureFunction) {
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) seen.insert(derive_seed({42, "noise"}, 17));
  EXPECT_EQ(seen.size(), 1u);
}

TEST(DeriveSeed, NoCollisionsAcrossOrdinals) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 100000; ++i) seen.insert(derive_seed({1, "x"}, i));
  EXPECT_EQ(seen.size(), 100000u);
}

TEST(RngTest, BelowIsUniformAndInRange) {
  Rng rng(9);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto x = rng.below(7);
    ASSERT_LT(x, 7u);
    ++counts[x];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(RngTest, UnitAndBetween) {
  Rng rng(3);
  double sum = 0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.unit();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    const auto b = rng.between(-2, 2);
    ASSERT_GE(b, -2);
    ASSERT_LE(b, 2);
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.01);
  EXPECT_EQ(Rng(5).between(4, 4), 4);
  EXPECT_FALSE(Rng(1).bernoulli(0.0));
  EXPECT_TRUE(Rng(1).bernoulli(1.0));
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (unsigned threads : {1u, 3u, 8u}) {
    std::vector<std::atomic<int>> hits(1001);
    parallel_for(hits.size(), threads, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(ParallelFor, RethrowsWorkerException) {
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i) {
                              if (i == 57) throw ValidationError("boom");
                            }),
               ValidationError);
}

}  // namespace
}  // namespace charspan
