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

#include <gtest/gtest.h>

#include <set>

#include "charspan/error.h"
#include "test_util.h"

namespace charspan {
namespace {

using testing::Gen;

std::vector<Sentence> lines(std::initializer_list<const char*> l) {
  std::vector<Sentence> out;
  for (const char* s : l) out.push_back(Sentence::from_utf8(s));
  return out;
}

BpeModel learn(const std::vector<Sentence>& corpus, std::size_t vocab_size,
               std::int64_t min_pair_freq = 1) {
  return learn_bpe({&corpus}, vocab_size, min_pair_freq);
}

std::vector<Merge> M(std::initializer_list<Merge> m) { return m; }

TEST(Learn, SingleMergeOnRepeatedPair) {
  const auto model = learn(lines({"aa aa aa"}), 2);
  EXPECT_EQ(model.merges(), M({{"a", "a"}}));
}

TEST(Learn, FrequencyDecides) {
  // ab occurs twice, ac once.
  const auto model = learn(lines({"ab ab ac"}), 4);
  EXPECT_EQ(model.merges(), M({{"a", "b"}}));
}

TEST(Learn, NoRoomToMerge) {
  EXPECT_TRUE(learn(lines({"ab ab ac"}), 3).merges().empty());
  EXPECT_THROW(learn(lines({"ab ab ac"}), 2), ValidationError);
}

TEST(Learn, HandTracedSequences) {
  // abab x2, ab x1: (a,b) = 2*2 + 1 = 5, (b,a) = 2; afterwards (ab,ab) = 2.
  const auto corpus = lines({"abab abab ab"});
  const auto full = learn(corpus, 100);
  EXPECT_EQ(full.merges(), M({{"a", "b"}, {"ab", "ab"}}));
  EXPECT_EQ(full.vocab().at("ab"), 5);
  EXPECT_EQ(full.vocab().at("abab"), 2);
  EXPECT_EQ(full.vocab().at("a"), 5);
  EXPECT_EQ(learn(corpus, 100, 3).merges(), M({{"a", "b"}}));

  // Equal counts fall back to bytewise (left, right) order.
  EXPECT_EQ(learn(lines({"ab ba"}), 10).merges(), M({{"a", "b"}, {"b", "a"}}));

  // yz = 3 beats xy = 2; then (x, yz) = 2.
  const auto xyz = learn(lines({"xyz xyz yz"}), 10);
  EXPECT_EQ(xyz.merges(), M({{"y", "z"}, {"x", "yz"}}));
  EXPECT_EQ(xyz.vocab().at("yz"), 3);
  EXPECT_EQ(xyz.vocab().at("xyz"), 2);

  // Overlapping runs: "aaa" holds (a,a) twice but merges left to right.
  const auto aaa = learn(lines({"aaa"}), 10);
  EXPECT_EQ(aaa.merges(), M({{"a", "a"}, {"aa", "a"}}));
}

TEST(Learn, SharedVocabularyUsesTarget) {
  ParallelCorpus c;
  c.source = lines({"ab"});
  c.target = lines({"cd cd cd"});
  EXPECT_EQ(learn_bpe(c, 5, 1, true).merges().front(), (Merge{"c", "d"}));
  EXPECT_EQ(learn_bpe(c, 5, 1, false).merges(), M({{"a", "b"}}));
}

TEST(Learn, MergePrefixMonotonicity) {
  Gen gen(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Sentence> corpus;
    for (std::size_t i = gen.size(3, 15); i > 0; --i) {
      corpus.push_back(Sentence::from_utf8(gen.words(gen.size(5, 40), U"abcde")));
    }
    const auto base = learn(corpus, 1000).vocab();
    std::size_t chars = 0;
    for (const auto& [tok, n] : base) chars += decode_utf8(tok).size() == 1;
    for (std::size_t k = chars; k < chars + 12; ++k) {
      const auto a = learn(corpus, k).merges();
      const auto b = learn(corpus, k + 1).merges();
      ASSERT_LE(a.size(), b.size());
      EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin())) << "k=" << k;
    }
  }
}

TEST(Learn, DeterministicBytes) {
  Gen gen(22);
  std::vector<Sentence> corpus;
  for (int i = 0; i < 200; ++i) {
    corpus.push_back(Sentence::from_utf8(gen.words(60, U"abcdefgकखा")));
  }
  EXPECT_EQ(format_merges(learn(corpus, 80, 2)), format_merges(learn(corpus, 80, 2)));
  EXPECT_EQ(format_vocab(learn(corpus, 80, 2)), format_vocab(learn(corpus, 80, 2)));
}

BpeModel model_of(std::initializer_list<Merge> merges) {
  return BpeModel(std::vector<Merge>(merges), {});
}

TEST(Segment, SingleMerge) {
  const auto g = segment(model_of({{"a", "b"}}), Sentence::from_utf8("abc"));
  EXPECT_EQ(g.tokens, (std::vector<std::string>{"ab@@", "c"}));
  EXPECT_EQ(g.line(), "ab@@ c");
}

TEST(Segment, PriorityIsRankNotPosition) {
  const auto m = model_of({{"b", "c"}, {"a", "b"}});
  EXPECT_EQ(segment(m, Sentence::from_utf8("abc")).tokens,
            (std::vector<std::string>{"a@@", "bc"}));
}

TEST(Segment, FullDropoutGivesCharacters) {
  Gen gen(23);
  std::vector<Sentence> corpus;
  for (int i = 0; i < 100; ++i) {
    corpus.push_back(Sentence::from_utf8(gen.words(40, U"abcd")));
  }
  const auto model = learn(corpus, 50);
  ASSERT_FALSE(model.merges().empty());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto g = segment(model, corpus[i], 1.0, {1, "bpe-dropout"}, i);
    for (const auto& tok : g.tokens) {
      const std::string_view t(tok);
      const auto bare = t.ends_with("@@") ? t.substr(0, t.size() - 2) : t;
      EXPECT_EQ(decode_utf8(bare).size(), 1u) << tok;
    }
  }
}

TEST(Segment, TokenCountBounds) {
  Gen gen(24);
  std::vector<Sentence> corpus;
  for (int i = 0; i < 200; ++i) {
    corpus.push_back(Sentence::from_utf8(gen.words(50, U"abcdefgh")));
  }
  const auto model = learn(corpus, 60);
  for (const auto& s : corpus) {
    std::size_t from = 0;
    const std::string& text = s.text();
    while (from < text.size()) {
      std::size_t sp = text.find(' ', from);
      if (sp == std::string::npos) sp = text.size();
      const auto word = Sentence::from_utf8(text.substr(from, sp - from));
      from = sp + 1;
      const auto g = segment(model, word);
      EXPECT_GE(g.tokens.size(), 1u);
      EXPECT_LE(g.tokens.size(), word.size());
    }
  }
}

TEST(Segment, CorpusMatchesPerSentence) {
  Gen gen(25);
  std::vector<Sentence> corpus;
  for (int i = 0; i < 300; ++i) {
    corpus.push_back(Sentence::from_utf8(gen.words(40, U"abcdefg")));
  }
  const auto model = learn(corpus, 40);
  for (double p : {0.0, 0.3}) {
    const SeedSpec seed{5, "bpe-dropout"};
    const auto a = segment_corpus(model, corpus, p, seed, 1);
    const auto b = segment_corpus(model, corpus, p, seed, 7);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      EXPECT_EQ(a[i].tokens, b[i].tokens);
      EXPECT_EQ(a[i].tokens, segment(model, corpus[i], p, seed, i).tokens);
    }
  }
}

TEST(Segment, DropoutVariesSegmentations) {
  const auto corpus = lines({"abcabc abcabc abcabc"});
  const auto model = learn(corpus, 20);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < 50; ++i) {
    seen.insert(segment(model, corpus[0], 0.5, {1, "x"}, i).line());
  }
  EXPECT_GT(seen.size(), 3u);
  EXPECT_THROW(segment(model, corpus[0], 1.5), ValidationError);
}

TEST(Desegment, Examples) {
  Segmentation g;
  g.tokens = {"ab@@", "c"};
  EXPECT_EQ(desegment(g).text(), "abc");
  g.tokens = {};
  EXPECT_EQ(desegment(g).text(), "");
  g.tokens = {"he@@", "llo", "wor@@", "ld"};
  EXPECT_EQ(desegment(g).text(), "hello world");
  EXPECT_EQ(desegment_line("he@@ llo wor@@ ld").text(), "hello world");
  g.tokens = {"dangling@@"};
  EXPECT_THROW(desegment(g), ValidationError);
}

TEST(Desegment, RoundTripFuzz) {
  Gen gen(26);
  std::vector<Sentence> corpus;
  for (int i = 0; i < 2000; ++i) {
    corpus.push_back(Sentence::from_utf8(gen.unicode_text(60)));
  }
  const auto model = learn(corpus, 400);
  for (double p : {0.0, 0.1, 1.0}) {
    const auto segs = segment_corpus(model, corpus, p, {3, "bpe-dropout"}, 4);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      ASSERT_EQ(desegment(segs[i]), corpus[i]) << corpus[i].text();
      // The line form keeps the words but normalizes the spacing.
      std::u32string squeezed;
      bool gap = false;
      for (char32_t c : corpus[i].code_points()) {
        if (is_whitespace(c)) {
          gap = !squeezed.empty();
          continue;
        }
        if (gap) squeezed += U' ';
        gap = false;
        squeezed += c;
      }
      EXPECT_EQ(desegment_line(segs[i].line()).code_points(), squeezed);
    }
  }
}

TEST(Persistence, SaveLoadRoundTrip) {
  Gen gen(27);
  std::vector<Sentence> corpus;
  for (int i = 0; i < 100; ++i) {
    corpus.push_back(Sentence::from_utf8(gen.words(50, U"abcdefकखग")));
  }
  const auto model = learn(corpus, 60);
  testing::TempDir dir;
  save_model(model, dir / "m", dir / "v");
  EXPECT_EQ(load_model(dir / "m", dir / "v"), model);
  const auto text = testing::slurp(dir / "m");
  EXPECT_EQ(text.substr(0, kMergesHeader.size() + 1),
            std::string(kMergesHeader) + "\n");
  // Vocab lines are sorted by count, then bytewise.
  const auto vocab = testing::slurp(dir / "v");
  std::vector<std::pair<std::int64_t, std::string>> rows;
  std::size_t from = 0;
  while (from < vocab.size()) {
    const std::size_t nl = vocab.find('\n', from);
    const std::string line = vocab.substr(from, nl - from);
    from = nl + 1;
    const std::size_t tab = line.find('\t');
    rows.emplace_back(-std::stoll(line.substr(tab + 1)), line.substr(0, tab));
  }
  EXPECT_TRUE(std::is_sorted(rows.begin(), rows.end()));
  EXPECT_EQ(rows.size(), model.vocab().size());
}

TEST(Persistence, MissingHeaderNamesIt) {
  try {
    parse_model("a b\n");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(kMergesHeader), std::string::npos);
  }
  EXPECT_THROW(parse_model(std::string(kMergesHeader) + "\nab\n"), ValidationError);
  EXPECT_THROW(parse_model(std::string(kMergesHeader) + "\n", "a 1\n"),
               ValidationError);
}

TEST(Persistence, HandWrittenTwoMergeFile) {
  testing::TempDir dir;
  testing::spit(dir / "m", std::string(kMergesHeader) + "\na b\nab c\n");
  const auto model = load_model(dir / "m");
  EXPECT_EQ(model.merges(), M({{"a", "b"}, {"ab", "c"}}));
  EXPECT_EQ(segment(model, Sentence::from_utf8("abcd abd")).tokens,
            (std::vector<std::string>{"abc@@", "d", "ab@@", "d"}));
  EXPECT_TRUE(model.vocab().contains("abc"));
  EXPECT_THROW(load_model(dir / "nope"), IoError);
}

}  // namespace
}  // namespace charspan
