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

#include "charspan/noise_engine.h"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "charspan/error.h"
#include "test_util.h"

namespace charspan {
namespace {

using testing::Gen;

Sentence S(const std::string& s) { return Sentence::from_utf8(s); }

NoiseEvent ev(std::size_t start, std::size_t len, NoiseOp op,
              std::u32string repl = {}) {
  NoiseEvent e;
  e.start = start;
  e.span_len = len;
  e.sampled_span = len;
  e.op = op;
  e.replacement = std::move(repl);
  return e;
}

// Plain DP, kept separate from the library's rolling-row version.
std::size_t lcs_oracle(const std::u32string& a, const std::u32string& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1,
                                          std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1
                                     : std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  return t[a.size()][b.size()];
}

ParallelCorpus random_corpus(std::uint64_t seed, std::size_t n,
                             std::size_t min_len, std::size_t max_len) {
  Gen gen(seed);
  ParallelCorpus c;
  for (std::size_t i = 0; i < n; ++i) {
    c.source.push_back(
        S(gen.words(gen.size(min_len, max_len), testing::latin_lower())));
    c.target.push_back(S("t" + std::to_string(i)));
  }
  return c;
}

TEST(Alphabet, Builtins) {
  const auto latin = CandidateAlphabet::builtin("latin-basic");
  EXPECT_EQ(latin.chars().size(), 52u);
  EXPECT_TRUE(latin.contains(U'q'));
  EXPECT_TRUE(latin.contains(U'Q'));
  EXPECT_FALSE(latin.contains(U' '));
  const auto deva = CandidateAlphabet::builtin("devanagari-basic");
  EXPECT_EQ(deva.chars().size(), 55u);
  EXPECT_TRUE(deva.contains(0x0915));
  EXPECT_FALSE(deva.contains(0x0929));  // NNNA is a nukta form
  for (char32_t c : deva.chars()) {
    EXPECT_GE(c, 0x0900u);
    EXPECT_LT(c, 0x0980u);
  }
  EXPECT_THROW(CandidateAlphabet::builtin("klingon"), ValidationError);
}

TEST(Alphabet, ParseRejectsBadEntries) {
  EXPECT_NO_THROW(CandidateAlphabet::parse("x", "a\nb\n"));
  EXPECT_THROW(CandidateAlphabet::parse("x", "a\na\n"), ValidationError);
  EXPECT_THROW(CandidateAlphabet::parse("x", "a\n \n"), ValidationError);
  EXPECT_THROW(CandidateAlphabet::parse("x", "ab\n"), ValidationError);
  EXPECT_THROW(CandidateAlphabet::parse("x", ""), ValidationError);
}

TEST(Config, Validation) {
  NoiseConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.p1 = 12;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.max_span = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.operations = {0.5, 0.2, 0.0};
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.p2 = 101;
  EXPECT_THROW(cfg.validate(), ValidationError);
  EXPECT_EQ(NoiseConfig{}.edge_margin(), 2u);
  EXPECT_EQ(NoiseConfig{}.effective_min_sentence_len(), 5u);
}

TEST(Plan, ZeroBudgetHasNoEvents) {
  NoiseConfig cfg;
  cfg.p1 = cfg.p2 = 0;
  for (auto mode : {NoiseMode::kBudget, NoiseMode::kLiteral}) {
    cfg.mode = mode;
    const auto plan = plan_noise(S("the quick brown fox jumps"), 0, cfg);
    EXPECT_TRUE(plan.events.empty());
  }
  const auto c = random_corpus(1, 50, 10, 80);
  cfg.mode = NoiseMode::kBudget;
  EXPECT_EQ(charspan_augment(c, cfg).corpus, c);
  EXPECT_EQ(unigram_char_noise(c, cfg).corpus, c);
}

TEST(Plan, LiteralArithmetic) {
  NoiseConfig cfg;
  cfg.mode = NoiseMode::kLiteral;
  cfg.p1 = cfg.p2 = 10.5;
  EXPECT_DOUBLE_EQ(literal_corpus_percent(cfg), 10.5);
  const auto plan = plan_noise(S(std::string(100, 'a')), 0, cfg);
  EXPECT_EQ(plan.alpha, 3);
  EXPECT_EQ(plan.site_count, 9);
  EXPECT_EQ(plan.site_indices.size(), 9u);
}

TEST(Plan, LiteralSitesAreDistinctAndEligible) {
  NoiseConfig cfg;
  cfg.mode = NoiseMode::kLiteral;
  Gen gen(2);
  for (int trial = 0; trial < 300; ++trial) {
    cfg.max_span = static_cast<int>(gen.size(1, 5));
    cfg.p1 = gen.real() * 30;
    cfg.p2 = cfg.p1 + gen.real() * 10;
    cfg.seed_spec = {static_cast<std::uint64_t>(trial), "noise"};
    const std::size_t sz = gen.size(0, 60);
    const auto plan = plan_noise(S(std::string(sz, 'x')), trial, cfg);
    const std::size_t m = cfg.edge_margin();
    const std::int64_t expected_s =
        cfg.max_span * static_cast<std::int64_t>(plan.sampled_percent / cfg.max_span);
    EXPECT_EQ(plan.site_count, expected_s);
    if (plan.skipped_short) {
      EXPECT_LT(sz, cfg.effective_min_sentence_len());
      continue;
    }
    const std::size_t eligible = sz + 1 >= 2 * m ? sz + 1 - 2 * m : 0;
    EXPECT_EQ(plan.site_indices.size(),
              std::min<std::size_t>(eligible, static_cast<std::size_t>(expected_s)));
    std::set<std::size_t> unique(plan.site_indices.begin(), plan.site_indices.end());
    EXPECT_EQ(unique.size(), plan.site_indices.size());
    for (std::size_t k : plan.site_indices) {
      EXPECT_GE(k + 1, m);
      EXPECT_LE(k + m + 1, sz);
    }
    for (const auto& e : plan.events) {
      // Odd extent centred on a site; Sp = 2 collapses to one character.
      EXPECT_EQ(e.span_len, 2 * ((e.sampled_span - 1) / 2) + 1);
      EXPECT_LE(e.start + e.span_len, sz);
    }
  }
}

TEST(Plan, BudgetConsumesExactly) {
  NoiseConfig cfg;
  cfg.p1 = cfg.p2 = 10.0;
  Gen gen(3);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    cfg.seed_spec = {seed, "noise"};
    const auto plan =
        plan_noise(S(gen.words(100, testing::latin_lower())), seed, cfg);
    std::size_t recount = 0;
    for (const auto& e : plan.events) recount += e.span_len;
    EXPECT_EQ(recount, 10u);
    EXPECT_EQ(plan.budget, 10u);
  }
}

TEST(Plan, BudgetNeverExceeded) {
  Gen gen(4);
  for (int trial = 0; trial < 2000; ++trial) {
    NoiseConfig cfg;
    cfg.max_span = static_cast<int>(gen.size(1, 6));
    cfg.p1 = gen.real() * 40;
    cfg.p2 = std::min(100.0, cfg.p1 + gen.real() * 20);
    cfg.seed_spec = {static_cast<std::uint64_t>(trial), "noise"};
    const std::size_t sz = gen.size(0, 120);
    const Sentence s = S(gen.ascii(sz, "abcdef "));
    const auto plan = plan_noise(s, trial, cfg);
    if (plan.skipped_short) continue;
    const auto cap = static_cast<std::size_t>(
        std::llround(plan.sampled_percent / 100.0 * static_cast<double>(sz)));
    std::size_t affected = 0;
    std::size_t frontier = 0;
    const std::size_t m = cfg.edge_margin();
    for (const auto& e : plan.events) {
      affected += e.span_len;
      EXPECT_GE(e.start, frontier) << "overlap";
      frontier = e.start + e.span_len;
      EXPECT_GE(e.start + 1, m);
      EXPECT_LE(e.start + m + 1, sz);
      EXPECT_GE(e.sampled_span, 1u);
      EXPECT_LE(e.sampled_span, static_cast<std::size_t>(cfg.max_span));
      EXPECT_LE(e.span_len, e.sampled_span);
      EXPECT_EQ(e.replacement.size(), e.op == NoiseOp::kDelete ? 0u : 1u);
    }
    EXPECT_LE(affected, cap);
    EXPECT_EQ(affected, plan.affected_chars());
  }
}

TEST(Plan, ShortSentencesAreSkipped) {
  NoiseConfig cfg;
  cfg.p1 = cfg.p2 = 100;
  EXPECT_TRUE(plan_noise(S("abcd"), 0, cfg).skipped_short);
  EXPECT_FALSE(plan_noise(S("abcde"), 0, cfg).skipped_short);
  cfg.min_sentence_len = 10;
  EXPECT_TRUE(plan_noise(S("abcdefghi"), 0, cfg).skipped_short);
}

TEST(Apply, HandExamples) {
  const Sentence s = S("abcdefgh");
  EXPECT_EQ(apply_events(s, {ev(2, 3, NoiseOp::kDelete)}).text(), "abfgh");
  EXPECT_EQ(apply_events(s, {ev(2, 3, NoiseOp::kReplace, U"x")}).text(),
            "abxfgh");
  EXPECT_EQ(apply_events(s, {}).text(), "abcdefgh");
  EXPECT_EQ(apply_events(S("abc"), {ev(1, 1, NoiseOp::kReplace, U"x")}).text(),
            "axc");
  EXPECT_EQ(apply_events(S("abc"), {ev(1, 1, NoiseOp::kInsert, U"x")}).text(),
            "axbc");
  EXPECT_EQ(apply_events(S("abc"), {ev(3, 1, NoiseOp::kInsert, U"x")}).text(),
            "abcx");
  EXPECT_EQ(apply_events(s, {ev(0, 2, NoiseOp::kDelete),
                             ev(4, 2, NoiseOp::kReplace, U"yz")})
                .text(),
            "cdyzgh");
}

TEST(Apply, RejectsMalformedEvents) {
  const Sentence s = S("abcdefgh");
  EXPECT_THROW(apply_events(s, {ev(7, 2, NoiseOp::kDelete)}), ValidationError);
  EXPECT_THROW(apply_events(s, {ev(1, 3, NoiseOp::kDelete),
                                ev(2, 1, NoiseOp::kDelete)}),
               ValidationError);
  EXPECT_THROW(apply_events(s, {ev(4, 1, NoiseOp::kDelete),
                                ev(1, 1, NoiseOp::kDelete)}),
               ValidationError);
  EXPECT_THROW(apply_events(s, {ev(1, 1, NoiseOp::kReplace)}), ValidationError);
  EXPECT_THROW(apply_events(s, {ev(1, 1, NoiseOp::kDelete, U"q")}),
               ValidationError);
}

TEST(Apply, GraphemeUnits) {
  const Sentence word = S("किताब");
  EXPECT_EQ(apply_events(word, {ev(0, 1, NoiseOp::kDelete)}, UnitMode::kGrapheme)
                .text(),
            "ताब");
  // The same index in code points would orphan the matra.
  EXPECT_EQ(apply_events(word, {ev(0, 1, NoiseOp::kDelete)}).code_points().front(),
            0x093Fu);
}

TEST(Apply, OverlappingUnion) {
  const Sentence s = S("abcdefgh");
  EXPECT_EQ(apply_events_overlapping(s, {ev(1, 3, NoiseOp::kDelete),
                                         ev(2, 3, NoiseOp::kReplace, U"x")})
                .text(),
            "axfgh");
  Gen gen(8);
  NoiseConfig cfg;
  for (int i = 0; i < 200; ++i) {
    const Sentence t = S(gen.words(60, testing::latin_lower()));
    const auto plan = plan_noise(t, i, cfg);
    EXPECT_EQ(apply_events_overlapping(t, plan.events), apply_events(t, plan.events));
  }
}

TEST(Augment, InsertionOnlyNeverShrinks) {
  NoiseConfig cfg = NoiseConfig::unigram_defaults();
  cfg.operations = {0.0, 0.0, 1.0};
  const auto c = random_corpus(9, 300, 0, 60);
  const auto r = unigram_char_noise(c, cfg);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_GE(r.corpus.source[i].size(), c.source[i].size());
  }
}

TEST(Augment, UnigramUsesSingleCharacterSpans) {
  NoiseConfig cfg = NoiseConfig::unigram_defaults();
  cfg.max_span = 3;  // ignored by the baseline
  const auto r = unigram_char_noise(random_corpus(10, 300, 20, 80), cfg);
  std::map<NoiseOp, int> ops;
  for (const auto& p : r.plans) {
    for (const auto& e : p.events) {
      EXPECT_EQ(e.span_len, 1u);
      ++ops[e.op];
    }
  }
  EXPECT_GT(ops[NoiseOp::kInsert], 0);
  EXPECT_GT(ops[NoiseOp::kDelete], 0);
  EXPECT_GT(ops[NoiseOp::kReplace], 0);
}

TEST(Augment, TargetUntouchedAndDeterministic) {
  const auto c = random_corpus(11, 500, 0, 120);
  NoiseConfig cfg;
  cfg.seed_spec = {77, "noise"};
  const auto a = charspan_augment(c, cfg, 1);
  const auto b = charspan_augment(c, cfg, 8);
  EXPECT_EQ(a.corpus.target, c.target);
  EXPECT_EQ(a.corpus, b.corpus);
  EXPECT_EQ(a.plans, b.plans);
  EXPECT_EQ(format_trace(a.plans), format_trace(b.plans));
  cfg.seed_spec = {78, "noise"};
  EXPECT_NE(charspan_augment(c, cfg, 4).corpus, a.corpus);
}

TEST(Augment, MeanFractionNearTarget) {
  Gen gen(12);
  ParallelCorpus c;
  for (int i = 0; i < 2000; ++i) c.source.push_back(S(gen.ascii(100, "abcdefghij")));
  const auto r = charspan_augment(c, NoiseConfig{});
  double total = 0;
  for (const auto& p : r.plans) total += p.affected_chars() / 100.0;
  EXPECT_GE(total / 2000, 0.085);
  EXPECT_LE(total / 2000, 0.115);
}

TEST(Augment, LcsrLowerBound) {
  Gen gen(13);
  for (int trial = 0; trial < 300; ++trial) {
    NoiseConfig cfg;
    cfg.max_span = static_cast<int>(gen.size(1, 5));
    cfg.p1 = gen.real() * 30;
    cfg.p2 = cfg.p1 + gen.real() * 20;
    cfg.multi_char_replacement = gen.real() < 0.3;
    cfg.seed_spec = {static_cast<std::uint64_t>(trial), "noise"};
    ParallelCorpus c;
    c.source.push_back(S(gen.words(gen.size(1, 90), testing::latin_lower())));
    const auto r = charspan_augment(c, cfg);
    const auto& a = c.source[0].code_points();
    const auto& b = r.corpus.source[0].code_points();
    const double ratio = static_cast<double>(lcs_oracle(a, b)) /
                         static_cast<double>(std::max(a.size(), b.size()));
    const double bound = 1.0 - static_cast<double>(r.plans[0].affected_chars()) /
                                   static_cast<double>(a.size());
    EXPECT_GE(ratio + 1e-12, bound);
  }
}

TEST(Augment, MultiCharReplacementKeepsLength) {
  NoiseConfig cfg;
  cfg.operations = {0.0, 1.0, 0.0};
  cfg.multi_char_replacement = true;
  const auto c = random_corpus(14, 200, 10, 80);
  const auto r = charspan_augment(c, cfg);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(r.corpus.source[i].size(), c.source[i].size());
    for (const auto& e : r.plans[i].events) {
      EXPECT_EQ(e.replacement.size(), e.span_len);
    }
  }
}

TEST(Augment, DevanagariAlphabetInGraphemeMode) {
  NoiseConfig cfg;
  cfg.alphabet = CandidateAlphabet::builtin("devanagari-basic");
  cfg.unit_mode = UnitMode::kGrapheme;
  cfg.p1 = cfg.p2 = 30;
  ParallelCorpus c;
  for (int i = 0; i < 50; ++i) c.source.push_back(S("किताब पढ़ने वाला लड़का घर गया"));
  const auto r = charspan_augment(c, cfg, 2);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(r.corpus.source[i],
              apply_events(c.source[i], r.plans[i].events, UnitMode::kGrapheme));
    for (const auto& e : r.plans[i].events) {
      for (char32_t ch : e.replacement) EXPECT_TRUE(cfg.alphabet.contains(ch));
    }
  }
}

TEST(Trace, RoundTrip) {
  NoiseConfig cfg = NoiseConfig::unigram_defaults();
  cfg.alphabet = CandidateAlphabet::builtin("devanagari-basic");
  const auto r = unigram_char_noise(random_corpus(15, 100, 10, 50), cfg);
  const std::string text = format_trace(r.plans);
  EXPECT_EQ(text.substr(0, kTraceHeader.size()), kTraceHeader);
  std::vector<NoiseEvent> flat;
  for (const auto& p : r.plans) flat.insert(flat.end(), p.events.begin(), p.events.end());
  EXPECT_EQ(parse_trace(text), flat);
}

TEST(Trace, FiveColumnFormAndErrors) {
  const auto events = parse_trace("#h\n0\t3\t2\tdelete\t\n1\t0\t1\treplace\tq\n");
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0].sampled_span, 2u);
  EXPECT_EQ(events[1].replacement, U"q");
  EXPECT_THROW(parse_trace("0\t3\tdelete\t\n"), ValidationError);
  EXPECT_THROW(parse_trace("0\tx\t1\tdelete\t\n"), ValidationError);
  EXPECT_THROW(parse_trace("0\t1\t1\tmangle\t\n"), ValidationError);
}

}  // namespace
}  // namespace charspan
