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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <unicode/uchar.h>

#include "charspan/builtin_alphabets.h"
#include "charspan/error.h"

namespace charspan {

std::string_view to_string(NoiseOp op) {
  switch (op) {
    case NoiseOp::kDelete:
      return "delete";
    case NoiseOp::kReplace:
      return "replace";
    case NoiseOp::kInsert:
      return "insert";
  }
  return "?";
}

NoiseOp parse_noise_op(std::string_view name) {
  if (name == "delete") return NoiseOp::kDelete;
  if (name == "replace") return NoiseOp::kReplace;
  if (name == "insert") return NoiseOp::kInsert;
  throw ValidationError("unknown noise operation '" + std::string(name) + "'");
}

std::string_view to_string(NoiseMode mode) {
  return mode == NoiseMode::kLiteral ? "literal" : "budget";
}

NoiseMode parse_noise_mode(std::string_view name) {
  if (name == "budget") return NoiseMode::kBudget;
  if (name == "literal") return NoiseMode::kLiteral;
  throw ValidationError("unknown noise mode '" + std::string(name) +
                        "' (expected budget or literal)");
}

std::string_view to_string(OverlapPolicy policy) {
  return policy == OverlapPolicy::kAllow ? "allow" : "forbid";
}

OverlapPolicy parse_overlap_policy(std::string_view name) {
  if (name == "forbid") return OverlapPolicy::kForbid;
  if (name == "allow") return OverlapPolicy::kAllow;
  throw ValidationError("unknown overlap policy '" + std::string(name) +
                        "' (expected forbid or allow)");
}

// ---------------------------------------------------------------------------
// CandidateAlphabet

CandidateAlphabet::CandidateAlphabet(std::string id, std::u32string chars)
    : id_(std::move(id)), chars_(std::move(chars)) {
  if (chars_.empty()) {
    throw ValidationError("alphabet '" + id_ + "' is empty");
  }
  std::set<char32_t> seen;
  for (char32_t c : chars_) {
    if (is_whitespace(c) || u_iscntrl(static_cast<UChar32>(c))) {
      throw ValidationError("alphabet '" + id_ +
                            "' contains a whitespace or control character");
    }
    if (!seen.insert(c).second) {
      std::string dup;
      append_utf8(dup, c);
      throw ValidationError("alphabet '" + id_ + "' lists '" + dup +
                            "' more than once");
    }
  }
}

CandidateAlphabet CandidateAlphabet::parse(std::string id,
                                           std::string_view text) {
  std::u32string chars;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::u32string cps = decode_utf8(line);
    if (cps.size() != 1) {
      throw ValidationError("alphabet '" + id + "' line " +
                            std::to_string(line_no) +
                            ": expected exactly one character");
    }
    chars.push_back(cps[0]);
  }
  return CandidateAlphabet(std::move(id), std::move(chars));
}

CandidateAlphabet CandidateAlphabet::builtin(std::string_view id) {
  if (id == "latin-basic") {
    return parse(std::string(id), detail::kLatinBasicAlphabet);
  }
  if (id == "devanagari-basic") {
    return parse(std::string(id), detail::kDevanagariBasicAlphabet);
  }
  throw ValidationError("unknown builtin alphabet '" + std::string(id) +
                        "' (expected latin-basic or devanagari-basic)");
}

CandidateAlphabet CandidateAlphabet::from_file(
    const std::filesystem::path& path) {
  return parse("custom", read_file(path));
}

bool CandidateAlphabet::contains(char32_t c) const {
  return chars_.find(c) != std::u32string::npos;
}

// ---------------------------------------------------------------------------
// NoiseConfig

NoiseConfig NoiseConfig::unigram_defaults() {
  NoiseConfig cfg;
  cfg.max_span = 1;
  cfg.operations = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  return cfg;
}

std::size_t NoiseConfig::edge_margin() const {
  return static_cast<std::size_t>((max_span + 1) / 2);
}

std::size_t NoiseConfig::effective_min_sentence_len() const {
  return min_sentence_len.value_or(2 * edge_margin() + 1);
}

void NoiseConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw ValidationError("invalid noise config: " + msg);
  };
  if (!std::isfinite(p1) || !std::isfinite(p2) || p1 < 0.0 || p2 > 100.0 ||
      p1 > p2) {
    fail("percent range must satisfy 0 <= p1 <= p2 <= 100");
  }
  if (max_span < 1) fail("max_span must be >= 1");
  const double w[] = {operations.del, operations.replace, operations.insert};
  double sum = 0.0;
  for (double x : w) {
    if (!std::isfinite(x) || x < 0.0) fail("operation weights must be >= 0");
    sum += x;
  }
  if (sum <= 0.0) fail("at least one operation must have positive weight");
  if (std::abs(sum - 1.0) > 1e-9) fail("operation weights must sum to 1");
  if (mode == NoiseMode::kLiteral && operations.insert > 0.0) {
    fail("literal mode supports only delete and replace");
  }
  if (alphabet.chars().empty() &&
      (operations.replace > 0.0 || operations.insert > 0.0)) {
    fail("replace/insert need a non-empty alphabet");
  }
}

std::size_t SentencePlan::affected_chars() const {
  std::size_t n = 0;
  for (const auto& e : events) {
    if (e.op != NoiseOp::kInsert) n += e.span_len;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Planning

namespace {

NoiseOp draw_op(Rng& rng, const OperationWeights& w) {
  const double u = rng.unit();
  if (u < w.del) return NoiseOp::kDelete;
  if (u < w.del + w.replace || w.insert <= 0.0) {
    return w.replace > 0.0 ? NoiseOp::kReplace : NoiseOp::kDelete;
  }
  return NoiseOp::kInsert;
}

char32_t draw_char(Rng& rng, const CandidateAlphabet& alphabet) {
  return alphabet.chars()[rng.below(alphabet.chars().size())];
}

std::u32string draw_replacement(Rng& rng, const NoiseConfig& cfg, NoiseOp op,
                                std::size_t span_len) {
  std::u32string out;
  if (op == NoiseOp::kDelete) return out;
  const std::size_t count =
      (op == NoiseOp::kReplace && cfg.multi_char_replacement) ? span_len : 1;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(draw_char(rng, cfg.alphabet));
  }
  return out;
}

// Slots taken by an event: its extent, or the single slot in front of
// `start` for an insertion.
std::size_t footprint(const NoiseEvent& e) {
  return e.op == NoiseOp::kInsert ? 1 : e.span_len;
}

void sort_events(std::vector<NoiseEvent>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const NoiseEvent& a, const NoiseEvent& b) {
                     return a.start < b.start;
                   });
}

// Spans are placed at sampled start positions inside the margin-trimmed
// index range until round(I_p / 100 * sz) characters are consumed. The
// last span is clipped to whatever budget remains.
void plan_budget(SentencePlan& plan, Rng& rng, const NoiseConfig& cfg) {
  const std::size_t sz = plan.char_count;
  plan.budget = static_cast<std::size_t>(
      std::llround(plan.sampled_percent / 100.0 * static_cast<double>(sz)));
  const std::size_t margin = cfg.edge_margin();
  if (sz < 2 * margin) return;
  const std::size_t lo = margin - 1;
  const std::size_t hi = sz - margin - 1;
  if (hi < lo) return;

  const bool forbid = cfg.overlap_policy == OverlapPolicy::kForbid;
  std::vector<bool> taken(sz + 1, false);
  const std::size_t cap = 10 * plan.budget;
  std::size_t remaining = plan.budget;
  while (remaining > 0) {
    NoiseEvent e;
    e.sentence_ordinal = plan.sentence_ordinal;
    e.sampled_span = static_cast<std::size_t>(rng.between(1, cfg.max_span));
    e.op = draw_op(rng, cfg.operations);
    e.span_len = e.op == NoiseOp::kInsert
                     ? 1
                     : std::min(e.sampled_span, remaining);
    e.replacement = draw_replacement(rng, cfg, e.op, e.span_len);

    const std::size_t last = std::min(hi, sz - footprint(e));
    bool placed = false;
    while (!placed && plan.rejected < cap && last >= lo) {
      e.start = static_cast<std::size_t>(rng.between(
          static_cast<std::int64_t>(lo), static_cast<std::int64_t>(last)));
      const std::size_t end = e.start + footprint(e);
      placed = !forbid || std::none_of(taken.begin() + e.start,
                                       taken.begin() + end,
                                       [](bool b) { return b; });
      if (!placed) ++plan.rejected;
    }
    if (!placed) break;
    std::fill(taken.begin() + e.start, taken.begin() + e.start + footprint(e),
              true);
    plan.site_indices.push_back(e.start);
    remaining -= e.span_len;
    plan.events.push_back(std::move(e));
  }
}

// Fixed site count: S = N * alpha sites drawn without replacement from the
// 0-based index range [margin - 1, sz - margin - 1], i.e. the 1-based
// {ceil(N/2), ..., sz - ceil(N/2)}. Each site k gets an extent
// k - int((Sp - 1) / 2) .. k + int((Sp - 1) / 2), so Sp = 2 touches a single
// character.
void plan_literal(SentencePlan& plan, Rng& rng, const NoiseConfig& cfg) {
  const std::size_t sz = plan.char_count;
  const std::size_t margin = cfg.edge_margin();
  if (sz < 2 * margin) return;
  const std::size_t lo = margin - 1;
  const std::size_t hi = sz - margin - 1;
  if (hi < lo) return;

  const std::size_t eligible = hi - lo + 1;
  const std::size_t want = std::min<std::size_t>(
      static_cast<std::size_t>(std::max<std::int64_t>(plan.site_count, 0)),
      eligible);
  std::vector<std::size_t> pool(eligible);
  for (std::size_t i = 0; i < eligible; ++i) pool[i] = lo + i;
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = i + rng.below(eligible - i);
    std::swap(pool[i], pool[j]);
    plan.site_indices.push_back(pool[i]);
  }

  const bool forbid = cfg.overlap_policy == OverlapPolicy::kForbid;
  std::vector<bool> taken(sz, false);
  for (std::size_t k : plan.site_indices) {
    NoiseEvent e;
    e.sentence_ordinal = plan.sentence_ordinal;
    e.sampled_span = static_cast<std::size_t>(rng.between(1, cfg.max_span));
    e.op = draw_op(rng, cfg.operations);
    const std::size_t half = (e.sampled_span - 1) / 2;
    e.start = k - half;
    e.span_len = 2 * half + 1;
    e.replacement = draw_replacement(rng, cfg, e.op, e.span_len);
    const auto first = taken.begin() + e.start;
    const auto last = first + e.span_len;
    if (forbid && std::any_of(first, last, [](bool b) { return b; })) {
      ++plan.rejected;
      continue;
    }
    std::fill(first, last, true);
    plan.events.push_back(std::move(e));
  }
}

SentencePlan plan_checked(const Sentence& s, std::size_t ordinal,
                          const NoiseConfig& cfg, double corpus_percent) {
  SentencePlan plan;
  plan.sentence_ordinal = ordinal;
  plan.char_count = char_length(s, cfg.unit_mode);
  Rng rng(cfg.seed_spec, ordinal);
  if (cfg.mode == NoiseMode::kBudget) {
    plan.sampled_percent = rng.uniform(cfg.p1, cfg.p2);
  } else {
    plan.sampled_percent = corpus_percent;
    plan.alpha = static_cast<std::int64_t>(corpus_percent / cfg.max_span);
    plan.site_count = cfg.max_span * plan.alpha;
  }
  if (plan.char_count < cfg.effective_min_sentence_len()) {
    plan.skipped_short = true;
    return plan;
  }
  if (cfg.mode == NoiseMode::kBudget) {
    plan_budget(plan, rng, cfg);
  } else {
    plan_literal(plan, rng, cfg);
  }
  sort_events(plan.events);
  return plan;
}

}  // namespace

double literal_corpus_percent(const NoiseConfig& cfg) {
  Rng rng(SeedSpec{cfg.seed_spec.master_seed,
                   cfg.seed_spec.stream_label + "/corpus-percent"},
          0);
  return rng.uniform(cfg.p1, cfg.p2);
}

SentencePlan plan_noise(const Sentence& s, std::size_t ordinal,
                        const NoiseConfig& cfg) {
  cfg.validate();
  return plan_checked(s, ordinal, cfg, literal_corpus_percent(cfg));
}

// ---------------------------------------------------------------------------
// Application

namespace {

void check_event_shape(const NoiseEvent& e, std::size_t n) {
  const auto where = [&] {
    return "event at sentence " + std::to_string(e.sentence_ordinal) +
           " start " + std::to_string(e.start);
  };
  if (e.span_len == 0) throw ValidationError(where() + ": span_len is 0");
  if (e.op == NoiseOp::kDelete && !e.replacement.empty()) {
    throw ValidationError(where() + ": delete must not carry a replacement");
  }
  if (e.op != NoiseOp::kDelete && e.replacement.empty()) {
    throw ValidationError(where() + ": " + std::string(to_string(e.op)) +
                          " is missing its replacement character");
  }
  const bool in_bounds = e.op == NoiseOp::kInsert
                             ? e.start <= n
                             : e.start + e.span_len <= n;
  if (!in_bounds) {
    throw ValidationError(where() + ": out of bounds for a sentence of " +
                          std::to_string(n) + " characters");
  }
}

Sentence join_units(const Sentence& s, const std::vector<UnitSpan>& units,
                    const std::vector<bool>& dropped,
                    const std::vector<std::vector<const NoiseEvent*>>& emit) {
  const auto& cps = s.code_points();
  std::u32string out;
  out.reserve(cps.size() + 8);
  for (std::size_t i = 0; i <= units.size(); ++i) {
    for (const NoiseEvent* e : emit[i]) out += e->replacement;
    if (i < units.size() && !dropped[i]) {
      out.append(cps, units[i].begin, units[i].end - units[i].begin);
    }
  }
  return Sentence::from_code_points(std::move(out));
}

}  // namespace

Sentence apply_events(const Sentence& s, const std::vector<NoiseEvent>& events,
                      UnitMode mode) {
  if (events.empty()) return s;
  const auto units = split_units(s, mode);
  const std::size_t n = units.size();
  std::size_t frontier = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    check_event_shape(e, n);
    if (i > 0 && e.start < events[i - 1].start) {
      throw ValidationError("events are not sorted by start");
    }
    if (e.start < frontier) {
      throw ValidationError("events overlap at index " +
                            std::to_string(e.start));
    }
    frontier = e.start + footprint(e);
  }
  // Every index refers to the original sentence, so building the output in
  // one left-to-right pass gives the same result as editing right-to-left.
  std::vector<bool> dropped(n, false);
  std::vector<std::vector<const NoiseEvent*>> emit(n + 1);
  for (const auto& e : events) {
    if (e.op != NoiseOp::kInsert) {
      std::fill_n(dropped.begin() + e.start, e.span_len, true);
    }
    if (e.op != NoiseOp::kDelete) emit[e.start].push_back(&e);
  }
  return join_units(s, units, dropped, emit);
}

Sentence apply_events(const Sentence& s,
                      const std::vector<NoiseEvent>& events) {
  return apply_events(s, events, UnitMode::kCodePoint);
}

Sentence apply_events_overlapping(const Sentence& s,
                                  const std::vector<NoiseEvent>& events,
                                  UnitMode mode) {
  if (events.empty()) return s;
  const auto units = split_units(s, mode);
  const std::size_t n = units.size();
  std::vector<bool> dropped(n, false);
  std::vector<std::vector<const NoiseEvent*>> emit(n + 1);
  for (const auto& e : events) {
    check_event_shape(e, n);
    if (e.op != NoiseOp::kInsert) {
      std::fill_n(dropped.begin() + e.start, e.span_len, true);
    }
    if (e.op != NoiseOp::kDelete) emit[e.start].push_back(&e);
  }
  return join_units(s, units, dropped, emit);
}

// ---------------------------------------------------------------------------
// Corpus level

namespace {

AugmentResult augment_checked(const ParallelCorpus& corpus,
                              const NoiseConfig& cfg, unsigned threads) {
  corpus.check_aligned();
  const double corpus_percent = literal_corpus_percent(cfg);
  AugmentResult result;
  result.corpus.name = corpus.name;
  result.corpus.target = corpus.target;
  result.corpus.source.resize(corpus.size());
  result.plans.resize(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    const Sentence& s = corpus.source[i];
    SentencePlan plan = plan_checked(s, i, cfg, corpus_percent);
    result.corpus.source[i] =
        cfg.overlap_policy == OverlapPolicy::kForbid
            ? apply_events(s, plan.events, cfg.unit_mode)
            : apply_events_overlapping(s, plan.events, cfg.unit_mode);
    result.plans[i] = std::move(plan);
  });
  return result;
}

}  // namespace

AugmentResult charspan_augment(const ParallelCorpus& corpus,
                               const NoiseConfig& cfg, unsigned threads) {
  cfg.validate();
  return augment_checked(corpus, cfg, threads);
}

AugmentResult unigram_char_noise(const ParallelCorpus& corpus,
                                 const NoiseConfig& cfg, unsigned threads) {
  NoiseConfig forced = cfg;
  forced.max_span = 1;
  forced.multi_char_replacement = false;
  forced.validate();
  return augment_checked(corpus, forced, threads);
}

// ---------------------------------------------------------------------------
// Trace files

std::string format_trace(const std::vector<SentencePlan>& plans) {
  std::string out(kTraceHeader);
  out += '\n';
  for (const auto& plan : plans) {
    for (const auto& e : plan.events) {
      out += std::to_string(e.sentence_ordinal);
      out += '\t';
      out += std::to_string(e.start);
      out += '\t';
      out += std::to_string(e.span_len);
      out += '\t';
      out += to_string(e.op);
      out += '\t';
      out += encode_utf8(e.replacement);
      out += '\t';
      out += std::to_string(e.sampled_span);
      out += '\n';
    }
  }
  return out;
}

namespace {

std::size_t parse_count(std::string_view field, std::size_t line_no) {
  std::size_t value = 0;
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() ||
      field.empty()) {
    throw ValidationError("trace line " + std::to_string(line_no) +
                          ": expected a non-negative integer, got '" +
                          std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::vector<NoiseEvent> parse_trace(std::string_view text) {
  std::vector<NoiseEvent> events;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;

    std::vector<std::string_view> fields;
    std::size_t f = 0;
    for (;;) {
      const std::size_t tab = line.find('\t', f);
      fields.push_back(line.substr(f, tab == std::string_view::npos
                                          ? std::string_view::npos
                                          : tab - f));
      if (tab == std::string_view::npos) break;
      f = tab + 1;
    }
    if (fields.size() != 5 && fields.size() != 6) {
      throw ValidationError("trace line " + std::to_string(line_no) +
                            ": expected 5 or 6 tab-separated fields, got " +
                            std::to_string(fields.size()));
    }
    NoiseEvent e;
    e.sentence_ordinal = parse_count(fields[0], line_no);
    e.start = parse_count(fields[1], line_no);
    e.span_len = parse_count(fields[2], line_no);
    try {
      e.op = parse_noise_op(fields[3]);
      e.replacement = decode_utf8(fields[4]);
    } catch (const ValidationError& err) {
      throw ValidationError("trace line " + std::to_string(line_no) + ": " +
                            err.what());
    }
    e.sampled_span =
        fields.size() == 6 ? parse_count(fields[5], line_no) : e.span_len;
    events.push_back(std::move(e));
  }
  return events;
}

}  // namespace charspan
