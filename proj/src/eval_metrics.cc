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

#include "charspan/eval_metrics.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "charspan/error.h"
#include "charspan/version.h"

namespace charspan {

namespace {

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

void check_pair(std::size_t hyp, std::size_t ref, std::string_view metric) {
  if (hyp != ref) {
    throw ValidationError(std::string(metric) + ": hypothesis has " +
                          std::to_string(hyp) + " sentences, reference has " +
                          std::to_string(ref));
  }
  if (hyp == 0) throw ValidationError(std::string(metric) + ": empty corpus");
}

template <typename Key>
std::int64_t clipped_matches(const std::unordered_map<Key, std::int64_t>& hyp,
                             const std::unordered_map<Key, std::int64_t>& ref) {
  std::int64_t matches = 0;
  for (const auto& [gram, n] : hyp) {
    auto it = ref.find(gram);
    if (it != ref.end()) matches += std::min(n, it->second);
  }
  return matches;
}

}  // namespace

std::string format_report(const ScoreReport& report, bool with_sentences) {
  std::string out = "metric\t" + report.metric + "\nsignature\t" +
                    report.signature + "\ncorpus_score\t" +
                    format_double(report.corpus_score) + "\n";
  if (with_sentences) {
    for (std::size_t i = 0; i < report.sentence_scores.size(); ++i) {
      out += "sentence\t" + std::to_string(i) + "\t" +
             format_double(report.sentence_scores[i]) + "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// chrF

ChrfStats& ChrfStats::operator+=(const ChrfStats& other) {
  if (orders.size() < other.orders.size()) orders.resize(other.orders.size());
  for (std::size_t i = 0; i < other.orders.size(); ++i) {
    for (int k = 0; k < 3; ++k) orders[i][k] += other.orders[i][k];
  }
  return *this;
}

namespace {

std::u32string strip_whitespace(const Sentence& s) {
  std::u32string out;
  out.reserve(s.size());
  for (char32_t c : s.code_points()) {
    if (!is_whitespace(c)) out.push_back(c);
  }
  return out;
}

std::unordered_map<std::u32string, std::int64_t> char_ngrams(
    const std::u32string& chars, std::size_t n) {
  std::unordered_map<std::u32string, std::int64_t> grams;
  if (chars.size() < n) return grams;
  for (std::size_t i = 0; i + n <= chars.size(); ++i) {
    ++grams[chars.substr(i, n)];
  }
  return grams;
}

std::vector<std::u32string> words_of(const Sentence& s) {
  std::vector<std::u32string> words;
  std::u32string w;
  for (char32_t c : s.code_points()) {
    if (is_whitespace(c)) {
      if (!w.empty()) words.push_back(std::move(w));
      w.clear();
    } else {
      w.push_back(c);
    }
  }
  if (!w.empty()) words.push_back(std::move(w));
  return words;
}

std::unordered_map<std::u32string, std::int64_t> word_ngrams(
    const std::vector<std::u32string>& words, std::size_t n) {
  std::unordered_map<std::u32string, std::int64_t> grams;
  if (words.size() < n) return grams;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    std::u32string key;
    for (std::size_t k = 0; k < n; ++k) {
      if (k > 0) key.push_back(U' ');
      key += words[i + k];
    }
    ++grams[key];
  }
  return grams;
}

std::int64_t total_of(const std::unordered_map<std::u32string, std::int64_t>& g) {
  std::int64_t t = 0;
  for (const auto& [_, n] : g) t += n;
  return t;
}

}  // namespace

ChrfStats chrf_sentence_stats(const Sentence& hyp, const Sentence& ref,
                              const ChrfOptions& opts) {
  ChrfStats stats;
  const auto h = strip_whitespace(hyp);
  const auto r = strip_whitespace(ref);
  for (int n = 1; n <= opts.char_order; ++n) {
    const auto hg = char_ngrams(h, n);
    const auto rg = char_ngrams(r, n);
    stats.orders.push_back({total_of(hg), total_of(rg), clipped_matches(hg, rg)});
  }
  if (opts.word_order > 0) {
    const auto hw = words_of(hyp);
    const auto rw = words_of(ref);
    for (int n = 1; n <= opts.word_order; ++n) {
      const auto hg = word_ngrams(hw, n);
      const auto rg = word_ngrams(rw, n);
      stats.orders.push_back(
          {total_of(hg), total_of(rg), clipped_matches(hg, rg)});
    }
  }
  return stats;
}

double chrf_from_stats(const ChrfStats& stats, const ChrfOptions& opts) {
  const double b2 = opts.beta * opts.beta;
  double sum = 0.0;
  int counted = 0;
  for (const auto& [hyp_total, ref_total, matches] : stats.orders) {
    const bool effective = hyp_total > 0 && ref_total > 0;
    if (opts.effective_order && !effective) continue;
    ++counted;
    if (!effective || matches == 0) continue;
    const double p = static_cast<double>(matches) / hyp_total;
    const double r = static_cast<double>(matches) / ref_total;
    sum += (1.0 + b2) * p * r / (b2 * p + r);
  }
  if (counted == 0) return 0.0;
  return 100.0 * sum / counted;
}

std::string chrf_signature(const ChrfOptions& opts) {
  std::ostringstream sig;
  sig << "nrefs:1|case:mixed|eff:" << (opts.effective_order ? "yes" : "no")
      << "|nc:" << opts.char_order << "|nw:" << opts.word_order
      << "|space:no|beta:" << format_double(opts.beta) << "|agg:micro|version:"
      << kToolkitName << "-" << kToolkitVersion;
  return sig.str();
}

ScoreReport chrf(const std::vector<Sentence>& hyp,
                 const std::vector<Sentence>& ref, const ChrfOptions& opts) {
  check_pair(hyp.size(), ref.size(), "chrF");
  if (opts.char_order < 1 || opts.word_order < 0 || !(opts.beta > 0.0)) {
    throw ValidationError("chrF: char_order >= 1, word_order >= 0, beta > 0");
  }
  ScoreReport report;
  report.metric = opts.word_order > 0 ? "chrF++" : "chrF";
  report.signature = chrf_signature(opts);
  ChrfStats total;
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    const auto stats = chrf_sentence_stats(hyp[i], ref[i], opts);
    report.sentence_scores.push_back(chrf_from_stats(stats, opts));
    total += stats;
  }
  report.corpus_score = chrf_from_stats(total, opts);
  return report;
}

// ---------------------------------------------------------------------------
// BLEU

namespace {

bool is_detached_punct(char32_t c) {
  switch (c) {
    case U'{': case U'|': case U'}': case U'~': case U'[': case U'\\':
    case U']': case U'^': case U'_': case U'`': case U'!': case U'"':
    case U'#': case U'$': case U'%': case U'&': case U'(': case U')':
    case U'*': case U'+': case U':': case U';': case U'<': case U'=':
    case U'>': case U'?': case U'@': case U'/':
      return true;
    default:
      return false;
  }
}

bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

std::vector<std::string> tokenize_13a_approx(std::string_view text) {
  std::string line(text);
  replace_all(line, "<skipped>", "");
  replace_all(line, "&quot;", "\"");
  replace_all(line, "&amp;", "&");
  replace_all(line, "&lt;", "<");
  replace_all(line, "&gt;", ">");
  const std::u32string cps = decode_utf8(line);

  std::u32string padded;
  padded.reserve(cps.size() * 2);
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    const char32_t prev = i > 0 ? cps[i - 1] : U' ';
    const char32_t next = i + 1 < cps.size() ? cps[i + 1] : U' ';
    bool split = false;
    if (is_detached_punct(c)) {
      split = true;
    } else if (c == U'.' || c == U',') {
      split = !(is_digit(prev) && is_digit(next));
    } else if (c == U'-') {
      split = is_digit(prev);
    }
    if (split) {
      padded.push_back(U' ');
      padded.push_back(c);
      padded.push_back(U' ');
    } else {
      padded.push_back(c);
    }
  }
  std::vector<std::string> tokens;
  std::u32string tok;
  for (char32_t c : padded) {
    if (is_whitespace(c)) {
      if (!tok.empty()) tokens.push_back(encode_utf8(tok));
      tok.clear();
    } else {
      tok.push_back(c);
    }
  }
  if (!tok.empty()) tokens.push_back(encode_utf8(tok));
  return tokens;
}

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  for (int n = 0; n < 4; ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  hyp_len += other.hyp_len;
  ref_len += other.ref_len;
  return *this;
}

namespace {

std::unordered_map<std::string, std::int64_t> token_ngrams(
    const std::vector<std::string>& tokens, std::size_t n) {
  std::unordered_map<std::string, std::int64_t> grams;
  if (tokens.size() < n) return grams;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      if (k > 0) key.push_back(' ');
      key += tokens[i + k];
    }
    ++grams[key];
  }
  return grams;
}

}  // namespace

BleuStats bleu_sentence_stats(const Sentence& hyp, const Sentence& ref) {
  const auto h = tokenize_13a_approx(hyp.text());
  const auto r = tokenize_13a_approx(ref.text());
  BleuStats stats;
  stats.hyp_len = static_cast<std::int64_t>(h.size());
  stats.ref_len = static_cast<std::int64_t>(r.size());
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto hg = token_ngrams(h, n);
    const auto rg = token_ngrams(r, n);
    stats.totals[n - 1] = h.size() >= n ? static_cast<std::int64_t>(h.size() - n + 1) : 0;
    stats.matches[n - 1] = clipped_matches(hg, rg);
  }
  return stats;
}

double bleu_from_stats(const BleuStats& stats) {
  // log(0) stand-in; drives the score to 0 when an order has no n-grams.
  constexpr double kLogZero = -9999999999.0;
  std::array<double, 4> precisions{};
  double smooth = 1.0;
  for (int n = 0; n < 4; ++n) {
    if (stats.totals[n] == 0) break;
    if (stats.matches[n] == 0) {
      smooth *= 2.0;
      precisions[n] = 100.0 / (smooth * static_cast<double>(stats.totals[n]));
    } else {
      precisions[n] = 100.0 * static_cast<double>(stats.matches[n]) /
                      static_cast<double>(stats.totals[n]);
    }
  }
  double bp = 1.0;
  if (stats.hyp_len < stats.ref_len) {
    bp = stats.hyp_len > 0
             ? std::exp(1.0 - static_cast<double>(stats.ref_len) /
                                  static_cast<double>(stats.hyp_len))
             : 0.0;
  }
  double log_sum = 0.0;
  for (double p : precisions) log_sum += p > 0.0 ? std::log(p) : kLogZero;
  return bp * std::exp(log_sum / 4.0);
}

std::string bleu_signature() {
  return std::string("nrefs:1|case:mixed|eff:no|tok:13a-approx|smooth:exp|"
                     "version:") +
         kToolkitName + "-" + kToolkitVersion;
}

ScoreReport bleu(const std::vector<Sentence>& hyp,
                 const std::vector<Sentence>& ref) {
  check_pair(hyp.size(), ref.size(), "BLEU");
  ScoreReport report;
  report.metric = "BLEU";
  report.signature = bleu_signature();
  BleuStats total;
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    const auto stats = bleu_sentence_stats(hyp[i], ref[i]);
    report.sentence_scores.push_back(bleu_from_stats(stats));
    total += stats;
  }
  report.corpus_score = bleu_from_stats(total);
  return report;
}

// ---------------------------------------------------------------------------
// LCSR

std::size_t lcs_length(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double lcsr(const Sentence& a, const Sentence& b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  return static_cast<double>(lcs_length(a.code_points(), b.code_points())) /
         static_cast<double>(longest);
}

SimilarityMatrix similarity_matrix(const std::vector<LabeledSide>& corpora,
                                   bool aligned, unsigned threads) {
  const std::size_t n = corpora.size();
  if (aligned) {
    for (const auto& c : corpora) {
      if (c.sentences.size() != corpora.front().sentences.size()) {
        throw ValidationError("similarity matrix: '" + c.label + "' has " +
                              std::to_string(c.sentences.size()) +
                              " lines but '" + corpora.front().label +
                              "' has " +
                              std::to_string(corpora.front().sentences.size()));
      }
    }
  }
  SimilarityMatrix m;
  m.values.assign(n, std::vector<double>(n, 1.0));
  for (const auto& c : corpora) m.labels.push_back(c.label);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  parallel_for(pairs.size(), threads, [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    const auto& a = corpora[i].sentences;
    const auto& b = corpora[j].sentences;
    const std::size_t lines = std::min(a.size(), b.size());
    double sum = 0.0;
    for (std::size_t l = 0; l < lines; ++l) sum += lcsr(a[l], b[l]);
    const double mean = lines == 0 ? 0.0 : sum / static_cast<double>(lines);
    m.values[i][j] = mean;
    m.values[j][i] = mean;
  });
  return m;
}

// ---------------------------------------------------------------------------
// Paired bootstrap

BootstrapMetric parse_bootstrap_metric(std::string_view name) {
  if (name == "chrf" || name == "chrF") return BootstrapMetric::kChrf;
  if (name == "bleu" || name == "BLEU") return BootstrapMetric::kBleu;
  throw ValidationError("unknown bootstrap metric '" + std::string(name) +
                        "' (expected chrf or bleu)");
}

std::string_view to_string(BootstrapMetric metric) {
  return metric == BootstrapMetric::kBleu ? "bleu" : "chrf";
}

namespace {

template <typename Stats, typename StatsFn, typename ScoreFn>
BootstrapResult run_bootstrap(const std::vector<Sentence>& hyp_a,
                              const std::vector<Sentence>& hyp_b,
                              const std::vector<Sentence>& ref,
                              std::size_t resamples, const SeedSpec& seed,
                              StatsFn&& stats_of, ScoreFn&& score_of) {
  const std::size_t n = ref.size();
  std::vector<Stats> a(n), b(n);
  Stats total_a, total_b;
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = stats_of(hyp_a[i], ref[i]);
    b[i] = stats_of(hyp_b[i], ref[i]);
    total_a += a[i];
    total_b += b[i];
  }
  BootstrapResult result;
  result.score_a = score_of(total_a);
  result.score_b = score_of(total_b);
  result.resamples = resamples;
  Rng rng(seed, 0);
  for (std::size_t r = 0; r < resamples; ++r) {
    Stats sa, sb;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = rng.below(n);
      sa += a[i];
      sb += b[i];
    }
    if (score_of(sb) >= score_of(sa)) ++result.baseline_wins;
  }
  result.p_value = static_cast<double>(result.baseline_wins + 1) /
                   static_cast<double>(resamples + 1);
  return result;
}

}  // namespace

BootstrapResult paired_bootstrap(const std::vector<Sentence>& hyp_a,
                                 const std::vector<Sentence>& hyp_b,
                                 const std::vector<Sentence>& ref,
                                 BootstrapMetric metric, std::size_t resamples,
                                 const SeedSpec& seed) {
  check_pair(hyp_a.size(), ref.size(), "bootstrap (system a)");
  check_pair(hyp_b.size(), ref.size(), "bootstrap (system b)");
  if (resamples < 1) throw ValidationError("bootstrap needs B >= 1");
  if (metric == BootstrapMetric::kBleu) {
    return run_bootstrap<BleuStats>(
        hyp_a, hyp_b, ref, resamples, seed,
        [](const Sentence& h, const Sentence& r) {
          return bleu_sentence_stats(h, r);
        },
        [](const BleuStats& s) { return bleu_from_stats(s); });
  }
  const ChrfOptions opts;
  return run_bootstrap<ChrfStats>(
      hyp_a, hyp_b, ref, resamples, seed,
      [&](const Sentence& h, const Sentence& r) {
        return chrf_sentence_stats(h, r, opts);
      },
      [&](const ChrfStats& s) { return chrf_from_stats(s, opts); });
}

// ---------------------------------------------------------------------------
// Cosine

std::vector<std::vector<double>> parse_vectors(std::string_view text,
                                               std::string_view origin) {
  std::vector<std::vector<double>> vectors;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    const auto where = [&] {
      return std::string(origin) + ":" + std::to_string(line_no);
    };
    std::vector<double> v;
    std::size_t f = 0;
    for (;;) {
      const std::size_t tab = line.find('\t', f);
      const std::string_view field = line.substr(
          f, tab == std::string_view::npos ? std::string_view::npos : tab - f);
      double x = 0.0;
      const auto [ptr, ec] =
          std::from_chars(field.data(), field.data() + field.size(), x);
      if (field.empty() || ec != std::errc() ||
          ptr != field.data() + field.size() || !std::isfinite(x)) {
        throw ValidationError(where() + ": malformed number '" +
                              std::string(field) + "'");
      }
      v.push_back(x);
      if (tab == std::string_view::npos) break;
      f = tab + 1;
    }
    if (!vectors.empty() && v.size() != vectors.front().size()) {
      throw ValidationError(where() + ": dimension " +
                            std::to_string(v.size()) + " differs from " +
                            std::to_string(vectors.front().size()));
    }
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) {
      throw ValidationError(where() + ": zero vector");
    }
    vectors.push_back(std::move(v));
  }
  return vectors;
}

std::vector<std::vector<double>> load_vectors(const std::filesystem::path& p) {
  return parse_vectors(read_file(p), p.string());
}

ScoreReport cosine_report(const std::vector<std::vector<double>>& a,
                          const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) {
    throw ValidationError("cosine: " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + " vectors");
  }
  if (a.empty()) throw ValidationError("cosine: no vectors");
  ScoreReport report;
  report.metric = "cosine";
  report.signature = std::string("pooling:external|mean:arithmetic|version:") +
                     kToolkitName + "-" + kToolkitVersion;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) {
      throw ValidationError("cosine: line " + std::to_string(i + 1) +
                            ": dimension " + std::to_string(a[i].size()) +
                            " vs " + std::to_string(b[i].size()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a[i].size(); ++k) {
      dot += a[i][k] * b[i][k];
      na += a[i][k] * a[i][k];
      nb += b[i][k] * b[i][k];
    }
    if (na == 0.0 || nb == 0.0) {
      throw ValidationError("cosine: zero vector at line " +
                            std::to_string(i + 1));
    }
    const double c = dot / (std::sqrt(na) * std::sqrt(nb));
    report.sentence_scores.push_back(c);
    sum += c;
  }
  report.corpus_score = sum / static_cast<double>(a.size());
  return report;
}

ScoreReport cosine_report(const std::filesystem::path& a,
                          const std::filesystem::path& b) {
  return cosine_report(load_vectors(a), load_vectors(b));
}

}  // namespace charspan
