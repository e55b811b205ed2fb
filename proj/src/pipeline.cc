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

#include "charspan/pipeline.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "charspan/error.h"
#include "charspan/version.h"

namespace charspan {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Statistics

ordered_json AugmentationReport::to_json() const {
  ordered_json j;
  j["sentences"] = sentences;
  j["sentences_processed"] = processed;
  j["sentences_skipped_short"] = skipped_short;
  j["total_chars"] = total_chars;
  j["affected_chars"] = affected_chars;
  j["affected_fraction"] = affected_fraction();
  j["realized_percent"] = realized_percent;
  j["events"] = events;
  ordered_json ops;
  for (const char* op : {"delete", "replace", "insert"}) {
    auto it = op_counts.find(op);
    ops[op] = it == op_counts.end() ? 0 : it->second;
  }
  j["operations"] = ops;
  ordered_json spans = ordered_json::object();
  for (const auto& [len, n] : span_counts) spans[std::to_string(len)] = n;
  j["span_sizes"] = spans;
  ordered_json sampled = ordered_json::object();
  for (const auto& [len, n] : sampled_span_counts) {
    sampled[std::to_string(len)] = n;
  }
  j["sampled_span_sizes"] = sampled;
  j["corpus_lcsr"] = corpus_lcsr;
  return j;
}

AugmentationReport compute_stats(const ParallelCorpus& original,
                                 const ParallelCorpus& noised,
                                 const std::vector<SentencePlan>& plans,
                                 UnitMode mode, unsigned threads) {
  const std::size_t n = original.size();
  if (noised.size() != n) {
    throw ValidationError("stats: original has " + std::to_string(n) +
                          " sentences, noised has " +
                          std::to_string(noised.size()));
  }
  if (plans.size() != n) {
    throw ValidationError("stats: plan trace covers " +
                          std::to_string(plans.size()) + " sentences, corpus has " +
                          std::to_string(n));
  }
  AugmentationReport r;
  r.sentences = n;
  for (const char* op : {"delete", "replace", "insert"}) r.op_counts[op] = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const SentencePlan& plan = plans[i];
    if (plan.sentence_ordinal != i) {
      throw ValidationError("stats: plan " + std::to_string(i) +
                            " is labeled sentence " +
                            std::to_string(plan.sentence_ordinal));
    }
    const std::size_t sz = char_length(original.source[i], mode);
    r.total_chars += sz;
    if (plan.skipped_short) {
      ++r.skipped_short;
      if (!plan.events.empty()) {
        throw ValidationError("stats: skipped sentence " + std::to_string(i) +
                              " has events");
      }
    } else {
      ++r.processed;
    }
    for (const auto& e : plan.events) {
      const bool in_bounds = e.op == NoiseOp::kInsert
                                 ? e.start <= sz
                                 : e.start + e.span_len <= sz;
      if (e.sentence_ordinal != i || !in_bounds || e.span_len == 0) {
        throw ValidationError("stats: inconsistent event for sentence " +
                              std::to_string(i) + " at start " +
                              std::to_string(e.start));
      }
      ++r.events;
      ++r.op_counts[std::string(to_string(e.op))];
      ++r.span_counts[e.span_len];
      ++r.sampled_span_counts[e.sampled_span];
      if (e.op != NoiseOp::kInsert) r.affected_chars += e.span_len;
    }
  }
  r.realized_percent = r.total_chars == 0
                           ? 0.0
                           : 100.0 * static_cast<double>(r.affected_chars) /
                                 static_cast<double>(r.total_chars);
  std::vector<double> per_line(n, 1.0);
  parallel_for(n, threads, [&](std::size_t i) {
    per_line[i] = lcsr(original.source[i], noised.source[i]);
  });
  double sum = 0.0;
  for (double x : per_line) sum += x;
  r.corpus_lcsr = n == 0 ? 1.0 : sum / static_cast<double>(n);
  return r;
}

std::vector<SentencePlan> plans_from_trace(const std::vector<NoiseEvent>& events,
                                           const ParallelCorpus& original,
                                           std::size_t min_sentence_len,
                                           UnitMode mode) {
  std::vector<SentencePlan> plans(original.size());
  for (std::size_t i = 0; i < plans.size(); ++i) {
    plans[i].sentence_ordinal = i;
    plans[i].char_count = char_length(original.source[i], mode);
    plans[i].skipped_short = plans[i].char_count < min_sentence_len;
  }
  for (const auto& e : events) {
    if (e.sentence_ordinal >= plans.size()) {
      throw ValidationError("trace references sentence " +
                            std::to_string(e.sentence_ordinal) +
                            " but the corpus has " +
                            std::to_string(plans.size()));
    }
    plans[e.sentence_ordinal].events.push_back(e);
  }
  for (auto& p : plans) {
    std::stable_sort(p.events.begin(), p.events.end(),
                     [](const NoiseEvent& a, const NoiseEvent& b) {
                       return a.start < b.start;
                     });
  }
  return plans;
}

// ---------------------------------------------------------------------------
// Manifest parsing

std::string_view to_string(VocabSource source) {
  switch (source) {
    case VocabSource::kNoisy:
      return "noisy";
    case VocabSource::kClean:
      return "clean";
    case VocabSource::kExternal:
      return "external";
  }
  return "?";
}

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& msg) {
  throw ValidationError("manifest: '" + key + "' " + msg);
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) bad(where, "must be an object");
  for (const auto& [k, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      bad(where.empty() ? k : where + "." + k, "is not a recognized key");
    }
  }
}

std::string get_string(const json& obj, const std::string& key,
                       const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_string()) bad(where, "must be a string");
  return v.get<std::string>();
}

double get_number(const json& v, const std::string& where) {
  if (!v.is_number()) bad(where, "must be a number");
  return v.get<double>();
}

std::uint64_t get_uint(const json& v, const std::string& where) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    bad(where, "must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

bool get_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) bad(where, "must be a boolean");
  return v.get<bool>();
}

template <typename Parse>
auto parse_enum(const json& v, const std::string& where, Parse&& parse) {
  if (!v.is_string()) bad(where, "must be a string");
  try {
    return parse(v.get<std::string>());
  } catch (const ValidationError& e) {
    bad(where, std::string(": ") + e.what());
  }
}

void parse_char_noise(const json& j, PipelineManifest& m) {
  check_keys(j, "noise",
             {"type", "p1", "p2", "max_span", "operations", "alphabet", "mode",
              "min_sentence_len", "overlap_policy", "unit_mode",
              "multi_char_replacement"});
  NoiseConfig cfg = m.noise_kind == NoiseKind::kUnigram
                        ? NoiseConfig::unigram_defaults()
                        : NoiseConfig{};
  if (j.contains("p1")) cfg.p1 = get_number(j["p1"], "noise.p1");
  if (j.contains("p2")) cfg.p2 = get_number(j["p2"], "noise.p2");
  if (j.contains("max_span")) {
    cfg.max_span = static_cast<int>(get_uint(j["max_span"], "noise.max_span"));
  }
  if (m.noise_kind == NoiseKind::kUnigram && cfg.max_span != 1) {
    bad("noise.max_span", "must be 1 for unigram noise");
  }
  if (j.contains("operations")) {
    const auto& ops = j["operations"];
    check_keys(ops, "noise.operations", {"delete", "replace", "insert"});
    cfg.operations = {0.0, 0.0, 0.0};
    if (ops.contains("delete")) {
      cfg.operations.del = get_number(ops["delete"], "noise.operations.delete");
    }
    if (ops.contains("replace")) {
      cfg.operations.replace =
          get_number(ops["replace"], "noise.operations.replace");
    }
    if (ops.contains("insert")) {
      cfg.operations.insert =
          get_number(ops["insert"], "noise.operations.insert");
    }
  }
  if (j.contains("alphabet")) {
    const auto& a = j["alphabet"];
    if (a.is_string()) {
      cfg.alphabet = parse_enum(a, "noise.alphabet", [](const std::string& s) {
        return CandidateAlphabet::builtin(s);
      });
    } else {
      check_keys(a, "noise.alphabet", {"file"});
      if (!a.contains("file")) bad("noise.alphabet", "needs a 'file' entry");
      m.alphabet_file = get_string(a, "file", "noise.alphabet.file");
    }
  }
  if (j.contains("mode")) {
    cfg.mode = parse_enum(j["mode"], "noise.mode", [](const std::string& s) {
      return parse_noise_mode(s);
    });
  }
  if (j.contains("min_sentence_len")) {
    cfg.min_sentence_len = static_cast<std::size_t>(
        get_uint(j["min_sentence_len"], "noise.min_sentence_len"));
  }
  if (j.contains("overlap_policy")) {
    cfg.overlap_policy =
        parse_enum(j["overlap_policy"], "noise.overlap_policy",
                   [](const std::string& s) { return parse_overlap_policy(s); });
  }
  if (j.contains("unit_mode")) {
    cfg.unit_mode =
        parse_enum(j["unit_mode"], "noise.unit_mode",
                   [](const std::string& s) { return parse_unit_mode(s); });
  }
  if (j.contains("multi_char_replacement")) {
    cfg.multi_char_replacement =
        get_bool(j["multi_char_replacement"], "noise.multi_char_replacement");
  }
  m.noise = std::move(cfg);
}

void parse_token_noise(const json& j, PipelineManifest& m) {
  check_keys(j, "noise", {"type", "level", "rate", "vocab", "min_tokens_kept"});
  TokenAugmentConfig cfg;
  cfg.strategy = parse_token_strategy(j["type"].get<std::string>());
  if (j.contains("level")) {
    cfg.level = parse_enum(j["level"], "noise.level", [](const std::string& s) {
      return parse_token_level(s);
    });
  }
  if (j.contains("rate")) cfg.rate = get_number(j["rate"], "noise.rate");
  if (j.contains("vocab")) {
    if (cfg.strategy != TokenStrategy::kSwitchOut) {
      bad("noise.vocab", "only applies to switchout");
    }
    m.token_vocab_file = get_string(j, "vocab", "noise.vocab");
  }
  if (j.contains("min_tokens_kept")) {
    cfg.min_tokens_kept = static_cast<std::size_t>(
        get_uint(j["min_tokens_kept"], "noise.min_tokens_kept"));
  }
  m.token = std::move(cfg);
}

}  // namespace

std::filesystem::path PipelineManifest::resolve(const std::string& p) const {
  std::filesystem::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path;
  return base_dir / path;
}

void PipelineManifest::validate() const {
  if (source.empty()) bad("input.source", "is required");
  if (output_dir.empty()) bad("output_dir", "is required");
  if (vocab_source == VocabSource::kNoisy && noise_kind == NoiseKind::kNone) {
    bad("vocab_source", "is 'noisy' but noise is 'none'");
  }
  if (vocab_source == VocabSource::kNoisy && noise_kind == NoiseKind::kToken &&
      token.level == TokenLevel::kSubword) {
    bad("vocab_source",
        "cannot be 'noisy' with subword-level token noise, which needs a "
        "vocabulary first");
  }
  if ((vocab_source == VocabSource::kExternal) != external_merges.has_value()) {
    bad("external_bpe", vocab_source == VocabSource::kExternal
                            ? "is required when vocab_source is 'external'"
                            : "is only allowed when vocab_source is 'external'");
  }
  if (vocab_size < 1) bad("vocab_size", "must be >= 1");
  if (min_pair_freq < 1) bad("min_pair_freq", "must be >= 1");
  if (!(segmentation_dropout >= 0.0 && segmentation_dropout <= 1.0)) {
    bad("segmentation_dropout", "must lie in [0, 1]");
  }
  if (dropout_epochs < 1) bad("dropout_epochs", "must be >= 1");
  if (noise_kind == NoiseKind::kCharSpan || noise_kind == NoiseKind::kUnigram) {
    try {
      noise.validate();
    } catch (const ValidationError& e) {
      bad("noise", std::string(": ") + e.what());
    }
  }
  if (noise_kind == NoiseKind::kToken &&
      !(token.rate >= 0.0 && token.rate <= 1.0)) {
    bad("noise.rate", "must lie in [0, 1]");
  }
}

PipelineManifest parse_manifest(const json& j,
                                const std::filesystem::path& base_dir) {
  check_keys(j, "",
             {"toolkit", "input", "output_dir", "master_seed", "noise",
              "vocab_source", "external_bpe", "vocab_size", "min_pair_freq",
              "shared_vocab", "segmentation_dropout", "dropout_epochs",
              "keep_clean", "normalize_nfc", "script_conversion"});
  PipelineManifest m;
  m.base_dir = base_dir;

  if (j.contains("toolkit") && !j["toolkit"].is_string()) {
    bad("toolkit", "must be a string");
  }
  if (!j.contains("input")) bad("input", "is required");
  check_keys(j["input"], "input", {"source", "target"});
  if (!j["input"].contains("source")) bad("input.source", "is required");
  m.source = get_string(j["input"], "source", "input.source");
  if (j["input"].contains("target") && !j["input"]["target"].is_null()) {
    m.target = get_string(j["input"], "target", "input.target");
  }
  if (!j.contains("output_dir")) bad("output_dir", "is required");
  m.output_dir = get_string(j, "output_dir", "output_dir");
  if (j.contains("master_seed")) {
    m.master_seed = get_uint(j["master_seed"], "master_seed");
  }

  if (j.contains("noise")) {
    const auto& n = j["noise"];
    if (n.is_string()) {
      if (n.get<std::string>() != "none") {
        bad("noise", "must be \"none\" or an object with a 'type'");
      }
    } else {
      if (!n.is_object() || !n.contains("type")) {
        bad("noise", "must be \"none\" or an object with a 'type'");
      }
      const std::string type = get_string(n, "type", "noise.type");
      if (type == "charspan") {
        m.noise_kind = NoiseKind::kCharSpan;
        parse_char_noise(n, m);
      } else if (type == "unigram") {
        m.noise_kind = NoiseKind::kUnigram;
        parse_char_noise(n, m);
      } else if (type == "switchout" || type == "dropout") {
        m.noise_kind = NoiseKind::kToken;
        parse_token_noise(n, m);
      } else if (type == "none") {
        check_keys(n, "noise", {"type"});
      } else {
        bad("noise.type",
            "must be one of none, charspan, unigram, switchout, dropout");
      }
    }
  }
  m.noise.seed_spec = {m.master_seed, "noise"};
  m.token.seed_spec = {m.master_seed, "token-augment"};

  m.vocab_source = m.noise_kind == NoiseKind::kNone ? VocabSource::kClean
                                                    : VocabSource::kNoisy;
  if (m.noise_kind == NoiseKind::kToken && m.token.level == TokenLevel::kSubword) {
    m.vocab_source = VocabSource::kClean;
  }
  if (j.contains("vocab_source")) {
    const std::string vs = get_string(j, "vocab_source", "vocab_source");
    if (vs == "noisy") {
      m.vocab_source = VocabSource::kNoisy;
    } else if (vs == "clean") {
      m.vocab_source = VocabSource::kClean;
    } else if (vs == "external") {
      m.vocab_source = VocabSource::kExternal;
    } else {
      bad("vocab_source", "must be noisy, clean or external");
    }
  }
  if (j.contains("external_bpe") && !j["external_bpe"].is_null()) {
    const auto& e = j["external_bpe"];
    check_keys(e, "external_bpe", {"merges", "vocab"});
    if (!e.contains("merges")) bad("external_bpe.merges", "is required");
    m.external_merges = get_string(e, "merges", "external_bpe.merges");
    if (e.contains("vocab") && !e["vocab"].is_null()) {
      m.external_vocab = get_string(e, "vocab", "external_bpe.vocab");
    }
  }
  if (j.contains("vocab_size")) {
    m.vocab_size = static_cast<std::size_t>(get_uint(j["vocab_size"], "vocab_size"));
  }
  if (j.contains("min_pair_freq")) {
    m.min_pair_freq =
        static_cast<std::int64_t>(get_uint(j["min_pair_freq"], "min_pair_freq"));
  }
  if (j.contains("shared_vocab")) {
    m.shared_vocab = get_bool(j["shared_vocab"], "shared_vocab");
  }
  if (j.contains("segmentation_dropout")) {
    m.segmentation_dropout =
        get_number(j["segmentation_dropout"], "segmentation_dropout");
  }
  if (j.contains("dropout_epochs")) {
    m.dropout_epochs = static_cast<int>(
        std::min<std::uint64_t>(get_uint(j["dropout_epochs"], "dropout_epochs"),
                                1u << 20));
  }
  if (j.contains("keep_clean")) {
    m.keep_clean = get_bool(j["keep_clean"], "keep_clean");
  }
  if (j.contains("normalize_nfc")) {
    m.normalize_nfc = get_bool(j["normalize_nfc"], "normalize_nfc");
  }
  if (j.contains("script_conversion") && !j["script_conversion"].is_null()) {
    const auto& sc = j["script_conversion"];
    check_keys(sc, "script_conversion", {"from", "to"});
    if (!sc.contains("from") || !sc.contains("to")) {
      bad("script_conversion", "needs 'from' and 'to'");
    }
    auto parse = [](const std::string& s) { return parse_script(s); };
    m.script_conversion = std::make_pair(
        parse_enum(sc["from"], "script_conversion.from", parse),
        parse_enum(sc["to"], "script_conversion.to", parse));
  }
  m.validate();
  return m;
}

PipelineManifest load_manifest(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return parse_manifest(j, path.parent_path());
}

ordered_json manifest_echo(const PipelineManifest& m) {
  ordered_json j;
  j["toolkit"] = std::string(kToolkitName) + " " + kToolkitVersion;
  j["input"] = {{"source", m.source},
                {"target", m.target ? ordered_json(*m.target) : ordered_json()}};
  j["output_dir"] = m.output_dir;
  j["master_seed"] = m.master_seed;
  switch (m.noise_kind) {
    case NoiseKind::kNone:
      j["noise"] = "none";
      break;
    case NoiseKind::kCharSpan:
    case NoiseKind::kUnigram: {
      const NoiseConfig& c = m.noise;
      ordered_json n;
      n["type"] = m.noise_kind == NoiseKind::kUnigram ? "unigram" : "charspan";
      n["p1"] = c.p1;
      n["p2"] = c.p2;
      n["max_span"] = c.max_span;
      n["operations"] = {{"delete", c.operations.del},
                         {"replace", c.operations.replace},
                         {"insert", c.operations.insert}};
      if (m.alphabet_file) {
        n["alphabet"] = {{"file", *m.alphabet_file}};
      } else {
        n["alphabet"] = c.alphabet.id();
      }
      n["mode"] = to_string(c.mode);
      n["min_sentence_len"] = c.effective_min_sentence_len();
      n["overlap_policy"] = to_string(c.overlap_policy);
      n["unit_mode"] = to_string(c.unit_mode);
      n["multi_char_replacement"] = c.multi_char_replacement;
      j["noise"] = n;
      break;
    }
    case NoiseKind::kToken: {
      ordered_json n;
      n["type"] = to_string(m.token.strategy);
      n["level"] = to_string(m.token.level);
      n["rate"] = m.token.rate;
      if (m.token.strategy == TokenStrategy::kSwitchOut) {
        n["vocab"] =
            m.token_vocab_file ? ordered_json(*m.token_vocab_file) : ordered_json();
      }
      n["min_tokens_kept"] = m.token.min_tokens_kept;
      j["noise"] = n;
      break;
    }
  }
  j["vocab_source"] = to_string(m.vocab_source);
  if (m.external_merges) {
    j["external_bpe"] = {
        {"merges", *m.external_merges},
        {"vocab", m.external_vocab ? ordered_json(*m.external_vocab)
                                   : ordered_json()}};
  } else {
    j["external_bpe"] = nullptr;
  }
  j["vocab_size"] = m.vocab_size;
  j["min_pair_freq"] = m.min_pair_freq;
  j["shared_vocab"] = m.shared_vocab;
  j["segmentation_dropout"] = m.segmentation_dropout;
  j["dropout_epochs"] = m.dropout_epochs;
  j["keep_clean"] = m.keep_clean;
  j["normalize_nfc"] = m.normalize_nfc;
  if (m.script_conversion) {
    j["script_conversion"] = {{"from", to_string(m.script_conversion->first)},
                              {"to", to_string(m.script_conversion->second)}};
  } else {
    j["script_conversion"] = nullptr;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Running

std::string artifact::segmented(int epoch, int epochs, bool target) {
  const char* side = target ? "tgt" : "src";
  if (epochs <= 1) return std::string("train.bpe.") + side;
  return "train.bpe.e" + std::to_string(epoch) + "." + side;
}

namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    const std::string msg = std::string("stage '") + name + "': " + e.what();
    switch (e.kind()) {
      case ErrorKind::kValidation:
        throw ValidationError(msg);
      case ErrorKind::kIo:
        throw IoError(msg);
      case ErrorKind::kInvariant:
        break;
    }
    throw InvariantError(msg);
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError(std::string("stage '") + name + "': " + e.what());
  } catch (const std::exception& e) {
    throw InvariantError(std::string("stage '") + name + "': " + e.what());
  }
}

std::vector<Sentence> lines_to_sentences(const std::vector<Segmentation>& segs) {
  std::vector<Sentence> out;
  out.reserve(segs.size());
  for (const auto& g : segs) out.push_back(Sentence::from_utf8(g.line()));
  return out;
}

struct TokenCounts {
  std::size_t tokens_in = 0;
  std::size_t tokens_changed = 0;
};

TokenCounts count_token_changes(const std::vector<Sentence>& before,
                                const std::vector<Sentence>& after,
                                TokenStrategy strategy) {
  TokenCounts c;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const auto a = split_tokens(before[i].text());
    const auto b = split_tokens(after[i].text());
    c.tokens_in += a.size();
    if (strategy == TokenStrategy::kDropout) {
      c.tokens_changed += a.size() - b.size();
    } else {
      for (std::size_t t = 0; t < a.size() && t < b.size(); ++t) {
        if (a[t] != b[t]) ++c.tokens_changed;
      }
    }
  }
  return c;
}

}  // namespace

RunSummary run_manifest(const PipelineManifest& m, const RunOptions& opts) {
  stage("validate", [&] {
    m.validate();
    return 0;
  });
  const std::filesystem::path out_dir = m.resolve(m.output_dir);
  namespace fs = std::filesystem;
  if (fs::exists(out_dir) && !opts.force &&
      !(fs::is_directory(out_dir) && fs::is_empty(out_dir))) {
    throw ValidationError("output_dir " + out_dir.string() +
                          " already exists (use --force to replace it)");
  }
  const fs::path tmp =
      out_dir.parent_path() / ("." + out_dir.filename().string() + ".tmp");
  const unsigned threads = opts.threads;

  try {
    stage("prepare-output", [&] {
      fs::remove_all(tmp);
      fs::create_directories(tmp);
      return 0;
    });

    const ParallelCorpus original = stage("ingest", [&] {
      std::optional<fs::path> tgt;
      if (m.target) tgt = m.resolve(*m.target);
      return load_corpus(m.resolve(m.source), tgt);
    });

    // Source-side preprocessing; the target side is never rewritten.
    std::optional<ConversionReport> conversion;
    const ParallelCorpus prepared = stage("preprocess", [&] {
      ParallelCorpus c = original;
      if (m.normalize_nfc) {
        for (auto& s : c.source) s = normalize_nfc(s);
      }
      if (m.script_conversion) {
        ConversionReport report;
        c.source = convert_script(c.source, m.script_conversion->first,
                                  m.script_conversion->second, &report, threads);
        conversion = report;
      }
      return c;
    });

    // Resolve configs that need files.
    NoiseConfig noise_cfg = m.noise;
    TokenAugmentConfig token_cfg = m.token;
    stage("configure", [&] {
      if (m.alphabet_file) {
        noise_cfg.alphabet = CandidateAlphabet::from_file(m.resolve(*m.alphabet_file));
      }
      if (m.noise_kind == NoiseKind::kToken &&
          token_cfg.strategy == TokenStrategy::kSwitchOut) {
        token_cfg.vocab = m.token_vocab_file
                              ? load_token_list(m.resolve(*m.token_vocab_file))
                              : collect_vocab(prepared.source, token_cfg.level);
      }
      if (m.noise_kind == NoiseKind::kToken) token_cfg.validate();
      return 0;
    });

    const bool char_noise = m.noise_kind == NoiseKind::kCharSpan ||
                            m.noise_kind == NoiseKind::kUnigram;
    const bool subword_tokens = m.noise_kind == NoiseKind::kToken &&
                                token_cfg.level == TokenLevel::kSubword;

    ParallelCorpus noised = prepared;
    std::vector<SentencePlan> plans;
    auto apply_noise = [&] {
      stage("noise", [&] {
        if (m.noise_kind == NoiseKind::kCharSpan) {
          auto r = charspan_augment(prepared, noise_cfg, threads);
          noised = std::move(r.corpus);
          plans = std::move(r.plans);
        } else if (m.noise_kind == NoiseKind::kUnigram) {
          auto r = unigram_char_noise(prepared, noise_cfg, threads);
          noised = std::move(r.corpus);
          plans = std::move(r.plans);
        } else if (m.noise_kind == NoiseKind::kToken && !subword_tokens) {
          noised = token_augment(prepared, token_cfg, threads);
        }
        return 0;
      });
    };
    auto learn = [&](const ParallelCorpus& c) {
      return stage("learn-bpe", [&] {
        return learn_bpe(c, m.vocab_size, m.min_pair_freq, m.shared_vocab);
      });
    };

    BpeModel model;
    switch (m.vocab_source) {
      case VocabSource::kNoisy:
        apply_noise();
        model = learn(noised);
        break;
      case VocabSource::kClean:
        model = learn(prepared);
        apply_noise();
        break;
      case VocabSource::kExternal:
        model = stage("load-bpe", [&] {
          std::optional<fs::path> vocab;
          if (m.external_vocab) vocab = m.resolve(*m.external_vocab);
          return load_model(m.resolve(*m.external_merges), vocab);
        });
        apply_noise();
        break;
    }

    std::optional<TokenCounts> token_counts;
    std::optional<AugmentationReport> subword_report;
    stage("segment", [&] {
      for (int e = 1; e <= m.dropout_epochs; ++e) {
        const std::string epoch = std::to_string(e);
        auto src = lines_to_sentences(segment_corpus(
            model, noised.source, m.segmentation_dropout,
            {m.master_seed, "bpe-dropout/source/epoch-" + epoch}, threads));
        if (subword_tokens) {
          TokenAugmentConfig cfg = token_cfg;
          cfg.seed_spec = {m.master_seed, "token-augment/epoch-" + epoch};
          ParallelCorpus seg;
          seg.source = src;
          auto augmented = token_augment(seg, cfg, threads).source;
          if (e == 1) {
            token_counts = count_token_changes(src, augmented, cfg.strategy);
            // Score the first epoch against the clean text for the report.
            ParallelCorpus deseg;
            for (const auto& s : augmented) {
              deseg.source.push_back(desegment_line(s.text()));
            }
            std::vector<SentencePlan> empty(prepared.size());
            for (std::size_t i = 0; i < empty.size(); ++i) {
              empty[i].sentence_ordinal = i;
            }
            subword_report = compute_stats(prepared, deseg, empty,
                                           UnitMode::kCodePoint, threads);
          }
          src = std::move(augmented);
        }
        write_sentences(tmp / artifact::segmented(e, m.dropout_epochs, false),
                        src);
        if (noised.has_target()) {
          auto tgt = lines_to_sentences(segment_corpus(
              model, noised.target, m.segmentation_dropout,
              {m.master_seed, "bpe-dropout/target/epoch-" + epoch}, threads));
          write_sentences(tmp / artifact::segmented(e, m.dropout_epochs, true),
                          tgt);
        }
      }
      return 0;
    });

    stage("write", [&] {
      write_sentences(tmp / artifact::kSource, noised.source);
      if (noised.has_target()) {
        write_sentences(tmp / artifact::kTarget, original.target);
      }
      if (m.keep_clean) {
        write_sentences(tmp / artifact::kCleanSource, prepared.source);
      }
      save_model(model, tmp / artifact::kMerges, tmp / artifact::kVocab);
      if (char_noise) write_file(tmp / artifact::kTrace, format_trace(plans));
      return 0;
    });

    stage("stats", [&] {
      ordered_json stats;
      stats["toolkit"] = std::string(kToolkitName) + " " + kToolkitVersion;
      stats["corpus"] = {{"sentences", original.size()},
                         {"has_target", original.has_target()}};
      ordered_json pre;
      pre["normalize_nfc"] = m.normalize_nfc;
      if (conversion) {
        pre["script_conversion"] = {
            {"from", to_string(m.script_conversion->first)},
            {"to", to_string(m.script_conversion->second)},
            {"converted", conversion->converted},
            {"unassigned_passthrough", conversion->unassigned_passthrough}};
      } else {
        pre["script_conversion"] = nullptr;
      }
      stats["preprocessing"] = pre;

      AugmentationReport report;
      if (char_noise) {
        report = compute_stats(prepared, noised, plans, noise_cfg.unit_mode,
                               threads);
      } else if (subword_report) {
        report = *subword_report;
      } else {
        std::vector<SentencePlan> empty(prepared.size());
        for (std::size_t i = 0; i < empty.size(); ++i) {
          empty[i].sentence_ordinal = i;
        }
        report = compute_stats(prepared, noised, empty, UnitMode::kCodePoint,
                               threads);
      }
      ordered_json aug = report.to_json();
      static constexpr const char* kKinds[] = {"none", "charspan", "unigram",
                                               "token"};
      aug["kind"] = kKinds[static_cast<int>(m.noise_kind)];
      stats["augmentation"] = aug;
      if (m.noise_kind == NoiseKind::kToken) {
        if (!token_counts) {
          token_counts =
              count_token_changes(prepared.source, noised.source, token_cfg.strategy);
        }
        stats["token_augmentation"] = {
            {"strategy", to_string(token_cfg.strategy)},
            {"level", to_string(token_cfg.level)},
            {"tokens_in", token_counts->tokens_in},
            {"tokens_changed", token_counts->tokens_changed}};
      }
      write_file(tmp / artifact::kStats, stats.dump(2) + "\n");
      write_file(tmp / artifact::kManifest, manifest_echo(m).dump(2) + "\n");
      return 0;
    });

    stage("promote", [&] {
      if (fs::exists(out_dir)) fs::remove_all(out_dir);
      fs::rename(tmp, out_dir);
      return 0;
    });
  } catch (...) {
    std::error_code ignored;
    fs::remove_all(tmp, ignored);
    throw;
  }

  RunSummary summary;
  summary.output_dir = out_dir;
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    summary.artifacts.push_back(entry.path().filename().string());
  }
  std::sort(summary.artifacts.begin(), summary.artifacts.end());
  return summary;
}

}  // namespace charspan
