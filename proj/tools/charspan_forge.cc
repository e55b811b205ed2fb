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

// charspan-forge: command-line front end for the charspan library.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "charspan/error.h"
#include "charspan/eval_metrics.h"
#include "charspan/noise_engine.h"
#include "charspan/pipeline.h"
#include "charspan/script_map.h"
#include "charspan/subword_bpe.h"
#include "charspan/text_core.h"
#include "charspan/token_augmenters.h"
#include "charspan/version.h"

namespace fs = std::filesystem;
using namespace charspan;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool quiet = false;
};

void note(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << '\n';
}

// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, std::string_view bytes) {
  if (path.empty() || path == "-") {
    std::cout << bytes;
    std::cout.flush();
    if (!std::cout) throw IoError("failed writing to standard output");
  } else {
    write_file(path, bytes);
  }
}

std::string join_lines(const std::vector<Sentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    out += s.text();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

struct AugmentArgs {
  std::string type = "charspan";
  std::string src, tgt, out, out_tgt, trace;
  double p1 = -1, p2 = -1;
  int max_span = -1;
  std::string mode = "budget";
  std::string alphabet = "latin-basic";
  double w_delete = 0.5, w_replace = 0.5, w_insert = 0.0;
  bool weights_given = false;
  std::string overlap = "forbid";
  std::string unit_mode = "codepoint";
  std::size_t min_sentence_len = 0;
  bool multi_char = false;
  double rate = 0.1;
  std::string level = "word";
  std::string vocab;
  std::size_t min_tokens_kept = 1;
};

void run_augment(const AugmentArgs& a, const Globals& g) {
  std::optional<fs::path> tgt;
  if (!a.tgt.empty()) tgt = a.tgt;
  const ParallelCorpus corpus = load_corpus(a.src, tgt);

  ParallelCorpus noised;
  if (a.type == "charspan" || a.type == "unigram") {
    NoiseConfig cfg = a.type == "unigram" ? NoiseConfig::unigram_defaults()
                                          : NoiseConfig{};
    if (a.p1 >= 0) cfg.p1 = a.p1;
    if (a.p2 >= 0) cfg.p2 = a.p2;
    if (a.max_span >= 0) cfg.max_span = a.max_span;
    if (a.weights_given) cfg.operations = {a.w_delete, a.w_replace, a.w_insert};
    cfg.mode = parse_noise_mode(a.mode);
    cfg.alphabet = fs::exists(a.alphabet) ? CandidateAlphabet::from_file(a.alphabet)
                                          : CandidateAlphabet::builtin(a.alphabet);
    cfg.overlap_policy = parse_overlap_policy(a.overlap);
    cfg.unit_mode = parse_unit_mode(a.unit_mode);
    if (a.min_sentence_len > 0) cfg.min_sentence_len = a.min_sentence_len;
    cfg.multi_char_replacement = a.multi_char;
    cfg.seed_spec = {g.seed, "noise"};
    auto r = a.type == "unigram" ? unigram_char_noise(corpus, cfg, g.threads)
                                 : charspan_augment(corpus, cfg, g.threads);
    noised = std::move(r.corpus);
    if (!a.trace.empty()) write_file(a.trace, format_trace(r.plans));
    std::size_t events = 0, skipped = 0;
    for (const auto& p : r.plans) {
      events += p.events.size();
      skipped += p.skipped_short ? 1 : 0;
    }
    note(g, "augment: " + std::to_string(corpus.size()) + " sentences, " +
                std::to_string(events) + " events, " + std::to_string(skipped) +
                " skipped as too short");
  } else if (a.type == "switchout" || a.type == "dropout") {
    TokenAugmentConfig cfg;
    cfg.strategy = parse_token_strategy(a.type);
    cfg.level = parse_token_level(a.level);
    cfg.rate = a.rate;
    cfg.min_tokens_kept = a.min_tokens_kept;
    cfg.seed_spec = {g.seed, "token-augment"};
    if (cfg.strategy == TokenStrategy::kSwitchOut) {
      cfg.vocab = a.vocab.empty() ? collect_vocab(corpus.source, cfg.level)
                                  : load_token_list(a.vocab);
    }
    cfg.validate();
    noised = token_augment(corpus, cfg, g.threads);
  } else {
    throw ValidationError("--type must be charspan, unigram, switchout or dropout");
  }
  emit(a.out, join_lines(noised.source));
  if (!a.out_tgt.empty()) {
    if (!noised.has_target()) throw ValidationError("--out-tgt needs --tgt");
    write_sentences(a.out_tgt, noised.target);
  }
}

// ---------------------------------------------------------------------------

int dispatch(int argc, char** argv) {
  CLI::App app{std::string(kToolkitName) + " " + kToolkitVersion +
               ": character-span noise, subword and evaluation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version",
                       std::string(kToolkitName) + " " + kToolkitVersion);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")
      ->check(CLI::Range(1u, 1024u))
      ->capture_default_str();
  app.add_flag("--quiet", g.quiet, "Suppress progress notes");

  // augment
  AugmentArgs aug;
  auto* c_aug = app.add_subcommand("augment", "Noise the source side of a corpus");
  c_aug->add_option("--type", aug.type, "charspan, unigram, switchout or dropout")
      ->capture_default_str();
  c_aug->add_option("--src", aug.src, "Source corpus")->required();
  c_aug->add_option("--tgt", aug.tgt, "Target corpus (copied unchanged)");
  c_aug->add_option("-o,--out", aug.out, "Noised source (default stdout)");
  c_aug->add_option("--out-tgt", aug.out_tgt, "Where to copy the target side");
  c_aug->add_option("--trace", aug.trace, "Write the event trace TSV here");
  c_aug->add_option("--p1", aug.p1, "Lower percentage bound");
  c_aug->add_option("--p2", aug.p2, "Upper percentage bound");
  c_aug->add_option("--max-span", aug.max_span, "Largest span size N");
  c_aug->add_option("--mode", aug.mode, "budget or literal")->capture_default_str();
  c_aug->add_option("--alphabet", aug.alphabet, "Built-in id or alphabet file")
      ->capture_default_str();
  auto* w_del = c_aug->add_option("--delete-weight", aug.w_delete);
  auto* w_rep = c_aug->add_option("--replace-weight", aug.w_replace);
  auto* w_ins = c_aug->add_option("--insert-weight", aug.w_insert);
  c_aug->add_option("--overlap", aug.overlap, "forbid or allow")
      ->capture_default_str();
  c_aug->add_option("--unit-mode", aug.unit_mode, "codepoint or grapheme")
      ->capture_default_str();
  c_aug->add_option("--min-sentence-len", aug.min_sentence_len);
  c_aug->add_flag("--multi-char-replacement", aug.multi_char);
  c_aug->add_option("--rate", aug.rate, "Token augmentation rate")
      ->capture_default_str();
  c_aug->add_option("--level", aug.level, "word or subword")->capture_default_str();
  c_aug->add_option("--vocab", aug.vocab, "SwitchOut vocabulary, one token per line");
  c_aug->add_option("--min-tokens-kept", aug.min_tokens_kept)
      ->capture_default_str();
  c_aug->callback([&] {
    aug.weights_given = w_del->count() + w_rep->count() + w_ins->count() > 0;
    if (aug.weights_given) {
      if (w_del->count() == 0) aug.w_delete = 0;
      if (w_rep->count() == 0) aug.w_replace = 0;
    }
    run_augment(aug, g);
  });

  // learn-bpe
  std::vector<std::string> bpe_inputs;
  std::size_t vocab_size = 16000;
  std::int64_t min_pair_freq = 2;
  std::string merges_path, vocab_path;
  auto* c_learn = app.add_subcommand("learn-bpe", "Learn BPE merges");
  c_learn->add_option("-i,--input", bpe_inputs, "Training corpora")->required();
  c_learn->add_option("--vocab-size", vocab_size)->capture_default_str();
  c_learn->add_option("--min-pair-freq", min_pair_freq)->capture_default_str();
  c_learn->add_option("--merges", merges_path, "Merges output")->required();
  c_learn->add_option("--vocab", vocab_path, "Vocab output")->required();
  c_learn->callback([&] {
    std::vector<std::vector<Sentence>> loaded;
    for (const auto& p : bpe_inputs) loaded.push_back(load_sentences(p));
    std::vector<const std::vector<Sentence>*> sides;
    for (const auto& l : loaded) sides.push_back(&l);
    const BpeModel model = learn_bpe(sides, vocab_size, min_pair_freq);
    save_model(model, merges_path, vocab_path);
    note(g, "learn-bpe: " + std::to_string(model.merges().size()) + " merges");
  });

  // apply-bpe
  std::string apply_in, apply_out, apply_merges, apply_vocab;
  double dropout = 0.0;
  auto* c_apply = app.add_subcommand("apply-bpe", "Segment a corpus");
  c_apply->add_option("--merges", apply_merges)->required();
  c_apply->add_option("--vocab", apply_vocab);
  c_apply->add_option("-i,--input", apply_in)->required();
  c_apply->add_option("-o,--output", apply_out, "Default stdout");
  c_apply->add_option("--dropout", dropout, "Merge dropout probability")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  c_apply->callback([&] {
    std::optional<fs::path> v;
    if (!apply_vocab.empty()) v = apply_vocab;
    const BpeModel model = load_model(apply_merges, v);
    const auto segs = segment_corpus(model, load_sentences(apply_in), dropout,
                                     {g.seed, "bpe-dropout"}, g.threads);
    std::string out;
    for (const auto& s : segs) {
      out += s.line();
      out += '\n';
    }
    emit(apply_out, out);
  });

  // desegment
  std::string deseg_in, deseg_out;
  auto* c_deseg = app.add_subcommand("desegment", "Undo BPE segmentation");
  c_deseg->add_option("-i,--input", deseg_in)->required();
  c_deseg->add_option("-o,--output", deseg_out, "Default stdout");
  c_deseg->callback([&] {
    std::string out;
    for (const auto& s : load_sentences(deseg_in)) {
      out += desegment_line(s.text()).text();
      out += '\n';
    }
    emit(deseg_out, out);
  });

  // Scoring commands share hyp/ref/output/sentences.
  std::string hyp, ref, score_out;
  bool with_sentences = false;
  auto scoring = [&](CLI::App* c) {
    c->add_option("--hyp", hyp, "Hypothesis file")->required();
    c->add_option("--ref", ref, "Reference file")->required();
    c->add_option("-o,--output", score_out, "Report file (default stdout)");
    c->add_flag("--sentences", with_sentences, "Include per-sentence scores");
  };

  ChrfOptions chrf_opts;
  auto* c_chrf = app.add_subcommand("chrf", "Character n-gram F-score");
  scoring(c_chrf);
  c_chrf->add_option("--char-order", chrf_opts.char_order)->capture_default_str();
  c_chrf->add_option("--word-order", chrf_opts.word_order)->capture_default_str();
  c_chrf->add_option("--beta", chrf_opts.beta)->capture_default_str();
  c_chrf->callback([&] {
    emit(score_out, format_report(chrf(load_sentences(hyp), load_sentences(ref),
                                       chrf_opts),
                                  with_sentences));
  });

  auto* c_bleu = app.add_subcommand("bleu", "Corpus BLEU");
  scoring(c_bleu);
  c_bleu->callback([&] {
    emit(score_out, format_report(bleu(load_sentences(hyp), load_sentences(ref)),
                                  with_sentences));
  });

  auto* c_lcsr = app.add_subcommand("lcsr", "Mean line-wise LCS ratio");
  scoring(c_lcsr);
  c_lcsr->callback([&] {
    const auto h = load_sentences(hyp);
    const auto r = load_sentences(ref);
    if (h.size() != r.size()) {
      throw ValidationError("lcsr: " + std::to_string(h.size()) +
                            " hypothesis lines vs " + std::to_string(r.size()) +
                            " reference lines");
    }
    ScoreReport report;
    report.metric = "lcsr";
    report.signature = "unit:codepoint|version:" + std::string(kToolkitVersion);
    report.sentence_scores.resize(h.size());
    parallel_for(h.size(), g.threads, [&](std::size_t i) {
      report.sentence_scores[i] = lcsr(h[i], r[i]);
    });
    double sum = 0;
    for (double x : report.sentence_scores) sum += x;
    report.corpus_score = h.empty() ? 1.0 : sum / static_cast<double>(h.size());
    emit(score_out, format_report(report, with_sentences));
  });

  // simmatrix
  std::vector<std::string> sim_corpora;
  bool sim_aligned = false;
  std::string sim_tsv, sim_svg;
  auto* c_sim = app.add_subcommand("simmatrix", "Pairwise LCSR heatmap");
  c_sim->add_option("--corpus", sim_corpora, "label=path, repeatable")
      ->required();
  c_sim->add_flag("--aligned", sim_aligned, "Require equal line counts");
  c_sim->add_option("--tsv", sim_tsv, "TSV output")->required();
  c_sim->add_option("--svg", sim_svg, "Optional SVG output");
  c_sim->callback([&] {
    std::vector<LabeledSide> sides;
    for (const auto& spec : sim_corpora) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw ValidationError("--corpus expects label=path, got '" + spec + "'");
      }
      sides.push_back({spec.substr(0, eq), load_sentences(spec.substr(eq + 1))});
    }
    const auto m = similarity_matrix(sides, sim_aligned, g.threads);
    std::optional<fs::path> svg;
    if (!sim_svg.empty()) svg = sim_svg;
    emit_heatmap(m, sim_tsv, svg);
  });

  // bootstrap
  std::string hyp_a, hyp_b, boot_ref, boot_metric = "chrf";
  std::size_t resamples = 1000;
  auto* c_boot = app.add_subcommand("bootstrap", "Paired bootstrap test");
  c_boot->add_option("--hyp-a", hyp_a, "System under test")->required();
  c_boot->add_option("--hyp-b", hyp_b, "Baseline")->required();
  c_boot->add_option("--ref", boot_ref)->required();
  c_boot->add_option("--metric", boot_metric, "chrf or bleu")->capture_default_str();
  c_boot->add_option("--resamples", resamples)->capture_default_str();
  c_boot->callback([&] {
    const auto r = paired_bootstrap(load_sentences(hyp_a), load_sentences(hyp_b),
                                    load_sentences(boot_ref),
                                    parse_bootstrap_metric(boot_metric),
                                    resamples, {g.seed, "bootstrap"});
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "metric\t%s\nscore_a\t%.6f\nscore_b\t%.6f\nresamples\t%zu\n"
                  "baseline_wins\t%zu\np_value\t%.6f\n",
                  std::string(to_string(parse_bootstrap_metric(boot_metric))).c_str(),
                  r.score_a, r.score_b, r.resamples, r.baseline_wins, r.p_value);
    emit("", buf);
  });

  // cosine
  std::string vec_a, vec_b, cos_out;
  bool cos_sentences = false;
  auto* c_cos = app.add_subcommand("cosine", "Cosine similarity of exported vectors");
  c_cos->add_option("--a", vec_a)->required();
  c_cos->add_option("--b", vec_b)->required();
  c_cos->add_option("-o,--output", cos_out);
  c_cos->add_flag("--sentences", cos_sentences);
  c_cos->callback([&] {
    emit(cos_out, format_report(cosine_report(fs::path(vec_a), fs::path(vec_b)),
                                cos_sentences));
  });

  // convert-script
  std::string conv_from, conv_to, conv_in, conv_out;
  auto* c_conv = app.add_subcommand("convert-script", "Map between Indic blocks");
  c_conv->add_option("--from", conv_from)->required();
  c_conv->add_option("--to", conv_to)->required();
  c_conv->add_option("-i,--input", conv_in)->required();
  c_conv->add_option("-o,--output", conv_out, "Default stdout");
  c_conv->callback([&] {
    ConversionReport report;
    const auto out = convert_script(load_sentences(conv_in), parse_script(conv_from),
                                    parse_script(conv_to), &report, g.threads);
    emit(conv_out, join_lines(out));
    // The report always goes to stderr, --quiet only silences progress.
    std::cerr << "convert-script: converted " << report.converted
              << ", unassigned passthrough " << report.unassigned_passthrough
              << '\n';
  });

  // stats
  std::string st_orig, st_noised, st_trace, st_out, st_unit = "codepoint";
  std::size_t st_min_len = 0;
  auto* c_stats = app.add_subcommand("stats", "Audit a noised corpus against its trace");
  c_stats->add_option("--original", st_orig)->required();
  c_stats->add_option("--noised", st_noised)->required();
  c_stats->add_option("--trace", st_trace)->required();
  c_stats->add_option("--min-sentence-len", st_min_len,
                      "Sentences shorter than this count as skipped");
  c_stats->add_option("--unit-mode", st_unit)->capture_default_str();
  c_stats->add_option("-o,--output", st_out, "Default stdout");
  c_stats->callback([&] {
    ParallelCorpus original, noised;
    original.source = load_sentences(st_orig);
    noised.source = load_sentences(st_noised);
    const UnitMode mode = parse_unit_mode(st_unit);
    const auto plans = plans_from_trace(parse_trace(read_file(st_trace)),
                                        original, st_min_len, mode);
    const auto report = compute_stats(original, noised, plans, mode, g.threads);
    emit(st_out, report.to_json().dump(2) + "\n");
  });

  // run
  std::string manifest_path;
  bool force = false;
  auto* c_run = app.add_subcommand("run", "Execute a pipeline manifest");
  c_run->add_option("manifest", manifest_path, "Manifest JSON")->required();
  c_run->add_flag("--force", force, "Replace an existing output_dir");
  c_run->callback([&] {
    const auto m = load_manifest(manifest_path);
    const auto summary = run_manifest(m, {g.threads, force});
    note(g, "run: wrote " + std::to_string(summary.artifacts.size()) +
                " artifacts to " + summary.output_dir.string());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
}
