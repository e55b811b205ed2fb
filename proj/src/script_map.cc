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

#include "charspan/script_map.h"

#include <unicode/uchar.h>

#include "charspan/error.h"

namespace charspan {

const std::vector<ScriptBlock>& supported_scripts() {
  static const std::vector<ScriptBlock> blocks = {
      {Script::kDevanagari, "devanagari", 0x0900},
      {Script::kBengali, "bengali", 0x0980},
      {Script::kGurmukhi, "gurmukhi", 0x0A00},
      {Script::kGujarati, "gujarati", 0x0A80},
      {Script::kOriya, "oriya", 0x0B00},
      {Script::kTamil, "tamil", 0x0B80},
      {Script::kTelugu, "telugu", 0x0C00},
      {Script::kMalayalam, "malayalam", 0x0D00},
  };
  return blocks;
}

const ScriptBlock& script_block(Script script) {
  for (const auto& b : supported_scripts()) {
    if (b.script == script) return b;
  }
  throw ValidationError("unsupported script");
}

Script parse_script(std::string_view name) {
  for (const auto& b : supported_scripts()) {
    if (b.name == name) return b.script;
  }
  std::string known;
  for (const auto& b : supported_scripts()) {
    if (!known.empty()) known += ", ";
    known += b.name;
  }
  throw ValidationError("unsupported script '" + std::string(name) +
                        "' (supported: " + known + ")");
}

std::string_view to_string(Script script) { return script_block(script).name; }

bool is_assigned(char32_t cp) {
  return u_charType(static_cast<UChar32>(cp)) != U_UNASSIGNED;
}

namespace {

std::u32string convert_code_points(const std::u32string& in,
                                   const ScriptBlock& src,
                                   const ScriptBlock& dst,
                                   ConversionReport& report) {
  std::u32string out = in;
  for (char32_t& c : out) {
    if (c < src.block_base || c >= src.block_base + kScriptBlockSize) continue;
    const char32_t image = dst.block_base + (c - src.block_base);
    if (is_assigned(image)) {
      c = image;
      ++report.converted;
    } else {
      ++report.unassigned_passthrough;
    }
  }
  return out;
}

}  // namespace

Sentence convert_script(const Sentence& s, Script from, Script to,
                        ConversionReport* report) {
  if (from == to) return s;
  ConversionReport local;
  Sentence out = Sentence::from_code_points(convert_code_points(
      s.code_points(), script_block(from), script_block(to), local));
  if (report) *report += local;
  return out;
}

std::vector<Sentence> convert_script(const std::vector<Sentence>& sentences,
                                     Script from, Script to,
                                     ConversionReport* report,
                                     unsigned threads) {
  std::vector<Sentence> out(sentences.size());
  std::vector<ConversionReport> per(sentences.size());
  parallel_for(sentences.size(), threads, [&](std::size_t i) {
    out[i] = convert_script(sentences[i], from, to, &per[i]);
  });
  if (report) {
    for (const auto& r : per) *report += r;
  }
  return out;
}

}  // namespace charspan
