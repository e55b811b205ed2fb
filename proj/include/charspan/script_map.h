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
#include <string_view>
#include <vector>

#include "charspan/text_core.h"

namespace charspan {

// Brahmic scripts whose Unicode blocks share the ISCII-derived layout, so
// that a fixed offset maps corresponding letters onto each other.
enum class Script {
  kDevanagari,
  kBengali,
  kGurmukhi,
  kGujarati,
  kOriya,
  kTamil,
  kTelugu,
  kMalayalam,
};

inline constexpr std::size_t kScriptBlockSize = 128;

struct ScriptBlock {
  Script script;
  std::string_view name;
  char32_t block_base;
};

const std::vector<ScriptBlock>& supported_scripts();
const ScriptBlock& script_block(Script script);
// Throws ValidationError for an unsupported id.
Script parse_script(std::string_view name);
std::string_view to_string(Script script);

struct ConversionReport {
  std::size_t converted = 0;
  // In-block characters whose image is unassigned in the target block and
  // were therefore copied unchanged.
  std::size_t unassigned_passthrough = 0;

  ConversionReport& operator+=(const ConversionReport& other) {
    converted += other.converted;
    unassigned_passthrough += other.unassigned_passthrough;
    return *this;
  }
};

// Assigned in the Unicode version of the linked ICU.
bool is_assigned(char32_t cp);

Sentence convert_script(const Sentence& s, Script from, Script to,
                        ConversionReport* report = nullptr);

std::vector<Sentence> convert_script(const std::vector<Sentence>& sentences,
                                     Script from, Script to,
                                     ConversionReport* report = nullptr,
                                     unsigned threads = 1);

}  // namespace charspan
