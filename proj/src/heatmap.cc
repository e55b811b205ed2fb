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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "charspan/error.h"
#include "charspan/pipeline.h"

namespace charspan {

namespace {

std::string shortest(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t f = 0;
  for (;;) {
    const std::size_t at = line.find(sep, f);
    out.push_back(line.substr(
        f, at == std::string_view::npos ? std::string_view::npos : at - f));
    if (at == std::string_view::npos) break;
    f = at + 1;
  }
  return out;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string format_similarity_tsv(const SimilarityMatrix& m) {
  std::string out;
  for (const auto& label : m.labels) {
    out += '\t';
    out += label;
  }
  out += '\n';
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    out += m.labels[i];
    for (double v : m.values[i]) {
      out += '\t';
      out += shortest(v);
    }
    out += '\n';
  }
  return out;
}

SimilarityMatrix parse_similarity_tsv(std::string_view text) {
  std::vector<std::string_view> lines;
  for (auto line : split(text, '\n')) {
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw ValidationError("similarity TSV is empty");
  SimilarityMatrix m;
  const auto header = split(lines[0], '\t');
  if (header.empty() || !header[0].empty()) {
    throw ValidationError("similarity TSV header must start with a tab");
  }
  for (std::size_t i = 1; i < header.size(); ++i) {
    m.labels.emplace_back(header[i]);
  }
  const std::size_t n = m.labels.size();
  if (lines.size() != n + 1) {
    throw ValidationError("similarity TSV: expected " + std::to_string(n) +
                          " rows");
  }
  for (std::size_t r = 0; r < n; ++r) {
    const auto cells = split(lines[r + 1], '\t');
    if (cells.size() != n + 1 || cells[0] != m.labels[r]) {
      throw ValidationError("similarity TSV row " + std::to_string(r + 1) +
                            " is malformed");
    }
    std::vector<double> row;
    for (std::size_t c = 1; c <= n; ++c) {
      double v = 0.0;
      const auto [ptr, ec] =
          std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), v);
      if (ec != std::errc() || ptr != cells[c].data() + cells[c].size()) {
        throw ValidationError("similarity TSV row " + std::to_string(r + 1) +
                              ": bad number");
      }
      row.push_back(v);
    }
    m.values.push_back(std::move(row));
  }
  return m;
}

std::string format_similarity_svg(const SimilarityMatrix& m) {
  constexpr int kCell = 64;
  constexpr int kMargin = 120;
  const int n = static_cast<int>(m.labels.size());
  const int size = kMargin + n * kCell + 8;
  // Ramp endpoints.
  constexpr int lo[3] = {0xf7, 0xfb, 0xff};
  constexpr int hi[3] = {0x08, 0x30, 0x6b};

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(size) + "\" height=\"" + std::to_string(size) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (int i = 0; i < n; ++i) {
    const std::string label = xml_escape(m.labels[i]);
    out += "<text x=\"" + std::to_string(kMargin - 6) + "\" y=\"" +
           std::to_string(kMargin + i * kCell + kCell / 2 + 4) +
           "\" text-anchor=\"end\">" + label + "</text>\n";
    out += "<text x=\"" + std::to_string(kMargin + i * kCell + kCell / 2) +
           "\" y=\"" + std::to_string(kMargin - 6) +
           "\" text-anchor=\"middle\">" + label + "</text>\n";
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double v = std::clamp(m.values[r][c], 0.0, 1.0);
      char fill[8];
      std::snprintf(fill, sizeof(fill), "#%02x%02x%02x",
                    static_cast<int>(std::lround(lo[0] + (hi[0] - lo[0]) * v)),
                    static_cast<int>(std::lround(lo[1] + (hi[1] - lo[1]) * v)),
                    static_cast<int>(std::lround(lo[2] + (hi[2] - lo[2]) * v)));
      const int x = kMargin + c * kCell;
      const int y = kMargin + r * kCell;
      out += "<rect class=\"cell\" x=\"" + std::to_string(x) + "\" y=\"" +
             std::to_string(y) + "\" width=\"" + std::to_string(kCell) +
             "\" height=\"" + std::to_string(kCell) + "\" fill=\"" + fill +
             "\"/>\n";
      char value[16];
      std::snprintf(value, sizeof(value), "%.2f", m.values[r][c]);
      out += "<text x=\"" + std::to_string(x + kCell / 2) + "\" y=\"" +
             std::to_string(y + kCell / 2 + 4) +
             "\" text-anchor=\"middle\" fill=\"" +
             (v > 0.5 ? "#ffffff" : "#000000") + "\">" + value + "</text>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

void emit_heatmap(const SimilarityMatrix& m, const std::filesystem::path& tsv,
                  const std::optional<std::filesystem::path>& svg) {
  write_file(tsv, format_similarity_tsv(m));
  if (svg) write_file(*svg, format_similarity_svg(m));
}

}  // namespace charspan
