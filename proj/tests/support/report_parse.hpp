/* Copyright 2026 The StructPrune Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Independent readers for the three leaderboard formats, used to check that
// they carry the same cells.

#ifndef STRUCTPRUNE_TESTS_SUPPORT_REPORT_PARSE_HPP_
#define STRUCTPRUNE_TESTS_SUPPORT_REPORT_PARSE_HPP_

#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace oracle {

using Cells = std::vector<std::vector<std::string>>;

inline Cells parse_csv(const std::string& text) {
  Cells out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          cur += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    cells.push_back(cur);
    out.push_back(cells);
  }
  return out;
}

// Table lines of a markdown document, header and separator rows removed.
inline Cells parse_md(const std::string& text, std::vector<std::string>* header) {
  Cells out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] != '|') continue;
    std::vector<std::string> cells;
    std::size_t pos = 1;
    while (pos < line.size()) {
      const auto next = line.find('|', pos);
      std::string cell = line.substr(pos, next - pos);
      cell.erase(0, cell.find_first_not_of(' '));
      cell.erase(cell.find_last_not_of(' ') + 1);
      cells.push_back(cell);
      pos = next + 1;
    }
    if (cells[0].find("---") != std::string::npos) continue;
    if (cells[0] == "Speed Up") {
      if (header) *header = cells;
      continue;
    }
    out.push_back(cells);
  }
  return out;
}

inline Cells parse_json_rows(const std::string& text, std::vector<std::string>* header) {
  const auto j = nlohmann::json::parse(text);
  if (header) *header = j.at("columns").get<std::vector<std::string>>();
  Cells out;
  for (const auto& sec : j.at("sections")) {
    for (const char* part : {"criteria", "regularizers"}) {
      if (!sec.contains(part)) continue;
      for (const auto& r : sec.at(part)) {
        std::vector<std::string> cells;
        for (const auto& c : j.at("columns")) cells.push_back(r.at(c.get<std::string>()).get<std::string>());
        out.push_back(cells);
      }
    }
  }
  return out;
}

}  // namespace oracle

#endif  // STRUCTPRUNE_TESTS_SUPPORT_REPORT_PARSE_HPP_
