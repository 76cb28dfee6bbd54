/*
 * Copyright 2026 The AuxSeg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>

#include <fmt/format.h>

#include "auxseg/archive.hpp"
#include "auxseg/errors.hpp"
#include "auxseg/image_io.hpp"
#include "auxseg/metrics.hpp"

namespace auxseg {
namespace {

namespace fs = std::filesystem;

// 3x5 bitmap glyphs, one string of 15 bits per character (row-major).
const std::map<char, const char*>& glyphs() {
  static const std::map<char, const char*> g = {
      {'0', "111101101101111"}, {'1', "010110010010111"}, {'2', "111001111100111"},
      {'3', "111001111001111"}, {'4', "101101111001001"}, {'5', "111100111001111"},
      {'6', "111100111101111"}, {'7', "111001001001001"}, {'8', "111101111101111"},
      {'9', "111101111001111"}, {'.', "000000000000010"}, {'-', "000000111000000"},
      {'%', "101001010100101"}, {' ', "000000000000000"}, {'A', "010101111101101"},
      {'B', "110101110101110"}, {'C', "011100100100011"}, {'D', "110101101101110"},
      {'E', "111100110100111"}, {'F', "111100110100100"}, {'G', "011100101101011"},
      {'H', "101101111101101"}, {'I', "111010010010111"}, {'J', "001001001101010"},
      {'K', "101101110101101"}, {'L', "100100100100111"}, {'M', "101111111101101"},
      {'N', "110101101101101"}, {'O', "010101101101010"}, {'P', "110101110100100"},
      {'Q', "010101101110011"}, {'R', "110101110101101"}, {'S', "011100010001110"},
      {'T', "111010010010010"}, {'U', "101101101101111"}, {'V', "101101101101010"},
      {'W', "101101111111101"}, {'X', "101101010101101"}, {'Y', "101101010010010"},
      {'Z', "111001010100111"},
  };
  return g;
}

using Color = std::array<float, 3>;
constexpr Color kBlack{0, 0, 0};
constexpr Color kGrid{0.85f, 0.85f, 0.85f};
constexpr Color kSeries[] = {{0.85f, 0.2f, 0.2f}, {0.2f, 0.6f, 0.2f}, {0.2f, 0.3f, 0.85f}};

class Canvas {
 public:
  Canvas(int w, int h) : img_(h, w, 3) { img_.data.setOnes(); }

  void set(int x, int y, const Color& c) {
    if (x < 0 || y < 0 || x >= img_.width || y >= img_.height) return;
    for (int ch = 0; ch < 3; ++ch) img_.at(y, x, ch) = c[static_cast<std::size_t>(ch)];
  }

  void rect(int x0, int y0, int x1, int y1, const Color& c) {
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) set(x, y, c);
  }

  void line(int x0, int y0, int x1, int y1, const Color& c, int thickness = 1) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      rect(x0, y0, x0 + thickness - 1, y0 + thickness - 1, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) { err += dy; x0 += sx; }
      if (e2 <= dx) { err += dx; y0 += sy; }
    }
  }

  // Scale-2 text; returns the width drawn.
  int text(int x, int y, const std::string& s, const Color& c) {
    constexpr int kScale = 2;
    int cx = x;
    for (char raw : s) {
      const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
      const auto it = glyphs().find(ch);
      const char* bits = it == glyphs().end() ? glyphs().at(' ') : it->second;
      for (int r = 0; r < 5; ++r)
        for (int col = 0; col < 3; ++col)
          if (bits[r * 3 + col] == '1')
            rect(cx + col * kScale, y + r * kScale, cx + col * kScale + kScale - 1,
                 y + r * kScale + kScale - 1, c);
      cx += 4 * kScale;
    }
    return cx - x;
  }

  const Image& image() const { return img_; }

 private:
  Image img_;
};

struct Series {
  std::string name;
  std::vector<std::optional<double>> values;  // percent, one per stage
};

void render_chart(const fs::path& path, const std::string& title, const std::vector<int>& stages,
                  const std::vector<Series>& series) {
  constexpr int kW = 420, kH = 260, kLeft = 44, kRight = 120, kTop = 28, kBottom = 36;
  Canvas canvas(kW, kH);
  const int x0 = kLeft, x1 = kW - kRight, y0 = kTop, y1 = kH - kBottom;
  canvas.text(kLeft, 8, title, kBlack);

  for (int tick = 0; tick <= 100; tick += 25) {
    const int y = y1 - (y1 - y0) * tick / 100;
    canvas.line(x0, y, x1, y, kGrid);
    canvas.text(4, y - 5, fmt::format("{:3d}", tick), kBlack);
  }
  canvas.line(x0, y0, x0, y1, kBlack);
  canvas.line(x0, y1, x1, y1, kBlack);

  const int n = static_cast<int>(stages.size());
  auto x_of = [&](int i) { return n <= 1 ? (x0 + x1) / 2 : x0 + 10 + (x1 - x0 - 20) * i / (n - 1); };
  auto y_of = [&](double v) {
    return y1 - static_cast<int>(std::lround((y1 - y0) * std::clamp(v, 0.0, 100.0) / 100.0));
  };
  for (int i = 0; i < n; ++i) {
    canvas.line(x_of(i), y1, x_of(i), y1 + 3, kBlack);
    canvas.text(x_of(i) - 3, y1 + 6, std::to_string(stages[static_cast<std::size_t>(i)]), kBlack);
  }
  canvas.text((x0 + x1) / 2 - 20, kH - 14, "STAGE", kBlack);

  for (std::size_t s = 0; s < series.size(); ++s) {
    const Color& color = kSeries[s % std::size(kSeries)];
    std::optional<std::pair<int, int>> prev;
    for (int i = 0; i < n; ++i) {
      const auto& v = series[s].values[static_cast<std::size_t>(i)];
      if (!v) {
        prev.reset();
        continue;
      }
      const int px = x_of(i), py = y_of(*v);
      if (prev) canvas.line(prev->first, prev->second, px, py, color, 2);
      canvas.rect(px - 2, py - 2, px + 2, py + 2, color);
      prev = {px, py};
    }
    const int ly = kTop + 6 + static_cast<int>(s) * 16;
    canvas.rect(x1 + 10, ly, x1 + 18, ly + 8, color);
    canvas.text(x1 + 24, ly, series[s].name, kBlack);
  }
  io::write_rgb_png(path, canvas.image());
}

std::optional<double> parse_value(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

TrendFiles plot_stage_trends(const fs::path& run_dir) {
  const fs::path pgt_csv = run_dir / "metrics" / "pgt.csv";
  const fs::path eval_csv = run_dir / "metrics" / "eval.csv";
  std::vector<std::string> missing;
  for (const auto& p : {pgt_csv, eval_csv}) {
    if (!fs::exists(p)) missing.push_back(p.string());
  }
  if (!missing.empty()) {
    std::string msg = "stage-trend plot needs metrics files that are missing:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw PreconditionError(msg);
  }
  const CsvTable pgt = read_csv(pgt_csv);
  const CsvTable eval = read_csv(eval_csv);
  for (const auto& [table, path, cols] :
       {std::tuple{&pgt, pgt_csv, std::vector<std::string>{"stage", "precision", "recall", "miou"}},
        std::tuple{&eval, eval_csv, std::vector<std::string>{"stage", "split", "miou"}}}) {
    for (const auto& c : cols) {
      if (table->column(c) < 0) {
        throw ValidationError("'" + path.string() + "' lacks column '" + c + "'");
      }
    }
  }

  // Completed stages are those with an evaluation row; later rows for the
  // same stage win (re-evaluation).
  std::map<int, std::string> eval_by_stage;
  for (const auto& row : eval.rows) {
    if (row[static_cast<std::size_t>(eval.column("split"))] != "eval") continue;
    eval_by_stage[std::stoi(row[static_cast<std::size_t>(eval.column("stage"))])] =
        row[static_cast<std::size_t>(eval.column("miou"))];
  }
  std::map<int, std::array<std::string, 3>> pgt_by_stage;
  for (const auto& row : pgt.rows) {
    pgt_by_stage[std::stoi(row[static_cast<std::size_t>(pgt.column("stage"))])] = {
        row[static_cast<std::size_t>(pgt.column("precision"))],
        row[static_cast<std::size_t>(pgt.column("recall"))],
        row[static_cast<std::size_t>(pgt.column("miou"))]};
  }

  TrendFiles files;
  const fs::path plots = run_dir / "plots";
  fs::create_directories(plots);
  files.csv = plots / "stage_trends.csv";
  files.pgt_png = plots / "pgt_quality.png";
  files.eval_png = plots / "eval_miou.png";

  std::vector<int> stages;
  Series precision{"PRECISION", {}}, recall{"RECALL", {}}, pgt_miou{"MIOU", {}}, eval_miou{"MIOU", {}};
  std::string csv = csv_line({"stage", "pgt_precision", "pgt_recall", "pgt_miou", "eval_miou"}) + "\n";
  for (const auto& [stage, miou_text] : eval_by_stage) {
    std::array<std::string, 3> q{};
    if (auto it = pgt_by_stage.find(stage); it != pgt_by_stage.end()) q = it->second;
    csv += csv_line({std::to_string(stage), q[0], q[1], q[2], miou_text}) + "\n";
    stages.push_back(stage);
    precision.values.push_back(parse_value(q[0]));
    recall.values.push_back(parse_value(q[1]));
    pgt_miou.values.push_back(parse_value(q[2]));
    eval_miou.values.push_back(parse_value(miou_text));
  }
  write_file_atomic(files.csv, csv);
  render_chart(files.pgt_png, "PSEUDO LABEL QUALITY %", stages, {precision, recall, pgt_miou});
  render_chart(files.eval_png, "EVAL MIOU %", stages, {eval_miou});
  return files;
}

}  // namespace auxseg
