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

#include "auxseg/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "auxseg/errors.hpp"

namespace auxseg {

ConfusionMatrix::ConfusionMatrix(int num_labels)
    : counts(decltype(counts)::Zero(num_labels, num_labels)),
      unlabeled(decltype(unlabeled)::Zero(num_labels)) {}

std::int64_t ConfusionMatrix::total() const { return counts.sum() + unlabeled.sum() + ignored; }

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_labels() != num_labels()) throw ShapeError("confusion matrices differ in size");
  counts += other.counts;
  unlabeled += other.unlabeled;
  ignored += other.ignored;
  return *this;
}

bool ConfusionMatrix::operator==(const ConfusionMatrix& other) const {
  return counts == other.counts && unlabeled == other.unlabeled && ignored == other.ignored;
}

void accumulate(ConfusionMatrix& conf, const LabelMask& pred, const LabelMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw ShapeError(fmt::format("prediction {}x{} vs ground truth {}x{}", pred.height, pred.width,
                                 gt.height, gt.width));
  }
  const int n = conf.num_labels();
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int g = gt.labels[i];
    const int p = pred.labels[i];
    if (g == kIgnoreLabel) {
      ++conf.ignored;
      continue;
    }
    if (g >= n) throw DomainError(fmt::format("ground-truth label {} outside 0..{}", g, n - 1));
    if (p == kIgnoreLabel) {
      ++conf.unlabeled(g);
      continue;
    }
    if (p >= n) throw DomainError(fmt::format("predicted label {} outside 0..{}", p, n - 1));
    ++conf.counts(g, p);
  }
}

std::vector<double> per_class_iou(const ConfusionMatrix& conf) {
  std::vector<double> out(static_cast<std::size_t>(conf.num_labels()),
                          std::numeric_limits<double>::quiet_NaN());
  for (int k = 0; k < conf.num_labels(); ++k) {
    const auto tp = conf.counts(k, k);
    const auto fp = conf.counts.col(k).sum() - tp;
    const auto fn = conf.counts.row(k).sum() - tp + conf.unlabeled(k);
    const auto uni = tp + fp + fn;
    if (uni > 0) out[static_cast<std::size_t>(k)] = 100.0 * static_cast<double>(tp) / uni;
  }
  return out;
}

double miou(const ConfusionMatrix& conf) {
  double sum = 0;
  int n = 0;
  for (double v : per_class_iou(conf)) {
    if (std::isnan(v)) continue;
    sum += v;
    ++n;
  }
  if (n == 0) throw UndefinedMetricError("mIoU undefined: no label observed in GT or prediction");
  return sum / n;
}

PgtQuality pgt_quality(const ConfusionMatrix& conf, int stage) {
  PgtQuality q;
  q.stage = stage;
  double psum = 0, rsum = 0;
  int pn = 0, rn = 0;
  for (int c = 1; c < conf.num_labels(); ++c) {
    const double correct = static_cast<double>(conf.counts(c, c));
    const auto labeled = conf.counts.col(c).sum();
    const auto gt = conf.counts.row(c).sum() + conf.unlabeled(c);
    if (labeled > 0) {
      psum += correct / labeled;
      ++pn;
    }
    if (gt > 0) {
      rsum += correct / gt;
      ++rn;
    }
  }
  q.precision_defined = pn > 0;
  q.recall_defined = rn > 0;
  q.precision = pn ? 100.0 * psum / pn : 0.0;
  q.recall = rn ? 100.0 * rsum / rn : 0.0;
  try {
    q.miou = miou(conf);
  } catch (const UndefinedMetricError&) {
    q.miou = 0;
  }
  return q;
}

PgtQuality pgt_quality(const LabelMask& pgt, const LabelMask& gt, int num_labels, int stage) {
  ConfusionMatrix conf(num_labels);
  accumulate(conf, pgt, gt);
  return pgt_quality(conf, stage);
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path.string() + "' is empty");
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      throw ValidationError(fmt::format("'{}': row has {} cells, header has {}", path.string(),
                                        cells.size(), t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::string csv_line(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

void append_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                const std::vector<std::string>& cells) {
  const bool fresh = !std::filesystem::exists(path);
  if (fresh && path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to '" + path.string() + "'");
  if (fresh) out << csv_line(header) << '\n';
  out << csv_line(cells) << '\n';
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace auxseg
