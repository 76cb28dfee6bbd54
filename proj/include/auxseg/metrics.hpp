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


#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "auxseg/tensor.hpp"

namespace auxseg {

// Rows are ground truth, columns predictions, over labels 0..C. Pixels whose
// GT is ignore go to `ignored`; pixels with a real GT class but an ignore
// prediction (unlabeled pseudo-label pixels) go to `unlabeled[gt]`.
struct ConfusionMatrix {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> unlabeled;
  std::int64_t ignored = 0;

  explicit ConfusionMatrix(int num_labels = 0);

  int num_labels() const { return static_cast<int>(counts.rows()); }
  std::int64_t total() const;  // every pixel ever accumulated

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix& other) const;
};

// Throws ShapeError on size mismatch and DomainError on labels outside
// 0..num_labels-1 (other than ignore).
void accumulate(ConfusionMatrix& conf, const LabelMask& pred, const LabelMask& gt);

// Mean IoU in percent over labels with a nonzero union; unlabeled pixels
// count as misses of their GT class. Throws UndefinedMetricError when no
// label has a nonzero union.
double miou(const ConfusionMatrix& conf);

// Per-label IoU in percent; NaN where the union is empty.
std::vector<double> per_class_iou(const ConfusionMatrix& conf);

struct PgtQuality {
  int stage = 0;
  double precision = 0;  // percent
  double recall = 0;     // percent
  double miou = 0;       // percent
  bool precision_defined = false;
  bool recall_defined = false;
};

// Macro averages over foreground labels 1..C:
//   precision_c = correct_c / labeled_c        (classes never labeled are skipped)
//   recall_c    = correct_c / gt_c             (ignore predictions count as misses)
// Undefined averages are reported as 0 with the matching flag cleared.
PgtQuality pgt_quality(const ConfusionMatrix& conf, int stage = 0);
PgtQuality pgt_quality(const LabelMask& pgt, const LabelMask& gt, int num_labels, int stage = 0);

// Minimal CSV: header row plus string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);
std::string csv_line(const std::vector<std::string>& cells);
// Appends one line (creating the file with `header` when new).
void append_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                const std::vector<std::string>& cells);

struct TrendFiles {
  std::filesystem::path csv;
  std::filesystem::path pgt_png;
  std::filesystem::path eval_png;
};

// Reads <run>/metrics/{pgt,eval}.csv and writes <run>/plots/stage_trends.csv
// (one row per evaluated stage) plus two line charts. Throws
// PreconditionError listing the expected files when either CSV is missing.
TrendFiles plot_stage_trends(const std::filesystem::path& run_dir);

}  // namespace auxseg
