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

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "auxseg/tensor.hpp"

namespace auxseg::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "auxseg_test_XXXXXX").string();
    if (!mkdtemp(tmpl.data())) std::abort();
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

template <typename T>
RowMatrix<T> random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  RowMatrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(n(rng));
  return m;
}

template <typename T>
FeatureMap<T> random_map(std::mt19937_64& rng, int h, int w, int c, double scale = 1.0) {
  return FeatureMap<T>(h, w, random_matrix<T>(rng, h * w, c, scale));
}

inline Image random_image(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<float> u(0.f, 1.f);
  Image img(h, w, 3);
  for (Eigen::Index i = 0; i < img.data.size(); ++i) img.data.data()[i] = u(rng);
  return img;
}

// |a - n| / max(1e-6, |a| + |n|)
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-6, std::abs(analytic) + std::abs(numeric));
}

// Worst relative error between `analytic` and central differences of `f`
// with respect to every entry of `x` (which is perturbed in place).
inline double check_gradient(RowMatrix<double>& x, const RowMatrix<double>& analytic,
                             const std::function<double()>& f, double h = 1e-5) {
  double worst = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + h;
    const double up = f();
    x.data()[i] = orig - h;
    const double down = f();
    x.data()[i] = orig;
    worst = std::max(worst, relative_error(analytic.data()[i], (up - down) / (2 * h)));
  }
  return worst;
}

}  // namespace auxseg::testing
