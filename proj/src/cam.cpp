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

#include "auxseg/cam.hpp"

#include <fmt/format.h>

#include "auxseg/archive.hpp"
#include "auxseg/errors.hpp"
#include "auxseg/nn.hpp"

namespace auxseg {

ClassifierHead classifier_head(const Model& model) {
  return {model.params().value(model.layout().classifier.weight),
          model.params().value(model.layout().classifier.bias)};
}

CamStack compute_cam(const BackboneFeatures<float>& features, const ClassifierHead& head,
                     const std::vector<int>& present_classes) {
  const auto& f = features.data;
  if (head.weights.rows() != f.channels()) {
    throw ShapeError(fmt::format("classifier expects {} channels, features have {}",
                                 head.weights.rows(), f.channels()));
  }
  const int num_classes = static_cast<int>(head.weights.cols());
  CamStack out;
  out.height = f.height;
  out.width = f.width;
  out.maps = RowMatrix<float>::Zero(num_classes, f.pixels());
  for (int c : present_classes) {
    if (c < 0 || c >= num_classes) {
      throw DomainError(fmt::format("class id {} outside [0, {})", c, num_classes));
    }
    out.maps.row(c) = (f.data * head.weights.col(c)).transpose();
  }
  out.present_classes = present_classes;
  return out;
}

CamStack normalize_cam(const CamStack& stack, float eps) {
  CamStack out = stack;
  out.maps = out.maps.cwiseMax(0.0f);
  for (Eigen::Index c = 0; c < out.maps.rows(); ++c) {
    const float peak = out.maps.row(c).maxCoeff();
    out.maps.row(c) /= std::max(peak, eps);
  }
  return out;
}

CamStack propagate_cam(const CamStack& stack, const AffinityMatrix<float>& aggregation,
                       int iterations) {
  if (iterations < 1) throw DomainError("CAM refinement needs at least one iteration");
  if (aggregation.height != stack.height || aggregation.width != stack.width ||
      aggregation.data.rows() != stack.maps.cols()) {
    throw ShapeError(fmt::format("affinity grid {}x{} does not match CAM grid {}x{}",
                                 aggregation.height, aggregation.width, stack.height,
                                 stack.width));
  }
  if (aggregation.normalization != AffinityNorm::kAggregation) {
    throw PreconditionError("CAM refinement requires an aggregation-normalized affinity");
  }
  CamStack out = stack;
  for (int i = 0; i < iterations; ++i) {
    // Each class map is a row here, so A * map^T becomes map * A^T.
    RowMatrix<float> next = out.maps * aggregation.data.transpose();
    out.maps = std::move(next);
  }
  return out;
}

CamStack refine_cam(const CamStack& stack, const AffinityMatrix<float>& aggregation,
                    int iterations) {
  return normalize_cam(propagate_cam(stack, aggregation, iterations));
}

CamStack resize_cam(const CamStack& stack, int height, int width) {
  FeatureMap<float> fm(stack.height, stack.width, RowMatrix<float>(stack.maps.transpose()));
  FeatureMap<float> up = nn::resize_bilinear(fm, height, width);
  CamStack out;
  out.height = height;
  out.width = width;
  out.maps = up.data.transpose();
  out.present_classes = stack.present_classes;
  return out;
}

namespace {
std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p.replace_extension(".json");
  return p;
}
}  // namespace

void save_cam_stack(const std::filesystem::path& path, const CamStack& stack,
                    const std::string& image_id) {
  ArrayArchive archive;
  archive.meta = {{"kind", "cam_stack"}, {"image_id", image_id}};
  NamedArray a;
  a.name = "cams";
  a.shape = {stack.classes(), stack.height, stack.width};
  a.values.assign(stack.maps.data(), stack.maps.data() + stack.maps.size());
  archive.arrays.push_back(std::move(a));
  write_archive(path, archive);
  nlohmann::json sidecar = {{"image_id", image_id}, {"present_classes", stack.present_classes}};
  write_file_atomic(sidecar_path(path), sidecar.dump(2) + "\n");
}

CamStack load_cam_stack(const std::filesystem::path& path, std::string* image_id) {
  const ArrayArchive archive = read_archive(path);
  const NamedArray& a = archive.get("cams");
  if (a.shape.size() != 3) throw ValidationError("'" + path.string() + "': cams must be rank 3");
  CamStack stack;
  stack.height = static_cast<int>(a.shape[1]);
  stack.width = static_cast<int>(a.shape[2]);
  stack.maps = Eigen::Map<const RowMatrix<float>>(a.values.data(), a.shape[0],
                                                  a.shape[1] * a.shape[2]);
  const auto side = sidecar_path(path);
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(read_file(side));
    stack.present_classes = sidecar.at("present_classes").get<std::vector<int>>();
    if (image_id) *image_id = sidecar.at("image_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad CAM sidecar '" + side.string() + "': " + e.what());
  }
  return stack;
}

void save_affinity(const std::filesystem::path& path, const AffinityMatrix<float>& a) {
  ArrayArchive archive;
  archive.meta = {{"kind", "affinity"},
                  {"height", a.height},
                  {"width", a.width},
                  {"normalization", to_string(a.normalization)}};
  NamedArray arr;
  arr.name = "affinity";
  arr.shape = {a.data.rows(), a.data.cols()};
  arr.values.assign(a.data.data(), a.data.data() + a.data.size());
  archive.arrays.push_back(std::move(arr));
  write_archive(path, archive);
}

AffinityMatrix<float> load_affinity(const std::filesystem::path& path) {
  const ArrayArchive archive = read_archive(path);
  const NamedArray& arr = archive.get("affinity");
  AffinityMatrix<float> a;
  try {
    a.height = archive.meta.at("height").get<int>();
    a.width = archive.meta.at("width").get<int>();
    a.normalization = affinity_norm_from_string(archive.meta.at("normalization").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad affinity metadata in '" + path.string() + "': " + e.what());
  }
  const std::int64_t n = static_cast<std::int64_t>(a.height) * a.width;
  if (arr.shape.size() != 2 || arr.shape[0] != n || arr.shape[1] != n) {
    throw ValidationError("'" + path.string() + "': affinity shape does not match its grid");
  }
  a.data = Eigen::Map<const RowMatrix<float>>(arr.values.data(), n, n);
  return a;
}

}  // namespace auxseg
