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

#include "auxseg/optim.hpp"

#include <cmath>

#include <fmt/format.h>

#include "auxseg/errors.hpp"
#include "auxseg/log.hpp"

namespace auxseg {

void LrSchedule::validate() const {
  std::vector<std::string> problems;
  if (!(base_lr > 0)) problems.push_back(fmt::format("base_lr={} must be positive", base_lr));
  if (!(power > 0)) problems.push_back(fmt::format("power={} must be positive", power));
  if (max_iter < 1) problems.push_back(fmt::format("max_iter={} must be positive", max_iter));
  if (!problems.empty()) {
    std::string msg = "invalid learning-rate schedule:";
    for (const auto& p : problems) msg += "\n  optim." + p;
    throw ConfigError(msg);
  }
}

double poly_lr(const LrSchedule& schedule, int iter) {
  schedule.validate();
  if (iter < 0) throw DomainError("iteration index must be non-negative");
  if (iter > schedule.max_iter) {
    log::warn("poly_lr: iteration {} beyond max_iter {}; learning rate clamped to 0", iter,
              schedule.max_iter);
    return 0.0;
  }
  const double frac = 1.0 - static_cast<double>(iter) / schedule.max_iter;
  return schedule.base_lr * std::pow(frac, schedule.power);
}

Sgd::Sgd(const ParamSet<float>& params, SgdConfig config)
    : config_(config), velocity_(params.zeros_like()) {}

void Sgd::step(ParamSet<float>& params, const ParamSet<float>& grads, double lr,
               const std::vector<int>& trainable) {
  if (grads.size() != params.size() || velocity_.size() != params.size()) {
    throw ShapeError("parameter, gradient and velocity sets differ in size");
  }
  std::vector<int> indices = trainable;
  if (indices.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) indices.push_back(static_cast<int>(i));
  }
  for (int i : indices) {
    if (!grads.value(i).allFinite()) {
      throw NumericError("non-finite gradient for parameter '" + params[i].name + "'");
    }
  }
  const float mu = static_cast<float>(config_.momentum);
  const float wd = static_cast<float>(config_.weight_decay);
  const float rate = static_cast<float>(lr);
  for (int i : indices) {
    auto& v = velocity_.value(i);
    auto& p = params.value(i);
    v = mu * v + grads.value(i) + wd * p;
    p -= rate * v;
  }
}

}  // namespace auxseg
