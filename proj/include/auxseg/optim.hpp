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

#include <vector>

#include "auxseg/model.hpp"

namespace auxseg {

struct LrSchedule {
  double base_lr = 0.001;
  double power = 0.9;
  int max_iter = 1;

  void validate() const;
};

// base_lr * (1 - iter / max_iter)^power; iterations past max_iter clamp to 0
// with a warning.
double poly_lr(const LrSchedule& schedule, int iter);

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

// Classic momentum SGD:
//   v <- momentum * v + (g + weight_decay * p)
//   p <- p - lr * v
class Sgd {
 public:
  Sgd(const ParamSet<float>& params, SgdConfig config);

  // Updates only parameters whose index is listed in `trainable` (all when
  // empty). Throws NumericError naming the first non-finite gradient.
  void step(ParamSet<float>& params, const ParamSet<float>& grads, double lr,
            const std::vector<int>& trainable = {});

  const ParamSet<float>& velocity() const { return velocity_; }

 private:
  SgdConfig config_;
  ParamSet<float> velocity_;
};

}  // namespace auxseg
