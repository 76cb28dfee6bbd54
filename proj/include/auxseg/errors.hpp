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

#include <stdexcept>
#include <string>

namespace auxseg {

enum class ErrorKind {
  kConfig,
  kShape,
  kDomain,
  kNumeric,
  kPrecondition,
  kIo,
  kValidation,
  kUndefinedMetric,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Errors caused by bad user input (exit code 1 at the CLI) as opposed to
  // failures while running (exit code 2).
  bool is_validation() const noexcept {
    return kind_ == ErrorKind::kConfig || kind_ == ErrorKind::kValidation ||
           kind_ == ErrorKind::kPrecondition;
  }

 private:
  ErrorKind kind_;
};

#define AUXSEG_DEFINE_ERROR(Name, Kind)                   \
  class Name : public Error {                             \
   public:                                                \
    explicit Name(const std::string& message)             \
        : Error(ErrorKind::Kind, message) {}              \
  };

AUXSEG_DEFINE_ERROR(ConfigError, kConfig)
AUXSEG_DEFINE_ERROR(ShapeError, kShape)
AUXSEG_DEFINE_ERROR(DomainError, kDomain)
AUXSEG_DEFINE_ERROR(NumericError, kNumeric)
AUXSEG_DEFINE_ERROR(PreconditionError, kPrecondition)
AUXSEG_DEFINE_ERROR(IoError, kIo)
AUXSEG_DEFINE_ERROR(ValidationError, kValidation)
AUXSEG_DEFINE_ERROR(UndefinedMetricError, kUndefinedMetric)

#undef AUXSEG_DEFINE_ERROR

}  // namespace auxseg
