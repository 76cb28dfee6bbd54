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

#include <cstddef>
#include <string>
#include <string_view>

#include <fmt/format.h>
#include "json.hpp"

// Minimal leveled logger writing to stderr, either as text lines or as one
// JSON object per event (--json-logs).
namespace auxseg::log {

enum class Level { kDebug, kInfo, kWarn, kError };

void set_json(bool enabled);
void set_min_level(Level level);
bool json_enabled();

// Number of warnings emitted since process start; tests use it to observe
// warn-and-continue paths.
std::size_t warning_count();

void emit(Level level, std::string_view message, const nlohmann::json& fields = {});

template <typename... Args>
void info(fmt::format_string<Args...> f, Args&&... args) {
  emit(Level::kInfo, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
void warn(fmt::format_string<Args...> f, Args&&... args) {
  emit(Level::kWarn, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
void error(fmt::format_string<Args...> f, Args&&... args) {
  emit(Level::kError, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
void debug(fmt::format_string<Args...> f, Args&&... args) {
  emit(Level::kDebug, fmt::format(f, std::forward<Args>(args)...));
}

}  // namespace auxseg::log
