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

#include "auxseg/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

namespace auxseg::log {
namespace {

std::atomic<bool> g_json{false};
std::atomic<int> g_min_level{static_cast<int>(Level::kInfo)};
std::atomic<std::size_t> g_warnings{0};
std::mutex g_mutex;

const char* level_name(Level level) {
  switch (level) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
  }
  return "info";
}

}  // namespace

void set_json(bool enabled) { g_json = enabled; }
void set_min_level(Level level) { g_min_level = static_cast<int>(level); }
bool json_enabled() { return g_json; }
std::size_t warning_count() { return g_warnings; }

void emit(Level level, std::string_view message, const nlohmann::json& fields) {
  if (level == Level::kWarn) ++g_warnings;
  if (static_cast<int>(level) < g_min_level) return;
  std::string line;
  if (g_json) {
    nlohmann::json event = fields.is_object() ? fields : nlohmann::json::object();
    event["level"] = level_name(level);
    event["msg"] = std::string(message);
    line = event.dump();
  } else {
    line = fmt::format("[{}] {}", level_name(level), message);
    if (fields.is_object() && !fields.empty()) line += " " + fields.dump();
  }
  std::lock_guard lock(g_mutex);
  std::fprintf(stderr, "%s\n", line.c_str());
}

}  // namespace auxseg::log
