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

#include <string>
#include <vector>

// Command-line front end. Exit codes: 0 success, 1 validation error (bad
// flags, config, or inputs), 2 runtime failure.
namespace auxseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

int dispatch(int argc, char** argv);
int dispatch(const std::vector<std::string>& args);  // args exclude the program name

}  // namespace auxseg::cli
