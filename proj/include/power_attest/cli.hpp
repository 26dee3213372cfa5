/*
 * SPDX-FileCopyrightText: Copyright 2026 The power-attest Authors
 * SPDX-License-Identifier: Apache-2.0
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

// Command-line front end shared by the power-attest tool and its tests.

#include <iosfwd>
#include <string>
#include <vector>

namespace power_attest {

enum ExitCode : int { kExitOk = 0, kExitNegative = 1, kExitValidation = 2, kExitInternal = 3 };

/// Runs one command line (args exclude the program name) and returns its
/// exit code. Reports go to `out`, diagnostics and error JSON to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace power_attest
