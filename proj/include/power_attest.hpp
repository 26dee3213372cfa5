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

// Umbrella header.

#include "power_attest/bytes.hpp"
#include "power_attest/config.hpp"
#include "power_attest/error.hpp"
#include "power_attest/eval.hpp"
#include "power_attest/io.hpp"
#include "power_attest/matcher.hpp"
#include "power_attest/pearson.hpp"
#include "power_attest/pipeline.hpp"
#include "power_attest/plot.hpp"
#include "power_attest/protocol/attacks.hpp"
#include "power_attest/protocol/crypto.hpp"
#include "power_attest/protocol/messages.hpp"
#include "power_attest/protocol/runner.hpp"
#include "power_attest/protocol/session.hpp"
#include "power_attest/rng.hpp"
#include "power_attest/savitzky_golay.hpp"
#include "power_attest/security.hpp"
#include "power_attest/source.hpp"
#include "power_attest/study.hpp"
#include "power_attest/synth.hpp"
#include "power_attest/template.hpp"
#include "power_attest/trace.hpp"
