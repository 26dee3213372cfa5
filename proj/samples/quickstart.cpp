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

// Quickstart: build and calibrate a template for one synthetic program,
// attest fresh traces of it and of another program, then size a batch for a
// 32-bit security level.

#include "power_attest.hpp"

#include <cstdio>

using namespace power_attest;

int main() {
  const auto profiles = default_profiles();
  const TriggerConfig trigger = default_trigger_config();

  StudyConfig cfg;
  cfg.per_program = 64;
  cfg.eval_per_program = 8;
  const SyntheticStudy study({profiles[0], profiles[1]}, trigger, cfg);

  const Template tpl = study.calibrate(0, study.uncalibrated_template(0));
  std::printf("template %s: bucket 2^%d, corr_thres %.4f\n", tpl.program_id.c_str(), tpl.bucket.exponent(),
              *tpl.corr_thres);

  const Matcher matcher(tpl);
  const SyntheticCorpus& eval = study.eval_corpus();
  for (std::size_t i = 0; i < eval.size(); i += 4) {
    const AttestDecision d = matcher.attest(eval.trace(i));
    std::printf("  %-6s trace %zu: r = %.4f -> %s\n", eval.label(i).c_str(), i, d.correlation,
                d.passed ? "pass" : "fail");
  }

  const SecurityParams s = min_traces_for_level(kReferencePAlpha, kReferencePBeta, 32);
  std::printf("32-bit level: n = %llu, x_th = %llu, P(alpha) = %.3g, 1 - P(beta) = %.3g\n",
              static_cast<unsigned long long>(s.n), static_cast<unsigned long long>(s.x_th), s.p_cheat,
              s.honest_failure);
}
