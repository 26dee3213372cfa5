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

// Batch protocol simulation: builds the tray's template for one application,
// derives (n, x_th) for a security level and runs honest or adversarial
// sessions.

#include "power_attest/protocol/attacks.hpp"
#include "power_attest/protocol/session.hpp"
#include "power_attest/security.hpp"
#include "power_attest/study.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace power_attest::protocol {

enum class AttackKind { None, MeasurementSubstitution, FalseResult, ApplicationSubstitution };

constexpr std::string_view to_string(AttackKind a) {
  switch (a) {
  case AttackKind::None: return "none";
  case AttackKind::MeasurementSubstitution: return "subst-meas";
  case AttackKind::FalseResult: return "false-result";
  case AttackKind::ApplicationSubstitution: return "subst-app";
  }
  return "?";
}

inline AttackKind parse_attack(std::string_view s) {
  for (AttackKind a : {AttackKind::None, AttackKind::MeasurementSubstitution, AttackKind::FalseResult,
                       AttackKind::ApplicationSubstitution})
    if (to_string(a) == s)
      return a;
  fail(Errc::invalid_argument, "unknown attack '" + std::string(s) + "'");
}

struct ProtocolSimOptions {
  std::string app_id;
  unsigned level = 32;
  double p_alpha = kReferencePAlpha;
  double p_beta = kReferencePBeta;
  AttackKind attack = AttackKind::None;
  std::size_t sessions = 1;
  std::uint64_t seed = 1;
  std::size_t traces_per_program = 1000;
  TemplateOptions templates;
};

struct ProtocolSimReport {
  std::string app_id;
  AttackKind attack = AttackKind::None;
  unsigned level = 0;
  SecurityParams params;
  double corr_thres = 0.0;
  std::size_t sessions = 0;
  std::size_t accepted = 0;
  std::size_t aborted = 0;
  std::size_t unexpected = 0; // sessions whose outcome contradicts the branch's expectation
  std::map<std::string, std::size_t> abort_reasons;
  std::optional<double> impostor_p_alpha;
  std::vector<TranscriptEntry> transcript;

  /// Attestation-negative: an honest session failed, or an attack branch
  /// ended differently from its expected abort.
  bool negative() const noexcept {
    return attack == AttackKind::None ? accepted != sessions : unexpected != 0;
  }
};

inline nlohmann::ordered_json protocol_report_to_json(const ProtocolSimReport& r) {
  nlohmann::ordered_json j;
  j["app_id"] = r.app_id;
  j["attack"] = std::string(to_string(r.attack));
  j["level"] = r.level;
  j["n"] = r.params.n;
  j["x_th"] = r.params.x_th;
  j["p_cheat"] = r.params.p_cheat;
  j["p_honest"] = r.params.p_honest;
  j["corr_thres"] = r.corr_thres;
  j["sessions"] = r.sessions;
  j["accepted"] = r.accepted;
  j["aborted"] = r.aborted;
  j["unexpected"] = r.unexpected;
  j["abort_reasons"] = r.abort_reasons;
  if (r.impostor_p_alpha)
    j["impostor_p_alpha"] = *r.impostor_p_alpha;
  return j;
}

/// Runs `opt.sessions` sessions against `opt.app_id`, whose profile must be
/// among `profiles`. The tray's template is built from a synthetic capture
/// corpus and calibrated on 12-bit capture codes.
inline ProtocolSimReport run_protocol_sim(const std::vector<ProgramProfile>& profiles, const TriggerConfig& trigger,
                                          const ProtocolSimOptions& opt) {
  if (opt.sessions < 1)
    fail(Errc::invalid_argument, "sessions must be positive");
  StudyConfig sc;
  sc.per_program = opt.traces_per_program;
  sc.eval_per_program = 1;
  sc.templates = opt.templates;
  sc.seed = derive_seed(opt.seed, 10);
  const SyntheticStudy study(profiles, trigger, sc);
  const std::size_t k = study.program_index(opt.app_id);
  const Template tpl = study.capture_calibrate(k, study.uncalibrated_template(k));

  ProtocolSimReport rep;
  rep.app_id = opt.app_id;
  rep.attack = opt.attack;
  rep.level = opt.level;
  rep.params = min_traces_for_level(opt.p_alpha, opt.p_beta, opt.level);
  rep.corr_thres = *tpl.corr_thres;

  std::vector<ProgramProfile> registry = profiles;
  std::string impostor_id;
  if (opt.attack == AttackKind::ApplicationSubstitution) {
    const ProgramProfile& genuine = study.profile(k);
    const ProgramProfile decoy =
        make_random_profile(opt.app_id + "-decoy", genuine.duration_samples, derive_seed(opt.seed, 11));
    impostor_id = opt.app_id + "-impostor";
    EngineeredImpostor imp = engineer_impostor(tpl, genuine, decoy, trigger, opt.p_alpha, impostor_id);
    rep.impostor_p_alpha = imp.p_alpha;
    registry.push_back(std::move(imp.profile));
  }

  ProtocolConfig pc;
  pc.n = static_cast<std::uint32_t>(rep.params.n);
  pc.x_th = static_cast<std::uint32_t>(rep.params.x_th);
  Simulation sim(std::make_shared<const AppRegistry>(std::move(registry), trigger), pc, derive_seed(opt.seed, 12));
  sim.tray().add_template(tpl);

  auto tally = [&](const SessionResult& r, std::optional<AbortReason> expected) {
    ++rep.sessions;
    rep.accepted += r.accepted() ? 1 : 0;
    if (r.abort_reason) {
      ++rep.aborted;
      ++rep.abort_reasons[std::string(to_string(*r.abort_reason))];
    }
    if (r.abort_reason != expected)
      ++rep.unexpected;
  };

  switch (opt.attack) {
  case AttackKind::None:
    for (std::size_t s = 0; s < opt.sessions; ++s)
      tally(sim.run_session(opt.app_id), std::nullopt);
    break;
  case AttackKind::MeasurementSubstitution: {
    MeasurementSubstitution h(sim, opt.app_id, derive_seed(opt.seed, 13));
    constexpr MeasurementAttack branches[] = {MeasurementAttack::ForgedSignature,
                                              MeasurementAttack::NonceSwappedReplay,
                                              MeasurementAttack::VerbatimReplay};
    for (std::size_t s = 0; s < opt.sessions; ++s) {
      const AttackOutcome o = h.run(branches[s % 3]);
      tally(o.session, o.expected);
    }
    break;
  }
  case AttackKind::FalseResult: {
    FalseResult h(sim, opt.app_id, derive_seed(opt.seed, 13));
    constexpr ResultAttack branches[] = {ResultAttack::BitFlip, ResultAttack::NonceSwappedReplay,
                                         ResultAttack::VerbatimReplay};
    for (std::size_t s = 0; s < opt.sessions; ++s) {
      const AttackOutcome o = h.run(branches[s % 3]);
      tally(o.session, o.expected);
    }
    break;
  }
  case AttackKind::ApplicationSubstitution: {
    sim.prover().behavior().executed_app = impostor_id;
    for (std::size_t s = 0; s < opt.sessions; ++s) {
      const SessionResult r = sim.run_session(opt.app_id);
      ++rep.sessions;
      rep.accepted += r.accepted() ? 1 : 0;
      if (r.abort_reason) {
        ++rep.aborted;
        ++rep.abort_reasons[std::string(to_string(*r.abort_reason))];
      }
    }
    break;
  }
  }
  rep.transcript = sim.network().transcript();
  return rep;
}

} // namespace power_attest::protocol
