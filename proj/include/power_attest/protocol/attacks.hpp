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

// Adversary harnesses: measurement substitution and false result (both must
// be detected), and application substitution (empirical acceptance rate).

#include "power_attest/error.hpp"
#include "power_attest/matcher.hpp"
#include "power_attest/protocol/crypto.hpp"
#include "power_attest/protocol/messages.hpp"
#include "power_attest/protocol/session.hpp"
#include "power_attest/security.hpp"
#include "power_attest/synth.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace power_attest::protocol {

enum class MeasurementAttack { ForgedSignature, NonceSwappedReplay, VerbatimReplay };
enum class ResultAttack { Control, BitFlip, NonceSwappedReplay, VerbatimReplay };

constexpr std::string_view to_string(MeasurementAttack a) {
  switch (a) {
  case MeasurementAttack::ForgedSignature: return "forged-signature";
  case MeasurementAttack::NonceSwappedReplay: return "nonce-swapped-replay";
  case MeasurementAttack::VerbatimReplay: return "verbatim-replay";
  }
  return "?";
}

constexpr std::string_view to_string(ResultAttack a) {
  switch (a) {
  case ResultAttack::Control: return "control";
  case ResultAttack::BitFlip: return "bit-flip";
  case ResultAttack::NonceSwappedReplay: return "nonce-swapped-replay";
  case ResultAttack::VerbatimReplay: return "verbatim-replay";
  }
  return "?";
}

/// The abort each branch must produce; nullopt means the session must succeed.
constexpr std::optional<AbortReason> expected_abort(MeasurementAttack a) {
  return a == MeasurementAttack::VerbatimReplay ? AbortReason::StaleNonce : AbortReason::BadSignature;
}

constexpr std::optional<AbortReason> expected_abort(ResultAttack a) {
  switch (a) {
  case ResultAttack::Control: return std::nullopt;
  case ResultAttack::VerbatimReplay: return AbortReason::StaleNonce;
  default: return AbortReason::BadSignature;
  }
}

struct AttackOutcome {
  std::string branch;
  SessionResult session;
  std::optional<AbortReason> expected;

  bool detected() const noexcept { return session.aborted(); }
  bool as_expected() const noexcept { return session.abort_reason == expected; }
};

/// Raises HarnessFailure when an attack branch was accepted by the verifier.
inline void require_detected(const AttackOutcome& o) {
  if (o.expected && !o.detected())
    fail(Errc::harness_failure, "attack branch '" + o.branch + "' was accepted");
}

namespace detail {
template <class T>
std::optional<T> decode_as(const Bytes& wire) {
  try {
    auto m = decode_message(wire);
    if (auto* v = std::get_if<T>(&m))
      return std::move(*v);
  } catch (const Error&) {
  }
  return std::nullopt;
}
} // namespace detail

/// Attack 1. The adversary controls P: it replaces the TEE's m4 inside m5 and
/// re-signs m5 with P's key. Replay branches reuse an m4 that V accepted in
/// an earlier honest session.
class MeasurementSubstitution {
public:
  MeasurementSubstitution(Simulation& sim, std::string app_id, std::uint64_t seed)
      : sim_(sim), app_id_(std::move(app_id)), rng_(seed, "adversary/measurements") {}

  AttackOutcome run(MeasurementAttack branch) {
    if (branch != MeasurementAttack::ForgedSignature && !previous_m4_)
      warm_up();
    sim_.network().set_interposer([&](const Link& link, Bytes wire) -> std::vector<Bytes> {
      if (link.from != Role::P || link.to != Role::V)
        return {std::move(wire)};
      auto m5 = detail::decode_as<M5>(wire);
      if (!m5)
        return {std::move(wire)};
      m5->m4 = substitute(branch, m5->m4);
      m5->sig_p = sign(sim_.prover().keys().signing.sk, h4_response(m5->r5, m5->m4, m5->out));
      return {encode(ProtocolMessage(*m5))};
    });
    AttackOutcome o{std::string(to_string(branch)), sim_.run_session(app_id_), expected_abort(branch)};
    sim_.network().clear_interposer();
    return o;
  }

private:
  void warm_up() {
    sim_.network().set_interposer([&](const Link& link, Bytes wire) -> std::vector<Bytes> {
      if (link.from == Role::P && link.to == Role::V)
        if (auto m5 = detail::decode_as<M5>(wire))
          previous_m4_ = m5->m4;
      return {std::move(wire)};
    });
    sim_.run_session(app_id_);
    sim_.network().clear_interposer();
  }

  M4 substitute(MeasurementAttack branch, const M4& genuine) {
    switch (branch) {
    case MeasurementAttack::ForgedSignature: {
      // Fresh measurements of the expected program under a forged TEE signature.
      const TraceSynthesizer& s = sim_.apps().synth(app_id_);
      const LengthBucket b = sim_.apps().bucket(app_id_);
      TraceBatch batch;
      std::vector<double> w(b.size());
      for (std::uint32_t i = 0; i < sim_.config().round_size() && i < sim_.config().n; ++i) {
        s.fill_window(rng_.u64(), s.marks().start, w);
        batch.traces.push_back(pack_capture(quantize_codes(w)));
      }
      M4 m;
      m.r4 = rng_.nonce();
      m.ct = seal(sim_.keys().directory.at(Role::V).enc, encode(batch), rng_);
      m.sig_tee = rng_.array<kSignatureBytes>();
      return m;
    }
    case MeasurementAttack::NonceSwappedReplay: {
      M4 m = *previous_m4_;
      m.r4 = rng_.nonce();
      return m;
    }
    case MeasurementAttack::VerbatimReplay:
      return *previous_m4_;
    }
    return genuine;
  }

  Simulation& sim_;
  std::string app_id_;
  DeterministicRandom rng_;
  std::optional<M4> previous_m4_;
};

/// Attack 2. The adversary sits on the MT -> V link and tampers with m7.
/// Replay branches reuse an m7 that V accepted in an earlier session.
class FalseResult {
public:
  FalseResult(Simulation& sim, std::string app_id, std::uint64_t seed)
      : sim_(sim), app_id_(std::move(app_id)), rng_(seed, "adversary/result") {}

  AttackOutcome run(ResultAttack branch) {
    if ((branch == ResultAttack::NonceSwappedReplay || branch == ResultAttack::VerbatimReplay) && !previous_m7_)
      warm_up();
    std::optional<M7> delivered;
    sim_.network().set_interposer([&](const Link& link, Bytes wire) -> std::vector<Bytes> {
      if (link.from != Role::MT || link.to != Role::V)
        return {std::move(wire)};
      auto m7 = detail::decode_as<M7>(wire);
      if (!m7)
        return {std::move(wire)};
      switch (branch) {
      case ResultAttack::Control:
        delivered = *m7;
        break;
      case ResultAttack::BitFlip: {
        const Bytes flipped{static_cast<std::uint8_t>(1 - sim_.tray().last_verdict())};
        m7->ct = seal(sim_.keys().directory.at(Role::V).enc, flipped, rng_);
        break;
      }
      case ResultAttack::NonceSwappedReplay:
        *m7 = *previous_m7_;
        m7->r7 = rng_.nonce();
        break;
      case ResultAttack::VerbatimReplay:
        *m7 = *previous_m7_;
        break;
      }
      return {encode(ProtocolMessage(*m7))};
    });
    AttackOutcome o{std::string(to_string(branch)), sim_.run_session(app_id_), expected_abort(branch)};
    sim_.network().clear_interposer();
    if (delivered && !o.session.aborted())
      previous_m7_ = delivered;
    return o;
  }

private:
  void warm_up() {
    sim_.network().set_interposer([&](const Link& link, Bytes wire) -> std::vector<Bytes> {
      if (link.from == Role::MT && link.to == Role::V)
        if (auto m7 = detail::decode_as<M7>(wire))
          previous_m7_ = *m7;
      return {std::move(wire)};
    });
    sim_.run_session(app_id_);
    sim_.network().clear_interposer();
  }

  Simulation& sim_;
  std::string app_id_;
  DeterministicRandom rng_;
  std::optional<M7> previous_m7_;
};

// ---------------------------------------------------------------------------
// Attack 3: application substitution

struct SubstitutionReport {
  std::size_t sessions = 0;
  std::size_t accepted = 0;
  std::size_t aborted = 0;
  Interval interval; // Wilson interval on the acceptance rate
  double rate() const noexcept {
    return sessions == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(sessions);
  }
};

/// Runs full protocol sessions in which P executes `impostor` while V asks
/// for `app_id`. Acceptance means V obtained b = 1.
inline SubstitutionReport substitute_application(Simulation& sim, const std::string& app_id,
                                                 const std::string& impostor, std::size_t sessions,
                                                 double confidence = 0.99) {
  const auto saved = sim.prover().behavior().executed_app;
  sim.prover().behavior().executed_app = impostor;
  SubstitutionReport rep;
  rep.sessions = sessions;
  for (std::size_t i = 0; i < sessions; ++i) {
    const SessionResult r = sim.run_session(app_id);
    rep.accepted += r.accepted() ? 1 : 0;
    rep.aborted += r.aborted() ? 1 : 0;
  }
  sim.prover().behavior().executed_app = saved;
  rep.interval = wilson_interval(rep.accepted, rep.sessions, confidence);
  return rep;
}

/// Noise level seen by the matcher once traces are rounded to integer codes.
inline double quantized_sigma(double sigma) { return std::sqrt(sigma * sigma + 1.0 / 12.0); }

/// Correlation-domain counterpart of substitute_application: each of the n
/// traces contributes one draw from the exact correlation distribution of
/// the impostor's clean window against the template, so no samples or
/// ciphertexts are materialised.
inline SubstitutionReport substitute_application_correlation_domain(
    const Template& tpl, const TraceSynthesizer& impostor, std::uint32_t n, std::uint32_t x_th,
    std::size_t sessions, std::uint64_t seed, double confidence = 0.99) {
  const Matcher m(tpl);
  const auto clean = impostor.clean().subspan(impostor.marks().start, tpl.bucket.size());
  const CorrelationModel model(m.reference(), clean, quantized_sigma(impostor.profile().noise_sigma));
  SplitMix64 engine(seed);
  SubstitutionReport rep;
  rep.sessions = sessions;
  for (std::size_t s = 0; s < sessions; ++s) {
    std::uint32_t passes = 0;
    for (std::uint32_t i = 0; i < n; ++i)
      passes += m.passes(model.sample(engine)) ? 1 : 0;
    rep.accepted += passes >= x_th ? 1 : 0;
  }
  rep.interval = wilson_interval(rep.accepted, rep.sessions, confidence);
  return rep;
}

struct EngineeredImpostor {
  ProgramProfile profile;
  double weight = 0.0;  // share of the genuine signature in the blend
  double p_alpha = 0.0; // modelled single-trace pass probability
};

/// Blends `genuine` with `decoy` (equal durations) so that a single impostor
/// trace passes `tpl` with probability `target`. Bisection on the blend
/// weight; the pass probability is estimated with common random numbers so
/// it is monotone in the weight.
inline EngineeredImpostor engineer_impostor(const Template& tpl, const ProgramProfile& genuine,
                                            const ProgramProfile& decoy, const TriggerConfig& trigger,
                                            double target, std::string impostor_id,
                                            std::size_t draws = 400'000, std::uint64_t seed = 0x1A2B) {
  if (!(target > 0.0 && target < 1.0))
    fail(Errc::invalid_argument, "target pass probability must be in (0, 1)");
  const Matcher m(tpl);
  auto p_at = [&](double w) {
    const TraceSynthesizer s(blend_profiles(genuine, decoy, w, impostor_id), trigger);
    const auto clean = s.clean().subspan(s.marks().start, tpl.bucket.size());
    const CorrelationModel model(m.reference(), clean, quantized_sigma(s.profile().noise_sigma));
    return model.pass_probability(m.threshold(), draws, seed);
  };
  double lo = 0.0, hi = 1.0;
  if (p_at(lo) > target || p_at(hi) < target)
    fail(Errc::invalid_argument, "target pass probability not reachable by blending");
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    (p_at(mid) < target ? lo : hi) = mid;
  }
  const double w = 0.5 * (lo + hi);
  const double p = p_at(w);
  return {blend_profiles(genuine, decoy, w, std::move(impostor_id)), w, p};
}

} // namespace power_attest::protocol
