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

// Verifier, prover (untrusted host plus TEE) and measurements tray actors
// exchanging m1..m7 over a simulated network with a virtual clock.

#include "power_attest/bytes.hpp"
#include "power_attest/error.hpp"
#include "power_attest/matcher.hpp"
#include "power_attest/protocol/crypto.hpp"
#include "power_attest/protocol/messages.hpp"
#include "power_attest/rng.hpp"
#include "power_attest/synth.hpp"
#include "power_attest/template.hpp"
#include "power_attest/trace.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace power_attest::protocol {

enum class AbortReason {
  BadSignature,
  StaleNonce,
  TimingExceeded,
  ChecksumMismatch,
  FingerprintMismatch,
  UnknownApplication,
  DecryptionFailed,
  OutOfPhase,
  MalformedMessage,
};

constexpr std::string_view to_string(AbortReason r) {
  switch (r) {
  case AbortReason::BadSignature: return "BadSignature";
  case AbortReason::StaleNonce: return "StaleNonce";
  case AbortReason::TimingExceeded: return "TimingExceeded";
  case AbortReason::ChecksumMismatch: return "ChecksumMismatch";
  case AbortReason::FingerprintMismatch: return "FingerprintMismatch";
  case AbortReason::UnknownApplication: return "UnknownApplication";
  case AbortReason::DecryptionFailed: return "DecryptionFailed";
  case AbortReason::OutOfPhase: return "OutOfPhase";
  case AbortReason::MalformedMessage: return "MalformedMessage";
  }
  return "Unknown";
}

enum class Phase { Setup, LaunchPending, Launched, ComputePending, AwaitingVerdict, Done, Aborted };

constexpr std::string_view to_string(Phase p) {
  switch (p) {
  case Phase::Setup: return "Setup";
  case Phase::LaunchPending: return "LaunchPending";
  case Phase::Launched: return "Launched";
  case Phase::ComputePending: return "ComputePending";
  case Phase::AwaitingVerdict: return "AwaitingVerdict";
  case Phase::Done: return "Done";
  case Phase::Aborted: return "Aborted";
  }
  return "Unknown";
}

enum class Role { V, P, TEE, MT };

constexpr std::string_view to_string(Role r) {
  switch (r) {
  case Role::V: return "V";
  case Role::P: return "P";
  case Role::TEE: return "TEE";
  case Role::MT: return "MT";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Setup

struct PartyKeys {
  Role role = Role::V;
  SigningKeyPair signing;
  EncryptionKeyPair encryption;
};

struct PublicKeys {
  SignPublicKey sign{};
  BoxPublicKey enc{};
};

struct KeyDirectory {
  std::map<Role, PublicKeys> keys;
  const PublicKeys& at(Role r) const { return keys.at(r); }
};

struct SetupResult {
  std::map<Role, PartyKeys> parties;
  KeyDirectory directory;
};

/// Independent signing and encryption key pairs for V, P, TEE and MT; only
/// the public halves enter the directory.
inline SetupResult setup(std::uint64_t seed) {
  SetupResult out;
  for (Role r : {Role::V, Role::P, Role::TEE, Role::MT}) {
    DeterministicRandom rng(seed, std::string("setup/") + std::string(to_string(r)));
    PartyKeys k{r, make_signing_keys(rng), make_encryption_keys(rng)};
    out.directory.keys[r] = {k.signing.pk, k.encryption.pk};
    out.parties[r] = k;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Launch checksum and applications

/// Iterated BLAKE2b over the memory image seeded by the challenge nonce.
/// Simulated cost is linear in the iteration count.
struct ChecksumFunction {
  std::uint32_t iterations = 8;
  std::uint64_t base_ns = 1'000'000;
  std::uint64_t per_iteration_ns = 250'000;

  Digest compute(const Nonce& r1, std::span<const std::uint8_t> image) const {
    Digest h = Hasher().field(r1).finish();
    for (std::uint32_t i = 0; i < iterations; ++i)
      h = Hasher().field(h).field(std::uint64_t{i}).field(image).finish();
    return h;
  }
  std::uint64_t duration_ns() const noexcept { return base_ns + per_iteration_ns * iterations; }
};

inline Bytes make_memory_image(std::uint64_t seed, std::size_t size) {
  Bytes image(size);
  DeterministicRandom rng(seed, "memory-image");
  rng.fill(image);
  return image;
}

/// out = H(app_id, tau, n): the result both P and MT derive for an execution.
inline Digest app_output(std::string_view app_id, const Nonce& tau, std::uint32_t n) {
  return Hasher().field("out").field(app_id).field(tau).field(std::uint64_t{n}).finish();
}

/// Public application registry: each id maps to its synthetic power profile
/// and the capture bucket used by the TEE.
class AppRegistry {
public:
  AppRegistry(std::vector<ProgramProfile> profiles, TriggerConfig trigger) : trigger_(trigger) {
    for (auto& p : profiles) {
      const std::string id = p.program_id;
      auto s = std::make_shared<const TraceSynthesizer>(std::move(p), trigger);
      if (!apps_.emplace(id, s).second)
        fail(Errc::duplicate_program_id, "duplicate application '" + id + "'");
    }
  }

  bool contains(std::string_view id) const { return apps_.find(id) != apps_.end(); }
  const TraceSynthesizer& synth(std::string_view id) const {
    auto it = apps_.find(id);
    if (it == apps_.end())
      fail(Errc::unknown_application, "unknown application '" + std::string(id) + "'");
    return *it->second;
  }
  LengthBucket bucket(std::string_view id) const { return execution_bucket(synth(id).profile(), trigger_); }
  const TriggerConfig& trigger() const noexcept { return trigger_; }

private:
  TriggerConfig trigger_;
  std::map<std::string, std::shared_ptr<const TraceSynthesizer>, std::less<>> apps_;
};

struct ProtocolConfig {
  std::uint64_t latency_ns = 100'000;
  std::uint64_t dt_slack_ns = 500'000;
  ChecksumFunction checksum;
  std::uint64_t manipulation_penalty_ns = 2'000'000;
  std::size_t memory_image_bytes = 1 << 16;
  std::uint32_t n = 52;
  std::uint32_t x_th = 21;
  std::uint32_t traces_per_round = 0; // 0: all n traces in one round

  std::uint32_t round_size() const noexcept { return traces_per_round == 0 ? n : traces_per_round; }
  std::uint64_t expected_dt_ns() const noexcept { return 2 * latency_ns + checksum.duration_ns() + dt_slack_ns; }
};

/// How the prover deviates from the protocol.
struct ProverBehavior {
  bool manipulated_image = false;      // one byte of the memory image flipped
  bool hide_manipulation = false;      // checksum a pristine copy, paying the time penalty
  std::optional<std::string> executed_app; // run this program instead of the requested one
};

class Network;

class Actor {
public:
  virtual ~Actor() = default;
  virtual Role role() const noexcept = 0;
  /// Handles one delivered message; a returned reason aborts the session.
  virtual std::optional<AbortReason> deliver(Role from, const ProtocolMessage& msg, Network& net) = 0;
  virtual void abort_session() = 0;
};

// ---------------------------------------------------------------------------
// Network

struct Link {
  Role from;
  Role to;
};

/// Single-threaded event loop over virtual time. Deliveries are ordered by
/// (time, send sequence). An optional interposer sees every message at send
/// time and returns the byte strings to deliver instead (Dolev-Yao: drop,
/// modify, replay or inject).
class Network {
public:
  using Interposer = std::function<std::vector<Bytes>(const Link&, Bytes)>;

  void attach(Actor& actor) { actors_[actor.role()] = &actor; }
  void set_interposer(Interposer f) { interposer_ = std::move(f); }
  void clear_interposer() { interposer_ = nullptr; }

  std::uint64_t now() const noexcept { return now_; }
  std::uint64_t session_id() const noexcept { return session_; }
  void begin_session(std::uint64_t id) {
    session_ = id;
    session_nonces_.clear();
  }

  void send(Role from, Role to, const ProtocolMessage& msg, std::uint64_t processing_ns = 0) {
    Bytes wire = encode(msg);
    std::vector<Bytes> out;
    if (interposer_)
      out = interposer_(Link{from, to}, std::move(wire));
    else
      out.push_back(std::move(wire));
    for (Bytes& b : out)
      queue_.push(Event{now_ + processing_ns + latency_, seq_++, from, to, std::move(b)});
  }

  void set_latency(std::uint64_t ns) noexcept { latency_ = ns; }

  /// Delivers queued messages until none remain. Returns the first abort.
  std::optional<std::pair<Role, AbortReason>> run() {
    std::optional<std::pair<Role, AbortReason>> first_abort;
    while (!queue_.empty()) {
      Event ev = queue_.top();
      queue_.pop();
      now_ = ev.time;
      TranscriptEntry entry{session_, now_, std::string(to_string(ev.from)), std::string(to_string(ev.to)),
                            "?", "", std::nullopt};
      std::optional<AbortReason> reason;
      Actor* actor = actors_.at(ev.to);
      try {
        const ProtocolMessage msg = decode_message(ev.payload);
        entry.message_tag = std::string(message_tag(msg));
        entry.nonce_hex = to_hex(message_nonce(msg));
        if (!session_nonces_.insert(message_nonce(msg)).second)
          ++duplicate_nonces_;
        reason = actor->deliver(ev.from, msg, *this);
      } catch (const Error& e) {
        if (e.code() != Errc::format_error)
          throw;
        reason = AbortReason::MalformedMessage;
      }
      if (reason) {
        entry.abort_reason = std::string(to_string(*reason));
        actor->abort_session();
        if (!first_abort)
          first_abort = std::make_pair(ev.to, *reason);
      }
      transcript_.push_back(std::move(entry));
    }
    return first_abort;
  }

  const std::vector<TranscriptEntry>& transcript() const noexcept { return transcript_; }
  void clear_transcript() { transcript_.clear(); }
  std::size_t duplicate_nonce_deliveries() const noexcept { return duplicate_nonces_; }

private:
  struct Event {
    std::uint64_t time;
    std::uint64_t seq;
    Role from;
    Role to;
    Bytes payload;
    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
  };

  std::map<Role, Actor*> actors_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  Interposer interposer_;
  std::uint64_t now_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t latency_ = 100'000;
  std::uint64_t session_ = 0;
  std::set<Nonce> session_nonces_;
  std::size_t duplicate_nonces_ = 0;
  std::vector<TranscriptEntry> transcript_;
};

namespace detail {
/// Forward-only phase tracker.
class PhaseTracker {
public:
  Phase phase() const noexcept { return phase_; }
  const std::vector<Phase>& history() const noexcept { return history_; }
  void reset() {
    phase_ = Phase::Setup;
    history_ = {Phase::Setup};
  }
  void advance(Phase next) {
    if (phase_ == Phase::Aborted || phase_ == Phase::Done || (next != Phase::Aborted && next <= phase_))
      fail(Errc::validation_error, "illegal phase transition " + std::string(to_string(phase_)) + " -> " +
                                       std::string(to_string(next)));
    phase_ = next;
    history_.push_back(next);
  }
  void abort() {
    if (phase_ != Phase::Aborted && phase_ != Phase::Done)
      advance(Phase::Aborted);
  }

private:
  Phase phase_ = Phase::Setup;
  std::vector<Phase> history_{Phase::Setup};
};

/// Records a nonce; false when it was already seen by this party.
inline bool fresh(std::set<Nonce>& seen, const Nonce& n) { return seen.insert(n).second; }
} // namespace detail

// ---------------------------------------------------------------------------
// Verifier

class Verifier final : public Actor {
public:
  Verifier(PartyKeys keys, KeyDirectory dir, ProtocolConfig cfg, Bytes reference_image, std::uint64_t seed)
      : keys_(std::move(keys)), dir_(std::move(dir)), cfg_(cfg), image_(std::move(reference_image)),
        rng_(seed, "verifier") {}

  Role role() const noexcept override { return Role::V; }

  void start(std::string app_id, Network& net) {
    phase_.reset();
    app_id_ = std::move(app_id);
    traces_.clear();
    rounds_.clear();
    verdict_.reset();
    pk_tee_.reset();
    r1_ = rng_.nonce();
    issued_.insert(r1_);
    t1_ = net.now();
    phase_.advance(Phase::LaunchPending);
    net.send(Role::V, Role::P, M1{r1_, app_id_});
  }

  std::optional<AbortReason> deliver(Role from, const ProtocolMessage& msg, Network& net) override {
    if (const auto* m = std::get_if<M2>(&msg); m && from == Role::P)
      return on_m2(*m, net);
    if (const auto* m = std::get_if<M5>(&msg); m && from == Role::P)
      return on_m5(*m, net);
    if (const auto* m = std::get_if<M7>(&msg); m && from == Role::MT)
      return on_m7(*m);
    return AbortReason::OutOfPhase;
  }

  void abort_session() override { phase_.abort(); }

  Phase phase() const noexcept { return phase_.phase(); }
  const std::vector<Phase>& phase_history() const noexcept { return phase_.history(); }
  std::optional<bool> verdict() const noexcept { return verdict_; }
  const std::vector<Bytes>& collected_traces() const noexcept { return traces_; }
  std::uint64_t last_dt_ns() const noexcept { return dt_; }

  /// Forces the token of the next round (test hook for token reuse).
  void force_next_token(const Nonce& tau) { forced_tau_ = tau; }

private:
  std::optional<AbortReason> on_m2(const M2& m, Network& net) {
    if (phase_.phase() != Phase::LaunchPending)
      return AbortReason::OutOfPhase;
    if (!detail::fresh(seen_, m.r2))
      return AbortReason::StaleNonce;
    const auto plain = open(keys_.encryption, m.ct);
    if (!plain)
      return AbortReason::DecryptionFailed;
    LaunchReport rep;
    try {
      rep = decode_launch_report(*plain);
    } catch (const Error&) {
      return AbortReason::MalformedMessage;
    }
    const Digest h1 = h1_launch(m.r2, rep);
    if (!verify(dir_.at(Role::P).sign, h1, m.sig_p))
      return AbortReason::BadSignature;
    dt_ = net.now() - t1_;
    if (dt_ > cfg_.expected_dt_ns())
      return AbortReason::TimingExceeded;
    if (rep.res != cfg_.checksum.compute(r1_, image_))
      return AbortReason::ChecksumMismatch;
    pk_tee_ = rep.pk_tee;
    phase_.advance(Phase::Launched);
    return send_m3(net);
  }

  std::optional<AbortReason> send_m3(Network& net) {
    Nonce tau = forced_tau_ ? *forced_tau_ : rng_.nonce();
    forced_tau_.reset();
    if (!issued_.insert(tau).second)
      return AbortReason::StaleNonce;
    issued_fingerprints_.insert(fingerprint(tau, app_id_));
    const std::uint32_t remaining = cfg_.n - static_cast<std::uint32_t>(traces_.size());
    const std::uint32_t n = std::min(remaining, cfg_.round_size());
    tau_ = tau;
    round_n_ = n;
    const Nonce r3 = rng_.nonce();
    issued_.insert(r3);
    const Signature sig = sign(keys_.signing.sk, h2_request(r3, tau, app_id_, n));
    if (phase_.phase() != Phase::ComputePending)
      phase_.advance(Phase::ComputePending);
    net.send(Role::V, Role::P, M3{r3, n, tau, app_id_, sig});
    return std::nullopt;
  }

  std::optional<AbortReason> on_m5(const M5& m, Network& net) {
    if (phase_.phase() != Phase::ComputePending)
      return AbortReason::OutOfPhase;
    if (!detail::fresh(seen_, m.r5) || !detail::fresh(seen_, m.m4.r4))
      return AbortReason::StaleNonce;
    if (!verify(dir_.at(Role::P).sign, h4_response(m.r5, m.m4, m.out), m.sig_p))
      return AbortReason::BadSignature;
    const auto plain = open(keys_.encryption, m.m4.ct);
    if (!plain)
      return AbortReason::DecryptionFailed;
    TraceBatch batch;
    try {
      batch = decode_trace_batch(*plain);
    } catch (const Error&) {
      return AbortReason::MalformedMessage;
    }
    if (!verify(*pk_tee_, h3_traces(m.m4.r4, batch.traces), m.m4.sig_tee))
      return AbortReason::BadSignature;
    if (m.fingerprint != fingerprint(tau_, app_id_))
      return issued_fingerprints_.contains(m.fingerprint) ? AbortReason::StaleNonce
                                                           : AbortReason::FingerprintMismatch;
    if (batch.traces.size() != round_n_)
      return AbortReason::MalformedMessage;
    for (Bytes& t : batch.traces)
      traces_.push_back(std::move(t));
    rounds_.push_back({tau_, m.out, round_n_});
    if (traces_.size() < cfg_.n)
      return send_m3(net);
    VerdictRequest req{app_id_, rounds_, traces_};
    const Nonce r6 = rng_.nonce();
    issued_.insert(r6);
    const Signature sig = sign(keys_.signing.sk, h5_forward(r6, req));
    phase_.advance(Phase::AwaitingVerdict);
    net.send(Role::V, Role::MT, M6{r6, seal(dir_.at(Role::MT).enc, encode(req), rng_), sig});
    return std::nullopt;
  }

  std::optional<AbortReason> on_m7(const M7& m) {
    if (phase_.phase() != Phase::AwaitingVerdict)
      return AbortReason::OutOfPhase;
    if (!detail::fresh(seen_, m.r7))
      return AbortReason::StaleNonce;
    const auto plain = open(keys_.encryption, m.ct);
    if (!plain)
      return AbortReason::DecryptionFailed;
    if (plain->size() != 1 || (*plain)[0] > 1)
      return AbortReason::MalformedMessage;
    const std::uint8_t b = (*plain)[0];
    if (!verify(dir_.at(Role::MT).sign, h6_verdict(m.r7, b), m.sig_mt))
      return AbortReason::BadSignature;
    verdict_ = b == 1;
    phase_.advance(Phase::Done);
    return std::nullopt;
  }

  PartyKeys keys_;
  KeyDirectory dir_;
  ProtocolConfig cfg_;
  Bytes image_;
  DeterministicRandom rng_;
  detail::PhaseTracker phase_;
  std::set<Nonce> seen_;
  std::set<Nonce> issued_;
  std::set<Digest> issued_fingerprints_;
  std::optional<Nonce> forced_tau_;
  std::string app_id_;
  Nonce r1_{};
  Nonce tau_{};
  std::uint32_t round_n_ = 0;
  std::uint64_t t1_ = 0;
  std::uint64_t dt_ = 0;
  std::optional<SignPublicKey> pk_tee_;
  std::vector<Bytes> traces_;
  std::vector<RoundRecord> rounds_;
  std::optional<bool> verdict_;
};

// ---------------------------------------------------------------------------
// Prover: untrusted host with an embedded TEE

/// The TEE captures execution windows of the running program, quantizes them
/// to 12-bit capture words, encrypts the batch to V and signs it.
class TrustedCapture {
public:
  TrustedCapture(PartyKeys keys, std::uint64_t seed) : keys_(std::move(keys)), rng_(seed, "tee") {}

  /// Fresh per-launch signing key; returns its public half.
  SignPublicKey relaunch() {
    session_ = make_signing_keys(rng_);
    return session_.pk;
  }

  std::vector<Bytes> capture(const TraceSynthesizer& executed, LengthBucket bucket, std::uint32_t n) {
    std::vector<Bytes> out;
    out.reserve(n);
    std::vector<double> window(bucket.size());
    for (std::uint32_t i = 0; i < n; ++i) {
      executed.fill_window(rng_.u64(), executed.marks().start, window);
      out.push_back(pack_capture(quantize_codes(window)));
    }
    return out;
  }

  M4 seal_batch(std::vector<Bytes> traces, const BoxPublicKey& pk_v) {
    M4 m;
    m.r4 = rng_.nonce();
    m.sig_tee = sign(session_.sk, h3_traces(m.r4, traces));
    m.ct = seal(pk_v, encode(TraceBatch{std::move(traces)}), rng_);
    return m;
  }

  const PartyKeys& long_term_keys() const noexcept { return keys_; }

private:
  PartyKeys keys_;
  DeterministicRandom rng_;
  SigningKeyPair session_;
};

class Prover final : public Actor {
public:
  Prover(PartyKeys keys, PartyKeys tee_keys, KeyDirectory dir, ProtocolConfig cfg, Bytes memory_image,
         std::shared_ptr<const AppRegistry> apps, std::uint64_t seed, ProverBehavior behavior = {})
      : keys_(std::move(keys)), dir_(std::move(dir)), cfg_(cfg), pristine_(memory_image),
        image_(std::move(memory_image)), apps_(std::move(apps)), rng_(seed, "prover"),
        tee_(std::move(tee_keys), derive_seed(seed, 0x7EE)), behavior_(std::move(behavior)) {
    if (behavior_.manipulated_image && !image_.empty())
      image_[image_.size() / 2] ^= 0x01;
  }

  Role role() const noexcept override { return Role::P; }

  std::optional<AbortReason> deliver(Role from, const ProtocolMessage& msg, Network& net) override {
    if (const auto* m = std::get_if<M1>(&msg); m && from == Role::V)
      return on_m1(*m, net);
    if (const auto* m = std::get_if<M3>(&msg); m && from == Role::V)
      return on_m3(*m, net);
    return AbortReason::OutOfPhase;
  }

  void abort_session() override { phase_.abort(); }

  Phase phase() const noexcept { return phase_.phase(); }
  const PartyKeys& keys() const noexcept { return keys_; }
  TrustedCapture& tee() noexcept { return tee_; }
  ProverBehavior& behavior() noexcept { return behavior_; }

private:
  std::optional<AbortReason> on_m1(const M1& m, Network& net) {
    phase_.reset();
    if (!detail::fresh(seen_, m.r1))
      return AbortReason::StaleNonce;
    if (!apps_->contains(m.app_id))
      return AbortReason::UnknownApplication;
    const bool hiding = behavior_.manipulated_image && behavior_.hide_manipulation;
    const Digest res = cfg_.checksum.compute(m.r1, hiding ? pristine_ : image_);
    const std::uint64_t duration = cfg_.checksum.duration_ns() + (hiding ? cfg_.manipulation_penalty_ns : 0);
    LaunchReport rep{"P", res, tee_.relaunch()};
    const Nonce r2 = rng_.nonce();
    const Signature sig = sign(keys_.signing.sk, h1_launch(r2, rep));
    phase_.advance(Phase::LaunchPending);
    phase_.advance(Phase::Launched);
    net.send(Role::P, Role::V, M2{r2, seal(dir_.at(Role::V).enc, encode(rep), rng_), sig}, duration);
    return std::nullopt;
  }

  std::optional<AbortReason> on_m3(const M3& m, Network& net) {
    if (phase_.phase() != Phase::Launched && phase_.phase() != Phase::ComputePending)
      return AbortReason::OutOfPhase;
    if (!detail::fresh(seen_, m.r3))
      return AbortReason::StaleNonce;
    if (!verify(dir_.at(Role::V).sign, h2_request(m.r3, m.tau, m.app_id, m.n), m.sig_v))
      return AbortReason::BadSignature;
    if (!apps_->contains(m.app_id))
      return AbortReason::UnknownApplication;
    if (phase_.phase() != Phase::ComputePending)
      phase_.advance(Phase::ComputePending);
    const std::string& run_id = behavior_.executed_app ? *behavior_.executed_app : m.app_id;
    const TraceSynthesizer& executed = apps_->synth(run_id);
    // The TEE sizes its capture buffer for the requested application.
    std::vector<Bytes> traces = tee_.capture(executed, apps_->bucket(m.app_id), m.n);
    M4 m4 = tee_.seal_batch(std::move(traces), dir_.at(Role::V).enc);
    const Digest out = app_output(m.app_id, m.tau, m.n);
    const Nonce r5 = rng_.nonce();
    const Signature sig = sign(keys_.signing.sk, h4_response(r5, m4, out));
    const std::uint64_t exec_ns =
        std::uint64_t{m.n} * executed.profile().duration_samples * (1'000'000'000ull / kSampleRateHz);
    net.send(Role::P, Role::V, M5{r5, std::move(m4), fingerprint(m.tau, m.app_id), out, sig}, exec_ns);
    return std::nullopt;
  }

  PartyKeys keys_;
  KeyDirectory dir_;
  ProtocolConfig cfg_;
  Bytes pristine_;
  Bytes image_;
  std::shared_ptr<const AppRegistry> apps_;
  DeterministicRandom rng_;
  TrustedCapture tee_;
  ProverBehavior behavior_;
  detail::PhaseTracker phase_;
  std::set<Nonce> seen_;
};

// ---------------------------------------------------------------------------
// Measurements tray

class MeasurementsTray final : public Actor {
public:
  MeasurementsTray(PartyKeys keys, KeyDirectory dir, ProtocolConfig cfg, std::uint64_t seed)
      : keys_(std::move(keys)), dir_(std::move(dir)), cfg_(cfg), rng_(seed, "mt") {}

  Role role() const noexcept override { return Role::MT; }

  void add_template(const Template& tpl) { store_.insert_or_assign(tpl.program_id, Matcher(tpl)); }
  void set_threshold(std::uint32_t x_th) noexcept { cfg_.x_th = x_th; }

  std::optional<AbortReason> deliver(Role from, const ProtocolMessage& msg, Network& net) override {
    const auto* m = std::get_if<M6>(&msg);
    if (!m || from != Role::V)
      return AbortReason::OutOfPhase;
    if (!detail::fresh(seen_, m->r6))
      return AbortReason::StaleNonce;
    const auto plain = open(keys_.encryption, m->ct);
    if (!plain)
      return AbortReason::DecryptionFailed;
    VerdictRequest req;
    try {
      req = decode_verdict_request(*plain);
    } catch (const Error&) {
      return AbortReason::MalformedMessage;
    }
    if (!verify(dir_.at(Role::V).sign, h5_forward(m->r6, req), m->sig_v))
      return AbortReason::BadSignature;
    const auto it = store_.find(req.app_id);
    if (it == store_.end())
      return AbortReason::UnknownApplication;
    const std::uint8_t b = judge(it->second, req) ? 1 : 0;
    last_verdict_ = b;
    const Nonce r7 = rng_.nonce();
    const Bytes bit{b};
    const Signature sig = sign(keys_.signing.sk, h6_verdict(r7, b));
    net.send(Role::MT, Role::V, M7{r7, seal(dir_.at(Role::V).enc, bit, rng_), sig});
    return std::nullopt;
  }

  void abort_session() override {}

  /// Pass count and bit of the most recent verdict.
  std::size_t last_pass_count() const noexcept { return last_pass_count_; }
  std::uint8_t last_verdict() const noexcept { return last_verdict_; }

private:
  bool judge(const Matcher& matcher, const VerdictRequest& req) {
    last_pass_count_ = 0;
    std::size_t expected = 0;
    for (const RoundRecord& rr : req.rounds) {
      if (rr.out != app_output(req.app_id, rr.tau, rr.n))
        return false;
      expected += rr.n;
    }
    if (expected != req.traces.size())
      return false;
    const std::size_t len = matcher.templ().bucket.size();
    std::size_t passes = 0;
    for (const Bytes& raw : req.traces) {
      if (raw.size() != len * 2)
        continue;
      const std::vector<double> samples = decode_capture_samples(parse_capture_words(raw));
      passes += matcher.passes(matcher.correlate(samples)) ? 1 : 0;
    }
    last_pass_count_ = passes;
    return multi_decision(passes, req.traces.size(), cfg_.x_th).passed;
  }

  PartyKeys keys_;
  KeyDirectory dir_;
  ProtocolConfig cfg_;
  DeterministicRandom rng_;
  std::map<std::string, Matcher, std::less<>> store_;
  std::set<Nonce> seen_;
  std::size_t last_pass_count_ = 0;
  std::uint8_t last_verdict_ = 0;
};

// ---------------------------------------------------------------------------
// Simulation driver

struct SessionResult {
  std::uint64_t session_id = 0;
  std::optional<bool> verdict;
  std::optional<AbortReason> abort_reason;
  std::optional<Role> aborted_by;
  std::size_t traces = 0;
  std::size_t pass_count = 0;

  bool accepted() const noexcept { return verdict.value_or(false); }
  bool aborted() const noexcept { return abort_reason.has_value(); }
};

class Simulation {
public:
  Simulation(std::shared_ptr<const AppRegistry> apps, ProtocolConfig cfg, std::uint64_t seed,
             ProverBehavior behavior = {})
      : cfg_(cfg), apps_(std::move(apps)), keys_(setup(derive_seed(seed, 1))),
        image_(make_memory_image(derive_seed(seed, 2), cfg.memory_image_bytes)),
        verifier_(keys_.parties.at(Role::V), keys_.directory, cfg, image_, derive_seed(seed, 3)),
        prover_(keys_.parties.at(Role::P), keys_.parties.at(Role::TEE), keys_.directory, cfg, image_, apps_,
                derive_seed(seed, 4), std::move(behavior)),
        tray_(keys_.parties.at(Role::MT), keys_.directory, cfg, derive_seed(seed, 5)) {
    net_.set_latency(cfg.latency_ns);
    net_.attach(verifier_);
    net_.attach(prover_);
    net_.attach(tray_);
  }

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  SessionResult run_session(const std::string& app_id) {
    const std::uint64_t id = next_session_++;
    net_.begin_session(id);
    verifier_.start(app_id, net_);
    const auto abort = net_.run();
    SessionResult r;
    r.session_id = id;
    r.traces = verifier_.collected_traces().size();
    if (abort) {
      r.aborted_by = abort->first;
      r.abort_reason = abort->second;
    } else {
      r.verdict = verifier_.verdict();
      r.pass_count = tray_.last_pass_count();
    }
    return r;
  }

  Network& network() noexcept { return net_; }
  Verifier& verifier() noexcept { return verifier_; }
  Prover& prover() noexcept { return prover_; }
  MeasurementsTray& tray() noexcept { return tray_; }
  const SetupResult& keys() const noexcept { return keys_; }
  const ProtocolConfig& config() const noexcept { return cfg_; }
  const AppRegistry& apps() const noexcept { return *apps_; }

private:
  ProtocolConfig cfg_;
  std::shared_ptr<const AppRegistry> apps_;
  SetupResult keys_;
  Bytes image_;
  Network net_;
  Verifier verifier_;
  Prover prover_;
  MeasurementsTray tray_;
  std::uint64_t next_session_ = 0;
};

} // namespace power_attest::protocol
