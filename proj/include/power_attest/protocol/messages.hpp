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

// Protocol messages m1..m7, their deterministic wire encoding, the signed
// hash bindings, and the JSON-lines transcript record.
//
// Hash labels: the launch phase binding is H1 (m2); the computation phase
// uses H2 (m3), H3 (TEE over m4), H4 (prover over m5), H5 (m6) and H6 (m7).

#include "power_attest/bytes.hpp"
#include "power_attest/error.hpp"
#include "power_attest/protocol/crypto.hpp"

#include "json.hpp"

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace power_attest::protocol {

struct M1 {
  Nonce r1{};
  std::string app_id;
  friend bool operator==(const M1&, const M1&) = default;
};

struct M2 {
  Nonce r2{};
  Bytes ct; // Enc_pkV(LaunchReport)
  Signature sig_p{};
  friend bool operator==(const M2&, const M2&) = default;
};

struct M3 {
  Nonce r3{};
  std::uint32_t n = 0;
  Nonce tau{};
  std::string app_id;
  Signature sig_v{};
  friend bool operator==(const M3&, const M3&) = default;
};

struct M4 {
  Nonce r4{};
  Bytes ct; // Enc_pkV(TraceBatch)
  Signature sig_tee{};
  friend bool operator==(const M4&, const M4&) = default;
};

struct M5 {
  Nonce r5{};
  M4 m4;
  Digest fingerprint{};
  Digest out{};
  Signature sig_p{};
  friend bool operator==(const M5&, const M5&) = default;
};

struct M6 {
  Nonce r6{};
  Bytes ct; // Enc_pkMT(VerdictRequest)
  Signature sig_v{};
  friend bool operator==(const M6&, const M6&) = default;
};

struct M7 {
  Nonce r7{};
  Bytes ct; // Enc_pkV(verdict bit)
  Signature sig_mt{};
  friend bool operator==(const M7&, const M7&) = default;
};

using ProtocolMessage = std::variant<M1, M2, M3, M4, M5, M6, M7>;

inline std::string_view message_tag(const ProtocolMessage& m) {
  static constexpr std::string_view tags[] = {"m1", "m2", "m3", "m4", "m5", "m6", "m7"};
  return tags[m.index()];
}

inline const Nonce& message_nonce(const ProtocolMessage& m) {
  return std::visit(
      [](const auto& v) -> const Nonce& {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, M1>) return v.r1;
        else if constexpr (std::is_same_v<T, M2>) return v.r2;
        else if constexpr (std::is_same_v<T, M3>) return v.r3;
        else if constexpr (std::is_same_v<T, M4>) return v.r4;
        else if constexpr (std::is_same_v<T, M5>) return v.r5;
        else if constexpr (std::is_same_v<T, M6>) return v.r6;
        else return v.r7;
      },
      m);
}

// ---------------------------------------------------------------------------
// Encrypted payloads

/// Plaintext of m2.
struct LaunchReport {
  std::string prover_id;
  Digest res{};
  SignPublicKey pk_tee{};
  friend bool operator==(const LaunchReport&, const LaunchReport&) = default;
};

/// Plaintext of m4: packed 12-bit capture words, one blob per trace.
struct TraceBatch {
  std::vector<Bytes> traces;
  friend bool operator==(const TraceBatch&, const TraceBatch&) = default;
};

struct RoundRecord {
  Nonce tau{};
  Digest out{};
  std::uint32_t n = 0;
  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

/// Plaintext of m6.
struct VerdictRequest {
  std::string app_id;
  std::vector<RoundRecord> rounds;
  std::vector<Bytes> traces;
  friend bool operator==(const VerdictRequest&, const VerdictRequest&) = default;
};

namespace detail {
template <std::size_t N>
void put(ByteWriter& w, const std::array<std::uint8_t, N>& a) {
  w.raw(std::span<const std::uint8_t>(a));
}
template <std::size_t N>
void get(ByteReader& r, std::array<std::uint8_t, N>& a) {
  auto s = r.raw(N);
  std::copy(s.begin(), s.end(), a.begin());
}
inline std::size_t blobs_size(const std::vector<Bytes>& v) {
  std::size_t n = 4;
  for (const Bytes& b : v)
    n += 4 + b.size();
  return n;
}
inline void put_blobs(ByteWriter& w, const std::vector<Bytes>& v) {
  w.reserve(w.bytes().size() + blobs_size(v));
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (const Bytes& b : v)
    w.blob(b);
}
inline std::vector<Bytes> get_blobs(ByteReader& r) {
  const std::uint32_t n = r.u32();
  if (n > r.remaining() / 4)
    fail(Errc::format_error, "blob count exceeds payload");
  std::vector<Bytes> v;
  v.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i)
    v.push_back(r.blob());
  return v;
}
inline void write_m4_fields(ByteWriter& w, const M4& m) {
  put(w, m.r4);
  w.blob(m.ct);
  put(w, m.sig_tee);
}
inline M4 read_m4_fields(ByteReader& r) {
  M4 m;
  get(r, m.r4);
  m.ct = r.blob();
  get(r, m.sig_tee);
  return m;
}
} // namespace detail

inline Bytes encode(const LaunchReport& p) {
  ByteWriter w;
  w.str(p.prover_id);
  detail::put(w, p.res);
  detail::put(w, p.pk_tee);
  return w.take();
}

inline LaunchReport decode_launch_report(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  LaunchReport p;
  p.prover_id = r.str();
  detail::get(r, p.res);
  detail::get(r, p.pk_tee);
  r.expect_done();
  return p;
}

inline Bytes encode(const TraceBatch& p) {
  ByteWriter w;
  detail::put_blobs(w, p.traces);
  return w.take();
}

inline TraceBatch decode_trace_batch(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  TraceBatch p;
  p.traces = detail::get_blobs(r);
  r.expect_done();
  return p;
}

inline Bytes encode(const VerdictRequest& p) {
  ByteWriter w;
  w.str(p.app_id);
  w.u32(static_cast<std::uint32_t>(p.rounds.size()));
  for (const RoundRecord& rr : p.rounds) {
    detail::put(w, rr.tau);
    detail::put(w, rr.out);
    w.u32(rr.n);
  }
  detail::put_blobs(w, p.traces);
  return w.take();
}

inline VerdictRequest decode_verdict_request(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  VerdictRequest p;
  p.app_id = r.str();
  const std::uint32_t k = r.u32();
  if (k > r.remaining() / (2 * kHashBytes + 4))
    fail(Errc::format_error, "round count exceeds payload");
  p.rounds.resize(k);
  for (RoundRecord& rr : p.rounds) {
    detail::get(r, rr.tau);
    detail::get(r, rr.out);
    rr.n = r.u32();
  }
  p.traces = detail::get_blobs(r);
  r.expect_done();
  return p;
}

// ---------------------------------------------------------------------------
// Wire encoding: u8 tag (1..7) followed by the fields in declaration order.

inline Bytes encode(const ProtocolMessage& msg) {
  ByteWriter w;
  std::visit(
      [&](const auto& m) {
        if constexpr (requires { m.ct; })
          w.reserve(m.ct.size() + 256);
        else if constexpr (requires { m.m4; })
          w.reserve(m.m4.ct.size() + 512);
      },
      msg);
  w.u8(static_cast<std::uint8_t>(msg.index() + 1));
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, M1>) {
          detail::put(w, m.r1);
          w.str(m.app_id);
        } else if constexpr (std::is_same_v<T, M2>) {
          detail::put(w, m.r2);
          w.blob(m.ct);
          detail::put(w, m.sig_p);
        } else if constexpr (std::is_same_v<T, M3>) {
          detail::put(w, m.r3);
          w.u32(m.n);
          detail::put(w, m.tau);
          w.str(m.app_id);
          detail::put(w, m.sig_v);
        } else if constexpr (std::is_same_v<T, M4>) {
          detail::write_m4_fields(w, m);
        } else if constexpr (std::is_same_v<T, M5>) {
          detail::put(w, m.r5);
          detail::write_m4_fields(w, m.m4);
          detail::put(w, m.fingerprint);
          detail::put(w, m.out);
          detail::put(w, m.sig_p);
        } else if constexpr (std::is_same_v<T, M6>) {
          detail::put(w, m.r6);
          w.blob(m.ct);
          detail::put(w, m.sig_v);
        } else {
          detail::put(w, m.r7);
          w.blob(m.ct);
          detail::put(w, m.sig_mt);
        }
      },
      msg);
  return w.take();
}

/// Strict inverse of encode; trailing or missing bytes raise FormatError.
inline ProtocolMessage decode_message(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const std::uint8_t tag = r.u8();
  ProtocolMessage out;
  switch (tag) {
  case 1: {
    M1 m;
    detail::get(r, m.r1);
    m.app_id = r.str();
    out = std::move(m);
    break;
  }
  case 2: {
    M2 m;
    detail::get(r, m.r2);
    m.ct = r.blob();
    detail::get(r, m.sig_p);
    out = std::move(m);
    break;
  }
  case 3: {
    M3 m;
    detail::get(r, m.r3);
    m.n = r.u32();
    detail::get(r, m.tau);
    m.app_id = r.str();
    detail::get(r, m.sig_v);
    out = std::move(m);
    break;
  }
  case 4:
    out = detail::read_m4_fields(r);
    break;
  case 5: {
    M5 m;
    detail::get(r, m.r5);
    m.m4 = detail::read_m4_fields(r);
    detail::get(r, m.fingerprint);
    detail::get(r, m.out);
    detail::get(r, m.sig_p);
    out = std::move(m);
    break;
  }
  case 6: {
    M6 m;
    detail::get(r, m.r6);
    m.ct = r.blob();
    detail::get(r, m.sig_v);
    out = std::move(m);
    break;
  }
  case 7: {
    M7 m;
    detail::get(r, m.r7);
    m.ct = r.blob();
    detail::get(r, m.sig_mt);
    out = std::move(m);
    break;
  }
  default:
    fail(Errc::format_error, "unknown message tag " + std::to_string(tag));
  }
  r.expect_done();
  return out;
}

// ---------------------------------------------------------------------------
// Signed hash bindings

inline Digest h1_launch(const Nonce& r2, const LaunchReport& p) {
  return Hasher().field(r2).field(p.prover_id).field(p.res).field(p.pk_tee).finish();
}

inline Digest h2_request(const Nonce& r3, const Nonce& tau, std::string_view app_id, std::uint32_t n) {
  return Hasher().field(r3).field(tau).field(app_id).field(std::uint64_t{n}).finish();
}

inline Digest h3_traces(const Nonce& r4, const std::vector<Bytes>& traces) {
  Hasher h;
  h.field(r4);
  for (const Bytes& t : traces)
    h.field(t);
  return h.finish();
}

/// The embedded m4 enters as its three fields, each length-prefixed.
inline Digest h4_response(const Nonce& r5, const M4& m4, const Digest& out) {
  return Hasher().field(r5).field(m4.r4).field(m4.ct).field(m4.sig_tee).field(out).finish();
}

inline Digest h5_forward(const Nonce& r6, const VerdictRequest& req) {
  Hasher h;
  h.field(r6).field(std::uint64_t{req.rounds.size()});
  for (const RoundRecord& rr : req.rounds)
    h.field(rr.tau);
  h.field(req.app_id);
  for (const RoundRecord& rr : req.rounds)
    h.field(rr.out);
  for (const Bytes& t : req.traces)
    h.field(t);
  return h.finish();
}

inline Digest h6_verdict(const Nonce& r7, std::uint8_t b) {
  return Hasher().field(r7).field(std::uint64_t{b}).finish();
}

inline Digest fingerprint(const Nonce& tau, std::string_view app_id) {
  return Hasher().field("fingerprint").field(tau).field(app_id).finish();
}

// ---------------------------------------------------------------------------
// Transcript

struct TranscriptEntry {
  std::uint64_t session_id = 0;
  std::uint64_t virtual_time = 0; // nanoseconds of simulated time
  std::string sender;
  std::string receiver;
  std::string message_tag;
  std::string nonce_hex;
  std::optional<std::string> abort_reason; // empty when accepted

  bool accepted() const noexcept { return !abort_reason.has_value(); }
  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

inline std::string transcript_line(const TranscriptEntry& e) {
  nlohmann::ordered_json j;
  j["session_id"] = e.session_id;
  j["virtual_time"] = e.virtual_time;
  j["sender"] = e.sender;
  j["receiver"] = e.receiver;
  j["message_tag"] = e.message_tag;
  j["nonce_hex"] = e.nonce_hex;
  if (e.abort_reason)
    j["abort_reason"] = *e.abort_reason;
  else
    j["accepted"] = true;
  return j.dump();
}

inline void write_transcript(std::ostream& out, std::span<const TranscriptEntry> entries) {
  for (const auto& e : entries)
    out << transcript_line(e) << '\n';
}

inline std::vector<TranscriptEntry> read_transcript(std::istream& in) {
  std::vector<TranscriptEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    const std::string where = "transcript line " + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      TranscriptEntry e;
      e.session_id = j.at("session_id").get<std::uint64_t>();
      e.virtual_time = j.at("virtual_time").get<std::uint64_t>();
      e.sender = j.at("sender").get<std::string>();
      e.receiver = j.at("receiver").get<std::string>();
      e.message_tag = j.at("message_tag").get<std::string>();
      e.nonce_hex = j.at("nonce_hex").get<std::string>();
      const bool has_accept = j.contains("accepted");
      const bool has_abort = j.contains("abort_reason");
      if (has_accept == has_abort)
        fail(Errc::format_error, where + ": exactly one of accepted / abort_reason required");
      if (has_abort)
        e.abort_reason = j.at("abort_reason").get<std::string>();
      else if (!j.at("accepted").get<bool>())
        fail(Errc::format_error, where + ": accepted must be true when present");
      if (j.size() != 7)
        fail(Errc::format_error, where + ": unexpected keys");
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      fail(Errc::format_error, where + ": " + ex.what());
    }
  }
  return out;
}

} // namespace power_attest::protocol
