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

// Cryptographic primitives for the attestation protocol, backed by libsodium.
//
//   signatures   Ed25519 (crypto_sign_detached)
//   encryption   X25519 ephemeral-static key agreement, BLAKE2b-256 key
//                derivation, XChaCha20-Poly1305 (IETF) payload sealing
//   hash         BLAKE2b-256 over u64-length-prefixed fields
//   randomness   seeded ChaCha20 streams (randombytes_buf_deterministic)

#include "power_attest/bytes.hpp"
#include "power_attest/error.hpp"

#include <sodium.h>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace power_attest::protocol {

inline constexpr std::string_view kSignatureScheme = "Ed25519";
inline constexpr std::string_view kEncryptionScheme = "X25519-BLAKE2b-XChaCha20Poly1305";
inline constexpr std::string_view kHashScheme = "BLAKE2b-256/u64-length-prefixed";

inline constexpr std::size_t kHashBytes = 32;
inline constexpr std::size_t kNonceBytes = 32;
inline constexpr std::size_t kSignatureBytes = crypto_sign_BYTES;
inline constexpr std::size_t kSealOverhead =
    crypto_scalarmult_BYTES + crypto_aead_xchacha20poly1305_ietf_NPUBBYTES + crypto_aead_xchacha20poly1305_ietf_ABYTES;

using Digest = std::array<std::uint8_t, kHashBytes>;
using Nonce = std::array<std::uint8_t, kNonceBytes>;
using Signature = std::array<std::uint8_t, kSignatureBytes>;
using SignPublicKey = std::array<std::uint8_t, crypto_sign_PUBLICKEYBYTES>;
using SignSecretKey = std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES>;
using BoxPublicKey = std::array<std::uint8_t, crypto_scalarmult_BYTES>;
using BoxSecretKey = std::array<std::uint8_t, crypto_scalarmult_SCALARBYTES>;

inline void init_crypto() {
  static const bool ok = sodium_init() >= 0;
  if (!ok)
    fail(Errc::io_error, "libsodium initialisation failed");
}

/// Reproducible randomness: the k-th request draws from a ChaCha20 stream
/// keyed by BLAKE2b(seed, k).
class DeterministicRandom {
public:
  explicit DeterministicRandom(std::uint64_t seed, std::string_view domain = {}) {
    init_crypto();
    ByteWriter w;
    w.u64(seed);
    w.raw(domain);
    crypto_generichash(seed_.data(), seed_.size(), w.bytes().data(), w.bytes().size(), nullptr, 0);
  }

  void fill(std::span<std::uint8_t> out) {
    std::array<std::uint8_t, randombytes_SEEDBYTES> sub{};
    std::array<std::uint8_t, 8> ctr{};
    for (int i = 0; i < 8; ++i)
      ctr[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(counter_ >> (8 * i));
    ++counter_;
    crypto_generichash(sub.data(), sub.size(), ctr.data(), ctr.size(), seed_.data(), seed_.size());
    randombytes_buf_deterministic(out.data(), out.size(), sub.data());
  }

  template <std::size_t N>
  std::array<std::uint8_t, N> array() {
    std::array<std::uint8_t, N> a{};
    fill(a);
    return a;
  }

  Nonce nonce() { return array<kNonceBytes>(); }

  std::uint64_t u64() {
    const auto a = array<8>();
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= std::uint64_t{a[static_cast<std::size_t>(i)]} << (8 * i);
    return v;
  }

private:
  std::array<std::uint8_t, crypto_generichash_KEYBYTES> seed_{};
  std::uint64_t counter_ = 0;
};

struct SigningKeyPair {
  SignPublicKey pk{};
  SignSecretKey sk{};
};

struct EncryptionKeyPair {
  BoxPublicKey pk{};
  BoxSecretKey sk{};
};

inline SigningKeyPair make_signing_keys(DeterministicRandom& rng) {
  SigningKeyPair kp;
  const auto seed = rng.array<crypto_sign_SEEDBYTES>();
  crypto_sign_seed_keypair(kp.pk.data(), kp.sk.data(), seed.data());
  return kp;
}

inline EncryptionKeyPair make_encryption_keys(DeterministicRandom& rng) {
  EncryptionKeyPair kp;
  kp.sk = rng.array<crypto_scalarmult_SCALARBYTES>();
  crypto_scalarmult_base(kp.pk.data(), kp.sk.data());
  return kp;
}

inline Signature sign(const SignSecretKey& sk, std::span<const std::uint8_t> message) {
  Signature sig{};
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), sk.data());
  return sig;
}

inline bool verify(const SignPublicKey& pk, std::span<const std::uint8_t> message, const Signature& sig) {
  return crypto_sign_verify_detached(sig.data(), message.data(), message.size(), pk.data()) == 0;
}

/// BLAKE2b-256 over a sequence of fields, each preceded by its u64 length.
class Hasher {
public:
  Hasher() { crypto_generichash_init(&state_, nullptr, 0, kHashBytes); }

  Hasher& field(std::span<const std::uint8_t> data) {
    std::array<std::uint8_t, 8> len{};
    for (int i = 0; i < 8; ++i)
      len[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::uint64_t{data.size()} >> (8 * i));
    crypto_generichash_update(&state_, len.data(), len.size());
    crypto_generichash_update(&state_, data.data(), data.size());
    return *this;
  }
  Hasher& field(std::string_view s) {
    return field(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }
  Hasher& field(std::uint64_t v) {
    std::array<std::uint8_t, 8> b{};
    for (int i = 0; i < 8; ++i)
      b[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (8 * i));
    return field(std::span<const std::uint8_t>(b));
  }

  Digest finish() {
    Digest d{};
    crypto_generichash_final(&state_, d.data(), d.size());
    return d;
  }

private:
  crypto_generichash_state state_{};
};

namespace detail {
inline std::array<std::uint8_t, crypto_aead_xchacha20poly1305_ietf_KEYBYTES>
derive_key(std::span<const std::uint8_t> shared, const BoxPublicKey& eph, const BoxPublicKey& recipient) {
  std::array<std::uint8_t, crypto_aead_xchacha20poly1305_ietf_KEYBYTES> key{};
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, key.size());
  crypto_generichash_update(&st, shared.data(), shared.size());
  crypto_generichash_update(&st, eph.data(), eph.size());
  crypto_generichash_update(&st, recipient.data(), recipient.size());
  crypto_generichash_final(&st, key.data(), key.size());
  return key;
}
} // namespace detail

/// Hybrid public-key encryption: eph_pk || nonce || AEAD(plaintext).
/// The ephemeral key and nonce come from `rng`.
inline Bytes seal(const BoxPublicKey& recipient, std::span<const std::uint8_t> plaintext,
                  DeterministicRandom& rng) {
  const EncryptionKeyPair eph = make_encryption_keys(rng);
  std::array<std::uint8_t, crypto_scalarmult_BYTES> shared{};
  if (crypto_scalarmult(shared.data(), eph.sk.data(), recipient.data()) != 0)
    fail(Errc::invalid_argument, "recipient public key is a low-order point");
  const auto key = detail::derive_key(shared, eph.pk, recipient);
  const auto npub = rng.array<crypto_aead_xchacha20poly1305_ietf_NPUBBYTES>();
  Bytes out(kSealOverhead + plaintext.size());
  std::copy(eph.pk.begin(), eph.pk.end(), out.begin());
  std::copy(npub.begin(), npub.end(), out.begin() + crypto_scalarmult_BYTES);
  unsigned long long clen = 0;
  std::uint8_t* ct = out.data() + crypto_scalarmult_BYTES + npub.size();
  crypto_aead_xchacha20poly1305_ietf_encrypt(ct, &clen, plaintext.data(), plaintext.size(), eph.pk.data(),
                                             eph.pk.size(), nullptr, npub.data(), key.data());
  sodium_memzero(shared.data(), shared.size());
  return out;
}

/// Inverse of seal; nullopt when the ciphertext does not authenticate.
inline std::optional<Bytes> open(const EncryptionKeyPair& keys, std::span<const std::uint8_t> sealed) {
  if (sealed.size() < kSealOverhead)
    return std::nullopt;
  BoxPublicKey eph{};
  std::copy_n(sealed.begin(), eph.size(), eph.begin());
  std::array<std::uint8_t, crypto_scalarmult_BYTES> shared{};
  if (crypto_scalarmult(shared.data(), keys.sk.data(), eph.data()) != 0)
    return std::nullopt;
  const auto key = detail::derive_key(shared, eph, keys.pk);
  sodium_memzero(shared.data(), shared.size());
  const std::uint8_t* npub = sealed.data() + eph.size();
  const std::uint8_t* ct = npub + crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;
  const std::size_t clen = sealed.size() - eph.size() - crypto_aead_xchacha20poly1305_ietf_NPUBBYTES;
  Bytes out(clen - crypto_aead_xchacha20poly1305_ietf_ABYTES);
  unsigned long long mlen = 0;
  if (crypto_aead_xchacha20poly1305_ietf_decrypt(out.data(), &mlen, nullptr, ct, clen, eph.data(), eph.size(),
                                                 npub, key.data()) != 0)
    return std::nullopt;
  out.resize(mlen);
  return out;
}

} // namespace power_attest::protocol
