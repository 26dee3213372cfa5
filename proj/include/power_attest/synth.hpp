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

// Deterministic synthetic trace source standing in for the FPGA capture.
//
// Trace layout (2^21 samples):
//   [0, lead)                      baseline
//   [lead, lead + w)               start trigger pulse
//   [lead + w, lead + w + d)       baseline + program signature
//   [lead + w + d, lead + 2w + d)  end trigger pulse
//   rest                           baseline
// plus i.i.d. Gaussian noise over every sample. The recorded trigger marks are
// the first samples of the two pulses.

#include "power_attest/error.hpp"
#include "power_attest/rng.hpp"
#include "power_attest/trace.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace power_attest {

struct Sinusoid {
  double frequency_hz = 0.0;
  double amplitude = 0.0;
  double phase = 0.0;

  friend bool operator==(const Sinusoid&, const Sinusoid&) = default;
};

/// Piecewise-constant activity level, effective from `offset` (relative to
/// the start of execution) until the next step.
struct EnvelopeStep {
  std::size_t offset = 0;
  double level = 0.0;

  friend bool operator==(const EnvelopeStep&, const EnvelopeStep&) = default;
};

struct ProgramProfile {
  std::string program_id;
  std::size_t duration_samples = 0;
  std::vector<Sinusoid> sinusoids;
  std::vector<EnvelopeStep> envelope;
  double baseline_level = 0.0;
  double noise_sigma = 0.0;
  std::size_t lead_samples = 0;

  friend bool operator==(const ProgramProfile&, const ProgramProfile&) = default;
};

inline void validate_profile(const ProgramProfile& p, const TriggerConfig& trigger) {
  trigger.validate();
  if (p.program_id.empty())
    fail(Errc::invalid_argument, "profile needs a program_id");
  if (p.duration_samples == 0)
    fail(Errc::invalid_argument, p.program_id + ": duration_samples must be positive");
  if (p.lead_samples + 2 * trigger.width_samples + p.duration_samples > kTraceLength)
    fail(Errc::profile_too_long, p.program_id + ": lead + 2 trigger widths + duration exceeds 2^21");
  if (!(p.noise_sigma >= 0.0) || !std::isfinite(p.noise_sigma))
    fail(Errc::invalid_argument, p.program_id + ": noise_sigma must be non-negative");
  if (!std::isfinite(p.baseline_level))
    fail(Errc::invalid_argument, p.program_id + ": baseline_level must be finite");
  for (const Sinusoid& s : p.sinusoids) {
    if (!(s.frequency_hz > 0.0 && s.frequency_hz < kSampleRateHz / 2.0))
      fail(Errc::invalid_argument, p.program_id + ": sinusoid frequency must be in (0, fs/2)");
    if (!std::isfinite(s.amplitude) || !std::isfinite(s.phase))
      fail(Errc::invalid_argument, p.program_id + ": sinusoid parameters must be finite");
  }
  for (std::size_t i = 0; i < p.envelope.size(); ++i) {
    if (p.envelope[i].offset >= p.duration_samples)
      fail(Errc::invalid_argument, p.program_id + ": envelope offset beyond duration");
    if (i > 0 && p.envelope[i].offset <= p.envelope[i - 1].offset)
      fail(Errc::invalid_argument, p.program_id + ": envelope offsets must increase");
    if (!std::isfinite(p.envelope[i].level))
      fail(Errc::invalid_argument, p.program_id + ": envelope level must be finite");
  }
}

inline TriggerMarks trigger_marks_for(const ProgramProfile& p, const TriggerConfig& trigger) {
  return {p.lead_samples, p.lead_samples + trigger.width_samples + p.duration_samples};
}

/// Noiseless signature over the execution interval only (length duration_samples).
inline std::vector<double> signature_samples(const ProgramProfile& p) {
  std::vector<double> sig(p.duration_samples, 0.0);
  std::size_t step = 0;
  double level = 0.0;
  for (std::size_t t = 0; t < sig.size(); ++t) {
    while (step < p.envelope.size() && p.envelope[step].offset <= t)
      level = p.envelope[step++].level;
    sig[t] = level;
  }
  for (const Sinusoid& s : p.sinusoids) {
    const double w = 2.0 * std::numbers::pi * s.frequency_hz / kSampleRateHz;
    for (std::size_t t = 0; t < sig.size(); ++t)
      sig[t] += s.amplitude * std::sin(w * static_cast<double>(t) + s.phase);
  }
  return sig;
}

/// Caches the noiseless trace for one profile and produces noisy traces or
/// windows of them. Windows are bit-identical to slices of full traces.
class TraceSynthesizer {
public:
  TraceSynthesizer(ProgramProfile profile, TriggerConfig trigger)
      : profile_(std::move(profile)), trigger_(trigger) {
    validate_profile(profile_, trigger_);
    marks_ = trigger_marks_for(profile_, trigger_);
    auto clean = std::make_shared<std::vector<double>>(kTraceLength, profile_.baseline_level);
    const std::size_t w = trigger_.width_samples;
    for (std::size_t i = 0; i < w; ++i) {
      (*clean)[marks_.start + i] += trigger_.amplitude;
      (*clean)[marks_.end + i] += trigger_.amplitude;
    }
    const std::vector<double> sig = signature_samples(profile_);
    for (std::size_t t = 0; t < sig.size(); ++t)
      (*clean)[marks_.start + w + t] += sig[t];
    clean_ = std::move(clean);
  }

  const ProgramProfile& profile() const noexcept { return profile_; }
  const TriggerConfig& trigger_config() const noexcept { return trigger_; }
  TriggerMarks marks() const noexcept { return marks_; }
  std::span<const double> clean() const noexcept { return *clean_; }

  /// Noisy samples [first, first + out.size()) written into `out`.
  void fill_window(std::uint64_t seed, std::size_t first, std::span<double> out) const {
    if (first + out.size() > kTraceLength)
      fail(Errc::too_short, "requested window exceeds the trace length");
    std::copy_n(clean_->begin() + static_cast<std::ptrdiff_t>(first), out.size(), out.begin());
    add_gaussian_noise(out, seed, first, profile_.noise_sigma);
  }

  std::vector<double> window(std::uint64_t seed, std::size_t first, std::size_t length) const {
    if (first + length > kTraceLength)
      fail(Errc::too_short, "requested window exceeds the trace length");
    std::vector<double> out(length);
    fill_window(seed, first, out);
    return out;
  }

  /// Samples [start trigger, start trigger + length).
  std::vector<double> execution_window(std::uint64_t seed, std::size_t length) const {
    return window(seed, marks_.start, length);
  }

  Trace trace(std::uint64_t seed) const {
    return Trace(window(seed, 0, kTraceLength), marks_, profile_.program_id);
  }

private:
  ProgramProfile profile_;
  TriggerConfig trigger_;
  TriggerMarks marks_;
  std::shared_ptr<const std::vector<double>> clean_;
};

/// Smallest bucket holding both trigger pulses and the execution between them.
inline LengthBucket execution_bucket(const ProgramProfile& profile, const TriggerConfig& trigger) {
  return LengthBucket::covering(profile.duration_samples + 2 * trigger.width_samples);
}

inline Trace generate_trace(const ProgramProfile& profile, const TriggerConfig& trigger,
                            std::uint64_t seed) {
  return TraceSynthesizer(profile, trigger).trace(seed);
}

/// Linear mix weight*a + (1 - weight)*b of two signatures with equal duration.
/// Baseline is mixed the same way; noise and lead come from `a`.
inline ProgramProfile blend_profiles(const ProgramProfile& a, const ProgramProfile& b, double weight,
                                     std::string program_id) {
  if (a.duration_samples != b.duration_samples)
    fail(Errc::invalid_argument, "blended profiles must share duration_samples");
  if (!(weight >= 0.0 && weight <= 1.0))
    fail(Errc::invalid_argument, "blend weight must be in [0, 1]");
  ProgramProfile out;
  out.program_id = std::move(program_id);
  out.duration_samples = a.duration_samples;
  out.baseline_level = weight * a.baseline_level + (1.0 - weight) * b.baseline_level;
  out.noise_sigma = a.noise_sigma;
  out.lead_samples = a.lead_samples;
  for (Sinusoid s : a.sinusoids) {
    s.amplitude *= weight;
    out.sinusoids.push_back(s);
  }
  for (Sinusoid s : b.sinusoids) {
    s.amplitude *= 1.0 - weight;
    out.sinusoids.push_back(s);
  }
  std::set<std::size_t> offsets;
  for (const auto& e : a.envelope)
    offsets.insert(e.offset);
  for (const auto& e : b.envelope)
    offsets.insert(e.offset);
  auto level_at = [](const std::vector<EnvelopeStep>& env, std::size_t t) {
    double level = 0.0;
    for (const auto& e : env) {
      if (e.offset > t)
        break;
      level = e.level;
    }
    return level;
  };
  for (std::size_t off : offsets)
    out.envelope.push_back(
        {off, weight * level_at(a.envelope, off) + (1.0 - weight) * level_at(b.envelope, off)});
  return out;
}

// ---------------------------------------------------------------------------
// Labeled corpora

/// A labeled trace set generated on demand: `per_program` traces for each
/// profile in declaration order, trace i seeded with derive_seed(seed, i).
class SyntheticCorpus {
public:
  SyntheticCorpus(std::vector<ProgramProfile> profiles, TriggerConfig trigger, std::size_t per_program,
                  std::uint64_t seed)
      : per_program_(per_program), seed_(seed) {
    if (profiles.empty())
      fail(Errc::invalid_argument, "corpus needs at least one profile");
    std::set<std::string> seen;
    for (auto& p : profiles) {
      if (!seen.insert(p.program_id).second)
        fail(Errc::duplicate_program_id, "duplicate program_id '" + p.program_id + "'");
      synths_.push_back(std::make_shared<const TraceSynthesizer>(std::move(p), trigger));
    }
  }

  std::size_t size() const noexcept { return synths_.size() * per_program_; }
  std::size_t per_program() const noexcept { return per_program_; }
  std::size_t program_count() const noexcept { return synths_.size(); }

  std::size_t label_index(std::size_t i) const noexcept { return i / per_program_; }
  const std::string& label(std::size_t i) const { return synths_[label_index(i)]->profile().program_id; }
  std::uint64_t seed(std::size_t i) const noexcept { return derive_seed(seed_, i); }
  const TraceSynthesizer& synthesizer(std::size_t program) const { return *synths_.at(program); }

  Trace trace(std::size_t i) const { return synths_[label_index(i)]->trace(seed(i)); }

  /// The first `length` samples from the start trigger of trace i.
  std::vector<double> window(std::size_t i, std::size_t length) const {
    return synths_[label_index(i)]->execution_window(seed(i), length);
  }

  /// Writes the window of trace i starting at its start trigger into `out`.
  void window_into(std::size_t i, std::span<double> out) const {
    const TraceSynthesizer& s = *synths_[label_index(i)];
    s.fill_window(seed(i), s.marks().start, out);
  }

  /// True when trace i holds `length` samples past its start trigger.
  bool fits(std::size_t i, std::size_t length) const {
    return synths_[label_index(i)]->marks().start + length <= kTraceLength;
  }

private:
  std::vector<std::shared_ptr<const TraceSynthesizer>> synths_;
  std::size_t per_program_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Defaults

inline TriggerConfig default_trigger_config() { return TriggerConfig{}; }

inline constexpr double kDefaultNoiseSigma = 8.0;

/// A random program: four log-uniform sinusoids in [2 kHz, 150 kHz] and a
/// 24-step activity envelope, drawn from stream `index` of the profile seed.
inline ProgramProfile make_random_profile(std::string program_id, std::size_t duration, std::uint64_t index) {
  SplitMix64 g(derive_seed(0x5EED'0F'B1'7Aull, index));
  ProgramProfile p;
  p.program_id = std::move(program_id);
  p.duration_samples = duration;
  p.baseline_level = 2048.0 + 3.0 * static_cast<double>(index % 16);
  p.noise_sigma = kDefaultNoiseSigma;
  for (int c = 0; c < 4; ++c) {
    const double f = 2'000.0 * std::exp(g.uniform() * std::log(75.0));
    p.sinusoids.push_back({f, 2.0 + 2.0 * g.uniform(), 2.0 * std::numbers::pi * g.uniform()});
  }
  const std::size_t steps = 24;
  for (std::size_t j = 0; j < steps; ++j)
    p.envelope.push_back({j * (duration / steps), -4.0 + 8.0 * g.uniform()});
  return p;
}

/// Eight synthetic programs spanning all five length buckets.
inline std::vector<ProgramProfile> default_profiles() {
  struct Spec {
    const char* id;
    std::size_t duration;
  };
  static constexpr Spec specs[] = {
      {"crc32", 110'000},      {"fir", 125'000},       {"sha", 240'000},    {"matmult-int", 480'000},
      {"nettle-aes", 400'000}, {"ndes", 950'000},      {"fasta", 800'000},  {"dijkstra", 2'000'000},
  };
  std::vector<ProgramProfile> out;
  std::uint64_t k = 0;
  for (const Spec& s : specs)
    out.push_back(make_random_profile(s.id, s.duration, k++));
  return out;
}

// ---------------------------------------------------------------------------
// Profile set files: JSON object mapping program_id -> profile fields.

inline nlohmann::ordered_json profile_to_json(const ProgramProfile& p) {
  nlohmann::ordered_json j;
  j["duration_samples"] = p.duration_samples;
  j["lead_samples"] = p.lead_samples;
  j["baseline_level"] = p.baseline_level;
  j["noise_sigma"] = p.noise_sigma;
  auto& sig = j["signature"] = nlohmann::ordered_json::array();
  for (const auto& s : p.sinusoids)
    sig.push_back({{"frequency_hz", s.frequency_hz}, {"amplitude", s.amplitude}, {"phase", s.phase}});
  auto& env = j["envelope"] = nlohmann::ordered_json::array();
  for (const auto& e : p.envelope)
    env.push_back({{"offset", e.offset}, {"level", e.level}});
  return j;
}

inline ProgramProfile profile_from_json(const std::string& id, const nlohmann::ordered_json& j) {
  static const std::set<std::string> known = {"duration_samples", "lead_samples", "baseline_level",
                                              "noise_sigma",      "signature",    "envelope"};
  try {
    for (const auto& [key, value] : j.items())
      if (!known.contains(key))
        fail(Errc::format_error, id + ": unknown profile field '" + key + "'");
    ProgramProfile p;
    p.program_id = id;
    p.duration_samples = j.at("duration_samples").get<std::size_t>();
    p.lead_samples = j.value("lead_samples", std::size_t{0});
    p.baseline_level = j.at("baseline_level").get<double>();
    p.noise_sigma = j.at("noise_sigma").get<double>();
    for (const auto& s : j.value("signature", nlohmann::ordered_json::array()))
      p.sinusoids.push_back(
          {s.at("frequency_hz").get<double>(), s.at("amplitude").get<double>(), s.value("phase", 0.0)});
    for (const auto& e : j.value("envelope", nlohmann::ordered_json::array()))
      p.envelope.push_back({e.at("offset").get<std::size_t>(), e.at("level").get<double>()});
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format_error, id + ": " + e.what());
  }
}

inline nlohmann::ordered_json profiles_to_json(std::span<const ProgramProfile> profiles) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& p : profiles)
    j[p.program_id] = profile_to_json(p);
  return j;
}

inline std::vector<ProgramProfile> profiles_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object())
    fail(Errc::format_error, "profile set must be a JSON object keyed by program_id");
  std::vector<ProgramProfile> out;
  for (const auto& [id, value] : j.items())
    out.push_back(profile_from_json(id, value));
  return out;
}

} // namespace power_attest
