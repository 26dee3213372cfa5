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

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>

#include <map>

using namespace power_attest;

TEST(Synth, NoiselessDeterministic) {
  const TriggerConfig cfg;
  const auto p = pa_test::smooth_profile("p", 100000, 0.0);
  const Trace a = generate_trace(p, cfg, 1), b = generate_trace(p, cfg, 2);
  EXPECT_EQ(a, b);
  const auto q = pa_test::smooth_profile("q", 100000, 4.0);
  EXPECT_EQ(generate_trace(q, cfg, 9), generate_trace(q, cfg, 9));
  EXPECT_NE(generate_trace(q, cfg, 9), generate_trace(q, cfg, 10));
}

TEST(Synth, ConstantProfileOutsideTriggers) {
  const TriggerConfig cfg;
  ProgramProfile p;
  p.program_id = "flat";
  p.duration_samples = 50000;
  p.lead_samples = 300;
  p.baseline_level = 0.5;
  const Trace t = generate_trace(p, cfg, 3);
  const TriggerMarks m = *t.triggers();
  EXPECT_EQ(m, (TriggerMarks{300, 300 + cfg.width_samples + 50000}));
  EXPECT_EQ(t.size(), kTraceLength);
  EXPECT_EQ(t.program_id(), "flat");
  for (std::size_t i = 0; i < t.size(); ++i) {
    const bool in_pulse = (i >= m.start && i < m.start + cfg.width_samples) ||
                          (i >= m.end && i < m.end + cfg.width_samples);
    ASSERT_EQ(t.samples()[i], in_pulse ? 0.5 + cfg.amplitude : 0.5) << i;
  }
}

TEST(Synth, NoisyMeanWithinStandardErrorBound) {
  const TriggerConfig cfg;
  const double sigma = 0.01;
  const std::size_t n = 1000, len = std::size_t{1} << 16;
  const TraceSynthesizer s(pa_test::smooth_profile("p", 120000, sigma), cfg);
  std::vector<double> mean(len, 0.0), w(len);
  for (std::size_t k = 0; k < n; ++k) {
    s.fill_window(derive_seed(77, k), 0, w);
    for (std::size_t i = 0; i < len; ++i)
      mean[i] += w[i];
  }
  const double se = sigma / std::sqrt(static_cast<double>(n));
  // Per index the 3-SE bound holds with probability 0.9973; across all
  // indices the largest deviation is checked at a family-wise level of 1e-3.
  const double z_family =
      boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - 0.5e-3 / static_cast<double>(len));
  std::size_t beyond = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double d = std::abs(mean[i] / static_cast<double>(n) - s.clean()[i]);
    beyond += d > 3.0 * se ? 1 : 0;
    worst = std::max(worst, d);
  }
  EXPECT_LE(static_cast<double>(beyond) / static_cast<double>(len), 0.0027 + 5.0 * std::sqrt(0.0027 / len));
  EXPECT_LE(worst, z_family * se);
}

TEST(Synth, WindowsMatchFullTraceSlices) {
  const TriggerConfig cfg;
  const TraceSynthesizer s(default_profiles()[2], cfg);
  const Trace t = s.trace(42);
  for (std::size_t first : {0u, 1u, 4095u, 4096u, 123457u}) {
    const auto w = s.window(42, first, 10000);
    EXPECT_TRUE(std::equal(w.begin(), w.end(), t.samples().begin() + static_cast<long>(first))) << first;
  }
  const auto e = s.execution_window(42, 1 << 18);
  EXPECT_TRUE(std::equal(e.begin(), e.end(), t.samples().begin() + static_cast<long>(t.triggers()->start)));
}

TEST(Synth, ProfileValidation) {
  const TriggerConfig cfg;
  auto p = pa_test::smooth_profile("p", kTraceLength, 1.0);
  try {
    generate_trace(p, cfg, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::profile_too_long);
  }
  p = pa_test::smooth_profile("p", kTraceLength - 2 * cfg.width_samples, 1.0);
  EXPECT_NO_THROW(TraceSynthesizer(p, cfg));
  p = pa_test::smooth_profile("p", 1000, -1.0);
  EXPECT_THROW(TraceSynthesizer(p, cfg), Error);
  p = pa_test::smooth_profile("p", 1000, 1.0);
  p.sinusoids.push_back({500000.0, 1.0, 0.0});
  EXPECT_THROW(TraceSynthesizer(p, cfg), Error);
}

TEST(SyntheticCorpusTest, CountsLabelsDeterminism) {
  const TriggerConfig cfg;
  const auto profiles = default_profiles();
  const SyntheticCorpus c({profiles[0], profiles[1]}, cfg, 3, 5);
  ASSERT_EQ(c.size(), 6u);
  EXPECT_EQ(c.label(0), "crc32");
  EXPECT_EQ(c.label(2), "crc32");
  EXPECT_EQ(c.label(3), "fir");
  const SyntheticCorpus d({profiles[0], profiles[1]}, cfg, 3, 5);
  for (std::size_t i = 0; i < c.size(); ++i)
    EXPECT_EQ(c.trace(i), d.trace(i));
  EXPECT_THROW(SyntheticCorpus({profiles[0], profiles[0]}, cfg, 3, 5), Error);
}

TEST(SyntheticCorpusTest, LargeProfileSetHistogram) {
  const TriggerConfig cfg;
  std::vector<ProgramProfile> profiles;
  for (int k = 0; k < 47; ++k)
    profiles.push_back(make_random_profile("prog" + std::to_string(k), 20000, 500 + k));
  const SyntheticCorpus c(profiles, cfg, 1000, 1);
  ASSERT_EQ(c.size(), 47000u);
  std::map<std::string, std::size_t> hist;
  for (std::size_t i = 0; i < c.size(); ++i)
    ++hist[c.label(i)];
  EXPECT_EQ(hist.size(), 47u);
  for (const auto& [id, count] : hist)
    EXPECT_EQ(count, 1000u) << id;
}

TEST(Synth, DefaultProfilesSpanAllBuckets) {
  const TriggerConfig cfg;
  std::map<std::string, int> expected = {{"crc32", 17},      {"fir", 17},  {"sha", 18},   {"matmult-int", 19},
                                         {"nettle-aes", 19}, {"ndes", 20}, {"fasta", 20}, {"dijkstra", 21}};
  std::set<int> seen;
  const auto profiles = default_profiles();
  ASSERT_EQ(profiles.size(), 8u);
  for (const auto& p : profiles) {
    const int e = execution_bucket(p, cfg).exponent();
    EXPECT_EQ(e, expected.at(p.program_id));
    seen.insert(e);
    EXPECT_NO_THROW(validate_profile(p, cfg));
  }
  EXPECT_EQ(seen.size(), 5u);
}

TEST(Synth, ProfilesJsonRoundTrip) {
  const auto profiles = default_profiles();
  const auto back = profiles_from_json(nlohmann::ordered_json::parse(profiles_to_json(profiles).dump()));
  EXPECT_EQ(back, profiles);
  nlohmann::ordered_json bad = profiles_to_json(profiles);
  bad["crc32"]["colour"] = 1;
  EXPECT_THROW(profiles_from_json(bad), Error);
}

TEST(Synth, BlendEndpoints) {
  const auto profiles = default_profiles();
  const auto a = profiles[0];
  auto b = make_random_profile("b", a.duration_samples, 300);
  const TriggerConfig cfg;
  const TraceSynthesizer sa(a, cfg), s1(blend_profiles(a, b, 1.0, "w1"), cfg);
  for (std::size_t i = 0; i < kTraceLength; i += 997)
    EXPECT_NEAR(sa.clean()[i], s1.clean()[i], 1e-9);
  b.duration_samples += 1;
  EXPECT_THROW(blend_profiles(a, b, 0.5, "x"), Error);
}

TEST(Synth, SeparabilityOfDefaultProfiles) {
  const TriggerConfig cfg;
  StudyConfig sc;
  sc.per_program = 40;
  sc.eval_per_program = 10;
  const auto profiles = default_profiles();
  const SyntheticStudy st({profiles[0], profiles[1]}, cfg, sc);
  const Template t = st.calibrate(0, st.uncalibrated_template(0));
  const PreparedReference ref(t.samples);
  double self = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    self += ref.correlate(st.eval_corpus().window(i, t.bucket.size()));
    cross += ref.correlate(st.eval_corpus().window(10 + i, t.bucket.size()));
  }
  EXPECT_LT(cross, self);
}
