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

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cstring>

using namespace power_attest;

namespace {

double two_pass_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  using big = boost::multiprecision::cpp_bin_float_50;
  big ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  big sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const big da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return static_cast<double>(sab / sqrt(saa * sbb));
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

Template calibrated_template(const std::vector<double>& samples, double thr, const std::string& id = "t") {
  Template t;
  t.program_id = id;
  t.samples = samples;
  t.bucket = LengthBucket(17);
  t.corr_thres = thr;
  t.trace_count = 2;
  return t;
}

} // namespace

TEST(Pearson, MatchesTwoPassOracle) {
  std::mt19937_64 g(1);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 2 + g() % 2000;
    auto a = pa_test::random_vector(g, n, -5.0, 5.0);
    auto b = pa_test::random_vector(g, n, 1000.0, 1010.0);
    for (std::size_t i = 0; i < n; ++i)
      b[i] += 0.3 * a[i];
    ASSERT_NEAR(pearson(a, b), two_pass_pearson(a, b), 1e-12) << rep;
  }
}

TEST(Pearson, AffineInvarianceAndSymmetry) {
  std::mt19937_64 g(2);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto a = pa_test::random_vector(g, 2 + g() % 500);
    const double s = (g() % 2 ? 1.0 : -1.0) * std::exp(std::uniform_real_distribution<double>(-3, 3)(g));
    const double t = std::uniform_real_distribution<double>(-100, 100)(g);
    std::vector<double> b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      b[i] = s * a[i] + t;
    ASSERT_NEAR(pearson(a, b), s > 0 ? 1.0 : -1.0, 1e-12);
    const auto c = pa_test::random_vector(g, a.size());
    ASSERT_EQ(pearson(a, c), pearson(c, a));
    const double r = pearson(a, c);
    ASSERT_TRUE(r >= -1.0 && r <= 1.0);
  }
}

TEST(Pearson, Errors) {
  try {
    pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::length_mismatch);
  }
  try {
    pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_input);
  }
  EXPECT_THROW(PreparedReference(std::vector<double>(10, 2.0)), Error);
}

TEST(Pearson, PreparedReferenceMatchesPearson) {
  std::mt19937_64 g(3);
  for (std::size_t n : {2u, 3u, 1023u, 1024u, 1025u, 5000u}) {
    const auto a = pa_test::random_vector(g, n), b = pa_test::random_vector(g, n, 2000.0, 2100.0);
    EXPECT_NEAR(PreparedReference(a).correlate(b), pearson(a, b), 1e-12);
  }
}

TEST(ReferenceBank, BitwiseEqualToPerReference) {
  std::mt19937_64 g(4);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<PreparedReference> refs;
    const std::size_t count = 1 + g() % 6;
    std::size_t longest = 0;
    for (std::size_t j = 0; j < count; ++j) {
      const std::size_t len = (g() % 3 == 0) ? 1000 + g() % 9000 : 1024 * (1 + g() % 16);
      refs.emplace_back(pa_test::random_vector(g, len));
      longest = std::max(longest, len);
    }
    ReferenceBank bank;
    for (const auto& r : refs)
      bank.add(&r);
    const std::size_t xlen = longest - (g() % 2 ? 0 : std::min<std::size_t>(longest - 2, g() % 4096));
    auto x = pa_test::random_vector(g, xlen, 2000.0, 2050.0);
    const auto got = bank.correlate_all(x);
    ASSERT_EQ(got.size(), refs.size());
    for (std::size_t j = 0; j < refs.size(); ++j) {
      if (refs[j].size() > x.size()) {
        EXPECT_TRUE(std::isnan(got[j]));
        continue;
      }
      const double want = refs[j].correlate(std::span<const double>(x).first(refs[j].size()));
      EXPECT_TRUE(same_bits(got[j], want)) << rep << " " << j << " " << got[j] << " vs " << want;
    }
  }
}

TEST(Matcher, IdenticalWindowPasses) {
  std::mt19937_64 g(5);
  const auto s = pa_test::random_vector(g, LengthBucket(17).size());
  std::vector<double> full(s);
  full.resize(s.size() + 100, 0.0);
  const Trace t(full, TriggerMarks{0, s.size()});
  const AttestDecision d = attest_single(t, calibrated_template(s, 0.9));
  EXPECT_NEAR(d.correlation, 1.0, 1e-12);
  EXPECT_TRUE(d.passed);
}

TEST(Matcher, UncalibratedRejected) {
  Template t = calibrated_template(std::vector<double>(LengthBucket(17).size(), 1.0), 0.5);
  t.corr_thres.reset();
  try {
    Matcher m(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::uncalibrated_template);
  }
}

class MatcherOnStudy : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    StudyConfig sc;
    sc.per_program = 200;
    sc.eval_per_program = 100;
    const auto p = default_profiles();
    study_ = new SyntheticStudy({p[0], p[1]}, TriggerConfig{}, sc);
    tpl_ = new Template(study_->calibrate(0, study_->uncalibrated_template(0)));
  }
  static void TearDownTestSuite() {
    delete tpl_;
    delete study_;
  }
  static SyntheticStudy* study_;
  static Template* tpl_;
};
SyntheticStudy* MatcherOnStudy::study_ = nullptr;
Template* MatcherOnStudy::tpl_ = nullptr;

TEST_F(MatcherOnStudy, ForeignProfileRejected) {
  const Matcher m(*tpl_);
  std::size_t passed = 0;
  for (std::size_t i = 100; i < 200; ++i)
    passed += m.attest(study_->eval_corpus().trace(i)).passed ? 1 : 0;
  EXPECT_LE(passed, 10u);
}

TEST_F(MatcherOnStudy, OffsetInvariantDecision) {
  const Matcher m(*tpl_);
  for (std::size_t i = 0; i < 5; ++i) {
    const Trace t = study_->eval_corpus().trace(i);
    std::vector<double> v(t.samples().begin(), t.samples().end());
    for (double& x : v)
      x -= 500.0;
    const Trace shifted(v, t.triggers(), t.program_id());
    const AttestDecision a = m.attest(t), b = m.attest(shifted);
    EXPECT_NEAR(a.correlation, b.correlation, 1e-12);
    EXPECT_EQ(a.passed, b.passed);
  }
}

TEST_F(MatcherOnStudy, MaxLagNeverWorse) {
  const Matcher m(*tpl_);
  const Trace t = study_->eval_corpus().trace(3);
  const AttestDecision a = m.attest(t, 0), b = m.attest(t, 4);
  EXPECT_GE(b.correlation, a.correlation);
  EXPECT_LE(std::abs(b.lag), 4);
}

TEST_F(MatcherOnStudy, MultiMonotoneAndErrors) {
  std::vector<Trace> batch;
  for (std::size_t i = 0; i < 8; ++i)
    batch.push_back(study_->eval_corpus().trace(i));
  const AttestDecision all = attest_multi(batch, *tpl_, 1);
  for (std::size_t x = 1; x <= batch.size(); ++x) {
    const AttestDecision d = attest_multi(batch, *tpl_, x);
    EXPECT_EQ(d.pass_count, all.pass_count);
    EXPECT_EQ(d.passed, d.pass_count >= x);
  }
  try {
    attest_multi(batch, *tpl_, 9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::threshold_exceeds_batch);
  }
}

TEST_F(MatcherOnStudy, CorrelationModelMatchesMaterializedTraces) {
  const Matcher m(*tpl_);
  const TraceSynthesizer& s = study_->capture_corpus().synthesizer(0);
  const auto clean = s.clean().subspan(s.marks().start, tpl_->bucket.size());
  const CorrelationModel model(m.reference(), clean, s.profile().noise_sigma);
  const double modelled = model.pass_probability(m.threshold(), 200000, 9);
  std::size_t hits = 0;
  const std::size_t n = 400;
  std::vector<double> w(tpl_->bucket.size());
  for (std::size_t k = 0; k < n; ++k) {
    s.fill_window(derive_seed(4242, k), s.marks().start, w);
    hits += m.passes(m.correlate(w)) ? 1 : 0;
  }
  const Interval ci = wilson_interval(hits, n, 0.999);
  EXPECT_TRUE(ci.contains(modelled)) << modelled << " vs " << static_cast<double>(hits) / n;
}

TEST_F(MatcherOnStudy, HonestMultiPassRate) {
  const Matcher m(*tpl_);
  const TraceSynthesizer& s = study_->capture_corpus().synthesizer(0);
  const auto clean = s.clean().subspan(s.marks().start, tpl_->bucket.size());
  const CorrelationModel model(m.reference(), clean, s.profile().noise_sigma);
  SplitMix64 engine(31);
  std::size_t passed = 0;
  const std::size_t batches = 10000;
  for (std::size_t b = 0; b < batches; ++b) {
    std::size_t x = 0;
    for (int i = 0; i < 52; ++i)
      x += m.passes(model.sample(engine)) ? 1 : 0;
    passed += multi_decision(x, 52, 21).passed ? 1 : 0;
  }
  EXPECT_GE(static_cast<double>(passed) / batches, 0.999);

  const SecurityParams p = evaluate_params(52, 21, kReferencePAlpha, kReferencePBeta);
  const MultiAttestSimulation sim = simulate_multi_attest(p, batches, 7);
  EXPECT_GE(sim.honest_rate, 0.999);
}

TEST(MultiDecision, BoundaryCounts) {
  EXPECT_TRUE(multi_decision(3, 5, 3).passed);
  EXPECT_FALSE(multi_decision(2, 5, 3).passed);
}
