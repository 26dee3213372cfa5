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

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <unistd.h>

using namespace power_attest;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("pa_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

private:
  fs::path path_;
};

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::harness_failure;
}

Template random_template(std::mt19937_64& g, bool calibrated) {
  Template t;
  t.program_id = "prog-" + std::to_string(g() % 1000);
  t.bucket = LengthBucket(kMinBucketExponent);
  t.samples = pa_test::random_vector(g, t.bucket.size(), -3000.0, 3000.0);
  if (calibrated)
    t.corr_thres = std::uniform_real_distribution<double>(-0.99, 0.99)(g);
  t.trace_count = static_cast<std::uint32_t>(g() % 5000);
  t.filter_window = 51;
  t.filter_order = 3;
  return t;
}

Bytes trc_header(std::uint32_t n, std::uint32_t start, std::uint32_t end) {
  ByteWriter w;
  w.raw(kTraceMagic);
  w.u32(n);
  w.u32(kSampleRateHz);
  w.u32(start);
  w.u32(end);
  for (std::uint32_t i = 0; i < n; ++i)
    w.f64(static_cast<double>(i));
  return w.take();
}

} // namespace

TEST(IoCapture, RandomRoundTrip) {
  std::mt19937_64 g(1);
  TempDir dir;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 * (1 + g() % 5000);
    std::vector<double> codes(n);
    for (double& c : codes)
      c = static_cast<double>(g() % 4096);
    const Trace t(codes);
    const fs::path p = dir.path() / "c.xadc";
    write_capture(p, t);
    EXPECT_EQ(fs::file_size(p), n * 2);
    const Trace back = read_capture(p);
    ASSERT_EQ(back, t);
  }
  EXPECT_EQ(code_of([] { encode_capture(Trace(std::vector<double>{1.0, 2.0, 3.0})); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([] { encode_capture(Trace(std::vector<double>{1.5, 2.0})); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([] { encode_capture(Trace(std::vector<double>{4096.0, 2.0})); }), Errc::invalid_argument);
}

TEST(IoTrace, RandomRoundTrip) {
  std::mt19937_64 g(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + g() % 3000;
    std::optional<TriggerMarks> marks;
    if (n >= 2 && g() % 2) {
      const std::size_t s = g() % (n - 1);
      marks = TriggerMarks{s, s + 1 + g() % (n - s)};
    }
    const Trace t(pa_test::random_vector(g, n, -1e6, 1e6), marks, std::nullopt,
                  static_cast<std::uint32_t>(1 + g() % 2'000'000));
    const Trace back = parse_trace(serialize_trace(t));
    ASSERT_EQ(back, t);
  }
}

TEST(IoTrace, Strictness) {
  Bytes ok = trc_header(4, 1, 3);
  EXPECT_NO_THROW(parse_trace(ok));
  Bytes bad_magic = ok;
  bad_magic[0] = 'X';
  EXPECT_EQ(code_of([&] { parse_trace(bad_magic); }), Errc::format_error);
  Bytes truncated(ok.begin(), ok.end() - 1);
  EXPECT_EQ(code_of([&] { parse_trace(truncated); }), Errc::format_error);
  Bytes trailing = ok;
  trailing.push_back(0);
  EXPECT_EQ(code_of([&] { parse_trace(trailing); }), Errc::format_error);
  EXPECT_EQ(code_of([&] { parse_trace(trc_header(4, 1, kUnsetTrigger)); }), Errc::format_error);
  EXPECT_EQ(code_of([&] { parse_trace(trc_header(4, 3, 2)); }), Errc::format_error);
  EXPECT_EQ(code_of([&] { parse_trace(trc_header(4, 1, 5)); }), Errc::format_error);
  EXPECT_EQ(code_of([&] { parse_trace(trc_header(0, kUnsetTrigger, kUnsetTrigger)); }), Errc::format_error);
  Bytes nan_sample = trc_header(2, kUnsetTrigger, kUnsetTrigger);
  ByteWriter w;
  w.f64(std::numeric_limits<double>::quiet_NaN());
  const Bytes nan = w.take();
  std::copy(nan.begin(), nan.end(), nan_sample.end() - 8);
  EXPECT_EQ(code_of([&] { parse_trace(nan_sample); }), Errc::format_error);
  EXPECT_EQ(code_of([] { read_trace("/nonexistent/dir/x.trc"); }), Errc::io_error);
}

TEST(IoTemplate, RandomRoundTripAndDirectory) {
  std::mt19937_64 g(3);
  TempDir dir;
  std::vector<Template> written;
  for (int i = 0; i < 6; ++i) {
    Template t = random_template(g, i % 2 == 0);
    t.program_id = "p" + std::to_string(5 - i);
    ASSERT_EQ(parse_template(serialize_template(t)), t);
    write_template(dir.path() / (t.program_id + ".tpl"), t);
    written.push_back(t);
  }
  write_text(dir.path() / "notes.txt", "ignored");
  const auto loaded = read_template_dir(dir.path());
  ASSERT_EQ(loaded.size(), 6u);
  for (std::size_t i = 0; i < loaded.size(); ++i)
    EXPECT_EQ(loaded[i], written[5 - i]);
  EXPECT_EQ(code_of([&] { read_template_dir(dir.path() / "missing"); }), Errc::io_error);
}

TEST(IoTemplate, Strictness) {
  std::mt19937_64 g(4);
  const Template t = random_template(g, true);
  const Bytes ok = serialize_template(t);
  Bytes truncated(ok.begin(), ok.end() - 8);
  EXPECT_EQ(code_of([&] { parse_template(truncated); }), Errc::format_error);
  Bytes bad_magic = ok;
  bad_magic[7] = '9';
  EXPECT_EQ(code_of([&] { parse_template(bad_magic); }), Errc::format_error);

  auto rebuilt = [&](int exponent, double thr, double sample) {
    ByteWriter w;
    w.raw(kTemplateMagic);
    w.str(t.program_id);
    w.u8(static_cast<std::uint8_t>(exponent));
    w.f64(thr);
    w.u32(1);
    w.u16(51);
    w.u8(3);
    for (std::size_t i = 0; i < (std::size_t{1} << std::clamp(exponent, 17, 21)); ++i)
      w.f64(i == 7 ? sample : 0.5);
    return w.take();
  };
  EXPECT_NO_THROW(parse_template(rebuilt(17, 0.5, 1.0)));
  EXPECT_FALSE(parse_template(rebuilt(17, std::numeric_limits<double>::quiet_NaN(), 1.0)).calibrated());
  EXPECT_EQ(code_of([&] { parse_template(rebuilt(16, 0.5, 1.0)); }), Errc::format_error);
  EXPECT_EQ(code_of([&] { parse_template(rebuilt(22, 0.5, 1.0)); }), Errc::format_error);
  EXPECT_EQ(code_of([&] { parse_template(rebuilt(17, 1.0, 1.0)); }), Errc::format_error);
  EXPECT_EQ(code_of([&] { parse_template(rebuilt(17, 0.5, std::numeric_limits<double>::infinity())); }),
            Errc::format_error);
  Template short_tpl = t;
  short_tpl.samples.pop_back();
  EXPECT_EQ(code_of([&] { serialize_template(short_tpl); }), Errc::invalid_argument);
}

TEST(IoManifest, RandomRoundTrip) {
  std::mt19937_64 g(5);
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < 200; ++i) {
    ManifestEntry e;
    e.program_id = "p\"" + std::to_string(g() % 50) + "\\";
    if (g() % 2)
      e.path = "dir/" + std::to_string(g()) + ".trc";
    e.seed = g();
    entries.push_back(e);
  }
  std::stringstream s;
  write_manifest(s, entries);
  EXPECT_EQ(read_manifest(s), entries);
}

TEST(IoManifest, Strictness) {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return read_manifest(in);
  };
  EXPECT_EQ(parse("\n  \n").size(), 0u);
  EXPECT_EQ(parse(R"({"program_id":"a","seed":1})").size(), 1u);
  for (const char* bad : {R"({"program_id":"a","seed":1,"extra":0})", R"({"program_id":"a"})",
                          R"({"program_id":"a","seed":-1})", R"({"program_id":"a","seed":1.5})",
                          R"({"program_id":3,"seed":1})", R"({"program_id":"a","seed":1,"path":4})",
                          R"(["a",1])", R"({"program_id":"a",)"})
    EXPECT_EQ(code_of([&] { parse(bad); }), Errc::format_error) << bad;
  EXPECT_EQ(code_of([] { read_manifest(fs::path("/nonexistent/m.jsonl")); }), Errc::io_error);
}

TEST(IoManifest, StoredAndVirtualEntriesAgree) {
  TempDir dir;
  const auto profiles = default_profiles();
  const std::vector<ProgramProfile> two{profiles[0], profiles[1]};
  const SyntheticCorpus corpus(two, TriggerConfig{}, 2, 77);
  std::vector<ManifestEntry> stored = virtual_manifest(corpus);
  for (std::size_t i = 0; i < stored.size(); ++i) {
    Trace t = corpus.trace(i);
    t.clear_triggers();
    const std::string rel = "traces/" + std::to_string(i) + ".trc";
    fs::create_directories(dir.path() / "traces");
    write_trace(dir.path() / rel, t);
    stored[i].path = rel;
  }
  write_manifest(dir.path() / "m.jsonl", stored);
  const ManifestCorpus disk = ManifestCorpus::load(dir.path() / "m.jsonl");
  const ManifestCorpus virt(virtual_manifest(corpus), dir.path(), two);
  ASSERT_EQ(disk.size(), virt.size());
  const std::size_t len = std::size_t{1} << kMinBucketExponent;
  for (std::size_t i = 0; i < disk.size(); ++i) {
    EXPECT_EQ(disk.label(i), corpus.label(i));
    EXPECT_EQ(disk.trace(i), virt.trace(i));
    EXPECT_TRUE(disk.fits(i, len));
    EXPECT_EQ(disk.window(i, len), corpus.window(i, len));
    std::vector<double> a(len), b(len);
    disk.window_into(i, a);
    virt.window_into(i, b);
    EXPECT_EQ(a, b);
  }
  EXPECT_EQ(disk.indices_of("fir"), (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(code_of([&] { ManifestCorpus(virtual_manifest(corpus), dir.path(), {}); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([&] { ManifestCorpus({}, dir.path(), {profiles[0], profiles[0]}); }),
            Errc::duplicate_program_id);
}

TEST(IoTranscript, RandomRoundTripAndStrictness) {
  using namespace power_attest::protocol;
  std::mt19937_64 g(6);
  std::vector<TranscriptEntry> entries;
  for (int i = 0; i < 100; ++i) {
    TranscriptEntry e;
    e.session_id = g() % 10;
    e.virtual_time = g();
    e.sender = "P";
    e.receiver = "V";
    e.message_tag = "m" + std::to_string(1 + g() % 7);
    e.nonce_hex = to_hex(Bytes(32, static_cast<std::uint8_t>(g())));
    if (g() % 3 == 0)
      e.abort_reason = "StaleNonce";
    entries.push_back(e);
  }
  std::stringstream s;
  write_transcript(s, entries);
  EXPECT_EQ(read_transcript(s), entries);

  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return read_transcript(in);
  };
  const std::string base = R"("session_id":1,"virtual_time":2,"sender":"P","receiver":"V","message_tag":"m1","nonce_hex":"00")";
  EXPECT_EQ(parse("{" + base + R"(,"accepted":true})").size(), 1u);
  for (const std::string& bad :
       {"{" + base + "}", "{" + base + R"(,"accepted":false})", "{" + base + R"(,"accepted":true,"abort_reason":"x"})",
        "{" + base + R"(,"accepted":true,"extra":1})", std::string("{"), std::string(R"({"session_id":1})")})
    EXPECT_EQ(code_of([&] { parse(bad); }), Errc::format_error) << bad;
}
