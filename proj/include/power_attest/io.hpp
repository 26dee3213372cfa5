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

// On-disk formats: raw captures (.xadc), decoded traces (.trc), templates
// (.tpl) and JSON-lines corpus manifests.

#include "power_attest/bytes.hpp"
#include "power_attest/error.hpp"
#include "power_attest/synth.hpp"
#include "power_attest/template.hpp"
#include "power_attest/trace.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace power_attest {

inline constexpr std::string_view kTraceMagic = "PWRTRC01";
inline constexpr std::string_view kTemplateMagic = "PWRTPL01";
inline constexpr std::uint32_t kUnsetTrigger = 0xFFFFFFFFu;

// ---------------------------------------------------------------------------
// Whole-file helpers

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(Errc::io_error, "cannot open '" + path.string() + "'");
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad())
    fail(Errc::io_error, "read failed on '" + path.string() + "'");
  return data;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    fail(Errc::io_error, "cannot create '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out)
    fail(Errc::io_error, "write failed on '" + path.string() + "'");
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline void expect_magic(ByteReader& r, std::string_view magic) {
  auto got = r.raw(magic.size());
  if (!std::equal(got.begin(), got.end(), magic.begin()))
    fail(Errc::format_error, "bad magic, expected " + std::string(magic));
}

// ---------------------------------------------------------------------------
// .trc

inline Bytes serialize_trace(const Trace& trace) {
  if (trace.size() > 0xFFFFFFFFu)
    fail(Errc::invalid_argument, "trace too long for the .trc format");
  ByteWriter w;
  w.raw(kTraceMagic);
  w.u32(static_cast<std::uint32_t>(trace.size()));
  w.u32(trace.sample_rate_hz());
  w.u32(trace.triggers() ? static_cast<std::uint32_t>(trace.triggers()->start) : kUnsetTrigger);
  w.u32(trace.triggers() ? static_cast<std::uint32_t>(trace.triggers()->end) : kUnsetTrigger);
  for (double v : trace.samples())
    w.f64(v);
  return w.take();
}

inline Trace parse_trace(std::span<const std::uint8_t> data) {
  ByteReader r(data);
  expect_magic(r, kTraceMagic);
  const std::uint32_t n = r.u32();
  const std::uint32_t rate = r.u32();
  const std::uint32_t start = r.u32();
  const std::uint32_t end = r.u32();
  if (r.remaining() != std::size_t{n} * 8)
    fail(Errc::format_error, ".trc sample count does not match payload size");
  std::vector<double> samples(n);
  for (double& v : samples)
    v = r.f64();
  std::optional<TriggerMarks> marks;
  if (start != kUnsetTrigger || end != kUnsetTrigger) {
    if (start == kUnsetTrigger || end == kUnsetTrigger)
      fail(Errc::format_error, ".trc has only one trigger set");
    marks = TriggerMarks{start, end};
  }
  try {
    return Trace(std::move(samples), marks, std::nullopt, rate);
  } catch (const Error& e) {
    fail(Errc::format_error, std::string(".trc content invalid: ") + e.what());
  }
}

inline void write_trace(const std::filesystem::path& path, const Trace& trace) {
  write_file(path, serialize_trace(trace));
}

inline Trace read_trace(const std::filesystem::path& path) { return parse_trace(read_file(path)); }

// ---------------------------------------------------------------------------
// .xadc

inline Trace read_capture(const std::filesystem::path& path) { return decode_capture(read_file(path)); }

inline void write_capture(const std::filesystem::path& path, const Trace& trace) {
  write_file(path, encode_capture(trace));
}

// ---------------------------------------------------------------------------
// .tpl

inline Bytes serialize_template(const Template& t) {
  if (t.samples.size() != t.bucket.size())
    fail(Errc::invalid_argument, "template length does not match its bucket");
  ByteWriter w;
  w.raw(kTemplateMagic);
  w.str(t.program_id);
  w.u8(static_cast<std::uint8_t>(t.bucket.exponent()));
  w.f64(t.corr_thres.value_or(std::numeric_limits<double>::quiet_NaN()));
  w.u32(t.trace_count);
  w.u16(t.filter_window);
  w.u8(t.filter_order);
  for (double v : t.samples)
    w.f64(v);
  return w.take();
}

inline Template parse_template(std::span<const std::uint8_t> data) {
  ByteReader r(data);
  expect_magic(r, kTemplateMagic);
  Template t;
  t.program_id = r.str();
  const int exponent = r.u8();
  if (exponent < kMinBucketExponent || exponent > kMaxBucketExponent)
    fail(Errc::format_error, "template bucket exponent out of range");
  t.bucket = LengthBucket(exponent);
  const double thr = r.f64();
  if (!std::isnan(thr)) {
    if (!(thr > -1.0 && thr < 1.0))
      fail(Errc::format_error, "template corr_thres outside (-1, 1)");
    t.corr_thres = thr;
  }
  t.trace_count = r.u32();
  t.filter_window = r.u16();
  t.filter_order = r.u8();
  if (r.remaining() != t.bucket.size() * 8)
    fail(Errc::format_error, "template sample payload does not match its bucket");
  t.samples.resize(t.bucket.size());
  for (double& v : t.samples) {
    v = r.f64();
    if (!std::isfinite(v))
      fail(Errc::format_error, "template samples must be finite");
  }
  return t;
}

inline void write_template(const std::filesystem::path& path, const Template& t) {
  write_file(path, serialize_template(t));
}

inline Template read_template(const std::filesystem::path& path) { return parse_template(read_file(path)); }

/// Every *.tpl file in a directory, ordered by file name.
inline std::vector<Template> read_template_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    fail(Errc::io_error, "'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".tpl")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Template> out;
  for (const auto& f : files)
    out.push_back(read_template(f));
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

/// One corpus entry. A null path marks a trace that is regenerated from its
/// seed and the profile set instead of being stored.
struct ManifestEntry {
  std::string program_id;
  std::optional<std::string> path;
  std::uint64_t seed = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline std::string manifest_line(const ManifestEntry& e) {
  nlohmann::ordered_json j;
  j["program_id"] = e.program_id;
  j["path"] = e.path ? nlohmann::ordered_json(*e.path) : nlohmann::ordered_json(nullptr);
  j["seed"] = e.seed;
  return j.dump();
}

inline void write_manifest(std::ostream& out, std::span<const ManifestEntry> entries) {
  for (const auto& e : entries)
    out << manifest_line(e) << '\n';
}

inline std::vector<ManifestEntry> read_manifest(std::istream& in) {
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    const std::string where = "manifest line " + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::format_error, where + ": " + e.what());
    }
    if (!j.is_object())
      fail(Errc::format_error, where + ": expected an object");
    for (const auto& [key, _] : j.items())
      if (key != "program_id" && key != "path" && key != "seed")
        fail(Errc::format_error, where + ": unknown key '" + key + "'");
    if (!j.contains("program_id") || !j["program_id"].is_string())
      fail(Errc::format_error, where + ": program_id must be a string");
    if (!j.contains("seed") || !j["seed"].is_number_unsigned())
      fail(Errc::format_error, where + ": seed must be an unsigned integer");
    ManifestEntry e;
    e.program_id = j["program_id"].get<std::string>();
    e.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("path") && !j["path"].is_null()) {
      if (!j["path"].is_string())
        fail(Errc::format_error, where + ": path must be a string or null");
      e.path = j["path"].get<std::string>();
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries) {
  std::ostringstream s;
  write_manifest(s, entries);
  write_text(path, s.str());
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    fail(Errc::io_error, "cannot open manifest '" + path.string() + "'");
  return read_manifest(in);
}

/// Virtual manifest entries that regenerate `corpus` from its profiles.
inline std::vector<ManifestEntry> virtual_manifest(const SyntheticCorpus& corpus) {
  std::vector<ManifestEntry> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    out.push_back({corpus.label(i), std::nullopt, corpus.seed(i)});
  return out;
}

/// Labeled traces named by a manifest. Stored traces are read from disk
/// (relative paths resolve against the manifest directory) and get trigger
/// detection when the file has none; virtual entries regenerate from a profile.
class ManifestCorpus {
public:
  ManifestCorpus(std::vector<ManifestEntry> entries, std::filesystem::path base_dir,
                 std::vector<ProgramProfile> profiles = {}, TriggerConfig trigger = {})
      : entries_(std::move(entries)), base_(std::move(base_dir)), trigger_(trigger) {
    for (auto& p : profiles) {
      const std::string id = p.program_id;
      if (!synths_.emplace(id, std::make_shared<const TraceSynthesizer>(std::move(p), trigger)).second)
        fail(Errc::duplicate_program_id, "duplicate program_id '" + id + "'");
    }
    for (const auto& e : entries_)
      if (!e.path && !synths_.contains(e.program_id))
        fail(Errc::invalid_argument, "virtual manifest entry for '" + e.program_id + "' needs a profile");
  }

  static ManifestCorpus load(const std::filesystem::path& manifest, std::vector<ProgramProfile> profiles = {},
                             TriggerConfig trigger = {}) {
    return ManifestCorpus(read_manifest(manifest), manifest.parent_path(), std::move(profiles), trigger);
  }

  std::size_t size() const noexcept { return entries_.size(); }
  const ManifestEntry& entry(std::size_t i) const { return entries_.at(i); }
  const std::string& label(std::size_t i) const { return entries_.at(i).program_id; }

  /// The full labeled trace with trigger marks set.
  Trace trace(std::size_t i) const {
    const ManifestEntry& e = entries_.at(i);
    if (!e.path)
      return synths_.at(e.program_id)->trace(e.seed);
    Trace t = read_trace(resolve(*e.path));
    t.set_program_id(e.program_id);
    if (!t.triggers())
      detect_triggers(t, trigger_);
    return t;
  }

  bool fits(std::size_t i, std::size_t length) const {
    const ManifestEntry& e = entries_.at(i);
    if (!e.path)
      return synths_.at(e.program_id)->marks().start + length <= kTraceLength;
    const Trace& t = cached(i);
    return t.triggers()->start + length <= t.size();
  }

  std::vector<double> window(std::size_t i, std::size_t length) const {
    const ManifestEntry& e = entries_.at(i);
    if (!e.path)
      return synths_.at(e.program_id)->execution_window(e.seed, length);
    const Trace& t = cached(i);
    if (t.triggers()->start + length > t.size())
      fail(Errc::too_short, "trace window exceeds available samples");
    auto s = t.samples().subspan(t.triggers()->start, length);
    return {s.begin(), s.end()};
  }

  void window_into(std::size_t i, std::span<double> out) const {
    const ManifestEntry& e = entries_.at(i);
    if (!e.path) {
      const TraceSynthesizer& s = *synths_.at(e.program_id);
      s.fill_window(e.seed, s.marks().start, out);
      return;
    }
    const std::vector<double> w = window(i, out.size());
    std::copy(w.begin(), w.end(), out.begin());
  }

  /// Indices of entries carrying the given label, in manifest order.
  std::vector<std::size_t> indices_of(std::string_view program_id) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].program_id == program_id)
        out.push_back(i);
    return out;
  }

private:
  std::filesystem::path resolve(const std::string& p) const {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_ / path;
  }
  const Trace& cached(std::size_t i) const {
    if (cache_index_ != i || !cache_) {
      cache_ = std::make_shared<Trace>(trace(i));
      cache_index_ = i;
    }
    return *cache_;
  }

  std::vector<ManifestEntry> entries_;
  std::filesystem::path base_;
  TriggerConfig trigger_;
  std::map<std::string, std::shared_ptr<const TraceSynthesizer>, std::less<>> synths_;
  mutable std::shared_ptr<Trace> cache_;
  mutable std::size_t cache_index_ = 0;
};

} // namespace power_attest
