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

#include "power_attest/cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

using namespace power_attest;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class TempDir {
public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("pa_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  fs::path operator/(const std::string& s) const { return path_ / s; }
  const fs::path& path() const { return path_; }

private:
  fs::path path_;
};

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

/// Restores an environment variable on scope exit.
class EnvGuard {
public:
  explicit EnvGuard(const char* name) : name_(name) {
    if (const char* v = std::getenv(name))
      old_ = v;
  }
  ~EnvGuard() {
    if (old_)
      ::setenv(name_, old_->c_str(), 1);
    else
      ::unsetenv(name_);
  }

private:
  const char* name_;
  std::optional<std::string> old_;
};

json small_config() {
  return {{"traces_per_program", 16}, {"eval_traces_per_program", 8}, {"protocol_sessions", 2},
          {"security_level", 8}};
}

} // namespace

TEST(Config, DefaultsAndJsonRoundTrip) {
  const Config d;
  EXPECT_NO_THROW(d.validate());
  EXPECT_EQ(d.filter_window, 51u);
  EXPECT_EQ(d.filter_order, 3u);
  EXPECT_EQ(d.percentile, 25.0);
  EXPECT_EQ(d.p_alpha, 0.082);
  EXPECT_EQ(d.p_beta, 0.69);
  const json j = json::parse(config_to_json(d).dump());
  EXPECT_EQ(config_to_json(config_from_json(j)).dump(), config_to_json(d).dump());
  Config c = config_from_json({{"seed", 9}, {"trigger", {{"width_samples", 200}}}});
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.trigger.width_samples, 200u);
  EXPECT_EQ(c.filter_window, d.filter_window);
}

TEST(Config, Strictness) {
  for (const json& bad : {json{{"unknown", 1}}, json{{"trigger", {{"amp", 1}}}}, json{{"seed", -1}},
                          json{{"seed", "1"}}, json{{"percentile", 200}}, json{{"filter_window", 50}},
                          json{{"filter_window", 5}, {"filter_order", 5}}, json{{"p_alpha", 0.7}},
                          json{{"template_dir", ""}}, json{{"traces_per_program", 7}}, json::array(),
                          json{{"trigger", 3}}, json{{"protocol_sessions", 0}}}) {
    try {
      config_from_json(bad);
      FAIL() << bad.dump();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::validation_error) << bad.dump();
    }
  }
}

TEST(Config, ResolutionOrder) {
  TempDir dir;
  EnvGuard guard(kConfigEnvVar);
  write_json(dir / "env.json", {{"seed", 11}});
  write_json(dir / "explicit.json", {{"seed", 12}});
  ::unsetenv(kConfigEnvVar);
  EXPECT_EQ(resolve_config().seed, Config{}.seed);
  ::setenv(kConfigEnvVar, (dir / "env.json").c_str(), 1);
  EXPECT_EQ(resolve_config().seed, 11u);
  EXPECT_EQ(resolve_config((dir / "explicit.json").string()).seed, 12u);
  ::setenv(kConfigEnvVar, (dir / "missing.json").c_str(), 1);
  try {
    resolve_config();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::io_error);
  }
  std::ofstream(dir / "broken.json") << "{";
  try {
    load_config(dir / "broken.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::validation_error);
  }
}

TEST(Cli, ParseErrorsAndHelp) {
  EXPECT_EQ(cli({}).code, kExitValidation);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
  EXPECT_EQ(cli({"bogus"}).code, kExitValidation);
  EXPECT_EQ(cli({"secparam", "--level", "x"}).code, kExitValidation);
  EXPECT_EQ(cli({"protocol-sim", "--app", "crc32", "--attack", "dos"}).code, kExitValidation);
}

TEST(Cli, Secparam) {
  const CliRun r = cli({"secparam", "--level", "64"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["n"], 114);
  EXPECT_EQ(j["x_th"], 45);
  const CliRun t = cli({"secparam", "--table"});
  EXPECT_EQ(t.code, kExitOk);
  EXPECT_NE(t.out.find("494"), std::string::npos);
  const CliRun bad = cli({"secparam", "--p-alpha", "0.9", "--p-beta", "0.1"});
  EXPECT_EQ(bad.code, kExitValidation);
  EXPECT_EQ(json::parse(bad.err)["error"], "InvalidProbabilities");
}

TEST(Cli, ConfigFlagAndEnvironment) {
  TempDir dir;
  EnvGuard guard(kConfigEnvVar);
  write_json(dir / "c.json", {{"security_level", 64}});
  write_json(dir / "bad.json", {{"nope", 1}});
  EXPECT_EQ(json::parse(cli({"--config", (dir / "c.json").string(), "secparam"}).out)["n"], 114);
  ::setenv(kConfigEnvVar, (dir / "c.json").c_str(), 1);
  EXPECT_EQ(json::parse(cli({"secparam"}).out)["n"], 114);
  const CliRun r = cli({"--config", (dir / "bad.json").string(), "secparam"});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_EQ(json::parse(r.err)["error"], "ValidationError");
}

TEST(Cli, DecodeCapture) {
  TempDir dir;
  const auto p = default_profiles()[0];
  Trace t = generate_trace(p, TriggerConfig{}, 3);
  std::vector<double> codes(t.samples().begin(), t.samples().end());
  to_capture_codes(codes);
  write_capture(dir / "c.xadc", Trace(codes));
  const CliRun r = cli({"decode", (dir / "c.xadc").string(), (dir / "c.trc").string(), "--detect-triggers",
                        "--program", "crc32"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Trace back = read_trace(dir / "c.trc");
  EXPECT_EQ(std::vector<double>(back.samples().begin(), back.samples().end()), codes);
  ASSERT_TRUE(back.triggers());
  EXPECT_EQ(json::parse(r.out)["samples"], kTraceLength);
  std::ofstream(dir / "odd.xadc", std::ios::binary) << "abc";
  EXPECT_EQ(cli({"decode", (dir / "odd.xadc").string(), (dir / "o.trc").string()}).code, kExitValidation);
  EXPECT_EQ(cli({"decode", (dir / "none.xadc").string(), (dir / "o.trc").string()}).code, kExitValidation);
}

TEST(Cli, TemplateCalibrateAttestAndPlot) {
  TempDir dir;
  const std::string d = dir.path().string();
  const CliRun s = cli({"synth", "--count", "8", "--virtual", "--out-dir", d + "/corpus", "--seed", "3"});
  ASSERT_EQ(s.code, kExitOk) << s.err;
  ASSERT_TRUE(fs::exists(dir / "corpus/manifest.jsonl"));
  ASSERT_TRUE(fs::exists(dir / "corpus/profiles.json"));
  const std::string manifest = d + "/corpus/manifest.jsonl", tpl = d + "/crc32.tpl";
  const CliRun b = cli({"template", "--manifest", manifest, "--program", "crc32", "--bucket", "17", "--out", tpl});
  ASSERT_EQ(b.code, kExitOk) << b.err;
  EXPECT_FALSE(read_template(tpl).calibrated());
  ASSERT_EQ(cli({"synth", "--count", "8", "--virtual", "--out-dir", d + "/calib", "--seed", "4"}).code, kExitOk);
  const CliRun c = cli({"calibrate", "--template", tpl, "--manifest", d + "/calib/manifest.jsonl"});
  ASSERT_EQ(c.code, kExitOk) << c.err;
  ASSERT_TRUE(read_template(tpl).calibrated());

  const auto profiles = default_profiles();
  const SyntheticCorpus own({profiles[0]}, TriggerConfig{}, 6, 99), foreign({profiles[1]}, TriggerConfig{}, 6, 99);
  write_manifest(dir / "own.jsonl", virtual_manifest(own));
  write_manifest(dir / "foreign.jsonl", virtual_manifest(foreign));
  const CliRun ok = cli({"attest-multi", "--template", tpl, "--manifest", d + "/own.jsonl", "--x-th", "1"});
  EXPECT_EQ(ok.code, kExitOk) << ok.err;
  EXPECT_TRUE(json::parse(ok.out)["passed"]);
  const CliRun neg = cli({"attest-multi", "--template", tpl, "--manifest", d + "/foreign.jsonl", "--x-th", "1"});
  EXPECT_EQ(neg.code, kExitNegative);
  EXPECT_FALSE(json::parse(neg.out)["passed"]);
  EXPECT_EQ(cli({"attest-multi", "--template", tpl, "--manifest", d + "/own.jsonl", "--x-th", "7"}).code,
            kExitValidation);

  write_trace(dir / "own.trc", own.trace(0));
  write_trace(dir / "foreign.trc", foreign.trace(0));
  const CliRun single = cli({"attest", "--template", tpl, "--trace", d + "/foreign.trc"});
  EXPECT_EQ(single.code, kExitNegative);
  EXPECT_LT(json::parse(single.out)["correlation"].get<double>(), 0.5);

  ASSERT_EQ(cli({"plot", "--trace", d + "/own.trc", "--stride", "1000", "--out", d + "/t.csv"}).code, kExitOk);
  const std::string csv = slurp(dir / "t.csv");
  EXPECT_EQ(csv.rfind("series,index,value\n", 0), 0u);
  EXPECT_NE(csv.find("\ntrigger,"), std::string::npos);
  ASSERT_EQ(cli({"plot", "--template", tpl, "--overlay", d + "/own.trc", "--stride", "64", "--out", d + "/o.csv"})
                .code,
            kExitOk);
  std::istringstream rows(slurp(dir / "o.csv"));
  std::string line;
  std::map<std::string, std::size_t> per_series;
  std::getline(rows, line);
  while (std::getline(rows, line))
    ++per_series[line.substr(0, line.find(','))];
  EXPECT_EQ(per_series["template"], (std::size_t{1} << 17) / 64);
  EXPECT_EQ(per_series["candidate"], per_series["template"]);
  EXPECT_EQ(cli({"plot", "--trace", d + "/own.trc", "--template", tpl, "--out", d + "/x.csv"}).code,
            kExitValidation);
}

TEST(Cli, EvalWritesReports) {
  TempDir dir;
  const std::string d = dir.path().string();
  const auto profiles = default_profiles();
  const std::vector<ProgramProfile> two{profiles[0], profiles[1]};
  StudyConfig sc;
  sc.per_program = 16;
  sc.eval_per_program = 4;
  const SyntheticStudy study(two, TriggerConfig{}, sc);
  fs::create_directories(dir / "tpl");
  const auto templates = study.templates();
  for (const auto& t : templates)
    write_template(dir / ("tpl/" + t.program_id + ".tpl"), t);
  write_manifest(dir / "eval.jsonl", virtual_manifest(study.eval_corpus()));
  std::ofstream(dir / "profiles.json") << profiles_to_json(two).dump();
  const CliRun r = cli({"eval", "--templates", d + "/tpl", "--manifest", d + "/eval.jsonl", "--profiles",
                        d + "/profiles.json", "--out", d + "/r.json", "--csv", d + "/r.csv"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const EvaluationReport direct = study.evaluate(templates);
  EXPECT_EQ(json::parse(slurp(dir / "r.json")), json::parse(report_to_json(direct).dump()));
  EXPECT_EQ(slurp(dir / "r.csv"), report_to_csv(direct));
  fs::remove(dir / "tpl/fir.tpl");
  const CliRun miss = cli({"eval", "--templates", d + "/tpl", "--manifest", d + "/eval.jsonl", "--profiles",
                           d + "/profiles.json", "--out", d + "/r2.json"});
  EXPECT_EQ(miss.code, kExitValidation);
  EXPECT_EQ(json::parse(miss.err)["error"], "MissingTemplate");
}

TEST(Cli, ProtocolSim) {
  TempDir dir;
  const std::string d = dir.path().string();
  const auto profiles = default_profiles();
  std::ofstream(dir / "profiles.json") << profiles_to_json(std::vector<ProgramProfile>{profiles[0], profiles[1]}).dump();
  write_json(dir / "c.json", {{"traces_per_program", 40}});
  const std::vector<std::string> base{"--config", d + "/c.json", "protocol-sim", "--profiles", d + "/profiles.json",
                                      "--app", "crc32", "--level", "8", "--sessions", "3"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return cli(a);
  };
  const CliRun honest = with({"--transcript", d + "/t.jsonl"});
  ASSERT_EQ(honest.code, kExitOk) << honest.err;
  EXPECT_EQ(json::parse(honest.out)["accepted"], 3);
  std::ifstream tin(dir / "t.jsonl");
  EXPECT_FALSE(protocol::read_transcript(tin).empty());
  const CliRun meas = with({"--attack", "subst-meas"});
  EXPECT_EQ(meas.code, kExitOk) << meas.err;
  EXPECT_EQ(json::parse(meas.out)["unexpected"], 0);
  std::vector<std::string> other = base;
  other[6] = "nope";
  const CliRun unknown = cli(other);
  EXPECT_EQ(unknown.code, kExitValidation);
  EXPECT_EQ(json::parse(unknown.err)["error"], "UnknownApplication");
}

TEST(Cli, PipelineIdempotentAndStageErrors) {
  TempDir dir;
  const std::string d = dir.path().string();
  write_json(dir / "c.json", small_config());
  const CliRun a = cli({"--config", d + "/c.json", "pipeline", "--out-dir", d + "/a"});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  const CliRun b = cli({"--config", d + "/c.json", "pipeline", "--out-dir", d + "/b"});
  ASSERT_EQ(b.code, kExitOk) << b.err;
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file())
      continue;
    const fs::path rel = fs::relative(e.path(), dir / "a");
    EXPECT_EQ(slurp(e.path()), slurp(dir.path() / "b" / rel)) << rel;
    ++files;
  }
  for (const char* f : {"config.json", "profiles.json", "corpus/capture.jsonl", "corpus/eval.jsonl",
                        "templates/crc32.tpl", "eval/report.json", "eval/report.csv", "secparam.json", "security_table.txt",
                        "protocol/summary.json", "protocol/transcript.jsonl", "pipeline.json"})
    EXPECT_TRUE(fs::exists(dir / ("a/" + std::string(f)))) << f;
  EXPECT_EQ(files, 12u + 7u);

  ProgramProfile huge = default_profiles()[0];
  huge.duration_samples = 3'000'000;
  std::ofstream(dir / "huge.json") << profiles_to_json(std::vector<ProgramProfile>{huge}).dump();
  const CliRun e = cli({"--config", d + "/c.json", "pipeline", "--out-dir", d + "/e", "--profiles", d + "/huge.json"});
  EXPECT_EQ(e.code, kExitValidation);
  const json err = json::parse(e.err);
  EXPECT_EQ(err["error"], "ProfileTooLong");
  EXPECT_EQ(err["stage"], "synth");
  EXPECT_EQ(json::parse(slurp(dir / "e/error.json"))["stage"], "synth");
}
