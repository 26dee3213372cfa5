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

// End-to-end pipeline: synth -> template -> calibrate -> eval -> secparam ->
// protocol-sim, with every artifact written under one output directory.

#include "power_attest/config.hpp"
#include "power_attest/error.hpp"
#include "power_attest/eval.hpp"
#include "power_attest/io.hpp"
#include "power_attest/protocol/runner.hpp"
#include "power_attest/security.hpp"
#include "power_attest/study.hpp"
#include "power_attest/synth.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace power_attest {

inline constexpr const char* kPipelineStages[] = {"synth", "template", "calibrate", "eval", "secparam",
                                                  "protocol-sim"};

/// A stage failure: the module error plus the stage it came from.
class PipelineError : public Error {
public:
  PipelineError(std::string stage, const Error& cause)
      : Error(cause.code(), stage + ": " + cause.detail()), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

inline nlohmann::ordered_json error_report(const Error& e, const std::string& stage = {}) {
  nlohmann::ordered_json j;
  j["error"] = std::string(to_string(e.code()));
  if (!stage.empty())
    j["stage"] = stage;
  j["message"] = e.detail();
  return j;
}

inline void write_error_report(const std::filesystem::path& out_dir, const Error& e, const std::string& stage) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  std::ofstream(out_dir / "error.json") << error_report(e, stage).dump(2) << "\n";
}

struct PipelineResult {
  std::vector<std::string> artifacts; // paths relative to the output directory
  protocol::ProtocolSimReport protocol;
};

/// Runs every stage under `out_dir`. Protocol sessions use the first profile.
/// On failure writes `error.json` and throws PipelineError.
inline PipelineResult run_pipeline(const Config& cfg, const std::filesystem::path& out_dir,
                                   std::vector<ProgramProfile> profiles = default_profiles()) {
  namespace fs = std::filesystem;
  cfg.validate();
  if (profiles.empty())
    fail(Errc::invalid_argument, "pipeline needs at least one profile");

  PipelineResult result;
  std::string stage;
  auto emit = [&](const fs::path& rel, std::string_view text) {
    const fs::path full = out_dir / rel;
    fs::create_directories(full.parent_path());
    write_text(full, text);
    result.artifacts.push_back(rel.generic_string());
  };
  auto dump = [](const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; };

  try {
    stage = "synth";
    fs::create_directories(out_dir);
    for (const auto& p : profiles)
      validate_profile(p, cfg.trigger);
    StudyConfig sc;
    sc.per_program = cfg.traces_per_program;
    sc.eval_per_program = cfg.eval_traces_per_program;
    sc.templates = {cfg.filter_window, cfg.filter_order, cfg.percentile};
    sc.seed = cfg.seed;
    const SyntheticStudy study(profiles, cfg.trigger, sc);
    emit("config.json", dump(config_to_json(cfg)));
    emit("profiles.json", dump(profiles_to_json(profiles)));
    const fs::path corpus(cfg.corpus_dir);
    {
      std::ostringstream capture, eval;
      write_manifest(capture, virtual_manifest(study.capture_corpus()));
      write_manifest(eval, virtual_manifest(study.eval_corpus()));
      emit(corpus / "capture.jsonl", capture.str());
      emit(corpus / "eval.jsonl", eval.str());
    }

    stage = "template";
    std::vector<Template> templates;
    for (std::size_t k = 0; k < study.program_count(); ++k)
      templates.push_back(study.uncalibrated_template(k));

    stage = "calibrate";
    const fs::path tdir(cfg.template_dir);
    for (std::size_t k = 0; k < templates.size(); ++k) {
      templates[k] = study.calibrate(k, std::move(templates[k]));
      const fs::path rel = tdir / (templates[k].program_id + ".tpl");
      fs::create_directories((out_dir / rel).parent_path());
      write_template(out_dir / rel, templates[k]);
      result.artifacts.push_back(rel.generic_string());
    }

    stage = "eval";
    const EvaluationReport report = study.evaluate(templates);
    emit("eval/report.json", dump(report_to_json(report)));
    emit("eval/report.csv", report_to_csv(report));

    stage = "secparam";
    const SecurityParams params = min_traces_for_level(cfg.p_alpha, cfg.p_beta, cfg.security_level);
    {
      nlohmann::ordered_json j;
      j["level"] = cfg.security_level;
      j["p_alpha"] = cfg.p_alpha;
      j["p_beta"] = cfg.p_beta;
      j["n"] = params.n;
      j["x_th"] = params.x_th;
      j["p_cheat"] = params.p_cheat;
      j["p_honest"] = params.p_honest;
      const WorstFalsePositive worst = worst_fp_rate(report);
      j["measured"] = {{"worst_template", worst.template_id},
                       {"worst_impostor", worst.impostor_id},
                       {"p_alpha", worst.p_alpha_estimate}};
      emit("secparam.json", dump(j));
      emit("security_table.txt", format_security_table(security_table(cfg.p_alpha, cfg.p_beta)));
    }

    stage = "protocol-sim";
    protocol::ProtocolSimOptions opt;
    opt.app_id = profiles.front().program_id;
    opt.level = cfg.security_level;
    opt.p_alpha = cfg.p_alpha;
    opt.p_beta = cfg.p_beta;
    opt.sessions = cfg.protocol_sessions;
    opt.seed = cfg.seed;
    opt.traces_per_program = cfg.traces_per_program;
    opt.templates = sc.templates;
    result.protocol = protocol::run_protocol_sim(profiles, cfg.trigger, opt);
    emit("protocol/summary.json", dump(protocol::protocol_report_to_json(result.protocol)));
    {
      std::ostringstream t;
      protocol::write_transcript(t, result.protocol.transcript);
      emit("protocol/transcript.jsonl", t.str());
    }

    nlohmann::ordered_json manifest;
    manifest["stages"] = kPipelineStages;
    manifest["artifacts"] = result.artifacts;
    emit("pipeline.json", dump(manifest));
  } catch (const std::filesystem::filesystem_error& e) {
    const Error io(Errc::io_error, e.what());
    write_error_report(out_dir, io, stage);
    throw PipelineError(stage, io);
  } catch (const Error& e) {
    write_error_report(out_dir, e, stage);
    throw PipelineError(stage, e);
  }
  return result;
}

} // namespace power_attest
