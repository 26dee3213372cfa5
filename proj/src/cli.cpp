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

#include "power_attest/cli.hpp"

#include "power_attest.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace power_attest {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct Negative {}; // attestation-negative outcome, already reported

std::vector<ProgramProfile> load_profiles(const std::string& path) {
  if (path.empty())
    return default_profiles();
  std::ifstream in(path);
  if (!in)
    fail(Errc::io_error, "cannot open profiles " + path);
  try {
    return profiles_from_json(ordered_json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format_error, path + ": " + e.what());
  }
}

ordered_json decision_json(const AttestDecision& d, const std::string& program_id) {
  ordered_json j;
  j["program_id"] = program_id;
  if (d.kind == AttestDecision::Kind::single) {
    j["correlation"] = d.correlation;
    j["corr_thres"] = d.threshold_used;
    j["lag"] = d.lag;
  } else {
    j["pass_count"] = d.pass_count;
    j["trace_count"] = d.trace_count;
    j["x_th"] = static_cast<std::size_t>(d.threshold_used);
  }
  j["passed"] = d.passed;
  return j;
}

ordered_json params_json(const SecurityParams& s, unsigned level) {
  ordered_json j;
  j["level"] = level;
  j["p_alpha"] = s.p_alpha;
  j["p_beta"] = s.p_beta;
  j["n"] = s.n;
  j["x_th"] = s.x_th;
  j["p_cheat"] = s.p_cheat;
  j["p_honest"] = s.p_honest;
  j["honest_failure"] = s.honest_failure;
  return j;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path())
    fs::create_directories(p.parent_path());
}

class Cli {
public:
  Cli(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(const std::vector<std::string>& args) {
    CLI::App app{"power-attest: power-trace attestation toolkit"};
    app.require_subcommand(1);
    app.add_option("--config", config_path_, "JSON config (default: $POWER_ATTEST_CONFIG)");
    add_decode(app);
    add_synth(app);
    add_template(app);
    add_calibrate(app);
    add_attest(app);
    add_attest_multi(app);
    add_eval(app);
    add_secparam(app);
    add_protocol_sim(app);
    add_pipeline(app);
    add_plot(app);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out_, err_);
      return code == 0 ? kExitOk : kExitValidation;
    }
    try {
      cfg_ = resolve_config(config_path_);
      action_();
      return kExitOk;
    } catch (const Negative&) {
      return kExitNegative;
    } catch (const PipelineError& e) {
      err_ << error_report(e, e.stage()).dump() << "\n";
      return exit_code(e.code());
    } catch (const Error& e) {
      err_ << error_report(e).dump() << "\n";
      return exit_code(e.code());
    } catch (const fs::filesystem_error& e) {
      err_ << error_report(Error(Errc::io_error, e.what())).dump() << "\n";
      return kExitValidation;
    } catch (const std::exception& e) {
      err_ << ordered_json{{"error", "Internal"}, {"message", e.what()}}.dump() << "\n";
      return kExitInternal;
    }
  }

private:
  static int exit_code(Errc c) { return c == Errc::harness_failure ? kExitInternal : kExitValidation; }

  void emit(const ordered_json& j) { out_ << j.dump(2) << "\n"; }

  TemplateOptions template_options() const {
    return {window_.value_or(cfg_.filter_window), order_.value_or(cfg_.filter_order),
            percentile_.value_or(cfg_.percentile)};
  }

  ManifestCorpus corpus(const std::string& manifest) const {
    return ManifestCorpus::load(manifest, load_profiles(profiles_path_), cfg_.trigger);
  }

  Trace load_trace(const std::string& path) const {
    Trace t = read_trace(path);
    if (!t.triggers())
      detect_triggers(t, cfg_.trigger);
    return t;
  }

  void add_decode(CLI::App& app) {
    auto* c = app.add_subcommand("decode", "Decode a raw XADC capture into a .trc trace");
    c->add_option("input", in_, "Raw capture (.xadc)")->required();
    c->add_option("output", out_path_, "Output trace (.trc)")->required();
    c->add_flag("--detect-triggers", flag_, "Locate start/end trigger pulses");
    c->add_option("--program", program_, "Label stored with the trace");
    c->callback([this] {
      action_ = [this] {
        Trace t = read_capture(in_);
        if (!program_.empty())
          t.set_program_id(program_);
        if (flag_)
          detect_triggers(t, cfg_.trigger);
        ensure_parent(out_path_);
        write_trace(out_path_, t);
        ordered_json j;
        j["samples"] = t.size();
        if (t.triggers())
          j["triggers"] = {t.triggers()->start, t.triggers()->end};
        emit(j);
      };
    });
  }

  void add_synth(CLI::App& app) {
    auto* c = app.add_subcommand("synth", "Generate labeled synthetic traces and a manifest");
    c->add_option("--profiles", profiles_path_, "Profile set JSON (default: built-in set)");
    c->add_option("--count", count_, "Traces per program")->required()->check(CLI::PositiveNumber);
    c->add_option("--seed", seed_, "Corpus seed");
    c->add_option("--out-dir", out_path_, "Output directory")->required();
    c->add_flag("--virtual", flag_, "Write only the manifest; traces regenerate from profiles");
    c->callback([this] {
      action_ = [this] {
        const auto profiles = load_profiles(profiles_path_);
        const SyntheticCorpus corpus(profiles, cfg_.trigger, count_, seed_.value_or(cfg_.seed));
        const fs::path dir(out_path_);
        fs::create_directories(dir);
        write_text(dir / "profiles.json", profiles_to_json(profiles).dump(2) + "\n");
        std::vector<ManifestEntry> entries = virtual_manifest(corpus);
        if (!flag_) {
          char name[64];
          for (std::size_t i = 0; i < corpus.size(); ++i) {
            std::snprintf(name, sizeof name, "%06zu.trc", i % corpus.per_program());
            const fs::path rel = fs::path(corpus.label(i)) / name;
            fs::create_directories(dir / rel.parent_path());
            write_trace(dir / rel, corpus.trace(i));
            entries[i].path = rel.generic_string();
          }
        }
        write_manifest(dir / "manifest.jsonl", entries);
        emit({{"programs", corpus.program_count()}, {"traces", corpus.size()}, {"virtual", flag_}});
      };
    });
  }

  void add_template(CLI::App& app) {
    auto* c = app.add_subcommand("template", "Build a template from one program's manifest entries");
    c->add_option("--manifest", manifest_, "Corpus manifest (.jsonl)")->required();
    c->add_option("--program", program_, "Program id")->required();
    c->add_option("--bucket", bucket_, "Length bucket exponent (17..21)")->required();
    c->add_option("--window", window_, "Savitzky-Golay window");
    c->add_option("--order", order_, "Savitzky-Golay order");
    c->add_option("--profiles", profiles_path_, "Profiles for virtual manifest entries");
    c->add_option("--out", out_path_, "Output template (.tpl)")->required();
    c->callback([this] {
      action_ = [this] {
        const ManifestCorpus src = corpus(manifest_);
        const auto idx = src.indices_of(program_);
        const Template t =
            build_template_from_source(src, idx, program_, LengthBucket(bucket_), template_options());
        ensure_parent(out_path_);
        write_template(out_path_, t);
        emit({{"program_id", t.program_id}, {"trace_count", t.trace_count}, {"bucket", bucket_}});
      };
    });
  }

  void add_calibrate(CLI::App& app) {
    auto* c = app.add_subcommand("calibrate", "Set corr_thres from the program's manifest traces");
    c->add_option("--template", template_, "Template to calibrate (.tpl)")->required();
    c->add_option("--manifest", manifest_, "Corpus manifest (.jsonl)")->required();
    c->add_option("--percentile", percentile_, "Self-correlation percentile");
    c->add_option("--profiles", profiles_path_, "Profiles for virtual manifest entries");
    c->add_option("--out", out_path_, "Output path (default: overwrite --template)");
    c->callback([this] {
      action_ = [this] {
        const ManifestCorpus src = corpus(manifest_);
        Template t = read_template(template_);
        const auto idx = src.indices_of(t.program_id);
        t = calibrate_from_source(src, idx, std::move(t), template_options().percentile);
        const std::string dst = out_path_.empty() ? template_ : out_path_;
        ensure_parent(dst);
        write_template(dst, t);
        emit({{"program_id", t.program_id}, {"corr_thres", *t.corr_thres}, {"calibration_traces", idx.size()}});
      };
    });
  }

  void add_attest(CLI::App& app) {
    auto* c = app.add_subcommand("attest", "Attest one trace against a calibrated template");
    c->add_option("--template", template_, "Calibrated template (.tpl)")->required();
    c->add_option("--trace", in_, "Candidate trace (.trc)")->required();
    c->add_option("--max-lag", max_lag_, "Search +/- this many samples around the start trigger");
    c->callback([this] {
      action_ = [this] {
        const Template t = read_template(template_);
        const AttestDecision d = attest_single(load_trace(in_), t, max_lag_);
        emit(decision_json(d, t.program_id));
        if (!d.passed)
          throw Negative{};
      };
    });
  }

  void add_attest_multi(CLI::App& app) {
    auto* c = app.add_subcommand("attest-multi", "Attest every manifest trace; pass when x_th of them match");
    c->add_option("--template", template_, "Calibrated template (.tpl)")->required();
    c->add_option("--manifest", manifest_, "Batch manifest (.jsonl)")->required();
    c->add_option("--x-th", x_th_, "Required passing traces")->required();
    c->add_option("--profiles", profiles_path_, "Profiles for virtual manifest entries");
    c->callback([this] {
      action_ = [this] {
        const Template t = read_template(template_);
        const ManifestCorpus src = corpus(manifest_);
        if (x_th_ == 0)
          fail(Errc::invalid_argument, "x_th must be positive");
        if (x_th_ > src.size())
          fail(Errc::threshold_exceeds_batch, "x_th " + std::to_string(x_th_) + " exceeds batch of " +
                                                  std::to_string(src.size()));
        const Matcher m(t);
        const std::size_t len = t.bucket.size();
        std::size_t passes = 0;
        std::vector<double> buffer;
        for (std::size_t i = 0; i < src.size(); ++i) {
          if (!src.fits(i, len))
            fail(Errc::too_short, "trace " + std::to_string(i) + " cannot be trimmed to the template bucket");
          fetch_window(src, i, len, buffer);
          passes += m.passes(m.correlate(buffer)) ? 1 : 0;
        }
        const AttestDecision d = multi_decision(passes, src.size(), x_th_);
        emit(decision_json(d, t.program_id));
        if (!d.passed)
          throw Negative{};
      };
    });
  }

  void add_eval(CLI::App& app) {
    auto* c = app.add_subcommand("eval", "Evaluate templates against a labeled corpus");
    c->add_option("--templates", template_, "Directory of calibrated .tpl files")->required();
    c->add_option("--manifest", manifest_, "Evaluation manifest (.jsonl)")->required();
    c->add_option("--out", out_path_, "Report JSON path")->required();
    c->add_option("--csv", csv_path_, "Also write a per-template CSV table");
    c->add_option("--profiles", profiles_path_, "Profiles for virtual manifest entries");
    c->callback([this] {
      action_ = [this] {
        const auto templates = read_template_dir(template_);
        const EvaluationReport r = evaluate(std::span<const Template>(templates), corpus(manifest_));
        ensure_parent(out_path_);
        write_text(out_path_, report_to_json(r).dump(2) + "\n");
        if (!csv_path_.empty()) {
          ensure_parent(csv_path_);
          write_text(csv_path_, report_to_csv(r));
        }
        out_ << report_to_csv(r);
      };
    });
  }

  void add_secparam(CLI::App& app) {
    auto* c = app.add_subcommand("secparam", "Trace count and threshold for a security level");
    c->add_option("--p-alpha", p_alpha_, "Impostor single-trace pass probability");
    c->add_option("--p-beta", p_beta_, "Genuine single-trace pass probability");
    c->add_option("--level", level_, "Security level in bits");
    c->add_flag("--table", flag_, "Print the four reference operating points");
    c->callback([this] {
      action_ = [this] {
        const double pa = p_alpha_.value_or(cfg_.p_alpha), pb = p_beta_.value_or(cfg_.p_beta);
        if (flag_) {
          out_ << format_security_table(security_table(pa, pb));
          return;
        }
        const unsigned level = level_.value_or(cfg_.security_level);
        emit(params_json(min_traces_for_level(pa, pb, level), level));
      };
    });
  }

  void add_protocol_sim(CLI::App& app) {
    auto* c = app.add_subcommand("protocol-sim", "Run verifier/prover/TEE/tray protocol sessions");
    c->add_option("--profiles", profiles_path_, "Profile set JSON (default: built-in set)");
    c->add_option("--app", program_, "Requested application id")->required();
    c->add_option("--level", level_, "Security level in bits");
    c->add_option("--attack", attack_, "none | subst-meas | false-result | subst-app")
        ->check(CLI::IsMember({"none", "subst-meas", "false-result", "subst-app"}));
    c->add_option("--sessions", count_, "Number of sessions")->check(CLI::PositiveNumber);
    c->add_option("--seed", seed_, "Simulation seed");
    c->add_option("--transcript", out_path_, "Write the message transcript (.jsonl)");
    c->callback([this] {
      action_ = [this] {
        protocol::ProtocolSimOptions opt;
        opt.app_id = program_;
        opt.level = level_.value_or(cfg_.security_level);
        opt.p_alpha = cfg_.p_alpha;
        opt.p_beta = cfg_.p_beta;
        opt.attack = protocol::parse_attack(attack_);
        opt.sessions = count_;
        opt.seed = seed_.value_or(cfg_.seed);
        opt.traces_per_program = cfg_.traces_per_program;
        opt.templates = template_options();
        const auto rep = protocol::run_protocol_sim(load_profiles(profiles_path_), cfg_.trigger, opt);
        if (!out_path_.empty()) {
          ensure_parent(out_path_);
          std::ofstream f(out_path_, std::ios::binary);
          protocol::write_transcript(f, rep.transcript);
          if (!f)
            fail(Errc::io_error, "cannot write transcript " + out_path_);
        }
        emit(protocol::protocol_report_to_json(rep));
        if (rep.negative())
          throw Negative{};
      };
    });
  }

  void add_pipeline(CLI::App& app) {
    auto* c = app.add_subcommand("pipeline", "synth, template, calibrate, eval, secparam and protocol-sim");
    c->add_option("--out-dir", out_path_, "Artifact directory")->required();
    c->add_option("--profiles", profiles_path_, "Profile set JSON (default: built-in set)");
    c->callback([this] {
      action_ = [this] {
        const PipelineResult r = run_pipeline(cfg_, out_path_, load_profiles(profiles_path_));
        emit({{"artifacts", r.artifacts.size()}, {"protocol", protocol::protocol_report_to_json(r.protocol)}});
        if (r.protocol.negative())
          throw Negative{};
      };
    });
  }

  void add_plot(CLI::App& app) {
    auto* c = app.add_subcommand("plot", "Write CSV plot data for a trace or template");
    auto* tr = c->add_option("--trace", in_, "Trace to plot (.trc)");
    auto* tp = c->add_option("--template", template_, "Template to plot (.tpl)");
    c->add_option("--overlay", overlay_, "With --template: candidate trace to overlay")->needs(tp);
    c->add_option("--stride", stride_, "Keep every k-th sample")->check(CLI::PositiveNumber);
    c->add_option("--out", out_path_, "Output CSV")->required();
    tr->excludes(tp);
    c->callback([this] {
      action_ = [this] {
        PlotWriter w;
        if (!in_.empty()) {
          w = trace_plot(load_trace(in_), stride_);
        } else if (!template_.empty()) {
          const Template t = read_template(template_);
          if (!overlay_.empty()) {
            w = overlay_plot(t, load_trace(overlay_), stride_);
          } else {
            w.series("template", t.samples, stride_);
          }
        } else {
          fail(Errc::invalid_argument, "plot needs --trace or --template");
        }
        ensure_parent(out_path_);
        w.save(out_path_);
        emit({{"out", out_path_}});
      };
    });
  }

  std::ostream& out_;
  std::ostream& err_;
  std::function<void()> action_;
  Config cfg_;
  std::string config_path_;
  std::string in_, out_path_, csv_path_, program_, manifest_, template_, overlay_, profiles_path_;
  std::string attack_ = "none";
  bool flag_ = false;
  int bucket_ = kMinBucketExponent;
  std::size_t count_ = 1, x_th_ = 0, max_lag_ = 0, stride_ = 1;
  std::optional<std::size_t> window_, order_;
  std::optional<double> percentile_, p_alpha_, p_beta_;
  std::optional<unsigned> level_;
  std::optional<std::uint64_t> seed_;
};

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return Cli(out, err).run(args);
}

} // namespace power_attest
