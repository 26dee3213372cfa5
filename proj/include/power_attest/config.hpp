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

// Run configuration: strict JSON with every field validated at load.

#include "power_attest/error.hpp"
#include "power_attest/security.hpp"
#include "power_attest/template.hpp"
#include "power_attest/trace.hpp"

#include "json.hpp"

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

namespace power_attest {

inline constexpr const char* kConfigEnvVar = "POWER_ATTEST_CONFIG";
inline constexpr const char* kDefaultConfigFile = "power_attest.json";

struct Config {
  std::size_t filter_window = kDefaultFilterWindow;
  std::size_t filter_order = kDefaultFilterOrder;
  double percentile = kDefaultPercentile;
  TriggerConfig trigger;
  double p_alpha = kReferencePAlpha;
  double p_beta = kReferencePBeta;
  unsigned security_level = 32;
  std::string template_dir = "templates";
  std::string corpus_dir = "corpus";
  std::uint64_t seed = 1;
  std::size_t traces_per_program = 1000;      // template build + calibration
  std::size_t eval_traces_per_program = 1000; // held-out evaluation
  std::size_t protocol_sessions = 20;

  /// Raises validation_error on the first invalid field.
  void validate() const {
    auto bad = [](const std::string& what) { fail(Errc::validation_error, "config: " + what); };
    if (filter_window < 3 || filter_window % 2 == 0)
      bad("filter_window must be odd and at least 3");
    if (filter_order >= filter_window)
      bad("filter_order must be below filter_window");
    if (filter_window > 0xFFFF || filter_order > 0xFF)
      bad("filter_window/filter_order out of range");
    if (!(percentile >= 0.0 && percentile <= 100.0))
      bad("percentile must lie in [0, 100]");
    try {
      trigger.validate();
    } catch (const Error& e) {
      bad(e.what());
    }
    if (!(p_alpha >= 0.0 && p_alpha < p_beta && p_beta <= 1.0))
      bad("need 0 <= p_alpha < p_beta <= 1");
    if (security_level < 1 || security_level > 1024)
      bad("security_level must lie in [1, 1024]");
    if (template_dir.empty() || corpus_dir.empty())
      bad("paths must be non-empty");
    if (traces_per_program < 8)
      bad("traces_per_program must be at least 8");
    if (eval_traces_per_program < 1)
      bad("eval_traces_per_program must be positive");
    if (protocol_sessions < 1)
      bad("protocol_sessions must be positive");
  }
};

inline nlohmann::ordered_json config_to_json(const Config& c) {
  nlohmann::ordered_json j;
  j["filter_window"] = c.filter_window;
  j["filter_order"] = c.filter_order;
  j["percentile"] = c.percentile;
  j["trigger"] = {{"amplitude", c.trigger.amplitude},
                  {"width_samples", c.trigger.width_samples},
                  {"min_excursion", c.trigger.min_excursion},
                  {"tolerance_samples", c.trigger.tolerance_samples}};
  j["p_alpha"] = c.p_alpha;
  j["p_beta"] = c.p_beta;
  j["security_level"] = c.security_level;
  j["template_dir"] = c.template_dir;
  j["corpus_dir"] = c.corpus_dir;
  j["seed"] = c.seed;
  j["traces_per_program"] = c.traces_per_program;
  j["eval_traces_per_program"] = c.eval_traces_per_program;
  j["protocol_sessions"] = c.protocol_sessions;
  return j;
}

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object())
    fail(Errc::validation_error, "config: " + where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.contains(key))
      fail(Errc::validation_error, "config: unknown key '" + where + key + "'");
}

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key))
    return;
  const auto& v = j.at(key);
  if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string())
      fail(Errc::validation_error, std::string("config: '") + key + "' must be a string");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number())
      fail(Errc::validation_error, std::string("config: '") + key + "' must be a number");
  } else {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      fail(Errc::validation_error, std::string("config: '") + key + "' must be a non-negative integer");
  }
  out = v.get<T>();
}

} // namespace detail

/// Fields absent from `j` keep their defaults; unknown keys are rejected.
inline Config config_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j,
                         {"filter_window", "filter_order", "percentile", "trigger", "p_alpha", "p_beta",
                          "security_level", "template_dir", "corpus_dir", "seed", "traces_per_program",
                          "eval_traces_per_program", "protocol_sessions"},
                         "");
  Config c;
  detail::read_field(j, "filter_window", c.filter_window);
  detail::read_field(j, "filter_order", c.filter_order);
  detail::read_field(j, "percentile", c.percentile);
  if (j.contains("trigger")) {
    const auto& t = j.at("trigger");
    detail::reject_unknown(t, {"amplitude", "width_samples", "min_excursion", "tolerance_samples"}, "trigger.");
    detail::read_field(t, "amplitude", c.trigger.amplitude);
    detail::read_field(t, "width_samples", c.trigger.width_samples);
    detail::read_field(t, "min_excursion", c.trigger.min_excursion);
    detail::read_field(t, "tolerance_samples", c.trigger.tolerance_samples);
  }
  detail::read_field(j, "p_alpha", c.p_alpha);
  detail::read_field(j, "p_beta", c.p_beta);
  detail::read_field(j, "security_level", c.security_level);
  detail::read_field(j, "template_dir", c.template_dir);
  detail::read_field(j, "corpus_dir", c.corpus_dir);
  detail::read_field(j, "seed", c.seed);
  detail::read_field(j, "traces_per_program", c.traces_per_program);
  detail::read_field(j, "eval_traces_per_program", c.eval_traces_per_program);
  detail::read_field(j, "protocol_sessions", c.protocol_sessions);
  c.validate();
  return c;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    fail(Errc::io_error, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::validation_error, "config: " + std::string(e.what()));
  }
  return config_from_json(j);
}

/// Explicit path, else $POWER_ATTEST_CONFIG, else ./power_attest.json when
/// present, else built-in defaults.
inline Config resolve_config(const std::string& explicit_path = {}) {
  if (!explicit_path.empty())
    return load_config(explicit_path);
  if (const char* env = std::getenv(kConfigEnvVar); env && *env)
    return load_config(env);
  if (std::filesystem::exists(kDefaultConfigFile))
    return load_config(kDefaultConfigFile);
  Config c;
  c.validate();
  return c;
}

} // namespace power_attest
