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

// All-pairs template-versus-corpus evaluation: confusion counts per template,
// precision / recall / F1, and the worst single-impostor false-positive rate.

#include "power_attest/error.hpp"
#include "power_attest/matcher.hpp"
#include "power_attest/source.hpp"
#include "power_attest/template.hpp"
#include "power_attest/trace.hpp"

#include "json.hpp"

#include <algorithm>
#include <concepts>
#include <limits>
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace power_attest {

struct ConfusionStats {
  std::string program_id;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::map<std::string, std::size_t> per_program_fp;

  friend bool operator==(const ConfusionStats&, const ConfusionStats&) = default;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision = TP/(TP+FP), Recall = TP/(TP+FN), F1 their harmonic mean.
/// A zero denominator yields 0, and F1 is 0 when either factor is 0.
inline Metrics metrics(const ConfusionStats& s) {
  Metrics m;
  const double tp = static_cast<double>(s.tp);
  if (s.tp + s.fp > 0)
    m.precision = tp / static_cast<double>(s.tp + s.fp);
  if (s.tp + s.fn > 0)
    m.recall = tp / static_cast<double>(s.tp + s.fn);
  if (m.precision > 0.0 && m.recall > 0.0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

struct TemplateReport {
  ConfusionStats stats;
  Metrics metrics;
  double corr_thres = 0.0;
  std::vector<std::string> max_fp_programs; // all impostors tied at the maximum, sorted
  std::size_t max_fp_count = 0;

  const std::string& program_id() const noexcept { return stats.program_id; }
  std::string max_fp_program() const { return max_fp_programs.empty() ? std::string{} : max_fp_programs.front(); }
};

struct EvaluationReport {
  std::vector<TemplateReport> templates;
  std::map<std::string, std::size_t> trace_counts;
};

template <LabeledWindowSource Source>
EvaluationReport evaluate(std::span<const Template> templates, const Source& corpus) {
  if (corpus.size() == 0)
    fail(Errc::empty_corpus, "evaluation corpus is empty");
  std::map<std::string, std::size_t> index_of;
  std::vector<Matcher> matchers;
  std::size_t max_len = 0;
  for (const Template& t : templates) {
    index_of.emplace(t.program_id, matchers.size());
    matchers.emplace_back(t);
    max_len = std::max(max_len, t.bucket.size());
  }

  EvaluationReport report;
  report.templates.resize(templates.size());
  for (std::size_t k = 0; k < templates.size(); ++k) {
    report.templates[k].stats.program_id = templates[k].program_id;
    report.templates[k].corr_thres = *templates[k].corr_thres;
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::string label = corpus.label(i);
    if (!index_of.contains(label))
      fail(Errc::missing_template, "no template for corpus label '" + label + "'");
    ++report.trace_counts[label];
  }

  ReferenceBank bank;
  for (const Matcher& m : matchers)
    bank.add(&m.reference());
  std::vector<double> buffer;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::string label = corpus.label(i);
    std::size_t len = max_len;
    while (len >= (std::size_t{1} << kMinBucketExponent) && !corpus.fits(i, len))
      len /= 2;
    std::vector<double> corrs(matchers.size(), std::numeric_limits<double>::quiet_NaN());
    if (len >= (std::size_t{1} << kMinBucketExponent)) {
      fetch_window(corpus, i, len, buffer);
      corrs = bank.correlate_all(buffer);
    }
    for (std::size_t k = 0; k < matchers.size(); ++k) {
      // A trace that cannot be trimmed to the bucket cannot certify; NaN fails.
      const bool passed = matchers[k].passes(corrs[k]);
      ConfusionStats& s = report.templates[k].stats;
      if (label == s.program_id) {
        (passed ? s.tp : s.fn) += 1;
      } else if (passed) {
        ++s.fp;
        ++s.per_program_fp[label];
      } else {
        ++s.tn;
      }
    }
  }

  for (TemplateReport& r : report.templates) {
    r.metrics = metrics(r.stats);
    for (const auto& [prog, count] : r.stats.per_program_fp) {
      if (count > r.max_fp_count) {
        r.max_fp_count = count;
        r.max_fp_programs = {prog};
      } else if (count == r.max_fp_count && count > 0) {
        r.max_fp_programs.push_back(prog);
      }
    }
  }
  return report;
}

struct WorstFalsePositive {
  std::string template_id;
  std::string impostor_id;
  std::size_t fp_count = 0;
  double p_alpha_estimate = 0.0;
};

/// The (template, impostor) pair with the most false positives; ties go to the
/// lexicographically smallest pair. p_alpha is fp_count over the impostor's
/// trace count.
inline WorstFalsePositive worst_fp_rate(const EvaluationReport& report) {
  WorstFalsePositive w;
  bool found = false;
  for (const TemplateReport& r : report.templates) {
    for (const auto& [prog, count] : r.stats.per_program_fp) {
      const bool better = !found || count > w.fp_count ||
                          (count == w.fp_count && std::tie(r.stats.program_id, prog) <
                                                      std::tie(w.template_id, w.impostor_id));
      if (better) {
        w = {r.stats.program_id, prog, count, 0.0};
        found = true;
      }
    }
  }
  if (found && w.fp_count > 0) {
    const auto it = report.trace_counts.find(w.impostor_id);
    if (it != report.trace_counts.end() && it->second > 0)
      w.p_alpha_estimate = static_cast<double>(w.fp_count) / static_cast<double>(it->second);
  }
  if (!found && !report.templates.empty())
    w.template_id = report.templates.front().program_id();
  return w;
}

// ---------------------------------------------------------------------------
// Report serialization

inline nlohmann::ordered_json report_to_json(const EvaluationReport& report) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const TemplateReport& r : report.templates) {
    nlohmann::ordered_json j;
    j["program_id"] = r.program_id();
    j["corr_thres"] = r.corr_thres;
    j["max_fp"] = {{"program", r.max_fp_program()}, {"count", r.max_fp_count}, {"tied", r.max_fp_programs}};
    j["precision"] = r.metrics.precision;
    j["recall"] = r.metrics.recall;
    j["f1"] = r.metrics.f1;
    j["tp"] = r.stats.tp;
    j["fp"] = r.stats.fp;
    j["tn"] = r.stats.tn;
    j["fn"] = r.stats.fn;
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (const auto& [prog, count] : r.stats.per_program_fp)
      per[prog] = count;
    j["per_program_fp"] = per;
    arr.push_back(std::move(j));
  }
  return arr;
}

/// One row per template: program, corr_thres, max FP program, count, recall, precision, F1.
inline std::string report_to_csv(const EvaluationReport& report) {
  std::string out = "program,corr_thres,max_fp_program,max_fp_count,recall,precision,f1\n";
  char line[512];
  for (const TemplateReport& r : report.templates) {
    std::snprintf(line, sizeof line, "%s,%.4f,%s,%zu,%.4f,%.4f,%.4f\n", r.program_id().c_str(), r.corr_thres,
                  r.max_fp_program().empty() ? "-" : r.max_fp_program().c_str(), r.max_fp_count,
                  r.metrics.recall, r.metrics.precision, r.metrics.f1);
    out += line;
  }
  return out;
}

} // namespace power_attest
