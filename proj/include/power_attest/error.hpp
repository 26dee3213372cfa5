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

#include <stdexcept>
#include <string>
#include <string_view>

namespace power_attest {

enum class Errc {
  malformed_capture,
  empty_capture,
  triggers_not_found,
  too_short,
  profile_too_long,
  duplicate_program_id,
  mixed_labels,
  insufficient_traces,
  bad_filter_params,
  length_mismatch,
  degenerate_input,
  uncalibrated_template,
  threshold_exceeds_batch,
  missing_template,
  empty_corpus,
  invalid_probabilities,
  threshold_out_of_band,
  domain_error,
  no_solution_below_cap,
  unknown_application,
  invalid_argument,
  format_error,
  io_error,
  validation_error,
  harness_failure,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
  case Errc::malformed_capture: return "MalformedCapture";
  case Errc::empty_capture: return "EmptyCapture";
  case Errc::triggers_not_found: return "TriggersNotFound";
  case Errc::too_short: return "TooShort";
  case Errc::profile_too_long: return "ProfileTooLong";
  case Errc::duplicate_program_id: return "DuplicateProgramId";
  case Errc::mixed_labels: return "MixedLabels";
  case Errc::insufficient_traces: return "InsufficientTraces";
  case Errc::bad_filter_params: return "BadFilterParams";
  case Errc::length_mismatch: return "LengthMismatch";
  case Errc::degenerate_input: return "DegenerateInput";
  case Errc::uncalibrated_template: return "UncalibratedTemplate";
  case Errc::threshold_exceeds_batch: return "ThresholdExceedsBatch";
  case Errc::missing_template: return "MissingTemplate";
  case Errc::empty_corpus: return "EmptyCorpus";
  case Errc::invalid_probabilities: return "InvalidProbabilities";
  case Errc::threshold_out_of_band: return "ThresholdOutOfBand";
  case Errc::domain_error: return "DomainError";
  case Errc::no_solution_below_cap: return "NoSolutionBelowCap";
  case Errc::unknown_application: return "UnknownApplication";
  case Errc::invalid_argument: return "InvalidArgument";
  case Errc::format_error: return "FormatError";
  case Errc::io_error: return "IoError";
  case Errc::validation_error: return "ValidationError";
  case Errc::harness_failure: return "HarnessFailure";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable error kind alongside the message.
class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  Errc code() const noexcept { return code_; }
  /// The message without the error-code prefix.
  const std::string& detail() const noexcept { return detail_; }

private:
  Errc code_;
  std::string detail_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

} // namespace power_attest
