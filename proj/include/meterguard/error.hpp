/*
 * Copyright 2026 The Meterguard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace meterguard {

// Machine-readable failure categories shared by every module. Callers branch
// on the code; the message is for humans.
enum class ErrorCode {
  // meterdata
  kMalformedRow,
  kNegativeEnergy,
  kMisalignedTimestamp,
  kMixedInterval,
  kDuplicateTimestamp,
  kExceedsCap,
  kOverflow,
  // anonymize
  kEmptyIdentifier,
  // dp
  kInvalidUniform,
  kDeltaNotZero,
  kDeltaZero,
  kEpsilonOutOfRange,
  kBudgetExhausted,
  kEmptyDataset,
  // synthetic
  kTooFewSeries,
  kEmptySeries,
  // fedlearn
  kNoTrainingData,
  kEmptyUpdateList,
  kDimensionMismatch,
  kMissingPeerSeed,
  kClipNormMissing,
  // smpc
  kInvalidPartyCount,
  kDuplicateParty,
  // he
  kPrimeGenerationFailure,
  kPlaintextOutOfRange,
  kBadRandomizer,
  kWrongKey,
  kKeyMismatch,
  kLengthMismatch,
  // gateway
  kAuditWriteFailure,
  kStorageFailure,
  // generic
  kInvalidArgument,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  // 1-based input line for ingestion errors.
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> line_;
};

}  // namespace meterguard
