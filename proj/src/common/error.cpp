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

#include "meterguard/error.hpp"

namespace meterguard {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kNegativeEnergy: return "NegativeEnergy";
    case ErrorCode::kMisalignedTimestamp: return "MisalignedTimestamp";
    case ErrorCode::kMixedInterval: return "MixedInterval";
    case ErrorCode::kDuplicateTimestamp: return "DuplicateTimestamp";
    case ErrorCode::kExceedsCap: return "ExceedsCap";
    case ErrorCode::kOverflow: return "Overflow";
    case ErrorCode::kEmptyIdentifier: return "EmptyIdentifier";
    case ErrorCode::kInvalidUniform: return "InvalidUniform";
    case ErrorCode::kDeltaNotZero: return "DeltaNotZero";
    case ErrorCode::kDeltaZero: return "DeltaZero";
    case ErrorCode::kEpsilonOutOfRange: return "EpsilonOutOfRange";
    case ErrorCode::kBudgetExhausted: return "BudgetExhausted";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kTooFewSeries: return "TooFewSeries";
    case ErrorCode::kEmptySeries: return "EmptySeries";
    case ErrorCode::kNoTrainingData: return "NoTrainingData";
    case ErrorCode::kEmptyUpdateList: return "EmptyUpdateList";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kMissingPeerSeed: return "MissingPeerSeed";
    case ErrorCode::kClipNormMissing: return "ClipNormMissing";
    case ErrorCode::kInvalidPartyCount: return "InvalidPartyCount";
    case ErrorCode::kDuplicateParty: return "DuplicateParty";
    case ErrorCode::kPrimeGenerationFailure: return "PrimeGenerationFailure";
    case ErrorCode::kPlaintextOutOfRange: return "PlaintextOutOfRange";
    case ErrorCode::kBadRandomizer: return "BadRandomizer";
    case ErrorCode::kWrongKey: return "WrongKey";
    case ErrorCode::kKeyMismatch: return "KeyMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kAuditWriteFailure: return "AuditWriteFailure";
    case ErrorCode::kStorageFailure: return "StorageFailure";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

namespace {

std::string format_message(ErrorCode code, const std::string& message,
                           std::optional<std::size_t> line) {
  std::string out(error_code_name(code));
  if (line) out += " (line " + std::to_string(*line) + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> line)
    : std::runtime_error(format_message(code, message, line)),
      code_(code),
      line_(line) {}

}  // namespace meterguard
