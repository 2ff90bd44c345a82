// Copyright 2026 The sensfarm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sensfarm/error.hpp"

namespace sensfarm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDuplicateParameter: return "DuplicateParameter";
    case ErrorCode::kUnwritableDirectory: return "UnwritableDirectory";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kDuplicateRunId: return "DuplicateRunId";
    case ErrorCode::kInputKeyMismatch: return "InputKeyMismatch";
    case ErrorCode::kOutputKeyMismatch: return "OutputKeyMismatch";
    case ErrorCode::kUnknownRunId: return "UnknownRunId";
    case ErrorCode::kAlreadyCompleted: return "AlreadyCompleted";
    case ErrorCode::kIllegalTransition: return "IllegalTransition";
    case ErrorCode::kCorruptRecord: return "CorruptRecord";
    case ErrorCode::kUnsupportedDimension: return "UnsupportedDimension";
    case ErrorCode::kUnsupportedDistribution: return "UnsupportedDistribution";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kRunIdMismatch: return "RunIdMismatch";
    case ErrorCode::kSignerFailure: return "SignerFailure";
    case ErrorCode::kModelFailure: return "ModelFailure";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kSpawnFailure: return "SpawnFailure";
    case ErrorCode::kBindFailure: return "BindFailure";
    case ErrorCode::kMissingRun: return "MissingRun";
    case ErrorCode::kNoData: return "NoData";
    case ErrorCode::kConfig: return "Config";
  }
  return "Unknown";
}

}  // namespace sensfarm
