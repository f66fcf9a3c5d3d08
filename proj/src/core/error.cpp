// Copyright 2026 The CloudSeed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cloudseed/error.hpp"

namespace cloudseed
{

std::string_view to_string(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::kMalformedFile:
      return "malformed-file";
    case ErrorKind::kParse:
      return "parse-error";
    case ErrorKind::kCalibrationIncomplete:
      return "calibration-incomplete";
    case ErrorKind::kFrameMismatch:
      return "frame-mismatch";
    case ErrorKind::kEmptyPatch:
      return "empty-patch";
    case ErrorKind::kSpecInfeasible:
      return "spec-infeasible";
    case ErrorKind::kDimension:
      return "dimension-error";
    case ErrorKind::kNumericOverflow:
      return "numeric-overflow";
    case ErrorKind::kInstanceTooSparse:
      return "instance-too-sparse";
    case ErrorKind::kLabelAmbiguity:
      return "label-ambiguity";
    case ErrorKind::kDivergence:
      return "divergence";
    case ErrorKind::kEmptyInstance:
      return "empty-instance";
    case ErrorKind::kBelowThreshold:
      return "below-threshold";
    case ErrorKind::kInsufficientData:
      return "insufficient-data";
    case ErrorKind::kState:
      return "state-error";
    case ErrorKind::kPoolExhausted:
      return "pool-exhausted";
    case ErrorKind::kIncompleteBatch:
      return "incomplete-batch";
    case ErrorKind::kParameter:
      return "parameter-error";
    case ErrorKind::kClickDatabase:
      return "click-database-error";
    case ErrorKind::kIo:
      return "io-error";
    case ErrorKind::kConfig:
      return "config-error";
    case ErrorKind::kUnauthorized:
      return "unauthorized";
    case ErrorKind::kNotFound:
      return "not-found";
  }
  return "error";
}

}  // namespace cloudseed
