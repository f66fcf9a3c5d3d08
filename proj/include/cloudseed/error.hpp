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

#ifndef CLOUDSEED__ERROR_HPP_
#define CLOUDSEED__ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace cloudseed
{

enum class ErrorKind
{
  kMalformedFile,
  kParse,
  kCalibrationIncomplete,
  kFrameMismatch,
  kEmptyPatch,
  kSpecInfeasible,
  kDimension,
  kNumericOverflow,
  kInstanceTooSparse,
  kLabelAmbiguity,
  kDivergence,
  kEmptyInstance,
  kBelowThreshold,
  kInsufficientData,
  kState,
  kPoolExhausted,
  kIncompleteBatch,
  kParameter,
  kClickDatabase,
  kIo,
  kConfig,
  kUnauthorized,
  kNotFound,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string & message)
  : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind)
  {
  }

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

/// Thrown when no point of a segmented patch clears the foreground threshold.
class BelowThresholdError : public Error
{
public:
  BelowThresholdError(double max_confidence, const std::string & message)
  : Error(ErrorKind::kBelowThreshold, message), max_confidence_(max_confidence)
  {
  }

  double max_confidence() const noexcept { return max_confidence_; }

private:
  double max_confidence_;
};

}  // namespace cloudseed

#endif  // CLOUDSEED__ERROR_HPP_
