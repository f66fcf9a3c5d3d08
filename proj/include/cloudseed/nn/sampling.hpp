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

#ifndef CLOUDSEED__NN__SAMPLING_HPP_
#define CLOUDSEED__NN__SAMPLING_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cloudseed/nn/network.hpp"
#include "cloudseed/types.hpp"

namespace cloudseed::nn
{

struct FixedSample
{
  Matrix points;                        // count x 3
  std::vector<std::size_t> index_map;   // row -> source row
};

/// Fixed-size resampling of a point set.
///
/// n >= count: the first `count` rows of a random permutation (no replacement).
/// n < count: every source row once, in random order, followed by uniform draws with
/// replacement for the remaining rows.
FixedSample sample_fixed_points(const Matrix & points, std::size_t count, std::uint64_t seed);

Matrix to_matrix(std::span<const Point3> points);

}  // namespace cloudseed::nn

#endif  // CLOUDSEED__NN__SAMPLING_HPP_
