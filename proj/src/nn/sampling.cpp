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

#include "cloudseed/nn/sampling.hpp"

#include <numeric>

#include "cloudseed/error.hpp"
#include "cloudseed/rng.hpp"

namespace cloudseed::nn
{

FixedSample sample_fixed_points(const Matrix & points, std::size_t count, std::uint64_t seed)
{
  const auto n = static_cast<std::size_t>(points.rows());
  if (n == 0) {
    throw Error(ErrorKind::kDimension, "cannot resample an empty point set");
  }
  if (count == 0) {
    throw Error(ErrorKind::kParameter, "sample count must be positive");
  }
  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t shuffled = std::min(n, count);
  // Partial Fisher-Yates: the first `shuffled` slots become a uniform random subset.
  for (std::size_t i = 0; i < shuffled; ++i) {
    const std::size_t j = i + rng.index(n - i);
    std::swap(order[i], order[j]);
  }
  FixedSample sample;
  sample.index_map.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(shuffled));
  while (sample.index_map.size() < count) {
    sample.index_map.push_back(rng.index(n));
  }
  sample.points.resize(static_cast<Eigen::Index>(count), points.cols());
  for (std::size_t r = 0; r < count; ++r) {
    sample.points.row(static_cast<Eigen::Index>(r)) =
      points.row(static_cast<Eigen::Index>(sample.index_map[r]));
  }
  return sample;
}

Matrix to_matrix(std::span<const Point3> points)
{
  Matrix m(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    m(r, 0) = points[i].x;
    m(r, 1) = points[i].y;
    m(r, 2) = points[i].z;
  }
  return m;
}

}  // namespace cloudseed::nn
