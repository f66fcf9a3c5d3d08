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

#ifndef CLOUDSEED_SRC__NN__KERNEL_HPP_
#define CLOUDSEED_SRC__NN__KERNEL_HPP_

#include <cstddef>

namespace cloudseed::nn::detail
{

// out(r, j) = bias[j] + sum_k in(r, k) * w_rows[k * fan_out + j], accumulated in increasing k.
// `in` and `out` are column-major with `rows` rows. Every output element goes through the same
// sequence of roundings regardless of its row, so results do not depend on row order or count.
// `bias` may be null.
void affine_forward(
  const double * in, std::size_t rows, std::size_t fan_in, const double * w_rows, const double * bias,
  std::size_t fan_out, double * out);

}  // namespace cloudseed::nn::detail

#endif  // CLOUDSEED_SRC__NN__KERNEL_HPP_
