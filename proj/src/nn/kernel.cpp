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

#include "kernel.hpp"

namespace cloudseed::nn::detail
{
namespace
{

constexpr std::size_t kRowTile = 4;
constexpr std::size_t kColTile = 8;

template <std::size_t R>
void tile(
  const double * in, std::size_t rows, std::size_t r0, std::size_t fan_in, const double * w_rows,
  const double * bias, std::size_t fan_out, std::size_t j0, double * out)
{
  double acc[R][kColTile];
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t jj = 0; jj < kColTile; ++jj) {
      acc[i][jj] = bias != nullptr ? bias[j0 + jj] : 0.0;
    }
  }
  for (std::size_t k = 0; k < fan_in; ++k) {
    const double * w = w_rows + k * fan_out + j0;
    for (std::size_t i = 0; i < R; ++i) {
      const double a = in[k * rows + r0 + i];
      for (std::size_t jj = 0; jj < kColTile; ++jj) {
        acc[i][jj] += a * w[jj];
      }
    }
  }
  for (std::size_t jj = 0; jj < kColTile; ++jj) {
    for (std::size_t i = 0; i < R; ++i) {
      out[(j0 + jj) * rows + r0 + i] = acc[i][jj];
    }
  }
}

void scalar_column(
  const double * in, std::size_t rows, std::size_t r, std::size_t fan_in, const double * w_rows,
  const double * bias, std::size_t fan_out, std::size_t j, double * out)
{
  double acc = bias != nullptr ? bias[j] : 0.0;
  for (std::size_t k = 0; k < fan_in; ++k) {
    acc += in[k * rows + r] * w_rows[k * fan_out + j];
  }
  out[j * rows + r] = acc;
}

}  // namespace

void affine_forward(
  const double * in, std::size_t rows, std::size_t fan_in, const double * w_rows, const double * bias,
  std::size_t fan_out, double * out)
{
  const std::size_t full_cols = fan_out - fan_out % kColTile;
  std::size_t r = 0;
  for (; r + kRowTile <= rows; r += kRowTile) {
    for (std::size_t j = 0; j < full_cols; j += kColTile) {
      tile<kRowTile>(in, rows, r, fan_in, w_rows, bias, fan_out, j, out);
    }
  }
  for (; r < rows; ++r) {
    for (std::size_t j = 0; j < full_cols; j += kColTile) {
      tile<1>(in, rows, r, fan_in, w_rows, bias, fan_out, j, out);
    }
  }
  for (std::size_t j = full_cols; j < fan_out; ++j) {
    for (std::size_t row = 0; row < rows; ++row) {
      scalar_column(in, rows, row, fan_in, w_rows, bias, fan_out, j, out);
    }
  }
}

}  // namespace cloudseed::nn::detail
