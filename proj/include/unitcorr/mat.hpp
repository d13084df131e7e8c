/* unitcorr - accent correction for discrete acoustic units.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace unitcorr {

// Dense row-major matrix. Deliberately minimal: the numeric work happens in
// the kernels, this is just owned storage with shape.
template <class T>
struct Mat {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<T> data;

  Mat() = default;
  Mat(size_t r, size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(size_t i, size_t j) { return data[i * cols + j]; }
  const T& operator()(size_t i, size_t j) const { return data[i * cols + j]; }

  T* row(size_t i) { return data.data() + i * cols; }
  const T* row(size_t i) const { return data.data() + i * cols; }

  std::span<T> row_span(size_t i) { return {row(i), cols}; }
  std::span<const T> row_span(size_t i) const { return {row(i), cols}; }

  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  template <class U>
  Mat<U> cast() const {
    Mat<U> out(rows, cols);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  bool operator==(const Mat& other) const = default;
};

}  // namespace unitcorr
