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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>

// Data-parallel inner loops, each in two builds: a plain serial reference
// (the _serial twins, kept for tests and the benchmark) and an OpenMP
// version parallelised over independent output elements. Every output
// element is produced by exactly one thread and its reduction runs in a
// fixed index order, so results are bit-identical for any worker count.
// That property carries the pipeline-level guarantee that --jobs 1 and
// --jobs N write identical artifacts.

namespace unitcorr::kernels {

// Worker cap for all kernels and parallel_for. 1 selects the serial path.
int jobs();
void set_jobs(int n);

// C[m x n] = A[m x k] * B[k x n]
template <class T>
void matmul_nn_serial(const T* a, const T* b, T* c, size_t m, size_t k, size_t n);
template <class T>
void matmul_nn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n);

// C[m x n] = A^T * B with A stored [k x m], B [k x n]
template <class T>
void matmul_tn_serial(const T* a, const T* b, T* c, size_t m, size_t k, size_t n);
template <class T>
void matmul_tn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n);

// C[m x n] = A * B^T with A stored [m x k], B [n x k]
template <class T>
void matmul_nt_serial(const T* a, const T* b, T* c, size_t m, size_t k, size_t n);
template <class T>
void matmul_nt(const T* a, const T* b, T* c, size_t m, size_t k, size_t n);

// Row-wise softmax in place, max-subtracted for stability.
template <class T>
void softmax_rows_serial(T* x, size_t rows, size_t cols);
template <class T>
void softmax_rows(T* x, size_t rows, size_t cols);

// Squared-euclidean nearest centroid per frame; distances accumulate in
// double regardless of the frame type. Ties resolve to the lowest index.
void nearest_centroids_serial(const float* frames, size_t n, const double* centroids, size_t v,
                              size_t d, int32_t* out_idx, double* out_sqdist);
void nearest_centroids(const float* frames, size_t n, const double* centroids, size_t v, size_t d,
                       int32_t* out_idx, double* out_sqdist);

// Runs f(i) for i in [0, n). Iterations must be independent; each index is
// handled by exactly one worker.
void parallel_for(size_t n, const std::function<void(size_t)>& f);

// ---- inline template definitions ----

template <class T>
void matmul_nn_serial(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (size_t j = 0; j < n; ++j) crow[j] = T(0);
    for (size_t p = 0; p < k; ++p) {
      T aip = a[i * k + p];
      const T* brow = b + p * n;
      for (size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <class T>
void matmul_nn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
  int64_t mm = static_cast<int64_t>(m);
#pragma omp parallel for num_threads(jobs()) schedule(static) if (jobs() > 1)
  for (int64_t i = 0; i < mm; ++i) {
    T* crow = c + i * n;
    for (size_t j = 0; j < n; ++j) crow[j] = T(0);
    for (size_t p = 0; p < k; ++p) {
      T aip = a[i * k + p];
      const T* brow = b + p * n;
      for (size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <class T>
void matmul_tn_serial(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (size_t j = 0; j < n; ++j) crow[j] = T(0);
    for (size_t p = 0; p < k; ++p) {
      T api = a[p * m + i];
      const T* brow = b + p * n;
      for (size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

template <class T>
void matmul_tn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
  int64_t mm = static_cast<int64_t>(m);
#pragma omp parallel for num_threads(jobs()) schedule(static) if (jobs() > 1)
  for (int64_t i = 0; i < mm; ++i) {
    T* crow = c + i * n;
    for (size_t j = 0; j < n; ++j) crow[j] = T(0);
    for (size_t p = 0; p < k; ++p) {
      T api = a[p * m + i];
      const T* brow = b + p * n;
      for (size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

template <class T>
void matmul_nt_serial(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = T(0);
      for (size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  }
}

template <class T>
void matmul_nt(const T* a, const T* b, T* c, size_t m, size_t k, size_t n) {
  int64_t mm = static_cast<int64_t>(m);
#pragma omp parallel for num_threads(jobs()) schedule(static) if (jobs() > 1)
  for (int64_t i = 0; i < mm; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = T(0);
      for (size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  }
}

template <class T>
inline void softmax_row_inplace(T* row, size_t cols) {
  T mx = row[0];
  for (size_t j = 1; j < cols; ++j)
    if (row[j] > mx) mx = row[j];
  T sum = T(0);
  for (size_t j = 0; j < cols; ++j) {
    row[j] = std::exp(row[j] - mx);
    sum += row[j];
  }
  T inv = T(1) / sum;
  for (size_t j = 0; j < cols; ++j) row[j] *= inv;
}

template <class T>
void softmax_rows_serial(T* x, size_t rows, size_t cols) {
  for (size_t i = 0; i < rows; ++i) softmax_row_inplace(x + i * cols, cols);
}

template <class T>
void softmax_rows(T* x, size_t rows, size_t cols) {
  int64_t rr = static_cast<int64_t>(rows);
#pragma omp parallel for num_threads(jobs()) schedule(static) if (jobs() > 1)
  for (int64_t i = 0; i < rr; ++i) softmax_row_inplace(x + i * cols, cols);
}

}  // namespace unitcorr::kernels
