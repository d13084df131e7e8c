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

#include "unitcorr/kernels.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace unitcorr::kernels {

namespace {
std::atomic<int> g_jobs{1};

#ifdef _OPENMP
// Kernels are routinely called from inside parallel_for bodies; a single
// active level keeps those inner regions on the encountering thread.
struct OmpInit {
  OmpInit() { omp_set_max_active_levels(1); }
} g_omp_init;
#endif

inline void nearest_one(const float* frame, const double* centroids, size_t v, size_t d,
                        int32_t* out_idx, double* out_sqdist) {
  double best = 0.0;
  int32_t best_idx = 0;
  for (size_t c = 0; c < v; ++c) {
    const double* cent = centroids + c * d;
    double dist = 0.0;
    for (size_t j = 0; j < d; ++j) {
      double diff = static_cast<double>(frame[j]) - cent[j];
      dist += diff * diff;
    }
    if (c == 0 || dist < best) {
      best = dist;
      best_idx = static_cast<int32_t>(c);
    }
  }
  *out_idx = best_idx;
  *out_sqdist = best;
}
}  // namespace

int jobs() { return g_jobs.load(std::memory_order_relaxed); }

void set_jobs(int n) { g_jobs.store(n < 1 ? 1 : n, std::memory_order_relaxed); }

void nearest_centroids_serial(const float* frames, size_t n, const double* centroids, size_t v,
                              size_t d, int32_t* out_idx, double* out_sqdist) {
  for (size_t i = 0; i < n; ++i)
    nearest_one(frames + i * d, centroids, v, d, out_idx + i, out_sqdist + i);
}

void nearest_centroids(const float* frames, size_t n, const double* centroids, size_t v, size_t d,
                       int32_t* out_idx, double* out_sqdist) {
  int64_t nn = static_cast<int64_t>(n);
#pragma omp parallel for num_threads(jobs()) schedule(static) if (jobs() > 1)
  for (int64_t i = 0; i < nn; ++i)
    nearest_one(frames + i * d, centroids, v, d, out_idx + i, out_sqdist + i);
}

void parallel_for(size_t n, const std::function<void(size_t)>& f) {
  int64_t nn = static_cast<int64_t>(n);
#pragma omp parallel for num_threads(jobs()) schedule(static) if (jobs() > 1)
  for (int64_t i = 0; i < nn; ++i) f(static_cast<size_t>(i));
}

}  // namespace unitcorr::kernels
