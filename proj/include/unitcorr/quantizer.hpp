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

#include <cstdint>
#include <string>
#include <vector>

#include "unitcorr/mat.hpp"

namespace unitcorr::quantizer {

struct Codebook {
  Mat<double> centroids;  // V x d
  double inertia = 0.0;   // final sum of squared distances

  size_t clusters() const { return centroids.rows; }
  size_t dim() const { return centroids.cols; }

  void save(const std::string& path) const;
  static Codebook load(const std::string& path);
};

// k-means++ seeding followed by Lloyd iterations until the relative inertia
// improvement drops below tol or max_iters is reached. Distances accumulate
// in double. Empty clusters are reseeded to the point currently farthest
// from its centroid. The objective is asserted non-increasing after every
// iteration; the stored inertia is exactly the inertia of assign() on the
// returned centroids. n_init independent seedings are run (from streams
// derived off `seed`) and the lowest final inertia wins, which rides out
// unlucky initializations on imbalanced cluster populations.
Codebook fit_kmeans(const Mat<float>& frames, int32_t v, int32_t max_iters, double tol,
                    uint64_t seed, int32_t n_init = 10);

// Frame-wise argmin squared euclidean distance; ties resolve to the lowest
// centroid index.
std::vector<int32_t> assign(const Codebook& codebook, const Mat<float>& frames);

// Sum of squared distances of each frame to its assigned centroid.
double compute_inertia(const Codebook& codebook, const Mat<float>& frames);

}  // namespace unitcorr::quantizer
