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

#include "unitcorr/quantizer.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "unitcorr/error.hpp"
#include "unitcorr/io.hpp"
#include "unitcorr/kernels.hpp"
#include "unitcorr/rng.hpp"

namespace unitcorr::quantizer {

namespace {

double sq_dist(const float* frame, const double* center, size_t d) {
  double acc = 0.0;
  for (size_t j = 0; j < d; ++j) {
    double diff = static_cast<double>(frame[j]) - center[j];
    acc += diff * diff;
  }
  return acc;
}

// Seeding: first center uniform, then D^2-weighted draws.
Mat<double> kmeanspp_init(const Mat<float>& frames, size_t v, Rng& rng) {
  size_t n = frames.rows, d = frames.cols;
  Mat<double> centers(v, d);

  size_t first = rng.next_index(n);
  for (size_t j = 0; j < d; ++j) centers(0, j) = static_cast<double>(frames(first, j));

  std::vector<double> d2(n);
  kernels::parallel_for(n, [&](size_t i) { d2[i] = sq_dist(frames.row(i), centers.row(0), d); });

  for (size_t c = 1; c < v; ++c) {
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) total += d2[i];
    size_t pick;
    if (total <= 0.0) {
      pick = rng.next_index(n);
    } else {
      double u = rng.next_double() * total;
      double acc = 0.0;
      pick = n - 1;
      for (size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    }
    for (size_t j = 0; j < d; ++j) centers(c, j) = static_cast<double>(frames(pick, j));
    kernels::parallel_for(n, [&](size_t i) {
      double dist = sq_dist(frames.row(i), centers.row(c), d);
      if (dist < d2[i]) d2[i] = dist;
    });
  }
  return centers;
}

}  // namespace

namespace {

Codebook fit_kmeans_single(const Mat<float>& frames, int32_t v, int32_t max_iters, double tol,
                           Rng rng) {
  size_t n = frames.rows, d = frames.cols;
  Mat<double> centers = kmeanspp_init(frames, static_cast<size_t>(v), rng);

  std::vector<int32_t> idx(n);
  std::vector<double> sqd(n);
  auto assign_pass = [&]() {
    kernels::nearest_centroids(frames.data.data(), n, centers.data.data(),
                               static_cast<size_t>(v), d, idx.data(), sqd.data());
    double inertia = 0.0;
    for (size_t i = 0; i < n; ++i) inertia += sqd[i];
    return inertia;
  };

  double prev_inertia = assign_pass();

  for (int32_t iter = 0; iter < max_iters; ++iter) {
    // Centroid update: bucket members serially, then reduce each cluster in
    // frame-index order so the means are worker-count independent.
    std::vector<std::vector<size_t>> members(static_cast<size_t>(v));
    for (size_t i = 0; i < n; ++i) members[static_cast<size_t>(idx[i])].push_back(i);

    kernels::parallel_for(static_cast<size_t>(v), [&](size_t c) {
      if (members[c].empty()) return;  // handled below
      double* row = centers.row(c);
      for (size_t j = 0; j < d; ++j) row[j] = 0.0;
      for (size_t i : members[c])
        for (size_t j = 0; j < d; ++j) row[j] += static_cast<double>(frames(i, j));
      double inv = 1.0 / static_cast<double>(members[c].size());
      for (size_t j = 0; j < d; ++j) row[j] *= inv;
    });

    // Reseed empty clusters to the point farthest from its centroid
    // (lowest index on ties), one point per empty cluster.
    std::vector<uint8_t> taken(n, 0);
    for (size_t c = 0; c < static_cast<size_t>(v); ++c) {
      if (!members[c].empty()) continue;
      double far_dist = -1.0;
      size_t far_idx = 0;
      for (size_t i = 0; i < n; ++i) {
        if (!taken[i] && sqd[i] > far_dist) {
          far_dist = sqd[i];
          far_idx = i;
        }
      }
      taken[far_idx] = 1;
      for (size_t j = 0; j < d; ++j) centers(c, j) = static_cast<double>(frames(far_idx, j));
    }

    double inertia = assign_pass();
    require(inertia <= prev_inertia * (1.0 + 1e-12) + 1e-12,
            "quantizer: objective increased during Lloyd iteration");
    bool converged = prev_inertia <= 0.0 || (prev_inertia - inertia) < tol * prev_inertia;
    prev_inertia = inertia;
    if (converged) break;
  }

  Codebook book;
  book.centroids = std::move(centers);
  book.inertia = prev_inertia;
  return book;
}

}  // namespace

Codebook fit_kmeans(const Mat<float>& frames, int32_t v, int32_t max_iters, double tol,
                    uint64_t seed, int32_t n_init) {
  require(v >= 1, "quantizer: cluster count must be >= 1");
  require(n_init >= 1, "quantizer: n_init must be >= 1");
  require(frames.rows >= static_cast<size_t>(v), "quantizer: fewer frames than clusters");
  for (float x : frames.data)
    require(std::isfinite(x), "quantizer: non-finite feature value");

  Rng root(seed);
  Codebook best;
  for (int32_t trial = 0; trial < n_init; ++trial) {
    Codebook book =
        fit_kmeans_single(frames, v, max_iters, tol, root.derive(static_cast<uint64_t>(trial)));
    if (trial == 0 || book.inertia < best.inertia) best = std::move(book);
  }
  return best;
}

std::vector<int32_t> assign(const Codebook& codebook, const Mat<float>& frames) {
  require(frames.cols == codebook.dim(), "quantizer: feature dimension mismatch");
  std::vector<int32_t> idx(frames.rows);
  std::vector<double> sqd(frames.rows);
  kernels::nearest_centroids(frames.data.data(), frames.rows, codebook.centroids.data.data(),
                             codebook.clusters(), codebook.dim(), idx.data(), sqd.data());
  return idx;
}

double compute_inertia(const Codebook& codebook, const Mat<float>& frames) {
  require(frames.cols == codebook.dim(), "quantizer: feature dimension mismatch");
  std::vector<int32_t> idx(frames.rows);
  std::vector<double> sqd(frames.rows);
  kernels::nearest_centroids(frames.data.data(), frames.rows, codebook.centroids.data.data(),
                             codebook.clusters(), codebook.dim(), idx.data(), sqd.data());
  double total = 0.0;
  for (double x : sqd) total += x;
  return total;
}

void Codebook::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("quantizer: cannot open " + path + " for writing");
  io::write_magic(os, "KMCB");
  io::write_u32_le(os, 1);
  io::write_u32_le(os, static_cast<uint32_t>(centroids.rows));
  io::write_u32_le(os, static_cast<uint32_t>(centroids.cols));
  io::write_f64_span_le(os, {centroids.data.data(), centroids.data.size()});
  io::write_f64_le(os, inertia);
  if (!os) throw IoError("quantizer: short write to " + path);
}

Codebook Codebook::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("quantizer: cannot open " + path);
  io::expect_magic(is, "KMCB", "KMCB codebook");
  uint32_t version = io::read_u32_le(is, "version");
  if (version != 1) throw IoError("quantizer: unsupported KMCB version in " + path);
  uint32_t v = io::read_u32_le(is, "clusters");
  uint32_t d = io::read_u32_le(is, "dim");
  Codebook book;
  book.centroids = Mat<double>(v, d);
  for (size_t i = 0; i < book.centroids.data.size(); ++i)
    book.centroids.data[i] = io::read_f64_le(is, "centroid");
  book.inertia = io::read_f64_le(is, "inertia");
  for (double x : book.centroids.data)
    require(std::isfinite(x), "quantizer: non-finite centroid in " + path);
  return book;
}

}  // namespace unitcorr::quantizer
