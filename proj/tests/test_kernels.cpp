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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <sstream>

#include "test_util.hpp"
#include "unitcorr/io.hpp"
#include "unitcorr/kernels.hpp"
#include "unitcorr/rng.hpp"

using namespace unitcorr;

namespace {

struct JobsGuard {
  explicit JobsGuard(int n) { kernels::set_jobs(n); }
  ~JobsGuard() { kernels::set_jobs(1); }
};

template <class T>
std::vector<T> random_vec(Rng& rng, size_t n, double scale = 1.0) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(scale * (rng.next_double() * 2.0 - 1.0));
  return v;
}

}  // namespace

TEST_CASE("matmul semantics on a hand example") {
  // A = [[1,2],[3,4],[5,6]] (3x2), B = [[7,8,9],[10,11,12]] (2x3)
  std::vector<double> a = {1, 2, 3, 4, 5, 6};
  std::vector<double> b = {7, 8, 9, 10, 11, 12};
  std::vector<double> c(9);
  kernels::matmul_nn_serial(a.data(), b.data(), c.data(), 3, 2, 3);
  CHECK(c == std::vector<double>{27, 30, 33, 61, 68, 75, 95, 106, 117});

  // A^T * A with A stored 3x2 gives a 2x2 gram matrix
  std::vector<double> g(4);
  kernels::matmul_tn_serial(a.data(), a.data(), g.data(), 2, 3, 2);
  CHECK(g == std::vector<double>{35, 44, 44, 56});

  // B * B^T with B stored 2x3 gives 2x2
  std::vector<double> h(4);
  kernels::matmul_nt_serial(b.data(), b.data(), h.data(), 2, 3, 2);
  CHECK(h == std::vector<double>{194, 266, 266, 365});
}

TEST_CASE("parallel kernels match the serial reference bit for bit") {
  Rng rng(3);
  JobsGuard guard(4);
  for (int trial = 0; trial < 20; ++trial) {
    size_t m = 1 + rng.next_index(17), k = 1 + rng.next_index(17), n = 1 + rng.next_index(17);
    auto a = random_vec<float>(rng, m * k);
    auto b = random_vec<float>(rng, k * n);
    std::vector<float> c_ser(m * n), c_par(m * n);

    kernels::matmul_nn_serial(a.data(), b.data(), c_ser.data(), m, k, n);
    kernels::matmul_nn(a.data(), b.data(), c_par.data(), m, k, n);
    CHECK(c_ser == c_par);

    auto at = random_vec<float>(rng, k * m);
    kernels::matmul_tn_serial(at.data(), b.data(), c_ser.data(), m, k, n);
    kernels::matmul_tn(at.data(), b.data(), c_par.data(), m, k, n);
    CHECK(c_ser == c_par);

    auto bt = random_vec<float>(rng, n * k);
    kernels::matmul_nt_serial(a.data(), bt.data(), c_ser.data(), m, k, n);
    kernels::matmul_nt(a.data(), bt.data(), c_par.data(), m, k, n);
    CHECK(c_ser == c_par);

    auto x_ser = random_vec<double>(rng, m * n, 4.0);
    auto x_par = x_ser;
    kernels::softmax_rows_serial(x_ser.data(), m, n);
    kernels::softmax_rows(x_par.data(), m, n);
    CHECK(x_ser == x_par);
  }
}

TEST_CASE("softmax rows are normalized") {
  Rng rng(5);
  auto x = random_vec<double>(rng, 6 * 9, 10.0);
  kernels::softmax_rows(x.data(), 6, 9);
  for (size_t i = 0; i < 6; ++i) {
    double sum = 0;
    for (size_t j = 0; j < 9; ++j) {
      CHECK(x[i * 9 + j] >= 0.0);
      sum += x[i * 9 + j];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("nearest centroid picks argmin with low-index ties") {
  // frame at origin equidistant from centroids 1 and 3
  std::vector<float> frames = {0.0f};
  std::vector<double> centroids = {5.0, -1.0, 2.0, 1.0};
  int32_t idx = -1;
  double dist = 0;
  kernels::nearest_centroids(frames.data(), 1, centroids.data(), 4, 1, &idx, &dist);
  CHECK(idx == 1);
  CHECK(dist == 1.0);
}

TEST_CASE("nearest centroid parallel equals serial") {
  Rng rng(9);
  JobsGuard guard(4);
  auto frames = random_vec<float>(rng, 64 * 5);
  auto cents = random_vec<double>(rng, 7 * 5);
  std::vector<int32_t> i_ser(64), i_par(64);
  std::vector<double> d_ser(64), d_par(64);
  kernels::nearest_centroids_serial(frames.data(), 64, cents.data(), 7, 5, i_ser.data(),
                                    d_ser.data());
  kernels::nearest_centroids(frames.data(), 64, cents.data(), 7, 5, i_par.data(), d_par.data());
  CHECK(i_ser == i_par);
  CHECK(d_ser == d_par);
}

TEST_CASE("parallel_for touches every index exactly once") {
  JobsGuard guard(4);
  std::vector<std::atomic<int>> hits(257);
  kernels::parallel_for(257, [&](size_t i) { hits[i].fetch_add(1); });
  for (auto& h : hits) CHECK(h.load() == 1);
}

TEST_CASE("rng matches the published splitmix64 vectors") {
  Rng rng(0);
  CHECK(rng.next_u64() == 0xE220A8397B1DCDAFull);
  CHECK(rng.next_u64() == 0x6E789E6AA1B965F4ull);
  CHECK(rng.next_u64() == 0x06C45D188009454Full);
}

TEST_CASE("rng streams are independent of parent consumption") {
  Rng a(42);
  Rng b(42);
  (void)a.next_u64();
  (void)a.next_u64();
  CHECK(a.derive(7).next_u64() == b.derive(7).next_u64());
  CHECK(a.derive(7).next_u64() != b.derive(8).next_u64());
}

TEST_CASE("rng draws stay in range") {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    double u = rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    int64_t v = rng.next_int(-3, 5);
    CHECK(v >= -3);
    CHECK(v <= 5);
  }
}

TEST_CASE("little-endian io round-trips and byte layout") {
  std::ostringstream os;
  io::write_u32_le(os, 0x01020304u);
  io::write_u64_le(os, 0x1122334455667788ull);
  io::write_f32_le(os, 1.5f);
  io::write_f64_le(os, -0.125);
  std::string bytes = os.str();
  CHECK(static_cast<uint8_t>(bytes[0]) == 0x04);
  CHECK(static_cast<uint8_t>(bytes[1]) == 0x03);
  CHECK(static_cast<uint8_t>(bytes[2]) == 0x02);
  CHECK(static_cast<uint8_t>(bytes[3]) == 0x01);
  std::istringstream is(bytes);
  CHECK(io::read_u32_le(is) == 0x01020304u);
  CHECK(io::read_u64_le(is) == 0x1122334455667788ull);
  CHECK(io::read_f32_le(is) == 1.5f);
  CHECK(io::read_f64_le(is) == -0.125);
  CHECK_THROWS_AS(io::read_u32_le(is), IoError);  // exhausted
}
