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

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "unitcorr/error.hpp"

// Little-endian binary primitives shared by the ACFT / KMCB / ENCP formats.
// Bytes are assembled explicitly so the host byte order never leaks in.

namespace unitcorr::io {

inline void write_u8(std::ostream& os, uint8_t v) { os.put(static_cast<char>(v)); }

inline void write_u16_le(std::ostream& os, uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF)};
  os.write(b, 2);
}

inline void write_u32_le(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

inline void write_u64_le(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

inline void write_f32_le(std::ostream& os, float v) { write_u32_le(os, std::bit_cast<uint32_t>(v)); }
inline void write_f64_le(std::ostream& os, double v) { write_u64_le(os, std::bit_cast<uint64_t>(v)); }

inline void write_f32_span_le(std::ostream& os, std::span<const float> vals) {
  for (float v : vals) write_f32_le(os, v);
}

inline void write_f64_span_le(std::ostream& os, std::span<const double> vals) {
  for (double v : vals) write_f64_le(os, v);
}

inline void read_bytes(std::istream& is, char* dst, size_t n, const char* what) {
  is.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n) throw IoError(std::string("io: truncated read of ") + what);
}

inline uint8_t read_u8(std::istream& is, const char* what = "u8") {
  char b;
  read_bytes(is, &b, 1, what);
  return static_cast<uint8_t>(b);
}

inline uint16_t read_u16_le(std::istream& is, const char* what = "u16") {
  char b[2];
  read_bytes(is, b, 2, what);
  return static_cast<uint16_t>(static_cast<uint8_t>(b[0]) | (static_cast<uint16_t>(static_cast<uint8_t>(b[1])) << 8));
}

inline uint32_t read_u32_le(std::istream& is, const char* what = "u32") {
  char b[4];
  read_bytes(is, b, 4, what);
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<uint8_t>(b[i]);
  return v;
}

inline uint64_t read_u64_le(std::istream& is, const char* what = "u64") {
  char b[8];
  read_bytes(is, b, 8, what);
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<uint8_t>(b[i]);
  return v;
}

inline float read_f32_le(std::istream& is, const char* what = "f32") {
  return std::bit_cast<float>(read_u32_le(is, what));
}

inline double read_f64_le(std::istream& is, const char* what = "f64") {
  return std::bit_cast<double>(read_u64_le(is, what));
}

inline void write_magic(std::ostream& os, const char magic[4]) { os.write(magic, 4); }

inline void expect_magic(std::istream& is, const char magic[4], const char* format_name) {
  char b[4];
  read_bytes(is, b, 4, "magic");
  if (std::memcmp(b, magic, 4) != 0)
    throw IoError(std::string("io: bad magic, expected ") + format_name + " file");
}

}  // namespace unitcorr::io
