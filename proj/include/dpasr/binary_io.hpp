// Copyright 2026 The dpasr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef DPASR_BINARY_IO_HPP_
#define DPASR_BINARY_IO_HPP_

// Little-endian binary helpers shared by the corpus container, checkpoints
// and embedding dumps.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "dpasr/error.hpp"

namespace dpasr::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written in host order and assume a little-endian host");

template <typename T>
void WritePod(std::ostream &os, const T &v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T ReadPod(std::istream &is) {
  static_assert(std::is_trivially_copyable_v<T>);
  T v{};
  is.read(reinterpret_cast<char *>(&v), sizeof(T));
  if (!is) throw ParseError("unexpected end of binary stream");
  return v;
}

template <typename T>
void WriteArray(std::ostream &os, const T *data, std::size_t n) {
  os.write(reinterpret_cast<const char *>(data), static_cast<std::streamsize>(n * sizeof(T)));
}

template <typename T>
std::vector<T> ReadArray(std::istream &is, std::size_t n) {
  std::vector<T> v(n);
  is.read(reinterpret_cast<char *>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!is) throw ParseError("unexpected end of binary stream");
  return v;
}

inline void WriteString(std::ostream &os, const std::string &s) {
  WritePod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string ReadString(std::istream &is) {
  const auto n = ReadPod<std::uint32_t>(is);
  if (n > (1u << 28)) throw ParseError("string length field is implausible");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw ParseError("unexpected end of binary stream");
  return s;
}

inline void ExpectMagic(std::istream &is, const char (&magic)[5], const std::string &what) {
  char buf[4];
  is.read(buf, 4);
  if (!is || std::string(buf, 4) != std::string(magic, 4))
    throw ParseError(what + ": bad magic, not a " + std::string(magic, 4) + " file");
}

}  // namespace dpasr::io

#endif  // DPASR_BINARY_IO_HPP_
