/*
 * Copyright 2026 The Meterguard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "meterguard/random.hpp"

#include <openssl/rand.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>
#include <string>

#include "meterguard/digest.hpp"

namespace meterguard {

double RandomSource::uniform01() {
  // 52 bits plus a half-step offset: both ends stay exactly representable,
  // so neither 0 nor 1 can come out (53 bits would round up to 1.0).
  const std::uint64_t bits = next_u64() >> 12;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

double RandomSource::standard_normal() {
  const double u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RandomSource::uniform_below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_below: zero bound");
  // Reject the low tail of size (2^64 mod bound) to remove modulo bias.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x >= threshold) return x % bound;
  }
}

void RandomSource::fill_bytes(std::span<std::uint8_t> out) {
  std::size_t i = 0;
  while (i < out.size()) {
    const std::uint64_t word = next_u64();
    for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
      out[i] = static_cast<std::uint8_t>(word >> (8 * b));
    }
  }
}

std::uint64_t SecureRng::next_u64() {
  std::uint64_t value = 0;
  if (RAND_bytes(reinterpret_cast<unsigned char*>(&value), sizeof value) !=
      1) {
    throw std::runtime_error("SecureRng: RAND_bytes failed");
  }
  return value;
}

ScriptedRng ScriptedRng::uniforms(std::vector<double> values) {
  return ScriptedRng(Script{{}, std::move(values), {}});
}

ScriptedRng ScriptedRng::normals(std::vector<double> values) {
  return ScriptedRng(Script{{}, {}, std::move(values)});
}

ScriptedRng ScriptedRng::words(std::vector<std::uint64_t> values) {
  return ScriptedRng(Script{std::move(values), {}, {}});
}

namespace {

template <typename T>
T next_cyclic(const std::vector<T>& values, std::size_t& pos,
              const char* channel) {
  if (values.empty()) {
    throw std::logic_error(std::string("ScriptedRng: no scripted ") + channel);
  }
  const T v = values[pos % values.size()];
  ++pos;
  return v;
}

}  // namespace

std::uint64_t ScriptedRng::next_u64() {
  return next_cyclic(script_.words, word_pos_, "words");
}

double ScriptedRng::uniform01() {
  return next_cyclic(script_.uniforms, uniform_pos_, "uniforms");
}

double ScriptedRng::standard_normal() {
  return next_cyclic(script_.normals, normal_pos_, "normals");
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  std::string material(8, '\0');
  for (int b = 0; b < 8; ++b) {
    material[b] = static_cast<char>(base >> (8 * b));
  }
  material.append(label);
  const Digest d = sha256(material);
  std::uint64_t out = 0;
  std::memcpy(&out, d.data(), sizeof out);
  return out;
}

}  // namespace meterguard
