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

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace meterguard {

// Every randomized operation draws through this interface so tests can
// substitute a seeded or fully scripted source.
class RandomSource {
 public:
  virtual ~RandomSource() = default;

  virtual std::uint64_t next_u64() = 0;

  // Uniform on the open interval (0, 1); never returns 0 or 1.
  virtual double uniform01();

  // Standard normal draw (Box-Muller over two uniform01 draws).
  virtual double standard_normal();

  // Uniform on [0, bound) by rejection; bound must be non-zero.
  std::uint64_t uniform_below(std::uint64_t bound);

  void fill_bytes(std::span<std::uint8_t> out);
};

// Deterministic generator for simulations and reproducible releases.
class SeededRng final : public RandomSource {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next_u64() override { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// OS-entropy backed CSPRNG; the production default.
class SecureRng final : public RandomSource {
 public:
  std::uint64_t next_u64() override;
};

// Replays fixed values, cycling when a script runs out. A channel with an
// empty script throws std::logic_error when drawn.
class ScriptedRng final : public RandomSource {
 public:
  struct Script {
    std::vector<std::uint64_t> words;
    std::vector<double> uniforms;
    std::vector<double> normals;
  };

  explicit ScriptedRng(Script script) : script_(std::move(script)) {}
  static ScriptedRng uniforms(std::vector<double> values);
  static ScriptedRng normals(std::vector<double> values);
  static ScriptedRng words(std::vector<std::uint64_t> values);

  std::uint64_t next_u64() override;
  double uniform01() override;
  double standard_normal() override;

 private:
  Script script_;
  std::size_t word_pos_ = 0;
  std::size_t uniform_pos_ = 0;
  std::size_t normal_pos_ = 0;
};

// Derives an independent 64-bit sub-seed from a base seed and a label, so
// per-client or per-household streams do not depend on scheduling order.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

}  // namespace meterguard
