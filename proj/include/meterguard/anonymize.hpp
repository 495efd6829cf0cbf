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

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "meterguard/meterdata.hpp"

namespace meterguard::anonymize {

using meterdata::EnergyQuantity;

// Keyed, epoch-scoped pseudonym secret. Deliberately has no serializer;
// load it from a raw 32-byte key file and keep it out of every output.
struct PseudonymKey {
  std::array<std::uint8_t, 32> secret{};
  std::uint64_t epoch = 0;
};

PseudonymKey load_pseudonym_key(const std::string& path, std::uint64_t epoch);

// HMAC-SHA256(secret, epoch_be64 || real_id) truncated to 128 bits, as 32
// lowercase hex characters. Throws kEmptyIdentifier for an empty id.
std::string pseudonymize(std::string_view real_id, const PseudonymKey& key);

// Replaces every meter id in the dataset with its pseudonym.
meterdata::FeederDataset pseudonymize_dataset(
    const meterdata::FeederDataset& dataset, const PseudonymKey& key);

struct GeneralizationRule {
  EnergyQuantity energy_granularity = EnergyQuantity::from_milli(100);
  std::size_t zip_prefix_len = 3;
};

// Nearest multiple of the granularity, ties away from zero.
EnergyQuantity generalize(EnergyQuantity energy, const GeneralizationRule& rule);

// Keeps the first zip_prefix_len characters and masks the rest with '*'.
std::string generalize_zip(std::string_view zip, const GeneralizationRule& rule);

struct AggregationPolicy {
  std::size_t min_count = 1;
};

struct Aggregate {
  std::size_t count = 0;
  EnergyQuantity sum;
  double mean_kwh = 0.0;

  bool operator==(const Aggregate&) const = default;
};

// Carries no numeric field, so nothing about a small group can leak.
struct Suppressed {
  bool operator==(const Suppressed&) const = default;
};

using GroupResult = std::variant<Aggregate, Suppressed>;

std::map<std::string, GroupResult> aggregate_threshold(
    const std::map<std::string, std::vector<EnergyQuantity>>& groups,
    const AggregationPolicy& policy);

struct QuasiIdentifierRecord {
  std::vector<std::string> attributes;

  auto operator<=>(const QuasiIdentifierRecord&) const = default;
};

struct KAnonymityReport {
  bool pass = true;
  // Equivalence classes smaller than k, ordered by attribute tuple.
  std::vector<std::pair<std::vector<std::string>, std::size_t>>
      violating_classes;
};

// Throws kInvalidArgument when k < 1 or record arities differ.
KAnonymityReport check_k_anonymity(
    const std::vector<QuasiIdentifierRecord>& records, std::size_t k);

}  // namespace meterguard::anonymize
