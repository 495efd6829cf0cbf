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

#include "meterguard/anonymize.hpp"

#include <fstream>
#include <iterator>

#include "meterguard/digest.hpp"
#include "meterguard/error.hpp"

namespace meterguard::anonymize {

PseudonymKey load_pseudonym_key(const std::string& path, std::uint64_t epoch) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kStorageFailure, "cannot open key " + path);
  const std::string bytes{std::istreambuf_iterator<char>(in),
                          std::istreambuf_iterator<char>()};
  if (bytes.size() != 32) {
    throw Error(ErrorCode::kInvalidArgument,
                "key file must hold exactly 32 raw bytes");
  }
  PseudonymKey key;
  key.epoch = epoch;
  for (std::size_t i = 0; i < 32; ++i) {
    key.secret[i] = static_cast<std::uint8_t>(bytes[i]);
  }
  return key;
}

std::string pseudonymize(std::string_view real_id, const PseudonymKey& key) {
  if (real_id.empty()) throw Error(ErrorCode::kEmptyIdentifier, "");
  std::vector<std::uint8_t> message;
  message.reserve(8 + real_id.size());
  for (int shift = 56; shift >= 0; shift -= 8) {
    message.push_back(static_cast<std::uint8_t>(key.epoch >> shift));
  }
  message.insert(message.end(), real_id.begin(), real_id.end());
  const Digest mac = hmac_sha256(key.secret, message);
  return to_hex(std::span(mac).first(16));
}

meterdata::FeederDataset pseudonymize_dataset(
    const meterdata::FeederDataset& dataset, const PseudonymKey& key) {
  std::vector<meterdata::ReadingSeries> out;
  out.reserve(dataset.series().size());
  for (const auto& s : dataset.series()) {
    meterdata::ReadingSeries p{pseudonymize(s.meter_id, key), s.readings};
    for (auto& r : p.readings) r.meter_id = p.meter_id;
    out.push_back(std::move(p));
  }
  return meterdata::FeederDataset(std::move(out), dataset.interval_s(),
                                  dataset.delta_max());
}

EnergyQuantity generalize(EnergyQuantity energy,
                          const GeneralizationRule& rule) {
  const std::int64_t step = rule.energy_granularity.milli_kwh();
  if (step <= 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "energy_granularity must be positive");
  }
  const std::int64_t v = energy.milli_kwh();
  const std::int64_t q = v / step;
  const std::int64_t r = v % step;  // same sign as v
  std::int64_t mult = q;
  // |r| >= step/2 rounds away from zero; 2|r| avoids integer halving.
  if (r != 0 && 2 * (r < 0 ? -r : r) >= step) mult += v < 0 ? -1 : 1;
  return EnergyQuantity::from_milli(mult * step);
}

std::string generalize_zip(std::string_view zip,
                           const GeneralizationRule& rule) {
  std::string out(zip);
  for (std::size_t i = rule.zip_prefix_len; i < out.size(); ++i) out[i] = '*';
  return out;
}

std::map<std::string, GroupResult> aggregate_threshold(
    const std::map<std::string, std::vector<EnergyQuantity>>& groups,
    const AggregationPolicy& policy) {
  if (policy.min_count < 1) {
    throw Error(ErrorCode::kInvalidArgument, "min_count must be >= 1");
  }
  std::map<std::string, GroupResult> out;
  for (const auto& [key, members] : groups) {
    if (members.size() < policy.min_count) {
      out.emplace(key, Suppressed{});
      continue;
    }
    EnergyQuantity sum;
    for (auto e : members) sum = sum.checked_add(e);
    out.emplace(key, Aggregate{members.size(), sum,
                               sum.kwh() / static_cast<double>(members.size())});
  }
  return out;
}

KAnonymityReport check_k_anonymity(
    const std::vector<QuasiIdentifierRecord>& records, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  std::map<std::vector<std::string>, std::size_t> classes;
  for (const auto& r : records) {
    if (r.attributes.size() != records.front().attributes.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "quasi-identifier arity differs across records");
    }
    ++classes[r.attributes];
  }
  KAnonymityReport report;
  for (const auto& [attrs, size] : classes) {
    if (size < k) report.violating_classes.emplace_back(attrs, size);
  }
  report.pass = report.violating_classes.empty();
  return report;
}

}  // namespace meterguard::anonymize
