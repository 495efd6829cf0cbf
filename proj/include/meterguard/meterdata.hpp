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

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace meterguard::meterdata {

using EpochSeconds = std::int64_t;

inline constexpr std::int64_t kSecondsPerDay = 86'400;

// Fixed-point energy: one unit is 0.001 kWh. Arithmetic is exact; sums are
// overflow-checked where they can grow with the meter count.
class EnergyQuantity {
 public:
  constexpr EnergyQuantity() = default;

  static constexpr EnergyQuantity from_milli(std::int64_t milli_kwh) {
    return EnergyQuantity(milli_kwh);
  }
  // Rounds to the nearest milli-kWh, ties away from zero.
  static EnergyQuantity from_kwh(double kwh);
  // Exact decimal parse: optional sign, digits, up to 3 fractional digits.
  static std::optional<EnergyQuantity> parse_kwh(std::string_view text);

  constexpr std::int64_t milli_kwh() const { return milli_; }
  double kwh() const { return static_cast<double>(milli_) / 1000.0; }
  // Three fractional digits, e.g. "1.500", "-0.250".
  std::string to_kwh_string() const;

  // Throws Error(kOverflow) instead of wrapping.
  EnergyQuantity checked_add(EnergyQuantity other) const;

  constexpr EnergyQuantity operator+(EnergyQuantity o) const {
    return EnergyQuantity(milli_ + o.milli_);
  }
  constexpr EnergyQuantity operator-(EnergyQuantity o) const {
    return EnergyQuantity(milli_ - o.milli_);
  }
  constexpr auto operator<=>(const EnergyQuantity&) const = default;

 private:
  constexpr explicit EnergyQuantity(std::int64_t milli) : milli_(milli) {}
  std::int64_t milli_ = 0;
};

struct MeterReading {
  std::string meter_id;
  EpochSeconds timestamp = 0;
  std::int64_t interval_s = 0;
  EnergyQuantity energy;

  bool operator==(const MeterReading&) const = default;
};

struct ReadingSeries {
  std::string meter_id;
  std::vector<MeterReading> readings;

  bool operator==(const ReadingSeries&) const = default;
};

struct IngestConfig {
  std::int64_t interval_s = 3600;
  EnergyQuantity delta_max = EnergyQuantity::from_milli(5000);
};

// A validated collection of meter series sharing one interval length and a
// per-reading cap. The cap is the sensitivity bound used by the dp module.
class FeederDataset {
 public:
  FeederDataset() = default;
  // Sorts series by meter id and readings by time, then validates every
  // invariant. Throws Error with the violated condition's code.
  FeederDataset(std::vector<ReadingSeries> series, std::int64_t interval_s,
                EnergyQuantity delta_max);

  const std::vector<ReadingSeries>& series() const { return series_; }
  std::int64_t interval_s() const { return interval_s_; }
  EnergyQuantity delta_max() const { return delta_max_; }
  std::size_t reading_count() const;
  bool empty() const { return series_.empty(); }
  std::int64_t intervals_per_day() const { return kSecondsPerDay / interval_s_; }

  bool operator==(const FeederDataset&) const = default;

 private:
  std::vector<ReadingSeries> series_;
  std::int64_t interval_s_ = 3600;
  EnergyQuantity delta_max_ = EnergyQuantity::from_milli(5000);
};

// ISO-8601 UTC with a mandatory 'Z' suffix: YYYY-MM-DDTHH:MM:SSZ.
std::optional<EpochSeconds> parse_utc_timestamp(std::string_view text);
std::string format_utc_timestamp(EpochSeconds t);
int hour_of_day(EpochSeconds t);
std::int64_t day_index(EpochSeconds t);

// CSV with header `meter_id,timestamp,kwh`. Empty input yields an empty
// dataset. Blank lines are skipped; a trailing '\r' is tolerated.
FeederDataset parse_csv(std::string_view text, const IngestConfig& config);
FeederDataset parse_csv(std::istream& in, const IngestConfig& config);
FeederDataset load_csv(const std::string& path, const IngestConfig& config);

// Canonical form: header, then rows grouped by meter id and sorted by time.
std::string serialize_csv(const FeederDataset& dataset);

// Exact per-timestamp total across all series with a reading there.
std::map<EpochSeconds, EnergyQuantity> interval_totals(
    const FeederDataset& dataset);

}  // namespace meterguard::meterdata
