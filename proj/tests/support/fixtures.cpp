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

#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "meterguard/random.hpp"

namespace meterguard::testsupport {

using meterdata::EnergyQuantity;
using meterdata::FeederDataset;
using meterdata::MeterReading;
using meterdata::ReadingSeries;

namespace {

std::string padded(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
  return buf;
}

}  // namespace

ReadingSeries series_of(const std::string& meter_id, meterdata::EpochSeconds start,
                        std::int64_t interval_s, const std::vector<std::int64_t>& milli) {
  ReadingSeries s{meter_id, {}};
  for (std::size_t i = 0; i < milli.size(); ++i) {
    s.readings.push_back(MeterReading{meter_id,
                                      start + static_cast<std::int64_t>(i) * interval_s,
                                      interval_s, EnergyQuantity::from_milli(milli[i])});
  }
  return s;
}

FeederDataset snapshot(const std::vector<std::int64_t>& milli, std::int64_t delta_max_milli) {
  std::vector<ReadingSeries> series;
  for (std::size_t i = 0; i < milli.size(); ++i) {
    series.push_back(series_of(padded("m", i), kFixtureStart, 3600, {milli[i]}));
  }
  return FeederDataset(std::move(series), 3600, EnergyQuantity::from_milli(delta_max_milli));
}

double night_profile_kwh(int hour) {
  return (hour <= 6 || hour >= 19) ? 1.5 : 0.4;
}

double day_profile_kwh(int hour) {
  return (hour >= 8 && hour <= 17) ? 1.4 : 0.3;
}

FeederDataset two_cluster_fixture(std::size_t households, std::size_t days,
                                  std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<ReadingSeries> series;
  series.reserve(households);
  for (std::size_t h = 0; h < households; ++h) {
    const bool night = rng.uniform01() < 0.5;
    std::vector<std::int64_t> milli;
    milli.reserve(days * 24);
    for (std::size_t t = 0; t < days * 24; ++t) {
      const int hour = static_cast<int>(t % 24);
      const double mean = night ? night_profile_kwh(hour) : day_profile_kwh(hour);
      const double v = std::clamp(mean + 0.15 * rng.standard_normal(), 0.0, 5.0);
      milli.push_back(std::llround(v * 1000.0));
    }
    series.push_back(series_of(padded("house-", h), kFixtureStart, 3600, milli));
  }
  return FeederDataset(std::move(series), 3600, EnergyQuantity::from_milli(5000));
}

FeederDataset quarter_hour_fixture(std::size_t meters, std::size_t days, std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<ReadingSeries> series;
  const std::size_t n = days * 96;
  for (std::size_t m = 0; m < meters; ++m) {
    const double base = 0.1 + 0.05 * static_cast<double>(m % 4);
    std::vector<std::int64_t> milli;
    for (std::size_t t = 0; t < n; ++t) {
      const double phase = 2.0 * std::numbers::pi * static_cast<double>(t % 96) / 96.0;
      const double v = base + 0.12 * (1.0 - std::cos(phase)) + 0.03 * rng.standard_normal();
      milli.push_back(std::llround(std::clamp(v, 0.0, 1.0) * 1000.0));
    }
    series.push_back(series_of(padded("qm-", m), kFixtureStart, 900, milli));
  }
  return FeederDataset(std::move(series), 900, EnergyQuantity::from_milli(5000));
}

}  // namespace meterguard::testsupport
