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

#include <cstdint>
#include <string>
#include <vector>

#include "meterguard/meterdata.hpp"

namespace meterguard::testsupport {

// 2024-01-01T00:00:00Z
inline constexpr meterdata::EpochSeconds kFixtureStart = 1'704'067'200;

meterdata::ReadingSeries series_of(const std::string& meter_id,
                                   meterdata::EpochSeconds start,
                                   std::int64_t interval_s,
                                   const std::vector<std::int64_t>& milli_kwh);

// Every meter reports one reading at kFixtureStart.
meterdata::FeederDataset snapshot(const std::vector<std::int64_t>& milli_kwh,
                                  std::int64_t delta_max_milli = 5000);

// Households split roughly evenly between an evening/night-heavy and a
// daytime-heavy profile, hourly readings, Gaussian jitter of 0.15 kWh.
meterdata::FeederDataset two_cluster_fixture(std::size_t households = 1000,
                                             std::size_t days = 7,
                                             std::uint64_t seed = 20240101);

// Mean hourly profiles used by two_cluster_fixture, in kWh.
double night_profile_kwh(int hour);
double day_profile_kwh(int hour);

// 15-minute readings with a daily cycle, so the seasonal lag feature exists.
meterdata::FeederDataset quarter_hour_fixture(std::size_t meters = 8,
                                              std::size_t days = 3,
                                              std::uint64_t seed = 7);

}  // namespace meterguard::testsupport
