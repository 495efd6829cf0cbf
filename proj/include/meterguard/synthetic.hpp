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
#include <string>
#include <vector>

#include "meterguard/meterdata.hpp"

namespace meterguard::synthetic {

using HourlyProfile = std::array<double, 24>;

// One behaviour group. Means and stds are in kWh per interval, indexed by the
// UTC hour of day the interval starts in.
struct ClusterProfile {
  double weight = 1.0;
  HourlyProfile hourly_mean{};
  HourlyProfile hourly_std{};
};

// Random appliance activations superimposed on the cluster baseline.
struct ApplianceEvents {
  double rate_per_day = 0.0;
  double magnitude_kwh = 1.0;
  std::int64_t duration_intervals = 1;
};

struct GeneratorModel {
  std::vector<ClusterProfile> clusters;
  ApplianceEvents appliance_events;
};

// Throws kInvalidArgument if weights do not sum to 1 (within 1e-9) or any
// std/rate is negative.
void validate(const GeneratorModel& model);

struct FitOptions {
  std::size_t iterations = 50;
  ApplianceEvents appliance_events;
};

// k-means (k-means++ seeding, fixed iteration count) over per-meter average
// daily profiles, then per-cluster hourly mean/std over member readings.
GeneratorModel fit(const meterdata::FeederDataset& real,
                   std::size_t n_clusters, std::uint64_t seed,
                   const FitOptions& options = {});

struct GenerateOptions {
  std::int64_t interval_s = 3600;
  meterdata::EpochSeconds start = 0;  // must fall on a UTC midnight
  meterdata::EnergyQuantity delta_max =
      meterdata::EnergyQuantity::from_milli(5000);
  // Post-generation uniform jitter of +/- this many milli-kWh.
  std::int64_t jitter_milli = 0;
  std::string id_prefix = "synth-";
};

// Values are clamped to [0, delta_max] so the output is a valid dataset.
// Household i draws from its own stream derived from (seed, i).
meterdata::FeederDataset generate(const GeneratorModel& model,
                                  std::size_t n_households, std::size_t n_days,
                                  std::uint64_t seed,
                                  const GenerateOptions& options = {});

struct FidelityReport {
  HourlyProfile per_hour_mean_rel_err{};
  double hist_l1 = 0.0;
  double peak_dist_rel_err = 0.0;
};

inline constexpr std::size_t kHistogramBins = 50;
// Denominator floor (kWh) for relative errors against near-zero real means.
inline constexpr double kRelErrFloor = 1e-6;

FidelityReport fidelity_report(const meterdata::FeederDataset& real,
                               const meterdata::FeederDataset& synth);

struct PrivacyCheckReport {
  double min_nn_distance = 0.0;
  bool memorization_flag = false;
  double distinguisher_auc = 0.5;
};

inline constexpr double kDefaultMemorizationThreshold = 0.01;

// RMS over position-aligned readings (first min(len) of each), divided by
// delta_max. Infinite when either series is empty.
double normalized_rms_distance(const meterdata::ReadingSeries& a,
                               const meterdata::ReadingSeries& b,
                               meterdata::EnergyQuantity delta_max);

// Members are the even-indexed real series (sorted by meter id) and the
// held-out set the odd-indexed ones. Nearest-neighbour distances cover all
// real series.
PrivacyCheckReport privacy_check(const meterdata::FeederDataset& real,
                                 const meterdata::FeederDataset& synth,
                                 double threshold);

// Explicit split: synth was fit on `training`; `holdout` was never seen.
PrivacyCheckReport privacy_check(const meterdata::FeederDataset& training,
                                 const meterdata::FeederDataset& holdout,
                                 const meterdata::FeederDataset& synth,
                                 double threshold);

// Mann-Whitney AUC that a member scores strictly lower than a non-member,
// ties counted half.
double membership_auc(std::vector<double> member_scores,
                      std::vector<double> nonmember_scores);

}  // namespace meterguard::synthetic
