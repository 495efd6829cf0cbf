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

#include "meterguard/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "meterguard/error.hpp"
#include "meterguard/random.hpp"

namespace meterguard::synthetic {

using meterdata::EnergyQuantity;
using meterdata::FeederDataset;
using meterdata::ReadingSeries;

void validate(const GeneratorModel& model) {
  if (model.clusters.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "model has no clusters");
  }
  double total = 0.0;
  for (const auto& c : model.clusters) {
    if (!(c.weight >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "negative cluster weight");
    }
    total += c.weight;
    for (int h = 0; h < 24; ++h) {
      if (!(c.hourly_std[h] >= 0.0) || !std::isfinite(c.hourly_mean[h])) {
        throw Error(ErrorCode::kInvalidArgument, "invalid hourly profile");
      }
    }
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "cluster weights must sum to 1");
  }
  const auto& ev = model.appliance_events;
  if (!(ev.rate_per_day >= 0.0) || !(ev.magnitude_kwh > 0.0) ||
      ev.duration_intervals < 1) {
    throw Error(ErrorCode::kInvalidArgument, "invalid appliance events");
  }
}

namespace {

double squared_distance(const HourlyProfile& a, const HourlyProfile& b) {
  double d = 0.0;
  for (int h = 0; h < 24; ++h) d += (a[h] - b[h]) * (a[h] - b[h]);
  return d;
}

std::size_t nearest_centroid(const HourlyProfile& p,
                             const std::vector<HourlyProfile>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

bool has_full_day(const ReadingSeries& s, std::int64_t per_day) {
  std::map<std::int64_t, std::int64_t> per_day_count;
  for (const auto& r : s.readings) {
    if (++per_day_count[meterdata::day_index(r.timestamp)] == per_day) {
      return true;
    }
  }
  return false;
}

HourlyProfile average_daily_profile(const ReadingSeries& s) {
  HourlyProfile sum{};
  std::array<std::size_t, 24> count{};
  for (const auto& r : s.readings) {
    const int h = meterdata::hour_of_day(r.timestamp);
    sum[h] += r.energy.kwh();
    ++count[h];
  }
  for (int h = 0; h < 24; ++h) {
    if (count[h] > 0) sum[h] /= static_cast<double>(count[h]);
  }
  return sum;
}

std::vector<HourlyProfile> kmeans_plus_plus_init(
    const std::vector<HourlyProfile>& points, std::size_t k,
    RandomSource& rng) {
  std::vector<HourlyProfile> centroids;
  centroids.push_back(points[rng.uniform_below(points.size())]);
  std::vector<double> d2(points.size());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = squared_distance(points[i], centroids[nearest_centroid(points[i], centroids)]);
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform01() * total;
      for (pick = 0; pick + 1 < points.size(); ++pick) {
        target -= d2[pick];
        if (target < 0.0) break;
      }
    } else {
      // All points coincide with existing centroids.
      pick = rng.uniform_below(points.size());
    }
    centroids.push_back(points[pick]);
  }
  return centroids;
}

}  // namespace

GeneratorModel fit(const FeederDataset& real, std::size_t n_clusters,
                   std::uint64_t seed, const FitOptions& options) {
  if (n_clusters < 1) {
    throw Error(ErrorCode::kInvalidArgument, "n_clusters must be >= 1");
  }
  if (real.series().size() < n_clusters) {
    throw Error(ErrorCode::kTooFewSeries,
                std::to_string(real.series().size()) + " series for " +
                    std::to_string(n_clusters) + " clusters");
  }
  const std::int64_t per_day = real.intervals_per_day();
  std::vector<HourlyProfile> profiles;
  profiles.reserve(real.series().size());
  for (const auto& s : real.series()) {
    if (s.readings.empty() || !has_full_day(s, per_day)) {
      throw Error(ErrorCode::kEmptySeries,
                  s.meter_id + " does not cover a full day");
    }
    profiles.push_back(average_daily_profile(s));
  }

  SeededRng rng(seed);
  std::vector<HourlyProfile> centroids =
      kmeans_plus_plus_init(profiles, n_clusters, rng);
  std::vector<std::size_t> assignment(profiles.size(), 0);
  for (std::size_t iter = 0; iter < options.iterations; ++iter) {
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      assignment[i] = nearest_centroid(profiles[i], centroids);
    }
    std::vector<HourlyProfile> sums(n_clusters, HourlyProfile{});
    std::vector<std::size_t> sizes(n_clusters, 0);
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      for (int h = 0; h < 24; ++h) sums[assignment[i]][h] += profiles[i][h];
      ++sizes[assignment[i]];
    }
    for (std::size_t c = 0; c < n_clusters; ++c) {
      if (sizes[c] == 0) continue;  // keep the previous centroid
      for (int h = 0; h < 24; ++h) {
        centroids[c][h] = sums[c][h] / static_cast<double>(sizes[c]);
      }
    }
  }
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    assignment[i] = nearest_centroid(profiles[i], centroids);
  }

  // Per-cluster moments over every member reading, by hour of day.
  std::vector<std::array<double, 24>> sum(n_clusters), sum_sq(n_clusters);
  std::vector<std::array<std::size_t, 24>> count(n_clusters);
  std::vector<std::size_t> members(n_clusters, 0);
  for (std::size_t i = 0; i < real.series().size(); ++i) {
    const std::size_t c = assignment[i];
    ++members[c];
    for (const auto& r : real.series()[i].readings) {
      const int h = meterdata::hour_of_day(r.timestamp);
      const double v = r.energy.kwh();
      sum[c][h] += v;
      sum_sq[c][h] += v * v;
      ++count[c][h];
    }
  }

  GeneratorModel model;
  model.appliance_events = options.appliance_events;
  for (std::size_t c = 0; c < n_clusters; ++c) {
    if (members[c] == 0) continue;
    ClusterProfile p;
    p.weight = static_cast<double>(members[c]) /
               static_cast<double>(real.series().size());
    for (int h = 0; h < 24; ++h) {
      if (count[c][h] == 0) continue;
      const double n = static_cast<double>(count[c][h]);
      const double mean = sum[c][h] / n;
      p.hourly_mean[h] = mean;
      p.hourly_std[h] = std::sqrt(std::max(0.0, sum_sq[c][h] / n - mean * mean));
    }
    model.clusters.push_back(p);
  }
  return model;
}

FeederDataset generate(const GeneratorModel& model, std::size_t n_households,
                       std::size_t n_days, std::uint64_t seed,
                       const GenerateOptions& options) {
  validate(model);
  const std::int64_t interval = options.interval_s;
  if (interval <= 0 || meterdata::kSecondsPerDay % interval != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "interval_s must be a positive divisor of one day");
  }
  if (options.start % meterdata::kSecondsPerDay != 0) {
    throw Error(ErrorCode::kInvalidArgument, "start must be a UTC midnight");
  }
  if (options.jitter_milli < 0) {
    throw Error(ErrorCode::kInvalidArgument, "jitter must be non-negative");
  }
  const std::size_t per_day =
      static_cast<std::size_t>(meterdata::kSecondsPerDay / interval);
  const std::size_t horizon = per_day * n_days;
  const std::int64_t cap = options.delta_max.milli_kwh();
  const auto& events = model.appliance_events;

  std::vector<ReadingSeries> out;
  out.reserve(n_households);
  const std::size_t width = std::to_string(n_households).size();
  std::vector<double> values(horizon);
  for (std::size_t i = 0; i < n_households; ++i) {
    SeededRng rng(derive_seed(seed, "household/" + std::to_string(i)));

    double u = rng.uniform01();
    std::size_t cluster = model.clusters.size() - 1;
    for (std::size_t c = 0; c < model.clusters.size(); ++c) {
      if (u < model.clusters[c].weight) {
        cluster = c;
        break;
      }
      u -= model.clusters[c].weight;
    }
    const ClusterProfile& profile = model.clusters[cluster];

    for (std::size_t j = 0; j < horizon; ++j) {
      const int h = meterdata::hour_of_day(
          options.start + static_cast<std::int64_t>(j) * interval);
      const double draw =
          profile.hourly_mean[h] + profile.hourly_std[h] * rng.standard_normal();
      values[j] = std::max(0.0, draw);
    }

    if (events.rate_per_day > 0.0 && horizon > 0) {
      // Poisson arrivals: exponential gaps measured in days.
      const double horizon_days = static_cast<double>(n_days);
      double t = -std::log(rng.uniform01()) / events.rate_per_day;
      while (t < horizon_days) {
        const auto first = static_cast<std::size_t>(t * static_cast<double>(per_day));
        for (std::int64_t k = 0; k < events.duration_intervals; ++k) {
          const std::size_t j = first + static_cast<std::size_t>(k);
          if (j < horizon) values[j] += events.magnitude_kwh;
        }
        t += -std::log(rng.uniform01()) / events.rate_per_day;
      }
    }

    std::string id = std::to_string(i);
    id.insert(0, width - id.size(), '0');
    id.insert(0, options.id_prefix);
    ReadingSeries s{id, {}};
    s.readings.reserve(horizon);
    for (std::size_t j = 0; j < horizon; ++j) {
      std::int64_t milli = std::llround(values[j] * 1000.0);
      if (options.jitter_milli > 0) {
        const auto span = static_cast<std::uint64_t>(2 * options.jitter_milli + 1);
        milli += static_cast<std::int64_t>(rng.uniform_below(span)) -
                 options.jitter_milli;
      }
      milli = std::clamp<std::int64_t>(milli, 0, cap);
      s.readings.push_back(meterdata::MeterReading{
          id, options.start + static_cast<std::int64_t>(j) * interval, interval,
          EnergyQuantity::from_milli(milli)});
    }
    out.push_back(std::move(s));
  }
  return FeederDataset(std::move(out), interval, options.delta_max);
}

namespace {

HourlyProfile hourly_means(const FeederDataset& d) {
  std::array<double, 24> sum{};
  std::array<std::size_t, 24> count{};
  for (const auto& s : d.series()) {
    for (const auto& r : s.readings) {
      const int h = meterdata::hour_of_day(r.timestamp);
      sum[h] += static_cast<double>(r.energy.milli_kwh());
      ++count[h];
    }
  }
  HourlyProfile out{};
  for (int h = 0; h < 24; ++h) {
    if (count[h] > 0) out[h] = sum[h] / static_cast<double>(count[h]) / 1000.0;
  }
  return out;
}

std::array<double, kHistogramBins> value_histogram(const FeederDataset& d,
                                                   EnergyQuantity range) {
  std::array<double, kHistogramBins> bins{};
  const double width = static_cast<double>(range.milli_kwh()) / kHistogramBins;
  std::size_t n = 0;
  for (const auto& s : d.series()) {
    for (const auto& r : s.readings) {
      auto b = static_cast<std::size_t>(
          static_cast<double>(r.energy.milli_kwh()) / width);
      bins[std::min(b, kHistogramBins - 1)] += 1.0;
      ++n;
    }
  }
  for (auto& b : bins) b /= static_cast<double>(n);
  return bins;
}

double mean_daily_peak(const FeederDataset& d) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& s : d.series()) {
    std::map<std::int64_t, std::int64_t> peaks;
    for (const auto& r : s.readings) {
      auto& p = peaks[meterdata::day_index(r.timestamp)];
      p = std::max(p, r.energy.milli_kwh());
    }
    for (const auto& [day, peak] : peaks) {
      total += static_cast<double>(peak);
      ++n;
    }
  }
  return total / static_cast<double>(n) / 1000.0;
}

double rel_err(double synth, double real) {
  return std::fabs(synth - real) / std::max(real, kRelErrFloor);
}

}  // namespace

FidelityReport fidelity_report(const FeederDataset& real,
                               const FeederDataset& synth) {
  if (real.reading_count() == 0 || synth.reading_count() == 0) {
    throw Error(ErrorCode::kEmptyDataset, "fidelity needs readings on both sides");
  }
  if (real.interval_s() != synth.interval_s()) {
    throw Error(ErrorCode::kInvalidArgument, "interval_s differs");
  }
  FidelityReport report;
  const HourlyProfile mr = hourly_means(real);
  const HourlyProfile ms = hourly_means(synth);
  for (int h = 0; h < 24; ++h) {
    report.per_hour_mean_rel_err[h] = rel_err(ms[h], mr[h]);
  }
  const auto hr = value_histogram(real, real.delta_max());
  const auto hs = value_histogram(synth, real.delta_max());
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    report.hist_l1 += std::fabs(hr[b] - hs[b]);
  }
  report.peak_dist_rel_err = rel_err(mean_daily_peak(synth), mean_daily_peak(real));
  return report;
}

double normalized_rms_distance(const ReadingSeries& a, const ReadingSeries& b,
                               EnergyQuantity delta_max) {
  const std::size_t n = std::min(a.readings.size(), b.readings.size());
  if (n == 0) return std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a.readings[i].energy.milli_kwh() -
                                         b.readings[i].energy.milli_kwh());
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(n)) /
         static_cast<double>(delta_max.milli_kwh());
}

double membership_auc(std::vector<double> member_scores,
                      std::vector<double> nonmember_scores) {
  if (member_scores.empty() || nonmember_scores.empty()) return 0.5;
  std::sort(nonmember_scores.begin(), nonmember_scores.end());
  double wins = 0.0;
  for (double m : member_scores) {
    const auto lo = std::lower_bound(nonmember_scores.begin(),
                                     nonmember_scores.end(), m);
    const auto hi = std::upper_bound(lo, nonmember_scores.end(), m);
    wins += static_cast<double>(nonmember_scores.end() - hi) +
            0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(member_scores.size()) *
                 static_cast<double>(nonmember_scores.size()));
}

namespace {

std::vector<double> nearest_synth(const std::vector<const ReadingSeries*>& cands,
                                  const FeederDataset& synth,
                                  EnergyQuantity delta_max) {
  std::vector<double> out;
  out.reserve(cands.size());
  for (const ReadingSeries* c : cands) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : synth.series()) {
      best = std::min(best, normalized_rms_distance(*c, s, delta_max));
    }
    out.push_back(best);
  }
  return out;
}

// Memorization is measured against the members, plus the non-members when
// they are part of the released real data.
PrivacyCheckReport run_privacy_check(
    const std::vector<const ReadingSeries*>& members,
    const std::vector<const ReadingSeries*>& nonmembers,
    bool nonmembers_in_reference, const FeederDataset& synth,
    EnergyQuantity delta_max, double threshold) {
  if (synth.series().empty() || members.empty()) {
    throw Error(ErrorCode::kEmptyDataset,
                "privacy check needs series on both sides");
  }
  if (!(threshold >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "threshold must be >= 0");
  }
  const std::vector<double> member_nn = nearest_synth(members, synth, delta_max);
  const std::vector<double> nonmember_nn =
      nearest_synth(nonmembers, synth, delta_max);

  PrivacyCheckReport report;
  // The minimum over (synthetic, real) pairs is symmetric, so scanning from
  // the real side gives the nearest-real distance of the closest synthetic.
  report.min_nn_distance = *std::min_element(member_nn.begin(), member_nn.end());
  if (nonmembers_in_reference && !nonmember_nn.empty()) {
    report.min_nn_distance = std::min(
        report.min_nn_distance,
        *std::min_element(nonmember_nn.begin(), nonmember_nn.end()));
  }
  report.memorization_flag = report.min_nn_distance <= threshold;
  report.distinguisher_auc = membership_auc(member_nn, nonmember_nn);
  return report;
}

std::vector<const ReadingSeries*> pointers(const FeederDataset& d) {
  std::vector<const ReadingSeries*> out;
  for (const auto& s : d.series()) out.push_back(&s);
  return out;
}

}  // namespace

PrivacyCheckReport privacy_check(const FeederDataset& real,
                                 const FeederDataset& synth, double threshold) {
  if (real.interval_s() != synth.interval_s()) {
    throw Error(ErrorCode::kInvalidArgument, "interval_s differs");
  }
  std::vector<const ReadingSeries*> members, nonmembers;
  for (std::size_t i = 0; i < real.series().size(); ++i) {
    (i % 2 == 0 ? members : nonmembers).push_back(&real.series()[i]);
  }
  return run_privacy_check(members, nonmembers, true, synth,
                           real.delta_max(), threshold);
}

PrivacyCheckReport privacy_check(const FeederDataset& training,
                                 const FeederDataset& holdout,
                                 const FeederDataset& synth, double threshold) {
  if (training.interval_s() != synth.interval_s() ||
      holdout.interval_s() != synth.interval_s()) {
    throw Error(ErrorCode::kInvalidArgument, "interval_s differs");
  }
  return run_privacy_check(pointers(training), pointers(holdout), false,
                           synth, training.delta_max(), threshold);
}

}  // namespace meterguard::synthetic
