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
#include <optional>
#include <string>
#include <vector>

#include "meterguard/meterdata.hpp"
#include "meterguard/random.hpp"

namespace meterguard::fedlearn {

// Features: lag-1 kWh, lag-96 kWh, hour of day / 23, bias.
inline constexpr std::size_t kFeatureCount = 4;
inline constexpr std::int64_t kSeasonalLag = 96;
// Fixed-point scale at the masking boundary (1e-6 quantization).
inline constexpr double kFixedPointScale = 1e6;

struct ModelParams {
  std::vector<double> weights;

  static ModelParams zeros() { return {std::vector<double>(kFeatureCount, 0.0)}; }
  bool operator==(const ModelParams&) const = default;
};

struct ClientUpdate {
  std::string client_id;
  ModelParams weights;
  std::size_t n_samples = 0;
  bool masked = false;
  // Masked updates carry n_samples * weights in fixed point plus the pairwise
  // mask, mod 2^64. `weights` is cleared once masked.
  std::vector<std::uint64_t> masked_payload;
};

enum class Aggregation {
  kPlain,       // real-valued weighted mean
  kFixedPoint,  // fixed-point weighted sum without masks
  kSecure,      // fixed-point weighted sum with cancelling pairwise masks
};

struct RoundConfig {
  std::size_t rounds = 10;
  std::size_t local_steps = 1;
  double learning_rate = 0.01;
  std::optional<double> clip_norm;
  double dp_sigma = 0.0;
  Aggregation aggregation = Aggregation::kPlain;
  // Trailing fraction of every series held out for evaluation.
  double holdout_fraction = 0.0;

  // Throws kInvalidArgument; dp_sigma > 0 without clip_norm is
  // kClipNormMissing.
  void validate() const;
};

// One client's private meters. Only that client's local_train and
// local_evaluate calls ever read `series`.
struct ClientShard {
  std::string client_id;
  std::vector<meterdata::ReadingSeries> series;
  std::int64_t interval_s = 900;
};

struct Examples {
  std::vector<std::array<double, kFeatureCount>> features;
  std::vector<double> targets;

  std::size_t size() const { return targets.size(); }
};

struct ExampleSplit {
  Examples train;
  Examples holdout;
};

// An example exists at t when readings at t - interval and t - 96 intervals
// are present in the same series. The last floor(n * holdout_fraction)
// examples of each series go to the holdout split.
ExampleSplit extract_examples(const std::vector<meterdata::ReadingSeries>& series,
                              std::int64_t interval_s, double holdout_fraction);

double predict(const ModelParams& model,
               const std::array<double, kFeatureCount>& x);
double mse(const ModelParams& model, const Examples& examples);
// Gradient of the mean squared error: (2/n) X^T (X w - y).
std::vector<double> mse_gradient(const ModelParams& model,
                                 const Examples& examples);

// cfg.local_steps full-batch gradient steps from `global`. Throws
// kNoTrainingData when the shard yields no training example.
ClientUpdate local_train(const ClientShard& shard, const ModelParams& global,
                         const RoundConfig& cfg);

struct LocalEvaluation {
  double train_sse = 0.0;
  std::size_t train_n = 0;
  double holdout_sse = 0.0;
  std::size_t holdout_n = 0;
};

// Aggregate error statistics only; no per-example values leave the client.
LocalEvaluation local_evaluate(const ClientShard& shard, const ModelParams& model,
                               const RoundConfig& cfg);

// Weighted mean by n_samples over any common dimension. All-masked input takes the secure-aggregation
// path (masks cancel in the modular sum). Throws kEmptyUpdateList,
// kDimensionMismatch, or kInvalidArgument for mixed masked/plain input.
ModelParams fed_avg(const std::vector<ClientUpdate>& updates);

// The same weighted mean computed through the fixed-point encoding, with no
// masks. Bitwise equal to fed_avg over the masked versions of `updates`.
ModelParams fed_avg_fixed_point(const std::vector<ClientUpdate>& updates);

using PairwiseSeed = std::uint64_t;

std::uint64_t encode_fixed(double value);
double decode_fixed(std::uint64_t value);

// Expands a pairwise seed into `dim` uniformly random ring elements.
std::vector<std::uint64_t> mask_stream(PairwiseSeed seed, std::size_t dim);

// Adds sum_{j > i} PRG(s_ij) - sum_{j < i} PRG(s_ij) (ordering by client id)
// to the fixed-point encoding of n_samples * weights. `participants` is the
// fixed round roster and must include this client. Throws kMissingPeerSeed.
ClientUpdate mask_update(const ClientUpdate& update,
                         const std::vector<std::string>& participants,
                         const std::map<std::string, PairwiseSeed>& pairwise_seeds);

// Scales to L2 norm <= clip_norm, then adds N(0, dp_sigma^2) per coordinate.
ClientUpdate dp_noise_update(const ClientUpdate& update, const RoundConfig& cfg,
                             RandomSource& rng);

struct RoundMetrics {
  std::size_t round = 0;
  std::vector<std::string> participants;
  std::size_t total_samples = 0;
  // Errors of the model produced by this round.
  double train_mse = 0.0;
  double holdout_mse = 0.0;
  ModelParams global;
};

struct FederationResult {
  ModelParams final_model;
  std::vector<RoundMetrics> history;
};

// Starting from zeros: broadcast, local_train, optional dp_noise_update,
// optional masking, then aggregation. Clients without training data are
// dropped from the round before masks are generated. Per-client randomness
// comes from (seed, client_id, round).
FederationResult run_federation(const std::vector<ClientShard>& clients,
                                const RoundConfig& cfg, std::uint64_t seed);

// Round-robin split of a dataset's meters into k shards named client-0...
std::vector<ClientShard> shard_round_robin(const meterdata::FeederDataset& data,
                                           std::size_t k);

}  // namespace meterguard::fedlearn
