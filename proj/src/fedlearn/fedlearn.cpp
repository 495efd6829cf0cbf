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

#include "meterguard/fedlearn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <unordered_map>

#include "meterguard/digest.hpp"
#include "meterguard/error.hpp"

namespace meterguard::fedlearn {

void RoundConfig::validate() const {
  if (rounds < 1) throw Error(ErrorCode::kInvalidArgument, "rounds must be >= 1");
  if (local_steps < 1) {
    throw Error(ErrorCode::kInvalidArgument, "local_steps must be >= 1");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::kInvalidArgument, "learning_rate must be positive");
  }
  if (clip_norm && !(*clip_norm > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "clip_norm must be positive");
  }
  if (!(dp_sigma >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "dp_sigma must be non-negative");
  }
  if (dp_sigma > 0.0 && !clip_norm) {
    throw Error(ErrorCode::kClipNormMissing, "dp_sigma > 0 requires clip_norm");
  }
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "holdout_fraction must be in [0, 1)");
  }
}

ExampleSplit extract_examples(const std::vector<meterdata::ReadingSeries>& series,
                              std::int64_t interval_s, double holdout_fraction) {
  ExampleSplit split;
  for (const auto& s : series) {
    std::unordered_map<meterdata::EpochSeconds, double> by_time;
    by_time.reserve(s.readings.size());
    for (const auto& r : s.readings) by_time.emplace(r.timestamp, r.energy.kwh());

    Examples local;
    for (const auto& r : s.readings) {
      const auto lag1 = by_time.find(r.timestamp - interval_s);
      const auto lag96 = by_time.find(r.timestamp - kSeasonalLag * interval_s);
      if (lag1 == by_time.end() || lag96 == by_time.end()) continue;
      local.features.push_back(
          {lag1->second, lag96->second,
           static_cast<double>(meterdata::hour_of_day(r.timestamp)) / 23.0, 1.0});
      local.targets.push_back(r.energy.kwh());
    }
    const auto n_holdout = static_cast<std::size_t>(
        std::floor(static_cast<double>(local.size()) * holdout_fraction));
    const std::size_t n_train = local.size() - n_holdout;
    for (std::size_t i = 0; i < local.size(); ++i) {
      Examples& dst = i < n_train ? split.train : split.holdout;
      dst.features.push_back(local.features[i]);
      dst.targets.push_back(local.targets[i]);
    }
  }
  return split;
}

double predict(const ModelParams& model,
               const std::array<double, kFeatureCount>& x) {
  double y = 0.0;
  for (std::size_t k = 0; k < kFeatureCount; ++k) y += model.weights[k] * x[k];
  return y;
}

namespace {

void check_dimension(const ModelParams& model) {
  if (model.weights.size() != kFeatureCount) {
    throw Error(ErrorCode::kDimensionMismatch,
                "model has " + std::to_string(model.weights.size()) +
                    " weights, expected " + std::to_string(kFeatureCount));
  }
}

double sse(const ModelParams& model, const Examples& ex) {
  double acc = 0.0;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    const double r = predict(model, ex.features[i]) - ex.targets[i];
    acc += r * r;
  }
  return acc;
}

}  // namespace

double mse(const ModelParams& model, const Examples& ex) {
  check_dimension(model);
  if (ex.size() == 0) return 0.0;
  return sse(model, ex) / static_cast<double>(ex.size());
}

std::vector<double> mse_gradient(const ModelParams& model, const Examples& ex) {
  check_dimension(model);
  std::vector<double> grad(kFeatureCount, 0.0);
  if (ex.size() == 0) return grad;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    const double r = predict(model, ex.features[i]) - ex.targets[i];
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      grad[k] += r * ex.features[i][k];
    }
  }
  const double scale = 2.0 / static_cast<double>(ex.size());
  for (double& g : grad) g *= scale;
  return grad;
}

ClientUpdate local_train(const ClientShard& shard, const ModelParams& global,
                         const RoundConfig& cfg) {
  cfg.validate();
  check_dimension(global);
  const ExampleSplit data =
      extract_examples(shard.series, shard.interval_s, cfg.holdout_fraction);
  if (data.train.size() == 0) {
    throw Error(ErrorCode::kNoTrainingData, shard.client_id);
  }
  ModelParams w = global;
  for (std::size_t step = 0; step < cfg.local_steps; ++step) {
    const std::vector<double> grad = mse_gradient(w, data.train);
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      w.weights[k] -= cfg.learning_rate * grad[k];
    }
  }
  return ClientUpdate{shard.client_id, std::move(w), data.train.size(), false, {}};
}

LocalEvaluation local_evaluate(const ClientShard& shard, const ModelParams& model,
                               const RoundConfig& cfg) {
  check_dimension(model);
  const ExampleSplit data =
      extract_examples(shard.series, shard.interval_s, cfg.holdout_fraction);
  return LocalEvaluation{sse(model, data.train), data.train.size(),
                         sse(model, data.holdout), data.holdout.size()};
}

std::uint64_t encode_fixed(double value) {
  const double scaled = std::round(value * kFixedPointScale);
  // Keep well inside int64 so the two's-complement encoding is exact.
  if (!(std::fabs(scaled) < 0x1.0p62)) {
    throw Error(ErrorCode::kOverflow, "value outside fixed-point range");
  }
  return static_cast<std::uint64_t>(static_cast<std::int64_t>(scaled));
}

double decode_fixed(std::uint64_t value) {
  return static_cast<double>(static_cast<std::int64_t>(value)) / kFixedPointScale;
}

namespace {

void check_updates(const std::vector<ClientUpdate>& updates) {
  if (updates.empty()) throw Error(ErrorCode::kEmptyUpdateList, "");
  const auto dim_of = [](const ClientUpdate& u) {
    return u.masked ? u.masked_payload.size() : u.weights.weights.size();
  };
  const std::size_t dim = dim_of(updates.front());
  if (dim == 0) throw Error(ErrorCode::kDimensionMismatch, "empty weight vector");
  for (const auto& u : updates) {
    if (u.n_samples < 1) {
      throw Error(ErrorCode::kInvalidArgument, u.client_id + " has n_samples 0");
    }
    if (u.masked != updates.front().masked) {
      throw Error(ErrorCode::kInvalidArgument, "mixed masked and plain updates");
    }
    if (dim_of(u) != dim) {
      throw Error(ErrorCode::kDimensionMismatch, u.client_id);
    }
    if (!u.masked) {
      for (double w : u.weights.weights) {
        if (!std::isfinite(w)) {
          throw Error(ErrorCode::kInvalidArgument, u.client_id + " has non-finite weights");
        }
      }
    }
  }
}

std::vector<std::uint64_t> weighted_encoding(const ClientUpdate& u) {
  std::vector<std::uint64_t> out(u.weights.weights.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = encode_fixed(static_cast<double>(u.n_samples) * u.weights.weights[k]);
  }
  return out;
}

ModelParams decode_weighted_sum(const std::vector<std::uint64_t>& sum,
                                std::size_t total_samples) {
  ModelParams out;
  out.weights.reserve(sum.size());
  for (std::uint64_t v : sum) {
    out.weights.push_back(decode_fixed(v) / static_cast<double>(total_samples));
  }
  return out;
}

}  // namespace

ModelParams fed_avg(const std::vector<ClientUpdate>& updates) {
  check_updates(updates);
  std::size_t total = 0;
  for (const auto& u : updates) total += u.n_samples;

  if (updates.front().masked) {
    std::vector<std::uint64_t> sum(updates.front().masked_payload.size(), 0);
    for (const auto& u : updates) {
      for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += u.masked_payload[k];
    }
    return decode_weighted_sum(sum, total);
  }

  ModelParams out{std::vector<double>(updates.front().weights.weights.size(), 0.0)};
  for (const auto& u : updates) {
    const double share = static_cast<double>(u.n_samples) / static_cast<double>(total);
    for (std::size_t k = 0; k < out.weights.size(); ++k) {
      out.weights[k] += share * u.weights.weights[k];
    }
  }
  return out;
}

ModelParams fed_avg_fixed_point(const std::vector<ClientUpdate>& updates) {
  check_updates(updates);
  if (updates.front().masked) return fed_avg(updates);
  std::size_t total = 0;
  std::vector<std::uint64_t> sum(updates.front().weights.weights.size(), 0);
  for (const auto& u : updates) {
    total += u.n_samples;
    const auto enc = weighted_encoding(u);
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += enc[k];
  }
  return decode_weighted_sum(sum, total);
}

std::vector<std::uint64_t> mask_stream(PairwiseSeed seed, std::size_t dim) {
  std::vector<std::uint64_t> out;
  out.reserve(dim);
  std::array<std::uint8_t, 16> block_input{};
  for (std::uint64_t counter = 0; out.size() < dim; ++counter) {
    std::memcpy(block_input.data(), &seed, 8);
    std::memcpy(block_input.data() + 8, &counter, 8);
    const Digest block = sha256(block_input);
    for (std::size_t w = 0; w < 4 && out.size() < dim; ++w) {
      std::uint64_t v = 0;
      std::memcpy(&v, block.data() + 8 * w, 8);
      out.push_back(v);
    }
  }
  return out;
}

ClientUpdate mask_update(const ClientUpdate& update,
                         const std::vector<std::string>& participants,
                         const std::map<std::string, PairwiseSeed>& pairwise_seeds) {
  if (update.masked) {
    throw Error(ErrorCode::kInvalidArgument, update.client_id + " already masked");
  }
  check_updates({update});
  if (std::find(participants.begin(), participants.end(), update.client_id) ==
      participants.end()) {
    throw Error(ErrorCode::kInvalidArgument,
                update.client_id + " is not in the round roster");
  }
  std::vector<std::uint64_t> payload = weighted_encoding(update);
  for (const auto& peer : participants) {
    if (peer == update.client_id) continue;
    const auto seed = pairwise_seeds.find(peer);
    if (seed == pairwise_seeds.end()) {
      throw Error(ErrorCode::kMissingPeerSeed, update.client_id + " <-> " + peer);
    }
    const auto mask = mask_stream(seed->second, payload.size());
    const bool add = update.client_id < peer;
    for (std::size_t k = 0; k < payload.size(); ++k) {
      payload[k] = add ? payload[k] + mask[k] : payload[k] - mask[k];
    }
  }
  ClientUpdate out;
  out.client_id = update.client_id;
  out.n_samples = update.n_samples;
  out.masked = true;
  out.masked_payload = std::move(payload);
  return out;
}

ClientUpdate dp_noise_update(const ClientUpdate& update, const RoundConfig& cfg,
                             RandomSource& rng) {
  if (!cfg.clip_norm) throw Error(ErrorCode::kClipNormMissing, update.client_id);
  if (update.masked) {
    throw Error(ErrorCode::kInvalidArgument, "noise must be added before masking");
  }
  ClientUpdate out = update;
  double norm_sq = 0.0;
  for (double w : out.weights.weights) norm_sq += w * w;
  const double norm = std::sqrt(norm_sq);
  if (norm > *cfg.clip_norm) {
    const double scale = *cfg.clip_norm / norm;
    for (double& w : out.weights.weights) w *= scale;
  }
  if (cfg.dp_sigma > 0.0) {
    for (double& w : out.weights.weights) w += cfg.dp_sigma * rng.standard_normal();
  }
  return out;
}

namespace {

std::string round_label(std::size_t round) { return "/round/" + std::to_string(round); }

}  // namespace

FederationResult run_federation(const std::vector<ClientShard>& clients,
                                const RoundConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (clients.empty()) throw Error(ErrorCode::kInvalidArgument, "no clients");
  std::set<std::string> ids;
  for (const auto& c : clients) {
    if (!ids.insert(c.client_id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate client " + c.client_id);
    }
  }

  FederationResult result;
  ModelParams global = ModelParams::zeros();
  for (std::size_t round = 1; round <= cfg.rounds; ++round) {
    // Broadcast and local training; the roster is fixed after this step.
    std::vector<ClientUpdate> updates;
    for (const auto& client : clients) {
      try {
        ClientUpdate u = local_train(client, global, cfg);
        if (cfg.clip_norm) {
          SeededRng rng(derive_seed(seed, "client/" + client.client_id + round_label(round)));
          u = dp_noise_update(u, cfg, rng);
        }
        updates.push_back(std::move(u));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNoTrainingData) throw;
      }
    }
    if (updates.empty()) {
      throw Error(ErrorCode::kNoTrainingData, "no client has training data");
    }

    RoundMetrics metrics;
    metrics.round = round;
    for (const auto& u : updates) {
      metrics.participants.push_back(u.client_id);
      metrics.total_samples += u.n_samples;
    }

    switch (cfg.aggregation) {
      case Aggregation::kPlain:
        global = fed_avg(updates);
        break;
      case Aggregation::kFixedPoint:
        global = fed_avg_fixed_point(updates);
        break;
      case Aggregation::kSecure: {
        std::vector<ClientUpdate> masked;
        masked.reserve(updates.size());
        for (const auto& u : updates) {
          // Trusted setup: the harness hands each pair a shared seed.
          std::map<std::string, PairwiseSeed> seeds;
          for (const auto& peer : metrics.participants) {
            if (peer == u.client_id) continue;
            const auto& lo = std::min(peer, u.client_id);
            const auto& hi = std::max(peer, u.client_id);
            seeds[peer] = derive_seed(seed, "pair/" + lo + "/" + hi + round_label(round));
          }
          masked.push_back(mask_update(u, metrics.participants, seeds));
        }
        global = fed_avg(masked);
        break;
      }
    }

    double train_sse = 0.0, holdout_sse = 0.0;
    std::size_t train_n = 0, holdout_n = 0;
    for (const auto& client : clients) {
      const LocalEvaluation ev = local_evaluate(client, global, cfg);
      train_sse += ev.train_sse;
      train_n += ev.train_n;
      holdout_sse += ev.holdout_sse;
      holdout_n += ev.holdout_n;
    }
    metrics.train_mse = train_n ? train_sse / static_cast<double>(train_n) : 0.0;
    metrics.holdout_mse = holdout_n ? holdout_sse / static_cast<double>(holdout_n) : 0.0;
    metrics.global = global;
    result.history.push_back(std::move(metrics));
  }
  result.final_model = global;
  return result;
}

std::vector<ClientShard> shard_round_robin(const meterdata::FeederDataset& data,
                                           std::size_t k) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  std::vector<ClientShard> shards(k);
  for (std::size_t i = 0; i < k; ++i) {
    shards[i].client_id = "client-" + std::to_string(i);
    shards[i].interval_s = data.interval_s();
  }
  for (std::size_t i = 0; i < data.series().size(); ++i) {
    shards[i % k].series.push_back(data.series()[i]);
  }
  return shards;
}

}  // namespace meterguard::fedlearn
