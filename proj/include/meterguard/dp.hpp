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
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "meterguard/meterdata.hpp"
#include "meterguard/random.hpp"

namespace meterguard::dp {

// (epsilon, delta) for one release. delta == 0 selects the Laplace mechanism.
class PrivacyParams {
 public:
  // Throws kInvalidArgument unless epsilon > 0 and 0 <= delta < 1.
  PrivacyParams(double epsilon, double delta = 0.0);

  double epsilon() const { return epsilon_; }
  double delta() const { return delta_; }

 private:
  double epsilon_;
  double delta_;
};

// Maximum influence of one record on the query answer, in answer units.
class Sensitivity {
 public:
  explicit Sensitivity(double delta_f);
  double value() const { return delta_f_; }

 private:
  double delta_f_;
};

enum class Mechanism { kLaplace, kGaussian };
std::string_view mechanism_name(Mechanism m);

struct DpAnswer {
  double value = 0.0;
  Mechanism mechanism = Mechanism::kLaplace;
  PrivacyParams params{1.0};
  Sensitivity sensitivity{1.0};
  std::string query_id;
};

struct LedgerEntry {
  std::string query_id;
  double epsilon = 0.0;
  double delta = 0.0;
  std::int64_t timestamp = 0;
};

// Append-only record of privacy spend under basic composition. A charge that
// would push cumulative epsilon past the cap fails and leaves the ledger
// unchanged. Check-and-append is serialized by an internal mutex.
//
// When opened on a path, every accepted entry is written and flushed as a
// `query_id,epsilon,delta,timestamp` line before the charge returns.
class BudgetLedger {
 public:
  using Clock = std::function<std::int64_t()>;

  explicit BudgetLedger(double epsilon_cap, Clock clock = {});
  static BudgetLedger open(const std::string& path, double epsilon_cap,
                           Clock clock = {});

  BudgetLedger(const BudgetLedger&) = delete;
  BudgetLedger& operator=(const BudgetLedger&) = delete;
  BudgetLedger(BudgetLedger&&) noexcept;

  // Appends one entry with id "<label>-<seq>" and returns it. Throws
  // kBudgetExhausted (ledger untouched) or kStorageFailure.
  LedgerEntry charge(const PrivacyParams& params, std::string_view label);
  // Appends a caller-named entry, e.g. a gateway request id.
  LedgerEntry charge_as(const PrivacyParams& params, std::string query_id);

  bool has_headroom(double epsilon) const;
  double epsilon_cap() const { return epsilon_cap_; }
  double epsilon_spent() const;
  std::vector<LedgerEntry> entries() const;

 private:
  LedgerEntry append_locked(const PrivacyParams& params, std::string query_id);

  double epsilon_cap_;
  Clock clock_;
  std::optional<std::string> path_;
  mutable std::mutex mu_;
  std::vector<LedgerEntry> entries_;
  double spent_ = 0.0;
};

std::string format_ledger_line(const LedgerEntry& entry);
std::optional<LedgerEntry> parse_ledger_line(std::string_view line);

struct Composition {
  double epsilon_total = 0.0;
  double delta_total = 0.0;
};

Composition compose(const BudgetLedger& ledger);
Composition compose(const std::vector<LedgerEntry>& entries);

// Inverse-CDF Laplace(0, b) draw from one uniform u in (0, 1).
// Throws kInvalidUniform outside the open interval.
double laplace_sample(double scale, double u);

// sigma = delta_f * sqrt(2 ln(1.25 / delta)) / epsilon, valid for epsilon <= 1.
double gaussian_sigma(const Sensitivity& sens, const PrivacyParams& p);

DpAnswer laplace_mechanism(double true_value, const Sensitivity& sens,
                           const PrivacyParams& p, RandomSource& rng);
DpAnswer gaussian_mechanism(double true_value, const Sensitivity& sens,
                            const PrivacyParams& p, RandomSource& rng);

// Restricts a query to the readings at one timestamp. Every meter then
// contributes at most one reading, so record-level and household-level
// neighbours coincide. Without a timestamp the query covers all readings.
struct QueryScope {
  std::optional<meterdata::EpochSeconds> timestamp;
};

// Bin edges in kWh; bins are [edges[i], edges[i+1]). Readings outside the
// declared range fall in no bin.
struct HistogramSpec {
  std::vector<meterdata::EnergyQuantity> edges;
};

// Each query charges the ledger before drawing noise, so an exhausted budget
// releases nothing. delta == 0 uses Laplace noise, delta > 0 Gaussian noise.
// The ledger entry is named `query_id` when given, else "<op>-<seq>".
DpAnswer dp_sum(const meterdata::FeederDataset& d, const QueryScope& scope,
                const PrivacyParams& p, BudgetLedger& ledger,
                RandomSource& rng,
                const std::optional<std::string>& query_id = std::nullopt);
DpAnswer dp_count(const meterdata::FeederDataset& d, const QueryScope& scope,
                  const PrivacyParams& p, BudgetLedger& ledger,
                  RandomSource& rng,
                  const std::optional<std::string>& query_id = std::nullopt);
// Noisy sum over the exact (public) record count. Throws kEmptyDataset when
// the scope holds no readings.
DpAnswer dp_mean(const meterdata::FeederDataset& d, const QueryScope& scope,
                 const PrivacyParams& p, BudgetLedger& ledger,
                 RandomSource& rng,
                 const std::optional<std::string>& query_id = std::nullopt);
// Disjoint bins: one epsilon charge for the whole release.
std::vector<DpAnswer> dp_histogram(
    const meterdata::FeederDataset& d, const QueryScope& scope,
    const HistogramSpec& spec, const PrivacyParams& p, BudgetLedger& ledger,
    RandomSource& rng,
    const std::optional<std::string>& query_id = std::nullopt);

}  // namespace meterguard::dp
