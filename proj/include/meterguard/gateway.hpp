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

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "meterguard/anonymize.hpp"
#include "meterguard/audit.hpp"
#include "meterguard/dp.hpp"
#include "meterguard/fedlearn.hpp"
#include "meterguard/he.hpp"
#include "meterguard/meterdata.hpp"
#include "meterguard/random.hpp"
#include "meterguard/synthetic.hpp"

namespace meterguard::gateway {

enum class Purpose { kPrimary, kSecondary };
std::string_view purpose_name(Purpose p);

enum class DenialReason {
  kConsentRequired,
  kBudgetExhausted,
  kBelowAggregationThreshold,
  kMemorizationDetected,
  kPolicyViolation,
};
std::string_view denial_reason_name(DenialReason r);

struct PolicyConfig {
  double epsilon_cap = 1.0;
  std::size_t min_aggregation_count = 1;
  std::size_t k = 1;
  bool allow_raw_primary = false;
  double memorization_threshold = synthetic::kDefaultMemorizationThreshold;
  std::int64_t interval_s = 3600;
  meterdata::EnergyQuantity delta_max = meterdata::EnergyQuantity::from_milli(5000);
  std::size_t he_key_bits = he::kDefaultKeyBits;
  // Allowed DP queries per requester; 0 disables the limit.
  std::size_t max_queries_per_requester = 0;

  // Throws kInvalidArgument.
  void validate() const;
};

// `key = value` lines, `#` starts a comment. Unknown keys are rejected.
PolicyConfig parse_policy(std::string_view text);
PolicyConfig load_policy(const std::string& path);

// Per-meter readings, optionally pseudonymized and generalized.
struct RawExportSpec {
  bool deidentified = false;
};

struct DpQuerySpec {
  enum class Kind { kSum, kCount, kMean, kHistogram };
  Kind kind = Kind::kSum;
  double epsilon = 1.0;
  double delta = 0.0;
  dp::QueryScope scope;
  dp::HistogramSpec histogram;
};

struct SynthGenerateSpec {
  std::size_t clusters = 2;
  std::size_t households = 10;
  std::size_t days = 1;
  std::uint64_t seed = 0;
};

struct FedTrainSpec {
  std::size_t clients = 2;
  fedlearn::RoundConfig config;
  std::uint64_t seed = 0;
};

// Every meter is one party; its input is the reading at `timestamp`, or its
// total over all readings without one. A positive noise_epsilon adds Laplace
// noise (drawn by the gateway) to the revealed sum and charges the ledger.
struct SmpcSumSpec {
  std::optional<meterdata::EpochSeconds> timestamp;
  std::optional<double> noise_epsilon;
};

// One rate per interval of the billed UTC day; missing readings bill as 0.
struct HeBillSpec {
  std::string meter_id;
  meterdata::EpochSeconds day_start = 0;
  std::vector<std::uint64_t> rates;
};

// Groups by interval timestamp, or by the value of one meter attribute.
// Every group counts households, never readings.
struct AggregateReportSpec {
  std::optional<std::string> group_by_attribute;
};

struct RawExport { RawExportSpec spec; };
struct DpQuery { DpQuerySpec spec; };
struct SynthGenerate { SynthGenerateSpec spec; };
struct FedTrain { FedTrainSpec spec; };
struct SmpcSum { SmpcSumSpec spec; };
struct HeBill { HeBillSpec spec; };
struct AggregateReport { AggregateReportSpec spec; };

using Operation = std::variant<RawExport, DpQuery, SynthGenerate, FedTrain,
                               SmpcSum, HeBill, AggregateReport>;
std::string_view operation_name(const Operation& op);

struct RequestEnvelope {
  std::string request_id;
  std::string requester;
  Purpose purpose = Purpose::kSecondary;
  bool consent = false;
  Operation operation = RawExport{};
};

struct SynthResult {
  meterdata::FeederDataset dataset;
  synthetic::PrivacyCheckReport privacy;
};

struct SmpcResult {
  double value_kwh = 0.0;
  bool noised = false;
};

struct BillResult {
  std::string ciphertext;  // he::format_ciphertext
  std::string amount;      // decimal, micro-currency
};

using DispatchedResult =
    std::variant<std::monostate, meterdata::FeederDataset,
                 std::vector<dp::DpAnswer>, SynthResult,
                 std::map<std::string, anonymize::GroupResult>,
                 fedlearn::FederationResult, SmpcResult, BillResult>;

struct Decision {
  std::optional<DenialReason> denial;  // empty means Allowed
  DispatchedResult result;             // monostate whenever denied
  std::string mechanism;
  double epsilon_spent = 0.0;
  std::uint64_t audit_seq = 0;

  bool allowed() const { return !denial.has_value(); }
  std::string outcome() const;  // "Allowed" or "Denied(<reason>)"
};

// Meter attributes (zip, customer class, ...) keyed by meter id. Meters
// without a row have every attribute empty.
struct MeterAttributes {
  std::vector<std::string> names;
  std::map<std::string, std::vector<std::string>> values;
};

// CSV with header `meter_id,<name>,...`.
MeterAttributes parse_attributes(std::string_view text);

struct GatewayData {
  meterdata::FeederDataset readings;
  MeterAttributes attributes;
};

class Gateway {
 public:
  Gateway(PolicyConfig policy, GatewayData data, dp::BudgetLedger ledger,
          AuditLog log, std::unique_ptr<RandomSource> rng);

  // Decides, dispatches and appends one audit record, all under one lock.
  // Throws kInvalidArgument for an empty or reused request_id (no record is
  // written) and kAuditWriteFailure, releasing nothing, when the append
  // fails. Budget charged for such a request stays spent.
  Decision route(const RequestEnvelope& req);

  // Installs the utility billing key instead of generating one on first use.
  void set_billing_key(he::Keypair keypair);

  const PolicyConfig& policy() const { return policy_; }
  const dp::BudgetLedger& ledger() const { return ledger_; }
  const AuditLog& audit_log() const { return log_; }
  const GatewayData& data() const { return data_; }

 private:
  Decision evaluate(const RequestEnvelope& req);
  Decision raw_export(const RequestEnvelope& req, const RawExportSpec& spec);
  Decision dp_query(const RequestEnvelope& req, const DpQuerySpec& spec);
  Decision synth_generate(const SynthGenerateSpec& spec);
  Decision fed_train(const FedTrainSpec& spec);
  Decision smpc_sum(const RequestEnvelope& req, const SmpcSumSpec& spec);
  Decision he_bill(const RequestEnvelope& req, const HeBillSpec& spec);
  Decision aggregate_report(const AggregateReportSpec& spec);
  const he::Keypair& billing_key();

  PolicyConfig policy_;
  GatewayData data_;
  dp::BudgetLedger ledger_;
  AuditLog log_;
  std::unique_ptr<RandomSource> rng_;
  anonymize::PseudonymKey pseudonym_key_;
  std::optional<he::Keypair> billing_key_;
  std::set<std::string> seen_requests_;
  std::map<std::string, std::size_t> dp_queries_by_requester_;
  std::mutex mu_;
};

struct SpendReport {
  double epsilon_total = 0.0;
  std::map<std::string, double> per_requester;
  std::map<std::string, std::size_t> denied_counts;  // by reason name
};

// Ledger entries are attributed through the audit record whose request_id
// matches their query_id; anything else lands under kUnattributed.
inline constexpr const char* kUnattributed = "(unattributed)";
SpendReport spend_report(const dp::BudgetLedger& ledger, const AuditLog& log);
SpendReport spend_report(const std::vector<dp::LedgerEntry>& entries,
                         const std::vector<AuditRecord>& records);

}  // namespace meterguard::gateway
