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

#include "meterguard/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "meterguard/error.hpp"
#include "meterguard/smpc.hpp"

namespace meterguard::gateway {

using meterdata::EnergyQuantity;
using meterdata::EpochSeconds;
using meterdata::FeederDataset;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Decision denied(DenialReason reason, std::string mechanism = "none") {
  Decision d;
  d.denial = reason;
  d.mechanism = std::move(mechanism);
  return d;
}

Decision allowed(DispatchedResult result, std::string mechanism,
                 double epsilon_spent = 0.0) {
  Decision d;
  d.result = std::move(result);
  d.mechanism = std::move(mechanism);
  d.epsilon_spent = epsilon_spent;
  return d;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(out)) {
    throw Error(ErrorCode::kInvalidArgument, key + ": not a number: " + v);
  }
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  if (v.empty() || !std::all_of(v.begin(), v.end(), ::isdigit)) {
    throw Error(ErrorCode::kInvalidArgument, key + ": not a non-negative integer: " + v);
  }
  return std::stoull(v);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorCode::kInvalidArgument, key + ": expected true or false");
}

// Per-meter readings at one timestamp, or totals over everything.
std::vector<std::pair<std::string, EnergyQuantity>> meter_values(
    const FeederDataset& data, std::optional<EpochSeconds> timestamp) {
  std::vector<std::pair<std::string, EnergyQuantity>> out;
  for (const auto& s : data.series()) {
    if (timestamp) {
      for (const auto& r : s.readings) {
        if (r.timestamp == *timestamp) out.emplace_back(s.meter_id, r.energy);
      }
    } else {
      EnergyQuantity total;
      for (const auto& r : s.readings) total = total.checked_add(r.energy);
      out.emplace_back(s.meter_id, total);
    }
  }
  return out;
}

const std::vector<std::string>& attributes_of(const MeterAttributes& attrs,
                                              const std::string& meter_id) {
  static const std::vector<std::string> kNone;
  const auto it = attrs.values.find(meter_id);
  return it == attrs.values.end() ? kNone : it->second;
}

}  // namespace

std::string_view purpose_name(Purpose p) {
  return p == Purpose::kPrimary ? "Primary" : "Secondary";
}

std::string_view denial_reason_name(DenialReason r) {
  switch (r) {
    case DenialReason::kConsentRequired: return "ConsentRequired";
    case DenialReason::kBudgetExhausted: return "BudgetExhausted";
    case DenialReason::kBelowAggregationThreshold: return "BelowAggregationThreshold";
    case DenialReason::kMemorizationDetected: return "MemorizationDetected";
    case DenialReason::kPolicyViolation: return "PolicyViolation";
  }
  return "PolicyViolation";
}

std::string_view operation_name(const Operation& op) {
  return std::visit(Overloaded{
                        [](const RawExport&) { return "RawExport"; },
                        [](const DpQuery&) { return "DpQuery"; },
                        [](const SynthGenerate&) { return "SynthGenerate"; },
                        [](const FedTrain&) { return "FedTrain"; },
                        [](const SmpcSum&) { return "SmpcSum"; },
                        [](const HeBill&) { return "HeBill"; },
                        [](const AggregateReport&) { return "AggregateReport"; },
                    },
                    op);
}

std::string Decision::outcome() const {
  if (!denial) return "Allowed";
  return "Denied(" + std::string(denial_reason_name(*denial)) + ")";
}

void PolicyConfig::validate() const {
  if (!(epsilon_cap > 0.0) || !std::isfinite(epsilon_cap)) {
    throw Error(ErrorCode::kInvalidArgument, "epsilon_cap must be positive");
  }
  if (min_aggregation_count < 1) {
    throw Error(ErrorCode::kInvalidArgument, "min_aggregation_count must be >= 1");
  }
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (memorization_threshold < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "memorization_threshold must be >= 0");
  }
  if (interval_s <= 0 || meterdata::kSecondsPerDay % interval_s != 0) {
    throw Error(ErrorCode::kInvalidArgument, "interval_s must divide a day");
  }
  if (delta_max.milli_kwh() <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "delta_max_kwh must be positive");
  }
}

PolicyConfig parse_policy(std::string_view text) {
  PolicyConfig cfg;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidArgument, "expected key = value", line_no);
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key == "epsilon_cap") {
      cfg.epsilon_cap = parse_real(key, value);
    } else if (key == "min_aggregation_count") {
      cfg.min_aggregation_count = parse_count(key, value);
    } else if (key == "k") {
      cfg.k = parse_count(key, value);
    } else if (key == "allow_raw_primary") {
      cfg.allow_raw_primary = parse_bool(key, value);
    } else if (key == "memorization_threshold") {
      cfg.memorization_threshold = parse_real(key, value);
    } else if (key == "interval_s") {
      cfg.interval_s = static_cast<std::int64_t>(parse_count(key, value));
    } else if (key == "delta_max_kwh") {
      const auto q = EnergyQuantity::parse_kwh(value);
      if (!q) throw Error(ErrorCode::kInvalidArgument, "bad delta_max_kwh", line_no);
      cfg.delta_max = *q;
    } else if (key == "he_key_bits") {
      cfg.he_key_bits = parse_count(key, value);
    } else if (key == "max_queries_per_requester") {
      cfg.max_queries_per_requester = parse_count(key, value);
    } else {
      throw Error(ErrorCode::kInvalidArgument, "unknown policy key " + key, line_no);
    }
  }
  cfg.validate();
  return cfg;
}

PolicyConfig load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kStorageFailure, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_policy(buf.str());
}

MeterAttributes parse_attributes(std::string_view text) {
  MeterAttributes out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_commas(line);
    if (header) {
      if (cells.empty() || cells[0] != "meter_id") {
        throw Error(ErrorCode::kMalformedRow, "expected meter_id header", line_no);
      }
      out.names.assign(cells.begin() + 1, cells.end());
      header = false;
      continue;
    }
    if (cells.size() != out.names.size() + 1 || cells[0].empty()) {
      throw Error(ErrorCode::kMalformedRow, "wrong column count", line_no);
    }
    const std::string id = cells[0];
    cells.erase(cells.begin());
    if (!out.values.emplace(id, std::move(cells)).second) {
      throw Error(ErrorCode::kMalformedRow, "duplicate meter " + id, line_no);
    }
  }
  return out;
}

Gateway::Gateway(PolicyConfig policy, GatewayData data, dp::BudgetLedger ledger,
                 AuditLog log, std::unique_ptr<RandomSource> rng)
    : policy_(std::move(policy)),
      data_(std::move(data)),
      ledger_(std::move(ledger)),
      log_(std::move(log)),
      rng_(std::move(rng)) {
  policy_.validate();
  if (!rng_) rng_ = std::make_unique<SecureRng>();
  rng_->fill_bytes(pseudonym_key_.secret);
  for (const auto& r : log_.records()) seen_requests_.insert(r.request_id);
}

void Gateway::set_billing_key(he::Keypair keypair) {
  std::lock_guard lock(mu_);
  billing_key_ = std::move(keypair);
}

const he::Keypair& Gateway::billing_key() {
  if (!billing_key_) billing_key_ = he::keygen(policy_.he_key_bits, *rng_);
  return *billing_key_;
}

Decision Gateway::route(const RequestEnvelope& req) {
  std::lock_guard lock(mu_);
  if (req.request_id.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty request_id");
  }
  if (seen_requests_.count(req.request_id) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate request_id " + req.request_id);
  }
  seen_requests_.insert(req.request_id);

  Decision d = evaluate(req);
  if (!d.allowed()) d.result = std::monostate{};

  AuditFields fields{req.request_id, req.requester, d.outcome(), d.mechanism,
                     d.epsilon_spent};
  try {
    d.audit_seq = log_.append(fields).seq;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kAuditWriteFailure, e.what());
  }
  return d;
}

Decision Gateway::evaluate(const RequestEnvelope& req) {
  try {
    return std::visit(
        Overloaded{
            [&](const RawExport& op) { return raw_export(req, op.spec); },
            [&](const DpQuery& op) { return dp_query(req, op.spec); },
            [&](const SynthGenerate& op) { return synth_generate(op.spec); },
            [&](const FedTrain& op) { return fed_train(op.spec); },
            [&](const SmpcSum& op) { return smpc_sum(req, op.spec); },
            [&](const HeBill& op) { return he_bill(req, op.spec); },
            [&](const AggregateReport& op) { return aggregate_report(op.spec); },
        },
        req.operation);
  } catch (const Error&) {
    // Malformed operation parameters never release anything.
    return denied(DenialReason::kPolicyViolation);
  }
}

Decision Gateway::raw_export(const RequestEnvelope& req, const RawExportSpec& spec) {
  if (spec.deidentified) {
    std::vector<anonymize::QuasiIdentifierRecord> qi;
    for (const auto& s : data_.readings.series()) {
      auto attrs = attributes_of(data_.attributes, s.meter_id);
      attrs.resize(data_.attributes.names.size());
      qi.push_back({std::move(attrs)});
    }
    if (!anonymize::check_k_anonymity(qi, policy_.k).pass) {
      return denied(DenialReason::kPolicyViolation, "pseudonymize+generalize");
    }
    const FeederDataset pseudo =
        anonymize::pseudonymize_dataset(data_.readings, pseudonym_key_);
    const anonymize::GeneralizationRule rule;
    std::vector<meterdata::ReadingSeries> series = pseudo.series();
    for (auto& s : series) {
      for (auto& r : s.readings) {
        r.energy = std::min(anonymize::generalize(r.energy, rule), pseudo.delta_max());
      }
    }
    return allowed(FeederDataset(std::move(series), pseudo.interval_s(), pseudo.delta_max()),
                   "pseudonymize+generalize");
  }
  if (req.purpose == Purpose::kPrimary) {
    if (!policy_.allow_raw_primary) return denied(DenialReason::kPolicyViolation, "raw");
    return allowed(data_.readings, "raw");
  }
  if (!req.consent) return denied(DenialReason::kConsentRequired, "raw");
  return allowed(data_.readings, "raw");
}

Decision Gateway::dp_query(const RequestEnvelope& req, const DpQuerySpec& spec) {
  const dp::PrivacyParams params(spec.epsilon, spec.delta);
  const std::string mech = spec.delta > 0.0 ? "gaussian" : "laplace";
  if (policy_.max_queries_per_requester > 0 &&
      dp_queries_by_requester_[req.requester] >= policy_.max_queries_per_requester) {
    return denied(DenialReason::kPolicyViolation, mech);
  }
  if (!ledger_.has_headroom(params.epsilon())) {
    return denied(DenialReason::kBudgetExhausted, mech);
  }
  std::vector<dp::DpAnswer> answers;
  try {
    const auto& d = data_.readings;
    switch (spec.kind) {
      case DpQuerySpec::Kind::kSum:
        answers.push_back(dp::dp_sum(d, spec.scope, params, ledger_, *rng_, req.request_id));
        break;
      case DpQuerySpec::Kind::kCount:
        answers.push_back(dp::dp_count(d, spec.scope, params, ledger_, *rng_, req.request_id));
        break;
      case DpQuerySpec::Kind::kMean:
        answers.push_back(dp::dp_mean(d, spec.scope, params, ledger_, *rng_, req.request_id));
        break;
      case DpQuerySpec::Kind::kHistogram:
        answers = dp::dp_histogram(d, spec.scope, spec.histogram, params, ledger_, *rng_,
                                   req.request_id);
        break;
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kBudgetExhausted) {
      return denied(DenialReason::kBudgetExhausted, mech);
    }
    return denied(DenialReason::kPolicyViolation, mech);
  }
  ++dp_queries_by_requester_[req.requester];
  const std::string used(dp::mechanism_name(answers.front().mechanism));
  return allowed(std::move(answers), used, params.epsilon());
}

Decision Gateway::synth_generate(const SynthGenerateSpec& spec) {
  const FeederDataset& real = data_.readings;
  if (real.empty()) throw Error(ErrorCode::kEmptyDataset, "no readings to model");
  const synthetic::GeneratorModel model = synthetic::fit(real, spec.clusters, spec.seed);
  synthetic::GenerateOptions opts;
  opts.interval_s = real.interval_s();
  opts.delta_max = real.delta_max();
  opts.start = meterdata::day_index(real.series().front().readings.front().timestamp) *
               meterdata::kSecondsPerDay;
  FeederDataset synth = synthetic::generate(model, spec.households, spec.days,
                                            derive_seed(spec.seed, "gateway/generate"), opts);
  const auto report = synthetic::privacy_check(real, synth, policy_.memorization_threshold);
  if (report.memorization_flag) {
    return denied(DenialReason::kMemorizationDetected, "synthetic");
  }
  return allowed(SynthResult{std::move(synth), report}, "synthetic");
}

Decision Gateway::fed_train(const FedTrainSpec& spec) {
  const auto shards = fedlearn::shard_round_robin(data_.readings, spec.clients);
  std::string mech = "fedavg";
  switch (spec.config.aggregation) {
    case fedlearn::Aggregation::kPlain: break;
    case fedlearn::Aggregation::kFixedPoint: mech += "+fixed-point"; break;
    case fedlearn::Aggregation::kSecure: mech += "+secure-aggregation"; break;
  }
  if (spec.config.dp_sigma > 0.0) mech += "+gaussian";
  return allowed(fedlearn::run_federation(shards, spec.config, spec.seed), mech);
}

Decision Gateway::smpc_sum(const RequestEnvelope& req, const SmpcSumSpec& spec) {
  std::string mech = "secure-sum";
  std::optional<dp::PrivacyParams> noise;
  if (spec.noise_epsilon) {
    noise.emplace(*spec.noise_epsilon);
    mech += "+laplace";
    if (!ledger_.has_headroom(noise->epsilon())) {
      return denied(DenialReason::kBudgetExhausted, mech);
    }
  }
  std::vector<smpc::PartyInput> inputs;
  std::size_t max_readings = 0;
  for (const auto& [id, value] : meter_values(data_.readings, spec.timestamp)) {
    inputs.push_back(smpc::PartyInput::from_energy(id, value));
  }
  for (const auto& s : data_.readings.series()) {
    max_readings = std::max(max_readings, s.readings.size());
  }
  const auto outcome = smpc::secure_sum(inputs, policy_.min_aggregation_count, *rng_);
  if (outcome.aborted()) return denied(DenialReason::kBelowAggregationThreshold, mech);

  SmpcResult result{std::get<EnergyQuantity>(outcome.result).kwh(), false};
  if (!noise) return allowed(result, mech);

  try {
    ledger_.charge_as(*noise, req.request_id);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kBudgetExhausted) {
      return denied(DenialReason::kBudgetExhausted, mech);
    }
    throw;
  }
  // One reading per meter at a timestamp; otherwise a meter's whole series.
  const double per_meter = spec.timestamp ? 1.0 : static_cast<double>(max_readings);
  const dp::Sensitivity sens(per_meter * data_.readings.delta_max().kwh());
  result.value_kwh = dp::laplace_mechanism(result.value_kwh, sens, *noise, *rng_).value;
  result.noised = true;
  return allowed(result, mech, noise->epsilon());
}

Decision Gateway::he_bill(const RequestEnvelope& req, const HeBillSpec& spec) {
  if (req.purpose == Purpose::kSecondary && !req.consent) {
    return denied(DenialReason::kConsentRequired, "paillier");
  }
  const auto& all = data_.readings.series();
  const auto it = std::find_if(all.begin(), all.end(),
                               [&](const auto& s) { return s.meter_id == spec.meter_id; });
  const std::int64_t per_day = data_.readings.intervals_per_day();
  if (it == all.end() || spec.day_start % meterdata::kSecondsPerDay != 0 ||
      spec.rates.size() != static_cast<std::size_t>(per_day)) {
    return denied(DenialReason::kPolicyViolation, "paillier");
  }
  std::vector<std::uint64_t> usage(static_cast<std::size_t>(per_day), 0);
  for (const auto& r : it->readings) {
    const std::int64_t offset = r.timestamp - spec.day_start;
    if (offset >= 0 && offset < meterdata::kSecondsPerDay) {
      usage[static_cast<std::size_t>(offset / data_.readings.interval_s())] =
          static_cast<std::uint64_t>(r.energy.milli_kwh());
    }
  }
  const he::Keypair& key = billing_key();
  std::vector<he::Ciphertext> cts;
  cts.reserve(usage.size());
  for (std::uint64_t u : usage) {
    cts.push_back(he::encrypt(mpz_class(std::to_string(u)), key.pub, *rng_));
  }
  const auto bound = static_cast<std::uint64_t>(data_.readings.delta_max().milli_kwh());
  const he::Ciphertext bill = he::encrypted_bill(cts, he::RateSchedule{spec.rates},
                                                 key.pub, bound);
  return allowed(BillResult{he::format_ciphertext(bill), he::decrypt(bill, key).get_str(10)},
                 "paillier");
}

Decision Gateway::aggregate_report(const AggregateReportSpec& spec) {
  std::map<std::string, std::vector<EnergyQuantity>> groups;
  if (spec.group_by_attribute) {
    const auto& names = data_.attributes.names;
    const auto pos = std::find(names.begin(), names.end(), *spec.group_by_attribute);
    if (pos == names.end()) return denied(DenialReason::kPolicyViolation, "aggregate-threshold");
    const auto col = static_cast<std::size_t>(pos - names.begin());
    for (const auto& [id, total] : meter_values(data_.readings, std::nullopt)) {
      const auto& attrs = attributes_of(data_.attributes, id);
      groups[col < attrs.size() ? attrs[col] : std::string()].push_back(total);
    }
  } else {
    for (const auto& s : data_.readings.series()) {
      for (const auto& r : s.readings) {
        groups[meterdata::format_utc_timestamp(r.timestamp)].push_back(r.energy);
      }
    }
  }
  auto report = anonymize::aggregate_threshold(
      groups, anonymize::AggregationPolicy{policy_.min_aggregation_count});
  const bool any_released = std::any_of(report.begin(), report.end(), [](const auto& kv) {
    return std::holds_alternative<anonymize::Aggregate>(kv.second);
  });
  if (!any_released) {
    return denied(DenialReason::kBelowAggregationThreshold, "aggregate-threshold");
  }
  return allowed(std::move(report), "aggregate-threshold");
}

SpendReport spend_report(const std::vector<dp::LedgerEntry>& entries,
                         const std::vector<AuditRecord>& records) {
  SpendReport out;
  out.epsilon_total = dp::compose(entries).epsilon_total;
  std::map<std::string, std::string> requester_of;
  for (const auto& r : records) {
    requester_of.emplace(r.request_id, r.requester);
    if (r.decision.rfind("Denied(", 0) == 0 && r.decision.back() == ')') {
      ++out.denied_counts[r.decision.substr(7, r.decision.size() - 8)];
    }
  }
  for (const auto& e : entries) {
    const auto it = requester_of.find(e.query_id);
    out.per_requester[it == requester_of.end() ? kUnattributed : it->second] += e.epsilon;
  }
  return out;
}

SpendReport spend_report(const dp::BudgetLedger& ledger, const AuditLog& log) {
  return spend_report(ledger.entries(), log.records());
}

}  // namespace meterguard::gateway
