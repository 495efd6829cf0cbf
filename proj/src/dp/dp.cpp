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

#include "meterguard/dp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "meterguard/error.hpp"

namespace meterguard::dp {

namespace {

// Relative slack on the cap test, absorbing float error in the running sum.
constexpr double kCapSlack = 1e-12;

std::int64_t system_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

PrivacyParams::PrivacyParams(double epsilon, double delta)
    : epsilon_(epsilon), delta_(delta) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorCode::kInvalidArgument, "epsilon must be positive");
  }
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "delta must lie in [0, 1)");
  }
}

Sensitivity::Sensitivity(double delta_f) : delta_f_(delta_f) {
  if (!(delta_f > 0.0) || !std::isfinite(delta_f)) {
    throw Error(ErrorCode::kInvalidArgument, "sensitivity must be positive");
  }
}

std::string_view mechanism_name(Mechanism m) {
  return m == Mechanism::kLaplace ? "laplace" : "gaussian";
}

BudgetLedger::BudgetLedger(double epsilon_cap, Clock clock)
    : epsilon_cap_(epsilon_cap), clock_(std::move(clock)) {
  if (!(epsilon_cap > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "epsilon_cap must be positive");
  }
  if (!clock_) clock_ = system_now;
}

BudgetLedger::BudgetLedger(BudgetLedger&& other) noexcept
    : epsilon_cap_(other.epsilon_cap_),
      clock_(std::move(other.clock_)),
      path_(std::move(other.path_)),
      entries_(std::move(other.entries_)),
      spent_(other.spent_) {}

BudgetLedger BudgetLedger::open(const std::string& path, double epsilon_cap,
                                Clock clock) {
  BudgetLedger ledger(epsilon_cap, std::move(clock));
  std::ifstream in(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto entry = parse_ledger_line(line);
    if (!entry) {
      throw Error(ErrorCode::kMalformedRow, "ledger " + path, line_no);
    }
    ledger.spent_ += entry->epsilon;
    ledger.entries_.push_back(std::move(*entry));
  }
  ledger.path_ = path;
  return ledger;
}

bool BudgetLedger::has_headroom(double epsilon) const {
  std::lock_guard lock(mu_);
  return spent_ + epsilon <= epsilon_cap_ * (1.0 + kCapSlack);
}

double BudgetLedger::epsilon_spent() const {
  std::lock_guard lock(mu_);
  return spent_;
}

std::vector<LedgerEntry> BudgetLedger::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

LedgerEntry BudgetLedger::charge(const PrivacyParams& params,
                                 std::string_view label) {
  std::lock_guard lock(mu_);
  std::string id(label);
  id += "-" + std::to_string(entries_.size() + 1);
  return append_locked(params, std::move(id));
}

LedgerEntry BudgetLedger::charge_as(const PrivacyParams& params,
                                    std::string query_id) {
  std::lock_guard lock(mu_);
  return append_locked(params, std::move(query_id));
}

LedgerEntry BudgetLedger::append_locked(const PrivacyParams& params,
                                        std::string query_id) {
  if (query_id.empty() || query_id.find(',') != std::string::npos ||
      query_id.find('\n') != std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument,
                "query id must be non-empty without commas or newlines");
  }
  if (spent_ + params.epsilon() > epsilon_cap_ * (1.0 + kCapSlack)) {
    throw Error(ErrorCode::kBudgetExhausted,
                "spent " + format_real(spent_) + " + " +
                    format_real(params.epsilon()) + " exceeds cap " +
                    format_real(epsilon_cap_));
  }
  LedgerEntry entry{std::move(query_id), params.epsilon(), params.delta(),
                    clock_()};
  if (path_) {
    std::ofstream out(*path_, std::ios::app);
    out << format_ledger_line(entry) << '\n';
    out.flush();
    if (!out) {
      throw Error(ErrorCode::kStorageFailure, "cannot append to " + *path_);
    }
  }
  spent_ += entry.epsilon;
  entries_.push_back(entry);
  return entry;
}

std::string format_ledger_line(const LedgerEntry& e) {
  return e.query_id + "," + format_real(e.epsilon) + "," +
         format_real(e.delta) + "," + std::to_string(e.timestamp);
}

std::optional<LedgerEntry> parse_ledger_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (fields.size() != 4 || fields[0].empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    LedgerEntry e;
    e.query_id = fields[0];
    e.epsilon = std::stod(fields[1], &used);
    if (used != fields[1].size()) return std::nullopt;
    e.delta = std::stod(fields[2], &used);
    if (used != fields[2].size()) return std::nullopt;
    e.timestamp = std::stoll(fields[3], &used);
    if (used != fields[3].size()) return std::nullopt;
    return e;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

Composition compose(const std::vector<LedgerEntry>& entries) {
  Composition c;
  for (const auto& e : entries) {
    c.epsilon_total += e.epsilon;
    c.delta_total += e.delta;
  }
  return c;
}

Composition compose(const BudgetLedger& ledger) {
  return compose(ledger.entries());
}

double laplace_sample(double scale, double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw Error(ErrorCode::kInvalidUniform, "u must lie in (0, 1)");
  }
  if (!(scale > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "scale must be positive");
  }
  const double centered = u - 0.5;
  if (centered == 0.0) return 0.0;
  const double sign = centered > 0.0 ? 1.0 : -1.0;
  return -scale * sign * std::log1p(-2.0 * std::fabs(centered));
}

double gaussian_sigma(const Sensitivity& sens, const PrivacyParams& p) {
  if (p.delta() == 0.0) {
    throw Error(ErrorCode::kDeltaZero, "Gaussian mechanism needs delta > 0");
  }
  if (p.epsilon() > 1.0) {
    throw Error(ErrorCode::kEpsilonOutOfRange,
                "analytic Gaussian calibration requires epsilon <= 1");
  }
  return sens.value() * std::sqrt(2.0 * std::log(1.25 / p.delta())) /
         p.epsilon();
}

DpAnswer laplace_mechanism(double true_value, const Sensitivity& sens,
                           const PrivacyParams& p, RandomSource& rng) {
  if (p.delta() != 0.0) {
    throw Error(ErrorCode::kDeltaNotZero, "Laplace mechanism needs delta = 0");
  }
  const double noise = laplace_sample(sens.value() / p.epsilon(), rng.uniform01());
  return DpAnswer{true_value + noise, Mechanism::kLaplace, p, sens, {}};
}

DpAnswer gaussian_mechanism(double true_value, const Sensitivity& sens,
                            const PrivacyParams& p, RandomSource& rng) {
  const double sigma = gaussian_sigma(sens, p);
  return DpAnswer{true_value + sigma * rng.standard_normal(),
                  Mechanism::kGaussian, p, sens, {}};
}

namespace {

// Validates the mechanism choice before any budget is spent.
void check_mechanism(const Sensitivity& sens, const PrivacyParams& p) {
  if (p.delta() > 0.0) gaussian_sigma(sens, p);
}

DpAnswer release(double true_value, const Sensitivity& sens,
                 const PrivacyParams& p, RandomSource& rng,
                 const std::string& query_id) {
  DpAnswer a = p.delta() == 0.0 ? laplace_mechanism(true_value, sens, p, rng)
                                : gaussian_mechanism(true_value, sens, p, rng);
  a.query_id = query_id;
  return a;
}

template <typename Fn>
void for_each_in_scope(const meterdata::FeederDataset& d,
                       const QueryScope& scope, Fn&& fn) {
  for (const auto& s : d.series()) {
    for (const auto& r : s.readings) {
      if (!scope.timestamp || r.timestamp == *scope.timestamp) fn(r);
    }
  }
}

LedgerEntry charge(BudgetLedger& ledger, const PrivacyParams& p,
                   std::string_view op,
                   const std::optional<std::string>& query_id) {
  return query_id ? ledger.charge_as(p, *query_id) : ledger.charge(p, op);
}

struct ScopeTotals {
  meterdata::EnergyQuantity sum;
  std::size_t count = 0;
};

ScopeTotals totals_in_scope(const meterdata::FeederDataset& d,
                            const QueryScope& scope) {
  ScopeTotals t;
  for_each_in_scope(d, scope, [&](const meterdata::MeterReading& r) {
    t.sum = t.sum.checked_add(r.energy);
    ++t.count;
  });
  return t;
}

}  // namespace

DpAnswer dp_sum(const meterdata::FeederDataset& d, const QueryScope& scope,
                const PrivacyParams& p, BudgetLedger& ledger,
                RandomSource& rng, const std::optional<std::string>& query_id) {
  const Sensitivity sens(d.delta_max().kwh());
  check_mechanism(sens, p);
  const ScopeTotals t = totals_in_scope(d, scope);
  const LedgerEntry entry = charge(ledger, p, "sum", query_id);
  return release(t.sum.kwh(), sens, p, rng, entry.query_id);
}

DpAnswer dp_count(const meterdata::FeederDataset& d, const QueryScope& scope,
                  const PrivacyParams& p, BudgetLedger& ledger,
                  RandomSource& rng,
                  const std::optional<std::string>& query_id) {
  const Sensitivity sens(1.0);
  check_mechanism(sens, p);
  const ScopeTotals t = totals_in_scope(d, scope);
  const LedgerEntry entry = charge(ledger, p, "count", query_id);
  return release(static_cast<double>(t.count), sens, p, rng, entry.query_id);
}

DpAnswer dp_mean(const meterdata::FeederDataset& d, const QueryScope& scope,
                 const PrivacyParams& p, BudgetLedger& ledger,
                 RandomSource& rng,
                 const std::optional<std::string>& query_id) {
  const Sensitivity sens(d.delta_max().kwh());
  check_mechanism(sens, p);
  const ScopeTotals t = totals_in_scope(d, scope);
  if (t.count == 0) {
    throw Error(ErrorCode::kEmptyDataset, "mean over zero readings");
  }
  const LedgerEntry entry = charge(ledger, p, "mean", query_id);
  DpAnswer a = release(t.sum.kwh(), sens, p, rng, entry.query_id);
  // Post-processing of the noisy sum by the public count.
  a.value /= static_cast<double>(t.count);
  return a;
}

std::vector<DpAnswer> dp_histogram(
    const meterdata::FeederDataset& d, const QueryScope& scope,
    const HistogramSpec& spec, const PrivacyParams& p, BudgetLedger& ledger,
    RandomSource& rng, const std::optional<std::string>& query_id) {
  if (spec.edges.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "histogram needs >= 2 edges");
  }
  for (std::size_t i = 1; i < spec.edges.size(); ++i) {
    if (!(spec.edges[i - 1] < spec.edges[i])) {
      throw Error(ErrorCode::kInvalidArgument,
                  "histogram edges must be strictly increasing");
    }
  }
  const Sensitivity sens(1.0);
  check_mechanism(sens, p);

  std::vector<std::size_t> counts(spec.edges.size() - 1, 0);
  for_each_in_scope(d, scope, [&](const meterdata::MeterReading& r) {
    if (r.energy < spec.edges.front() || !(r.energy < spec.edges.back())) {
      return;
    }
    const auto it =
        std::upper_bound(spec.edges.begin(), spec.edges.end(), r.energy);
    ++counts[static_cast<std::size_t>(it - spec.edges.begin()) - 1];
  });

  const LedgerEntry entry = charge(ledger, p, "histogram", query_id);
  std::vector<DpAnswer> out;
  out.reserve(counts.size());
  for (std::size_t c : counts) {
    out.push_back(release(static_cast<double>(c), sens, p, rng, entry.query_id));
  }
  return out;
}

}  // namespace meterguard::dp
