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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <thread>

#include "fixtures.hpp"
#include "meterguard/dp.hpp"
#include "meterguard/error.hpp"

namespace meterguard::dp {
namespace {

using meterdata::EnergyQuantity;
using testsupport::snapshot;

const double kLn2 = std::log(2.0);

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorCode::kInvalidArgument;
}

BudgetLedger::Clock fixed_clock() {
  return [] { return std::int64_t{1700000000}; };
}

TEST(PrivacyParams, Validation) {
  EXPECT_NO_THROW(PrivacyParams(0.5));
  EXPECT_THROW(PrivacyParams(0.0), Error);
  EXPECT_THROW(PrivacyParams(-1.0), Error);
  EXPECT_THROW(PrivacyParams(1.0, -0.1), Error);
  EXPECT_THROW(PrivacyParams(1.0, 1.0), Error);
  EXPECT_THROW(PrivacyParams(std::nan("")), Error);
  EXPECT_THROW(Sensitivity(0.0), Error);
}

TEST(LaplaceSample, ClosedFormInverseCdf) {
  EXPECT_EQ(laplace_sample(10.0, 0.5), 0.0);
  EXPECT_NEAR(laplace_sample(10.0, 0.75), 10.0 * kLn2, 1e-12);
  EXPECT_NEAR(laplace_sample(10.0, 0.75), 6.9315, 1e-4);
  EXPECT_NEAR(laplace_sample(10.0, 0.25), -6.9315, 1e-4);
  // CDF oracle: F(x) = 1 - exp(-x/b)/2 for x >= 0.
  for (double u : {0.6, 0.9, 0.999, 0.999999}) {
    const double x = laplace_sample(3.0, u);
    EXPECT_NEAR(1.0 - 0.5 * std::exp(-x / 3.0), u, 1e-12);
  }
}

TEST(LaplaceSample, RejectsClosedEndpoints) {
  for (double u : {0.0, 1.0, -0.1, 1.5, std::nan("")}) {
    EXPECT_EQ(code_of([&] { laplace_sample(1.0, u); }), ErrorCode::kInvalidUniform) << u;
  }
}

TEST(LaplaceSample, MomentsOverMillionDraws) {
  SeededRng rng(2024);
  const double b = 10.0;
  const int n = 1'000'000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = laplace_sample(b, rng.uniform01());
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_LT(std::fabs(mean), 0.05 * b);
  EXPECT_NEAR(sd, b * std::sqrt(2.0), 0.03 * b * std::sqrt(2.0));
}

TEST(LaplaceMechanism, WorkedExamples) {
  auto median = ScriptedRng::uniforms({0.5});
  const auto a = laplace_mechanism(123.0, Sensitivity(5.0), PrivacyParams(0.5), median);
  EXPECT_EQ(a.value, 123.0);
  EXPECT_EQ(a.mechanism, Mechanism::kLaplace);
  EXPECT_EQ(a.sensitivity.value() / a.params.epsilon(), 10.0);

  auto upper = ScriptedRng::uniforms({0.75});
  EXPECT_NEAR(laplace_mechanism(100.0, Sensitivity(5.0), PrivacyParams(1.0), upper).value,
              103.4657, 1e-4);

  EXPECT_EQ(code_of([&] {
              laplace_mechanism(1.0, Sensitivity(1.0), PrivacyParams(1.0, 1e-5), median);
            }),
            ErrorCode::kDeltaNotZero);
}

TEST(GaussianMechanism, SigmaCalibration) {
  // sqrt(2 ln 1.25e5), evaluated independently.
  EXPECT_NEAR(gaussian_sigma(Sensitivity(1.0), PrivacyParams(1.0, 1e-5)), 4.844805262605389, 1e-12);
  EXPECT_DOUBLE_EQ(gaussian_sigma(Sensitivity(2.0), PrivacyParams(0.7, 1e-6)),
                   2.0 * gaussian_sigma(Sensitivity(1.0), PrivacyParams(0.7, 1e-6)));
  EXPECT_EQ(code_of([] { gaussian_sigma(Sensitivity(1.0), PrivacyParams(1.0)); }),
            ErrorCode::kDeltaZero);
  EXPECT_EQ(code_of([] { gaussian_sigma(Sensitivity(1.0), PrivacyParams(1.5, 1e-5)); }),
            ErrorCode::kEpsilonOutOfRange);
}

TEST(GaussianMechanism, ZeroDrawAndSpread) {
  auto zero = ScriptedRng::normals({0.0});
  EXPECT_EQ(gaussian_mechanism(7.5, Sensitivity(1.0), PrivacyParams(1.0, 1e-5), zero).value, 7.5);

  auto one = ScriptedRng::normals({1.0});
  const double sigma = gaussian_sigma(Sensitivity(3.0), PrivacyParams(0.5, 1e-5));
  EXPECT_DOUBLE_EQ(
      gaussian_mechanism(0.0, Sensitivity(3.0), PrivacyParams(0.5, 1e-5), one).value, sigma);

  SeededRng rng(8);
  double sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v =
        gaussian_mechanism(0.0, Sensitivity(1.0), PrivacyParams(1.0, 1e-5), rng).value;
    sq += v * v;
  }
  EXPECT_NEAR(std::sqrt(sq / n), 4.8448, 0.03 * 4.8448);
}

TEST(Compose, Examples) {
  BudgetLedger ledger(100.0, fixed_clock());
  EXPECT_EQ(compose(ledger).epsilon_total, 0.0);
  EXPECT_EQ(compose(ledger).delta_total, 0.0);
  for (int i = 0; i < 24; ++i) ledger.charge(PrivacyParams(0.5), "hourly");
  EXPECT_EQ(compose(ledger).epsilon_total, 12.0);

  const auto c = compose(std::vector<LedgerEntry>{{"a", 0.3, 0.0, 0}, {"b", 0.7, 1e-6, 0}});
  EXPECT_NEAR(c.epsilon_total, 1.0, 1e-15);
  EXPECT_EQ(c.delta_total, 1e-6);
}

TEST(BudgetLedger, RejectsOverspendAtomically) {
  BudgetLedger ledger(1.0, fixed_clock());
  ledger.charge(PrivacyParams(0.6), "q");
  const auto before = ledger.entries();
  EXPECT_EQ(code_of([&] { ledger.charge(PrivacyParams(0.5), "q"); }),
            ErrorCode::kBudgetExhausted);
  EXPECT_EQ(ledger.entries().size(), before.size());
  EXPECT_EQ(ledger.epsilon_spent(), 0.6);
  ledger.charge(PrivacyParams(0.4), "q");
  EXPECT_FALSE(ledger.has_headroom(1e-9));
}

TEST(BudgetLedger, ExactCapWithFloatingSums) {
  // Ten charges of 0.1 sum to 0.9999999999999999 in binary; the cap check
  // must still accept the tenth and reject an eleventh.
  BudgetLedger ledger(1.0, fixed_clock());
  for (int i = 0; i < 10; ++i) ledger.charge(PrivacyParams(0.1), "tenth");
  EXPECT_THROW(ledger.charge(PrivacyParams(0.1), "tenth"), Error);
}

TEST(BudgetLedger, QueryIdsAndValidation) {
  BudgetLedger ledger(5.0, fixed_clock());
  EXPECT_EQ(ledger.charge(PrivacyParams(0.1), "sum").query_id, "sum-1");
  EXPECT_EQ(ledger.charge(PrivacyParams(0.1), "sum").query_id, "sum-2");
  EXPECT_EQ(ledger.charge_as(PrivacyParams(0.1), "req-9").query_id, "req-9");
  EXPECT_THROW(ledger.charge_as(PrivacyParams(0.1), "a,b"), Error);
  EXPECT_THROW(ledger.charge_as(PrivacyParams(0.1), ""), Error);
  EXPECT_THROW(BudgetLedger(0.0), Error);
}

TEST(BudgetLedger, MonotoneUnderRandomAppends) {
  SeededRng rng(99);
  BudgetLedger ledger(3.0, fixed_clock());
  double last = 0.0;
  for (int i = 0; i < 500; ++i) {
    const double eps = 0.01 + 0.2 * rng.uniform01();
    const auto n_before = ledger.entries().size();
    try {
      ledger.charge(PrivacyParams(eps), "r");
      ASSERT_EQ(ledger.entries().size(), n_before + 1);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::kBudgetExhausted);
      ASSERT_EQ(ledger.entries().size(), n_before);
    }
    const double now = compose(ledger).epsilon_total;
    ASSERT_GE(now, last);
    ASSERT_LE(now, 3.0 * (1 + 1e-12));
    last = now;
  }
}

TEST(BudgetLedger, ConcurrentChargesNeverExceedCap) {
  BudgetLedger ledger(10.0, fixed_clock());
  std::vector<std::thread> threads;
  std::atomic<int> accepted{0};
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 50; ++i) {
        try {
          ledger.charge(PrivacyParams(0.25), "c");
          ++accepted;
        } catch (const Error&) {
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(accepted.load(), 40);
  EXPECT_EQ(ledger.epsilon_spent(), 10.0);
}

TEST(BudgetLedger, PersistsAndReloads) {
  const auto path = (std::filesystem::temp_directory_path() / "mg_ledger_test.csv").string();
  std::remove(path.c_str());
  {
    auto ledger = BudgetLedger::open(path, 2.0, fixed_clock());
    ledger.charge(PrivacyParams(0.3), "sum");
    ledger.charge(PrivacyParams(0.1 + 0.2, 1e-7), "mean");
  }
  auto reopened = BudgetLedger::open(path, 2.0, fixed_clock());
  const auto e = reopened.entries();
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].query_id, "sum-1");
  EXPECT_EQ(e[1].epsilon, 0.1 + 0.2);
  EXPECT_EQ(e[1].delta, 1e-7);
  EXPECT_EQ(e[1].timestamp, 1700000000);
  EXPECT_NEAR(reopened.epsilon_spent(), 0.6, 1e-15);
  std::remove(path.c_str());
}

TEST(LedgerLine, RoundTripAndRejects) {
  const LedgerEntry e{"q-1", 0.1, 1e-9, 42};
  const auto back = parse_ledger_line(format_ledger_line(e));
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(back->query_id, e.query_id);
  EXPECT_EQ(back->epsilon, e.epsilon);
  EXPECT_EQ(back->delta, e.delta);
  EXPECT_EQ(back->timestamp, e.timestamp);
  EXPECT_FALSE(parse_ledger_line("q,abc,0,1").has_value());
  EXPECT_FALSE(parse_ledger_line("q,0.1,0").has_value());
}

TEST(DpSum, FeederAtMedianDraw) {
  const auto d = snapshot(std::vector<std::int64_t>(1000, 1500));
  BudgetLedger ledger(1.0, fixed_clock());
  auto rng = ScriptedRng::uniforms({0.5});
  const auto a = dp_sum(d, {}, PrivacyParams(1.0), ledger, rng);
  EXPECT_EQ(a.value, 1500.0);
  EXPECT_EQ(a.sensitivity.value(), 5.0);
  ASSERT_EQ(ledger.entries().size(), 1u);
  EXPECT_EQ(ledger.entries()[0].epsilon, 1.0);
  EXPECT_EQ(ledger.entries()[0].delta, 0.0);
}

TEST(DpSum, EmptyDatasetIsNoiseOnly) {
  BudgetLedger ledger(5.0, fixed_clock());
  auto rng = ScriptedRng::uniforms({0.5, 0.75});
  const meterdata::FeederDataset empty;
  EXPECT_EQ(dp_sum(empty, {}, PrivacyParams(1.0), ledger, rng).value, 0.0);
  EXPECT_NEAR(dp_sum(empty, {}, PrivacyParams(1.0), ledger, rng).value, 5.0 * kLn2, 1e-12);
}

TEST(DpSum, ExhaustedLedgerReleasesNothing) {
  const auto d = snapshot({1000});
  BudgetLedger ledger(1.0, fixed_clock());
  ledger.charge(PrivacyParams(1.0), "earlier");
  // No uniforms scripted: any noise draw would throw logic_error.
  ScriptedRng no_draws(ScriptedRng::Script{});
  EXPECT_EQ(code_of([&] { dp_sum(d, {}, PrivacyParams(0.1), ledger, no_draws); }),
            ErrorCode::kBudgetExhausted);
  EXPECT_EQ(ledger.entries().size(), 1u);
}

TEST(DpSum, InvalidMechanismChargesNothing) {
  const auto d = snapshot({1000});
  BudgetLedger ledger(5.0, fixed_clock());
  ScriptedRng no_draws(ScriptedRng::Script{});
  EXPECT_EQ(code_of([&] { dp_sum(d, {}, PrivacyParams(2.0, 1e-5), ledger, no_draws); }),
            ErrorCode::kEpsilonOutOfRange);
  EXPECT_TRUE(ledger.entries().empty());
}

TEST(DpSum, GaussianWhenDeltaPositive) {
  const auto d = snapshot({1000, 2000});
  BudgetLedger ledger(5.0, fixed_clock());
  auto rng = ScriptedRng::normals({0.0});
  const auto a = dp_sum(d, {}, PrivacyParams(1.0, 1e-5), ledger, rng);
  EXPECT_EQ(a.mechanism, Mechanism::kGaussian);
  EXPECT_EQ(a.value, 3.0);
  EXPECT_EQ(ledger.entries()[0].delta, 1e-5);
}

TEST(DpSum, TimestampScope) {
  using testsupport::series_of;
  const meterdata::FeederDataset d(
      {series_of("a", 0, 3600, {1000, 2000}), series_of("b", 0, 3600, {500, 700})}, 3600,
      EnergyQuantity::from_milli(5000));
  BudgetLedger ledger(5.0, fixed_clock());
  auto rng = ScriptedRng::uniforms({0.5});
  EXPECT_EQ(dp_sum(d, {3600}, PrivacyParams(1.0), ledger, rng).value, 2.7);
  EXPECT_EQ(dp_sum(d, {}, PrivacyParams(1.0), ledger, rng).value, 4.2);
  EXPECT_EQ(dp_count(d, {0}, PrivacyParams(1.0), ledger, rng).value, 2.0);
}

TEST(DpCount, MedianDraw) {
  const auto d = snapshot(std::vector<std::int64_t>(42, 100));
  BudgetLedger ledger(5.0, fixed_clock());
  auto rng = ScriptedRng::uniforms({0.5, 0.75});
  EXPECT_EQ(dp_count(d, {}, PrivacyParams(1.0), ledger, rng).value, 42.0);
  const auto a = dp_count(d, {}, PrivacyParams(1.0), ledger, rng);
  EXPECT_EQ(a.sensitivity.value(), 1.0);
  EXPECT_NEAR(a.value, 42.0 + kLn2, 1e-12);
}

TEST(DpMean, NoisySumOverPublicCount) {
  const auto d = snapshot({2000, 3000, 5000});
  BudgetLedger ledger(5.0, fixed_clock());
  auto rng = ScriptedRng::uniforms({0.5});
  EXPECT_NEAR(dp_mean(d, {}, PrivacyParams(1.0), ledger, rng).value, 10.0 / 3.0, 1e-12);
  EXPECT_EQ(code_of([&] {
              dp_mean(meterdata::FeederDataset{}, {}, PrivacyParams(1.0), ledger, rng);
            }),
            ErrorCode::kEmptyDataset);
}

TEST(DpHistogram, DisjointBinsChargeOnce) {
  std::vector<std::int64_t> readings(10, 500);
  readings.push_back(9000 / 2);  // 4.5 kWh, outside [0, 2)
  const auto d = snapshot(readings);
  BudgetLedger ledger(5.0, fixed_clock());
  auto rng = ScriptedRng::uniforms({0.5});
  const HistogramSpec spec{{EnergyQuantity::from_milli(0), EnergyQuantity::from_milli(1000),
                            EnergyQuantity::from_milli(2000)}};
  const auto bins = dp_histogram(d, {}, spec, PrivacyParams(0.5), ledger, rng);
  ASSERT_EQ(bins.size(), 2u);
  EXPECT_EQ(bins[0].value, 10.0);
  EXPECT_EQ(bins[1].value, 0.0);
  EXPECT_EQ(ledger.entries().size(), 1u);
  EXPECT_EQ(ledger.epsilon_spent(), 0.5);
}

TEST(DpHistogram, IndependentNoisePerBin) {
  const auto d = snapshot({500, 1500});
  BudgetLedger ledger(5.0, fixed_clock());
  auto rng = ScriptedRng::uniforms({0.75, 0.25});
  const HistogramSpec spec{{EnergyQuantity::from_milli(0), EnergyQuantity::from_milli(1000),
                            EnergyQuantity::from_milli(2000)}};
  const auto bins = dp_histogram(d, {}, spec, PrivacyParams(1.0), ledger, rng);
  EXPECT_NEAR(bins[0].value, 1.0 + kLn2, 1e-12);
  EXPECT_NEAR(bins[1].value, 1.0 - kLn2, 1e-12);
}

TEST(DpHistogram, RejectsUnsortedEdges) {
  const auto d = snapshot({500});
  BudgetLedger ledger(5.0, fixed_clock());
  auto rng = ScriptedRng::uniforms({0.5});
  const HistogramSpec bad{{EnergyQuantity::from_milli(1000), EnergyQuantity::from_milli(0)}};
  EXPECT_THROW(dp_histogram(d, {}, bad, PrivacyParams(1.0), ledger, rng), Error);
  EXPECT_TRUE(ledger.entries().empty());
}

TEST(DpQueries, CallerSuppliedQueryId) {
  const auto d = snapshot({500});
  BudgetLedger ledger(5.0, fixed_clock());
  auto rng = ScriptedRng::uniforms({0.5});
  EXPECT_EQ(dp_sum(d, {}, PrivacyParams(1.0), ledger, rng, "req-1").query_id, "req-1");
  EXPECT_EQ(ledger.entries().back().query_id, "req-1");
}

}  // namespace
}  // namespace meterguard::dp
