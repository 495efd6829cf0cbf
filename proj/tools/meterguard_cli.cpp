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

// Command-line front end: one subcommand per module plus the gateway.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "meterguard/anonymize.hpp"
#include "meterguard/audit.hpp"
#include "meterguard/dp.hpp"
#include "meterguard/error.hpp"
#include "meterguard/fedlearn.hpp"
#include "meterguard/gateway.hpp"
#include "meterguard/he.hpp"
#include "meterguard/meterdata.hpp"
#include "meterguard/protocol.hpp"
#include "meterguard/smpc.hpp"
#include "meterguard/synthetic.hpp"

namespace fs = std::filesystem;
using namespace meterguard;

namespace {

struct IngestFlags {
  std::int64_t interval_s = 3600;
  std::string delta_max_kwh = "5";

  void attach(CLI::App* cmd) {
    cmd->add_option("--interval-s", interval_s, "Interval length in seconds")
        ->capture_default_str();
    cmd->add_option("--delta-max", delta_max_kwh, "Per-interval cap in kWh")
        ->capture_default_str();
  }

  meterdata::IngestConfig config() const {
    const auto cap = meterdata::EnergyQuantity::parse_kwh(delta_max_kwh);
    if (!cap) throw Error(ErrorCode::kInvalidArgument, "bad --delta-max " + delta_max_kwh);
    return {interval_s, *cap};
  }
};

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kStorageFailure, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::kStorageFailure, "cannot write " + path);
}

std::unique_ptr<RandomSource> make_rng(const std::optional<std::uint64_t>& seed) {
  if (seed) return std::make_unique<SeededRng>(*seed);
  return std::make_unique<SecureRng>();
}

meterdata::EpochSeconds timestamp_arg(const std::string& text) {
  const auto t = meterdata::parse_utc_timestamp(text);
  if (!t) throw Error(ErrorCode::kInvalidArgument, "bad timestamp " + text);
  return *t;
}

std::vector<std::uint64_t> read_rates(const std::string& path) {
  std::vector<std::uint64_t> rates;
  std::istringstream in(read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.find_first_not_of("0123456789") != std::string::npos) {
      throw Error(ErrorCode::kMalformedRow, "rate is not a non-negative integer: " + line);
    }
    rates.push_back(std::stoull(line));
  }
  return rates;
}

std::vector<smpc::PartyInput> read_party_inputs(const std::string& path) {
  std::vector<smpc::PartyInput> inputs;
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line == "party_id,kwh")) continue;
    const auto comma = line.find(',');
    const auto kwh = comma == std::string::npos
                         ? std::nullopt
                         : meterdata::EnergyQuantity::parse_kwh(line.substr(comma + 1));
    if (!kwh || comma == 0 || kwh->milli_kwh() < 0) {
      throw Error(ErrorCode::kMalformedRow, "expected party_id,kwh", line_no);
    }
    inputs.push_back(smpc::PartyInput::from_energy(line.substr(0, comma), *kwh));
  }
  return inputs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meterguard: privacy-preserving analytics for smart-meter data"};
  app.require_subcommand(1);

  // anonymize
  auto* anon = app.add_subcommand("anonymize", "Replace meter ids with keyed pseudonyms");
  std::uint64_t anon_epoch = 0;
  std::string anon_key, anon_in, anon_out;
  IngestFlags anon_ingest;
  anon->add_option("--epoch", anon_epoch, "Key rotation epoch")->required();
  anon->add_option("--key-file", anon_key, "32-byte secret key file")->required();
  anon->add_option("input", anon_in)->required();
  anon->add_option("output", anon_out)->required();
  anon_ingest.attach(anon);

  // dp-query
  auto* dpq = app.add_subcommand("dp-query", "Differentially private aggregate");
  std::string dp_op = "sum", dp_ledger, dp_in, dp_ts;
  double dp_eps = 1.0, dp_delta = 0.0, dp_cap = 1.0;
  std::optional<std::uint64_t> dp_seed;
  std::vector<std::string> dp_edges;
  IngestFlags dp_ingest;
  dpq->add_option("--op", dp_op)->check(CLI::IsMember({"sum", "count", "mean", "histogram"}));
  dpq->add_option("--epsilon", dp_eps)->required();
  dpq->add_option("--delta", dp_delta);
  dpq->add_option("--ledger", dp_ledger, "Append-only budget ledger")->required();
  dpq->add_option("--cap", dp_cap, "Total epsilon the ledger may spend")->capture_default_str();
  dpq->add_option("--seed", dp_seed);
  dpq->add_option("--timestamp", dp_ts, "Restrict to one interval");
  dpq->add_option("--edges", dp_edges, "Histogram bin edges in kWh")->delimiter(',');
  dpq->add_option("input", dp_in)->required();
  dp_ingest.attach(dpq);

  // synth-gen
  auto* sgen = app.add_subcommand("synth-gen", "Fit a load-profile model and sample from it");
  std::string sg_fit, sg_out;
  std::size_t sg_k = 2, sg_n = 10, sg_days = 1;
  std::uint64_t sg_seed = 0;
  double sg_rate = 0.0, sg_mag = 1.0;
  std::int64_t sg_dur = 1;
  IngestFlags sg_ingest;
  sgen->add_option("--fit", sg_fit)->required();
  sgen->add_option("--clusters", sg_k)->capture_default_str();
  sgen->add_option("--households", sg_n)->capture_default_str();
  sgen->add_option("--days", sg_days)->capture_default_str();
  sgen->add_option("--seed", sg_seed)->capture_default_str();
  sgen->add_option("--events-per-day", sg_rate, "Appliance event rate")->capture_default_str();
  sgen->add_option("--event-kwh", sg_mag)->capture_default_str();
  sgen->add_option("--event-intervals", sg_dur)->capture_default_str();
  sgen->add_option("--out", sg_out)->required();
  sg_ingest.attach(sgen);

  // synth-check
  auto* scheck = app.add_subcommand("synth-check", "Fidelity and privacy reports");
  std::string sc_real, sc_synth;
  double sc_threshold = synthetic::kDefaultMemorizationThreshold;
  IngestFlags sc_ingest;
  scheck->add_option("real", sc_real)->required();
  scheck->add_option("synth", sc_synth)->required();
  scheck->add_option("--threshold", sc_threshold)->capture_default_str();
  sc_ingest.attach(scheck);

  // fed-train
  auto* fed = app.add_subcommand("fed-train", "Federated averaging over round-robin shards");
  std::size_t fed_k = 2;
  fedlearn::RoundConfig fed_cfg;
  std::optional<double> fed_clip;
  bool fed_secure = false;
  std::uint64_t fed_seed = 0;
  std::string fed_in;
  IngestFlags fed_ingest;
  fed->add_option("--clients", fed_k)->capture_default_str();
  fed->add_option("--rounds", fed_cfg.rounds)->capture_default_str();
  fed->add_option("--local-steps", fed_cfg.local_steps)->capture_default_str();
  fed->add_option("--lr", fed_cfg.learning_rate)->capture_default_str();
  fed->add_option("--clip", fed_clip);
  fed->add_option("--dp-sigma", fed_cfg.dp_sigma);
  fed->add_option("--holdout", fed_cfg.holdout_fraction, "Trailing fraction held out");
  fed->add_flag("--secure-agg", fed_secure);
  fed->add_option("--seed", fed_seed)->capture_default_str();
  fed->add_option("input", fed_in)->required();
  fed_ingest.attach(fed);

  // smpc-sum
  auto* ssum = app.add_subcommand("smpc-sum", "Additive-sharing secure sum");
  std::size_t ss_min = 2;
  std::optional<std::uint64_t> ss_seed;
  std::string ss_in, ss_transcript = "transcript.csv";
  ssum->add_option("--min-participants", ss_min)->capture_default_str();
  ssum->add_option("--seed", ss_seed);
  ssum->add_option("--transcript", ss_transcript)->capture_default_str();
  ssum->add_option("input", ss_in)->required();

  // he-keygen / he-bill / he-decrypt
  auto* hkey = app.add_subcommand("he-keygen", "Generate a Paillier keypair");
  std::size_t hk_bits = he::kDefaultKeyBits;
  std::string hk_out, hk_secret;
  hkey->add_option("--bits", hk_bits)->capture_default_str();
  hkey->add_option("--out", hk_out, "Public key file")->required();
  hkey->add_option("--secret-out", hk_secret, "Secret key file (default <out>.secret)");

  auto* hbill = app.add_subcommand("he-bill", "Encrypt usage and fold it into an encrypted bill");
  std::string hb_pub, hb_rates, hb_usage;
  IngestFlags hb_ingest;
  hbill->add_option("--pub", hb_pub)->required();
  hbill->add_option("--rates", hb_rates, "One integer rate per line")->required();
  hbill->add_option("usage", hb_usage)->required();
  hb_ingest.attach(hbill);

  auto* hdec = app.add_subcommand("he-decrypt", "Decrypt a ciphertext file");
  std::string hd_key, hd_ct;
  hdec->add_option("--key", hd_key)->required();
  hdec->add_option("ciphertext", hd_ct)->required();

  // gateway serve
  auto* gw = app.add_subcommand("gateway", "Policy gateway");
  gw->require_subcommand(1);
  auto* serve = gw->add_subcommand("serve", "Answer JSON request lines from stdin");
  std::string gw_policy, gw_data;
  std::optional<std::uint64_t> gw_seed;
  serve->add_option("--policy", gw_policy)->required();
  serve->add_option("--data", gw_data)->required();
  serve->add_option("--seed", gw_seed, "Deterministic randomness (testing only)");

  // audit-show / spend-report
  auto* ashow = app.add_subcommand("audit-show", "Print an audit log");
  std::string as_log;
  bool as_verify = false;
  ashow->add_option("--log", as_log)->required();
  ashow->add_flag("--verify", as_verify);

  auto* spend = app.add_subcommand("spend-report", "Epsilon spent per requester");
  std::string sp_ledger, sp_log;
  spend->add_option("--ledger", sp_ledger)->required();
  spend->add_option("--log", sp_log)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*anon) {
      const auto key = anonymize::load_pseudonym_key(anon_key, anon_epoch);
      const auto data = meterdata::load_csv(anon_in, anon_ingest.config());
      write_text(anon_out, meterdata::serialize_csv(anonymize::pseudonymize_dataset(data, key)));
      return 0;
    }

    if (*dpq) {
      const auto data = meterdata::load_csv(dp_in, dp_ingest.config());
      auto ledger = dp::BudgetLedger::open(dp_ledger, dp_cap);
      auto rng = make_rng(dp_seed);
      const dp::PrivacyParams p(dp_eps, dp_delta);
      dp::QueryScope scope;
      if (!dp_ts.empty()) scope.timestamp = timestamp_arg(dp_ts);
      std::vector<dp::DpAnswer> answers;
      if (dp_op == "sum") {
        answers.push_back(dp::dp_sum(data, scope, p, ledger, *rng));
      } else if (dp_op == "count") {
        answers.push_back(dp::dp_count(data, scope, p, ledger, *rng));
      } else if (dp_op == "mean") {
        answers.push_back(dp::dp_mean(data, scope, p, ledger, *rng));
      } else {
        dp::HistogramSpec spec;
        for (const auto& e : dp_edges) {
          const auto q = meterdata::EnergyQuantity::parse_kwh(e);
          if (!q) throw Error(ErrorCode::kInvalidArgument, "bad edge " + e);
          spec.edges.push_back(*q);
        }
        answers = dp::dp_histogram(data, scope, spec, p, ledger, *rng);
      }
      for (std::size_t i = 0; i < answers.size(); ++i) {
        const auto& a = answers[i];
        if (answers.size() > 1) std::cout << "bin=" << i << ' ';
        std::cout << "value=" << a.value << " mechanism=" << dp::mechanism_name(a.mechanism)
                  << " epsilon=" << a.params.epsilon() << " query_id=" << a.query_id << '\n';
      }
      std::cout << "epsilon_spent_total=" << ledger.epsilon_spent() << '\n';
      return 0;
    }

    if (*sgen) {
      const auto cfg = sg_ingest.config();
      const auto real = meterdata::load_csv(sg_fit, cfg);
      synthetic::FitOptions fit_opts;
      fit_opts.appliance_events = {sg_rate, sg_mag, sg_dur};
      const auto model = synthetic::fit(real, sg_k, sg_seed, fit_opts);
      synthetic::GenerateOptions gen;
      gen.interval_s = cfg.interval_s;
      gen.delta_max = cfg.delta_max;
      if (!real.empty()) {
        gen.start = meterdata::day_index(real.series().front().readings.front().timestamp) *
                    meterdata::kSecondsPerDay;
      }
      const auto synth = synthetic::generate(model, sg_n, sg_days,
                                             derive_seed(sg_seed, "cli/generate"), gen);
      write_text(sg_out, meterdata::serialize_csv(synth));
      return 0;
    }

    if (*scheck) {
      const auto cfg = sc_ingest.config();
      const auto real = meterdata::load_csv(sc_real, cfg);
      const auto synth = meterdata::load_csv(sc_synth, cfg);
      const auto fid = synthetic::fidelity_report(real, synth);
      const auto priv = synthetic::privacy_check(real, synth, sc_threshold);
      for (int h = 0; h < 24; ++h) {
        std::cout << "per_hour_mean_rel_err_" << (h < 10 ? "0" : "") << h << '='
                  << fid.per_hour_mean_rel_err[h] << '\n';
      }
      std::cout << "hist_l1=" << fid.hist_l1 << '\n'
                << "peak_dist_rel_err=" << fid.peak_dist_rel_err << '\n'
                << "min_nn_distance=" << priv.min_nn_distance << '\n'
                << "memorization_flag=" << (priv.memorization_flag ? "true" : "false") << '\n'
                << "distinguisher_auc=" << priv.distinguisher_auc << '\n';
      return 0;
    }

    if (*fed) {
      const auto data = meterdata::load_csv(fed_in, fed_ingest.config());
      fed_cfg.clip_norm = fed_clip;
      if (fed_secure) fed_cfg.aggregation = fedlearn::Aggregation::kSecure;
      const auto result =
          fedlearn::run_federation(fedlearn::shard_round_robin(data, fed_k), fed_cfg, fed_seed);
      std::cout << "round,participants,total_samples,train_mse,holdout_mse\n";
      std::cout.precision(10);
      for (const auto& m : result.history) {
        std::cout << m.round << ',' << m.participants.size() << ',' << m.total_samples << ','
                  << m.train_mse << ',' << m.holdout_mse << '\n';
      }
      return 0;
    }

    if (*ssum) {
      auto rng = make_rng(ss_seed);
      const auto outcome = smpc::secure_sum(read_party_inputs(ss_in), ss_min, *rng);
      std::ostringstream transcript;
      transcript << "from,to,value\n";
      for (const auto& m : outcome.transcript.messages) {
        transcript << m.from << ',' << m.to << ',' << m.value << '\n';
      }
      write_text(ss_transcript, transcript.str());
      if (outcome.aborted()) {
        std::cerr << "aborted: " << std::get<smpc::Abort>(outcome.result).reason << '\n';
        return 1;
      }
      std::cout << std::get<meterdata::EnergyQuantity>(outcome.result).to_kwh_string() << '\n';
      return 0;
    }

    if (*hkey) {
      SecureRng rng;
      const auto kp = he::keygen(hk_bits, rng);
      he::save_public_key(kp.pub, hk_out);
      he::save_secret_key(kp, hk_secret.empty() ? hk_out + ".secret" : hk_secret);
      std::cout << "key_id=" << kp.pub.key_id << '\n';
      return 0;
    }

    if (*hbill) {
      const auto pub = he::load_public_key(hb_pub);
      const auto cfg = hb_ingest.config();
      const auto usage = meterdata::load_csv(hb_usage, cfg);
      if (usage.series().size() != 1) {
        throw Error(ErrorCode::kInvalidArgument, "usage file must hold exactly one meter");
      }
      SecureRng rng;
      std::vector<he::Ciphertext> cts;
      for (const auto& r : usage.series().front().readings) {
        cts.push_back(he::encrypt(mpz_class(std::to_string(r.energy.milli_kwh())), pub, rng));
      }
      const auto bill = he::encrypted_bill(cts, he::RateSchedule{read_rates(hb_rates)}, pub,
                                           static_cast<std::uint64_t>(cfg.delta_max.milli_kwh()));
      std::cout << he::format_ciphertext(bill) << '\n';
      return 0;
    }

    if (*hdec) {
      const auto kp = he::load_secret_key(hd_key);
      std::cout << he::decrypt(he::parse_ciphertext(read_text(hd_ct)), kp).get_str(10) << '\n';
      return 0;
    }

    if (*serve) {
      const auto policy = gateway::load_policy(gw_policy);
      const fs::path dir(gw_data);
      gateway::GatewayData data;
      data.readings = meterdata::load_csv((dir / "readings.csv").string(),
                                          {policy.interval_s, policy.delta_max});
      if (fs::exists(dir / "attributes.csv")) {
        data.attributes = gateway::parse_attributes(read_text((dir / "attributes.csv").string()));
      }
      auto ledger = dp::BudgetLedger::open((dir / "ledger.csv").string(), policy.epsilon_cap);
      auto log = gateway::AuditLog::open((dir / "audit.jsonl").string());
      if (!gateway::verify_chain(log.records()).valid) {
        throw Error(ErrorCode::kAuditWriteFailure, "existing audit log fails verification");
      }
      gateway::Gateway gate(policy, std::move(data), std::move(ledger), std::move(log),
                            make_rng(gw_seed));
      if (fs::exists(dir / "billing_key.json")) {
        gate.set_billing_key(he::load_secret_key((dir / "billing_key.json").string()));
      }
      gateway::serve(gate, std::cin, std::cout);
      return 0;
    }

    if (*ashow) {
      const auto records = gateway::AuditLog::read_file(as_log);
      for (const auto& r : records) {
        std::cout << r.seq << ' ' << r.request_id << ' ' << r.requester << ' ' << r.decision
                  << ' ' << r.mechanism << " epsilon=" << r.epsilon_spent << '\n';
      }
      if (as_verify) {
        const auto v = gateway::verify_chain(records);
        if (v.valid) {
          std::cout << "chain: valid (" << records.size() << " records)\n";
        } else {
          std::cout << "chain: INVALID at seq " << *v.first_bad_seq << '\n';
          return 1;
        }
      }
      return 0;
    }

    if (*spend) {
      // The cap only matters for charging; reading accepts any spend.
      std::vector<dp::LedgerEntry> entries;
      std::istringstream in(read_text(sp_ledger));
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto e = dp::parse_ledger_line(line);
        if (!e) throw Error(ErrorCode::kMalformedRow, "ledger line: " + line);
        entries.push_back(*e);
      }
      const auto report = gateway::spend_report(entries, gateway::AuditLog::read_file(sp_log));
      std::cout << "epsilon_total=" << report.epsilon_total << '\n';
      for (const auto& [who, eps] : report.per_requester) {
        std::cout << "requester." << who << '=' << eps << '\n';
      }
      for (const auto& [reason, n] : report.denied_counts) {
        std::cout << "denied." << reason << '=' << n << '\n';
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
