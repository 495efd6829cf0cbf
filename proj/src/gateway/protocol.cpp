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

#include "meterguard/protocol.hpp"

#include <istream>
#include <ostream>

#include "meterguard/error.hpp"

namespace meterguard::gateway {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void bad(const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, what);
}

template <class T>
T field_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    bad(std::string("field ") + key + " has the wrong type");
  }
}

meterdata::EpochSeconds timestamp_field(const json& j, const char* key) {
  const auto text = field_or<std::string>(j, key, "");
  const auto t = meterdata::parse_utc_timestamp(text);
  if (!t) bad(std::string("field ") + key + ": bad timestamp " + text);
  return *t;
}

std::optional<meterdata::EpochSeconds> optional_timestamp(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return timestamp_field(j, key);
}

DpQuerySpec::Kind query_kind(const std::string& s) {
  if (s == "sum") return DpQuerySpec::Kind::kSum;
  if (s == "count") return DpQuerySpec::Kind::kCount;
  if (s == "mean") return DpQuerySpec::Kind::kMean;
  if (s == "histogram") return DpQuerySpec::Kind::kHistogram;
  bad("unknown query " + s);
}

const char* query_kind_name(DpQuerySpec::Kind k) {
  switch (k) {
    case DpQuerySpec::Kind::kSum: return "sum";
    case DpQuerySpec::Kind::kCount: return "count";
    case DpQuerySpec::Kind::kMean: return "mean";
    case DpQuerySpec::Kind::kHistogram: return "histogram";
  }
  return "sum";
}

fedlearn::Aggregation aggregation_kind(const std::string& s) {
  if (s == "plain") return fedlearn::Aggregation::kPlain;
  if (s == "fixed_point") return fedlearn::Aggregation::kFixedPoint;
  if (s == "secure") return fedlearn::Aggregation::kSecure;
  bad("unknown aggregation " + s);
}

const char* aggregation_name(fedlearn::Aggregation a) {
  switch (a) {
    case fedlearn::Aggregation::kPlain: return "plain";
    case fedlearn::Aggregation::kFixedPoint: return "fixed_point";
    case fedlearn::Aggregation::kSecure: return "secure";
  }
  return "plain";
}

std::string day_string(meterdata::EpochSeconds t) {
  return meterdata::format_utc_timestamp(t).substr(0, 10);
}

Operation operation_from_json(const json& op) {
  if (!op.is_object()) bad("operation must be an object");
  const auto type = field_or<std::string>(op, "type", "");
  if (type == "RawExport") {
    return RawExport{{field_or(op, "deidentified", false)}};
  }
  if (type == "DpQuery") {
    DpQuerySpec s;
    s.kind = query_kind(field_or<std::string>(op, "query", "sum"));
    s.epsilon = field_or(op, "epsilon", 1.0);
    s.delta = field_or(op, "delta", 0.0);
    s.scope.timestamp = optional_timestamp(op, "timestamp");
    for (const auto& e : field_or(op, "edges_kwh", std::vector<std::string>{})) {
      const auto q = meterdata::EnergyQuantity::parse_kwh(e);
      if (!q) bad("bad histogram edge " + e);
      s.histogram.edges.push_back(*q);
    }
    return DpQuery{s};
  }
  if (type == "SynthGenerate") {
    SynthGenerateSpec s;
    s.clusters = field_or<std::size_t>(op, "clusters", s.clusters);
    s.households = field_or<std::size_t>(op, "households", s.households);
    s.days = field_or<std::size_t>(op, "days", s.days);
    s.seed = field_or<std::uint64_t>(op, "seed", s.seed);
    return SynthGenerate{s};
  }
  if (type == "FedTrain") {
    FedTrainSpec s;
    s.clients = field_or<std::size_t>(op, "clients", s.clients);
    s.seed = field_or<std::uint64_t>(op, "seed", s.seed);
    auto& c = s.config;
    c.rounds = field_or<std::size_t>(op, "rounds", c.rounds);
    c.local_steps = field_or<std::size_t>(op, "local_steps", c.local_steps);
    c.learning_rate = field_or(op, "learning_rate", c.learning_rate);
    if (op.contains("clip_norm") && !op["clip_norm"].is_null()) {
      c.clip_norm = field_or(op, "clip_norm", 0.0);
    }
    c.dp_sigma = field_or(op, "dp_sigma", c.dp_sigma);
    c.aggregation = aggregation_kind(field_or<std::string>(op, "aggregation", "plain"));
    c.holdout_fraction = field_or(op, "holdout_fraction", c.holdout_fraction);
    return FedTrain{s};
  }
  if (type == "SmpcSum") {
    SmpcSumSpec s;
    s.timestamp = optional_timestamp(op, "timestamp");
    if (op.contains("noise_epsilon") && !op["noise_epsilon"].is_null()) {
      s.noise_epsilon = field_or(op, "noise_epsilon", 0.0);
    }
    return SmpcSum{s};
  }
  if (type == "HeBill") {
    HeBillSpec s;
    s.meter_id = field_or<std::string>(op, "meter_id", "");
    const auto day = field_or<std::string>(op, "day", "");
    const auto t = meterdata::parse_utc_timestamp(day + "T00:00:00Z");
    if (!t) bad("bad day " + day);
    s.day_start = *t;
    s.rates = field_or(op, "rates", std::vector<std::uint64_t>{});
    return HeBill{s};
  }
  if (type == "AggregateReport") {
    AggregateReportSpec s;
    if (op.contains("group_by") && !op["group_by"].is_null()) {
      s.group_by_attribute = field_or<std::string>(op, "group_by", "");
    }
    return AggregateReport{s};
  }
  bad("unknown operation type '" + type + "'");
}

json operation_to_json(const Operation& op) {
  return std::visit(
      Overloaded{
          [](const RawExport& o) {
            return json{{"type", "RawExport"}, {"deidentified", o.spec.deidentified}};
          },
          [](const DpQuery& o) {
            json j{{"type", "DpQuery"},
                   {"query", query_kind_name(o.spec.kind)},
                   {"epsilon", o.spec.epsilon},
                   {"delta", o.spec.delta}};
            if (o.spec.scope.timestamp) {
              j["timestamp"] = meterdata::format_utc_timestamp(*o.spec.scope.timestamp);
            }
            if (!o.spec.histogram.edges.empty()) {
              json edges = json::array();
              for (auto e : o.spec.histogram.edges) edges.push_back(e.to_kwh_string());
              j["edges_kwh"] = edges;
            }
            return j;
          },
          [](const SynthGenerate& o) {
            return json{{"type", "SynthGenerate"},
                        {"clusters", o.spec.clusters},
                        {"households", o.spec.households},
                        {"days", o.spec.days},
                        {"seed", o.spec.seed}};
          },
          [](const FedTrain& o) {
            const auto& c = o.spec.config;
            json j{{"type", "FedTrain"},
                   {"clients", o.spec.clients},
                   {"seed", o.spec.seed},
                   {"rounds", c.rounds},
                   {"local_steps", c.local_steps},
                   {"learning_rate", c.learning_rate},
                   {"dp_sigma", c.dp_sigma},
                   {"aggregation", aggregation_name(c.aggregation)},
                   {"holdout_fraction", c.holdout_fraction}};
            if (c.clip_norm) j["clip_norm"] = *c.clip_norm;
            return j;
          },
          [](const SmpcSum& o) {
            json j{{"type", "SmpcSum"}};
            if (o.spec.timestamp) j["timestamp"] = meterdata::format_utc_timestamp(*o.spec.timestamp);
            if (o.spec.noise_epsilon) j["noise_epsilon"] = *o.spec.noise_epsilon;
            return j;
          },
          [](const HeBill& o) {
            return json{{"type", "HeBill"},
                        {"meter_id", o.spec.meter_id},
                        {"day", day_string(o.spec.day_start)},
                        {"rates", o.spec.rates}};
          },
          [](const AggregateReport& o) {
            json j{{"type", "AggregateReport"}};
            if (o.spec.group_by_attribute) j["group_by"] = *o.spec.group_by_attribute;
            return j;
          },
      },
      op);
}

json answer_to_json(const dp::DpAnswer& a) {
  return json{{"value", a.value},
              {"mechanism", dp::mechanism_name(a.mechanism)},
              {"epsilon", a.params.epsilon()},
              {"delta", a.params.delta()},
              {"sensitivity", a.sensitivity.value()},
              {"query_id", a.query_id}};
}

json result_to_json(const DispatchedResult& result) {
  return std::visit(
      Overloaded{
          [](const std::monostate&) { return json(nullptr); },
          [](const meterdata::FeederDataset& d) {
            return json{{"csv", meterdata::serialize_csv(d)}};
          },
          [](const std::vector<dp::DpAnswer>& answers) {
            json arr = json::array();
            for (const auto& a : answers) arr.push_back(answer_to_json(a));
            return json{{"answers", arr}};
          },
          [](const SynthResult& s) {
            return json{{"csv", meterdata::serialize_csv(s.dataset)},
                        {"min_nn_distance", s.privacy.min_nn_distance},
                        {"memorization_flag", s.privacy.memorization_flag},
                        {"distinguisher_auc", s.privacy.distinguisher_auc}};
          },
          [](const std::map<std::string, anonymize::GroupResult>& groups) {
            json out = json::object();
            for (const auto& [key, g] : groups) {
              if (const auto* a = std::get_if<anonymize::Aggregate>(&g)) {
                out[key] = json{{"count", a->count},
                                {"sum_kwh", a->sum.to_kwh_string()},
                                {"mean_kwh", a->mean_kwh}};
              } else {
                out[key] = "suppressed";
              }
            }
            return json{{"groups", out}};
          },
          [](const fedlearn::FederationResult& f) {
            json history = json::array();
            for (const auto& m : f.history) {
              history.push_back(json{{"round", m.round},
                                     {"participants", m.participants},
                                     {"train_mse", m.train_mse},
                                     {"holdout_mse", m.holdout_mse}});
            }
            return json{{"weights", f.final_model.weights}, {"history", history}};
          },
          [](const SmpcResult& s) {
            return json{{"sum_kwh", s.value_kwh}, {"noised", s.noised}};
          },
          [](const BillResult& b) {
            return json{{"ciphertext", b.ciphertext}, {"amount", b.amount}};
          },
      },
      result);
}

}  // namespace

RequestEnvelope request_from_json(const json& j) {
  if (!j.is_object()) bad("request must be a JSON object");
  RequestEnvelope req;
  req.request_id = field_or<std::string>(j, "request_id", "");
  req.requester = field_or<std::string>(j, "requester", "");
  if (req.request_id.empty()) bad("missing request_id");
  if (req.requester.empty()) bad("missing requester");
  const auto purpose = field_or<std::string>(j, "purpose", "");
  if (purpose == "Primary") {
    req.purpose = Purpose::kPrimary;
  } else if (purpose == "Secondary") {
    req.purpose = Purpose::kSecondary;
  } else {
    bad("purpose must be Primary or Secondary");
  }
  req.consent = field_or(j, "consent", false);
  if (!j.contains("operation")) bad("missing operation");
  req.operation = operation_from_json(j["operation"]);
  return req;
}

json request_to_json(const RequestEnvelope& req) {
  return json{{"request_id", req.request_id},
              {"requester", req.requester},
              {"purpose", purpose_name(req.purpose)},
              {"consent", req.consent},
              {"operation", operation_to_json(req.operation)}};
}

json decision_to_json(const RequestEnvelope& req, const Decision& d) {
  json j{{"request_id", req.request_id},
         {"decision", d.outcome()},
         {"mechanism", d.mechanism},
         {"epsilon_spent", d.epsilon_spent},
         {"audit_seq", d.audit_seq}};
  if (d.denial) j["reason"] = denial_reason_name(*d.denial);
  j["result"] = result_to_json(d.result);
  return j;
}

std::size_t serve(Gateway& gateway, std::istream& in, std::ostream& out) {
  std::string line;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++count;
    json reply;
    try {
      const json j = json::parse(line);
      const RequestEnvelope req = request_from_json(j);
      reply = decision_to_json(req, gateway.route(req));
    } catch (const json::exception& e) {
      reply = json{{"error", std::string("malformed request: ") + e.what()}};
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kAuditWriteFailure) throw;
      reply = json{{"error", e.what()}};
    }
    out << reply.dump() << '\n';
    out.flush();
  }
  return count;
}

}  // namespace meterguard::gateway
