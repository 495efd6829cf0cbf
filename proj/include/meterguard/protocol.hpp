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

#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "meterguard/gateway.hpp"

namespace meterguard::gateway {

// Request line:
//   {"request_id": "r1", "requester": "alice", "purpose": "Secondary",
//    "consent": false, "operation": {"type": "DpQuery", ...}}
// Operation fields per type:
//   RawExport        deidentified
//   DpQuery          query (sum|count|mean|histogram), epsilon, delta,
//                    timestamp, edges_kwh
//   SynthGenerate    clusters, households, days, seed
//   FedTrain         clients, rounds, local_steps, learning_rate, clip_norm,
//                    dp_sigma, aggregation (plain|fixed_point|secure),
//                    holdout_fraction, seed
//   SmpcSum          timestamp, noise_epsilon
//   HeBill           meter_id, day (YYYY-MM-DD), rates
//   AggregateReport  group_by (attribute name; omitted groups by timestamp)
// Throws kInvalidArgument on anything malformed.
RequestEnvelope request_from_json(const nlohmann::json& j);
nlohmann::json request_to_json(const RequestEnvelope& req);

nlohmann::json decision_to_json(const RequestEnvelope& req, const Decision& d);

// Reads request lines until EOF and writes one JSON line per request. A line
// that cannot be routed gets {"error": ...} and no audit record; an audit
// failure stops the loop and is rethrown. Returns the number of lines read.
std::size_t serve(Gateway& gateway, std::istream& in, std::ostream& out);

}  // namespace meterguard::gateway
