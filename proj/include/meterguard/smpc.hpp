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
#include <string>
#include <variant>
#include <vector>

#include "meterguard/meterdata.hpp"
#include "meterguard/random.hpp"

namespace meterguard::smpc {

// Shares live in Z_M with M = 2^64; uint64_t arithmetic wraps natively.
using RingElement = std::uint64_t;
using PartyId = std::string;

inline constexpr RingElement kHalfModulus = RingElement{1} << 63;

struct Share {
  RingElement value = 0;
  PartyId origin_party;
  PartyId holder_party;
};

struct PartyInput {
  PartyId party_id;
  RingElement secret = 0;

  // Throws kNegativeEnergy for negative input.
  static PartyInput from_energy(PartyId id, meterdata::EnergyQuantity e);
};

enum class MessageKind { kShare, kPartialSum };

struct Message {
  std::size_t round = 0;
  PartyId from;
  PartyId to;
  MessageKind kind = MessageKind::kShare;
  RingElement value = 0;
};

struct Abort {
  std::string reason;
};

struct ProtocolTranscript {
  std::vector<Message> messages;
  std::variant<RingElement, Abort> result = RingElement{0};
};

// n - 1 uniform shares plus secret - sum(others). Shares are addressed to
// `holders` in order; origin is recorded on each. Throws kInvalidPartyCount
// for fewer than two holders.
std::vector<Share> share(RingElement secret, const PartyId& origin,
                         const std::vector<PartyId>& holders, RandomSource& rng);
// Holders named "p0" .. "p{n-1}", origin "dealer".
std::vector<Share> share(RingElement secret, std::size_t n, RandomSource& rng);

RingElement reconstruct(const std::vector<Share>& shares);

// Decodes a ring sum as non-negative milli-kWh; values >= M/2 are overflow.
meterdata::EnergyQuantity decode_energy(RingElement value);

struct SecureSumOutcome {
  // Decoded total, or the abort reason.
  std::variant<meterdata::EnergyQuantity, Abort> result;
  ProtocolTranscript transcript;

  bool aborted() const { return std::holds_alternative<Abort>(result); }
};

inline constexpr const char* kNotEnoughParticipants = "not enough participants";

// Round 1: every party shares its secret to all n parties (n^2 messages,
// self-delivery included). Round 2: every party sends its local share sum to
// the combiner. Messages are delivered only at round boundaries. Throws
// kDuplicateParty.
SecureSumOutcome secure_sum(const std::vector<PartyInput>& inputs,
                            std::size_t min_participants, RandomSource& rng);

inline constexpr const char* kCombinerId = "combiner";

}  // namespace meterguard::smpc
