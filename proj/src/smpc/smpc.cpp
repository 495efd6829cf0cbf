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

#include "meterguard/smpc.hpp"

#include <deque>
#include <map>
#include <set>

#include "meterguard/error.hpp"

namespace meterguard::smpc {

PartyInput PartyInput::from_energy(PartyId id, meterdata::EnergyQuantity e) {
  if (e.milli_kwh() < 0) throw Error(ErrorCode::kNegativeEnergy, id);
  return PartyInput{std::move(id), static_cast<RingElement>(e.milli_kwh())};
}

std::vector<Share> share(RingElement secret, const PartyId& origin,
                         const std::vector<PartyId>& holders, RandomSource& rng) {
  if (holders.size() < 2) {
    throw Error(ErrorCode::kInvalidPartyCount, "need at least 2 shares");
  }
  std::vector<Share> out;
  out.reserve(holders.size());
  RingElement rest = secret;
  for (std::size_t i = 0; i + 1 < holders.size(); ++i) {
    const RingElement r = rng.next_u64();
    rest -= r;
    out.push_back(Share{r, origin, holders[i]});
  }
  out.push_back(Share{rest, origin, holders.back()});
  return out;
}

std::vector<Share> share(RingElement secret, std::size_t n, RandomSource& rng) {
  std::vector<PartyId> holders;
  for (std::size_t i = 0; i < n; ++i) holders.push_back("p" + std::to_string(i));
  return share(secret, "dealer", holders, rng);
}

RingElement reconstruct(const std::vector<Share>& shares) {
  RingElement sum = 0;
  for (const auto& s : shares) sum += s.value;
  return sum;
}

meterdata::EnergyQuantity decode_energy(RingElement value) {
  if (value >= kHalfModulus) {
    throw Error(ErrorCode::kOverflow, "ring sum outside the non-negative range");
  }
  return meterdata::EnergyQuantity::from_milli(static_cast<std::int64_t>(value));
}

namespace {

// In-process message bus: sends are buffered and only become visible to
// recipients when the round barrier flushes them. Every delivery is logged.
class MessageBus {
 public:
  explicit MessageBus(ProtocolTranscript& transcript) : transcript_(transcript) {}

  void send(Message m) { outbox_.push_back(std::move(m)); }

  void barrier() {
    for (auto& m : outbox_) {
      inbox_[m.to].push_back(m);
      transcript_.messages.push_back(std::move(m));
    }
    outbox_.clear();
  }

  std::deque<Message> drain(const PartyId& party) {
    auto it = inbox_.find(party);
    if (it == inbox_.end()) return {};
    std::deque<Message> out = std::move(it->second);
    inbox_.erase(it);
    return out;
  }

 private:
  ProtocolTranscript& transcript_;
  std::vector<Message> outbox_;
  std::map<PartyId, std::deque<Message>> inbox_;
};

}  // namespace

SecureSumOutcome secure_sum(const std::vector<PartyInput>& inputs,
                            std::size_t min_participants, RandomSource& rng) {
  std::set<PartyId> ids;
  for (const auto& in : inputs) {
    if (in.party_id.empty() || in.party_id == kCombinerId) {
      throw Error(ErrorCode::kInvalidArgument, "invalid party id '" + in.party_id + "'");
    }
    if (!ids.insert(in.party_id).second) {
      throw Error(ErrorCode::kDuplicateParty, in.party_id);
    }
    if (in.secret >= kHalfModulus) {
      throw Error(ErrorCode::kOverflow, in.party_id + " input outside encoding range");
    }
  }

  SecureSumOutcome outcome;
  if (inputs.size() < min_participants || inputs.size() < 2) {
    Abort abort{kNotEnoughParticipants};
    outcome.transcript.result = abort;
    outcome.result = std::move(abort);
    return outcome;
  }

  std::vector<PartyId> roster;
  for (const auto& in : inputs) roster.push_back(in.party_id);
  MessageBus bus(outcome.transcript);

  // Round 1: each party deals one share of its secret to every party.
  for (const auto& in : inputs) {
    for (auto& s : share(in.secret, in.party_id, roster, rng)) {
      bus.send(Message{1, s.origin_party, s.holder_party, MessageKind::kShare, s.value});
    }
  }
  bus.barrier();

  // Round 2: local sums of received shares are shares of the total.
  for (const auto& party : roster) {
    RingElement partial = 0;
    for (const auto& m : bus.drain(party)) partial += m.value;
    bus.send(Message{2, party, kCombinerId, MessageKind::kPartialSum, partial});
  }
  bus.barrier();

  RingElement total = 0;
  for (const auto& m : bus.drain(kCombinerId)) total += m.value;
  outcome.transcript.result = total;
  outcome.result = decode_energy(total);
  return outcome;
}

}  // namespace meterguard::smpc
