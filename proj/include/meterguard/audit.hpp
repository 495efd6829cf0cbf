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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "meterguard/digest.hpp"

namespace meterguard::gateway {

// One hash-chained log entry. `hash` = SHA-256(prev_hash || canonical form of
// every other field); the genesis record chains to 32 zero bytes.
struct AuditRecord {
  std::uint64_t seq = 0;  // 1-based, strictly increasing
  std::string request_id;
  std::string requester;
  std::string decision;   // "Allowed" or "Denied(<reason>)"
  std::string mechanism;
  double epsilon_spent = 0.0;
  std::int64_t timestamp = 0;
  Digest prev_hash{};
  Digest hash{};

  bool operator==(const AuditRecord&) const = default;
};

// Caller-supplied part of a record; the log fills in seq, time and hashes.
struct AuditFields {
  std::string request_id;
  std::string requester;
  std::string decision;
  std::string mechanism;
  double epsilon_spent = 0.0;
};

// Length-prefixed `name=<len>:<value>;` list over all fields except `hash`.
std::string canonical_serialization(const AuditRecord& record);
Digest compute_record_hash(const AuditRecord& record);

nlohmann::json record_to_json(const AuditRecord& record);
// Throws kMalformedRow on missing or mistyped fields.
AuditRecord record_from_json(const nlohmann::json& j);

// Durable storage behind the log. persist() must either store the record or
// throw; the log only commits records that persisted.
class AuditSink {
 public:
  virtual ~AuditSink() = default;
  virtual void persist(const AuditRecord& record) = 0;
};

// Appends one JSON object per line and flushes before returning.
class FileAuditSink final : public AuditSink {
 public:
  explicit FileAuditSink(std::string path) : path_(std::move(path)) {}
  void persist(const AuditRecord& record) override;

 private:
  std::string path_;
};

class AuditLog {
 public:
  using Clock = std::function<std::int64_t()>;

  explicit AuditLog(std::unique_ptr<AuditSink> sink = nullptr, Clock clock = {});
  // Reads an existing JSONL log (unverified) and appends to the same file.
  static AuditLog open(const std::string& path, Clock clock = {});
  static std::vector<AuditRecord> read_file(const std::string& path);

  // Chains, persists, then commits. Throws kStorageFailure and leaves the
  // log unchanged if the sink fails.
  AuditRecord append(const AuditFields& fields);

  const std::vector<AuditRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

 private:
  std::unique_ptr<AuditSink> sink_;
  Clock clock_;
  std::vector<AuditRecord> records_;
};

struct ChainVerification {
  bool valid = true;
  std::optional<std::uint64_t> first_bad_seq;
};

// Recomputes every digest, checks each prev_hash link and the seq numbering.
// first_bad_seq is the position-based sequence number of the first record
// that fails any check.
ChainVerification verify_chain(std::span<const AuditRecord> records);

}  // namespace meterguard::gateway
