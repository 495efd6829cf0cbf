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

#include <chrono>
#include <cstdio>
#include <fstream>

#include "meterguard/audit.hpp"
#include "meterguard/error.hpp"

namespace meterguard::gateway {

namespace {

void put_field(std::string& out, std::string_view name, std::string_view value) {
  out.append(name);
  out += '=';
  out += std::to_string(value.size());
  out += ':';
  out.append(value);
  out += ';';
}

std::string exact_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::int64_t system_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::string canonical_serialization(const AuditRecord& r) {
  std::string out;
  put_field(out, "seq", std::to_string(r.seq));
  put_field(out, "request_id", r.request_id);
  put_field(out, "requester", r.requester);
  put_field(out, "decision", r.decision);
  put_field(out, "mechanism", r.mechanism);
  put_field(out, "epsilon_spent", exact_real(r.epsilon_spent));
  put_field(out, "timestamp", std::to_string(r.timestamp));
  put_field(out, "prev_hash", to_hex(r.prev_hash));
  return out;
}

Digest compute_record_hash(const AuditRecord& r) {
  const std::string body = canonical_serialization(r);
  std::vector<std::uint8_t> material(r.prev_hash.begin(), r.prev_hash.end());
  material.insert(material.end(), body.begin(), body.end());
  return sha256(material);
}

nlohmann::json record_to_json(const AuditRecord& r) {
  return nlohmann::json{{"seq", r.seq},
                        {"request_id", r.request_id},
                        {"requester", r.requester},
                        {"decision", r.decision},
                        {"mechanism", r.mechanism},
                        {"epsilon_spent", r.epsilon_spent},
                        {"timestamp", r.timestamp},
                        {"prev_hash", to_hex(r.prev_hash)},
                        {"hash", to_hex(r.hash)}};
}

AuditRecord record_from_json(const nlohmann::json& j) {
  try {
    AuditRecord r;
    r.seq = j.at("seq").get<std::uint64_t>();
    r.request_id = j.at("request_id").get<std::string>();
    r.requester = j.at("requester").get<std::string>();
    r.decision = j.at("decision").get<std::string>();
    r.mechanism = j.at("mechanism").get<std::string>();
    r.epsilon_spent = j.at("epsilon_spent").get<double>();
    r.timestamp = j.at("timestamp").get<std::int64_t>();
    const auto prev = digest_from_hex(j.at("prev_hash").get<std::string>());
    const auto hash = digest_from_hex(j.at("hash").get<std::string>());
    if (!prev || !hash) throw Error(ErrorCode::kMalformedRow, "bad digest hex");
    r.prev_hash = *prev;
    r.hash = *hash;
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRow, e.what());
  }
}

void FileAuditSink::persist(const AuditRecord& record) {
  std::ofstream out(path_, std::ios::app);
  out << record_to_json(record).dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::kStorageFailure, "cannot append to " + path_);
}

AuditLog::AuditLog(std::unique_ptr<AuditSink> sink, Clock clock)
    : sink_(std::move(sink)), clock_(std::move(clock)) {
  if (!clock_) clock_ = system_now;
}

std::vector<AuditRecord> AuditLog::read_file(const std::string& path) {
  std::vector<AuditRecord> out;
  std::ifstream in(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(ErrorCode::kMalformedRow, "audit log " + path, line_no);
    }
    out.push_back(record_from_json(j));
  }
  return out;
}

AuditLog AuditLog::open(const std::string& path, Clock clock) {
  AuditLog log(std::make_unique<FileAuditSink>(path), std::move(clock));
  log.records_ = read_file(path);
  return log;
}

AuditRecord AuditLog::append(const AuditFields& fields) {
  AuditRecord r;
  r.seq = records_.empty() ? 1 : records_.back().seq + 1;
  r.request_id = fields.request_id;
  r.requester = fields.requester;
  r.decision = fields.decision;
  r.mechanism = fields.mechanism;
  r.epsilon_spent = fields.epsilon_spent;
  r.timestamp = clock_();
  if (!records_.empty()) r.prev_hash = records_.back().hash;
  r.hash = compute_record_hash(r);
  if (sink_) {
    try {
      sink_->persist(r);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kStorageFailure, e.what());
    }
  }
  records_.push_back(r);
  return r;
}

ChainVerification verify_chain(std::span<const AuditRecord> records) {
  Digest expected_prev{};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const AuditRecord& r = records[i];
    const std::uint64_t expected_seq = i + 1;
    if (r.seq != expected_seq || r.prev_hash != expected_prev ||
        compute_record_hash(r) != r.hash) {
      return {false, expected_seq};
    }
    expected_prev = r.hash;
  }
  return {true, std::nullopt};
}

}  // namespace meterguard::gateway
