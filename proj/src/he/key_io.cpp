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

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "meterguard/error.hpp"
#include "meterguard/he.hpp"

namespace meterguard::he {

namespace {

mpz_class decimal_field(const nlohmann::json& j, const char* name) {
  if (!j.contains(name) || !j[name].is_string()) {
    throw Error(ErrorCode::kInvalidArgument, std::string("missing key field ") + name);
  }
  mpz_class v;
  if (v.set_str(j[name].get<std::string>(), 10) != 0) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad decimal in ") + name);
  }
  return v;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kStorageFailure, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path + ": " + e.what());
  }
}

}  // namespace

void save_public_key(const PublicKey& pub, const std::string& path) {
  nlohmann::json j;
  j["scheme"] = "paillier";
  j["key_id"] = pub.key_id;
  j["n"] = pub.n.get_str(10);
  j["g"] = pub.g.get_str(10);
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kStorageFailure, "cannot write " + path);
}

PublicKey load_public_key(const std::string& path) {
  const nlohmann::json j = read_json(path);
  PublicKey pub = PublicKey::from_modulus(decimal_field(j, "n"));
  if (j.contains("g") && decimal_field(j, "g") != pub.g) {
    throw Error(ErrorCode::kInvalidArgument, "only g = n + 1 is supported");
  }
  return pub;
}

void save_secret_key(const Keypair& keypair, const std::string& path) {
  nlohmann::json j;
  j["scheme"] = "paillier";
  j["key_id"] = keypair.pub.key_id;
  j["n"] = keypair.pub.n.get_str(10);
  j["lambda"] = keypair.sec.lambda.get_str(10);
  j["mu"] = keypair.sec.mu.get_str(10);
  const std::string text = j.dump(2) + "\n";

  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
  if (fd < 0) {
    throw Error(ErrorCode::kStorageFailure, path + ": " + std::strerror(errno));
  }
  // O_CREAT's mode does not apply to an existing file.
  ::fchmod(fd, 0600);
  const ssize_t written = ::write(fd, text.data(), text.size());
  ::close(fd);
  if (written != static_cast<ssize_t>(text.size())) {
    throw Error(ErrorCode::kStorageFailure, "short write to " + path);
  }
}

Keypair load_secret_key(const std::string& path) {
  const nlohmann::json j = read_json(path);
  Keypair kp;
  kp.pub = PublicKey::from_modulus(decimal_field(j, "n"));
  kp.sec.lambda = decimal_field(j, "lambda");
  kp.sec.mu = decimal_field(j, "mu");
  return kp;
}

}  // namespace meterguard::he
