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

#include <vector>

#include "meterguard/digest.hpp"
#include "meterguard/error.hpp"
#include "meterguard/he.hpp"

namespace meterguard::he {

namespace {

constexpr int kPrimalityReps = 40;
constexpr std::size_t kAttemptsPerBit = 64;

mpz_class random_bits(std::size_t bits, RandomSource& rng) {
  std::vector<std::uint8_t> bytes((bits + 7) / 8);
  rng.fill_bytes(bytes);
  mpz_class out;
  mpz_import(out.get_mpz_t(), bytes.size(), 1, 1, 0, 0, bytes.data());
  // Drop excess high bits.
  mpz_fdiv_r_2exp(out.get_mpz_t(), out.get_mpz_t(), bits);
  return out;
}

// Random prime with exactly `bits` bits and its top two bits set, so the
// product of two such primes has exactly the combined bit length.
mpz_class random_prime(std::size_t bits, RandomSource& rng) {
  for (std::size_t attempt = 0; attempt < kAttemptsPerBit * bits; ++attempt) {
    mpz_class cand = random_bits(bits, rng);
    mpz_setbit(cand.get_mpz_t(), bits - 1);
    mpz_setbit(cand.get_mpz_t(), bits - 2);
    mpz_setbit(cand.get_mpz_t(), 0);
    if (mpz_probab_prime_p(cand.get_mpz_t(), kPrimalityReps) > 0) return cand;
  }
  throw Error(ErrorCode::kPrimeGenerationFailure,
              "no " + std::to_string(bits) + "-bit prime found");
}

mpz_class l_function(const mpz_class& u, const mpz_class& n) {
  return (u - 1) / n;
}

void check_same_key(const Ciphertext& c, const PublicKey& pub) {
  if (c.key_id != pub.key_id) {
    throw Error(ErrorCode::kKeyMismatch,
                "ciphertext key " + c.key_id + " vs " + pub.key_id);
  }
}

Keypair derive_keypair(const mpz_class& p, const mpz_class& q) {
  Keypair kp;
  kp.pub = PublicKey::from_modulus(p * q);
  mpz_lcm(kp.sec.lambda.get_mpz_t(), mpz_class(p - 1).get_mpz_t(),
          mpz_class(q - 1).get_mpz_t());
  mpz_class u;
  mpz_powm(u.get_mpz_t(), kp.pub.g.get_mpz_t(), kp.sec.lambda.get_mpz_t(),
           kp.pub.n_squared.get_mpz_t());
  const mpz_class l = l_function(u, kp.pub.n);
  if (mpz_invert(kp.sec.mu.get_mpz_t(), l.get_mpz_t(), kp.pub.n.get_mpz_t()) == 0) {
    throw Error(ErrorCode::kInvalidArgument, "L(g^lambda) not invertible mod n");
  }
  return kp;
}

bool valid_prime_pair(const mpz_class& p, const mpz_class& q) {
  if (p == q) return false;
  const mpz_class phi = (p - 1) * (q - 1);
  return gcd(mpz_class(p * q), phi) == 1;
}

}  // namespace

PublicKey PublicKey::from_modulus(const mpz_class& n) {
  if (n < 6) throw Error(ErrorCode::kInvalidArgument, "modulus too small");
  PublicKey pub;
  pub.n = n;
  pub.n_squared = n * n;
  pub.g = n + 1;
  const std::string decimal = n.get_str(10);
  pub.key_id = to_hex(sha256(decimal)).substr(0, 16);
  return pub;
}

Keypair keygen(std::size_t bits, RandomSource& rng) {
  if (bits < 64) throw Error(ErrorCode::kInvalidArgument, "key size below 64 bits");
  const std::size_t p_bits = bits / 2;
  const std::size_t q_bits = bits - p_bits;
  for (int attempt = 0; attempt < 16; ++attempt) {
    const mpz_class p = random_prime(p_bits, rng);
    const mpz_class q = random_prime(q_bits, rng);
    if (valid_prime_pair(p, q)) return derive_keypair(p, q);
  }
  throw Error(ErrorCode::kPrimeGenerationFailure, "no valid prime pair");
}

mpz_class random_randomizer(const PublicKey& pub, RandomSource& rng) {
  const std::size_t bits = mpz_sizeinbase(pub.n.get_mpz_t(), 2);
  for (;;) {
    const mpz_class r = random_bits(bits, rng);
    if (r >= 1 && r < pub.n && gcd(r, pub.n) == 1) return r;
  }
}

Ciphertext encrypt(const mpz_class& m, const mpz_class& r, const PublicKey& pub) {
  if (m < 0 || m >= pub.n) {
    throw Error(ErrorCode::kPlaintextOutOfRange, "plaintext must lie in [0, n)");
  }
  if (r < 1 || r >= pub.n || gcd(r, pub.n) != 1) {
    throw Error(ErrorCode::kBadRandomizer, "randomizer must be a unit mod n");
  }
  // g^m = (1 + n)^m = 1 + m n (mod n^2).
  mpz_class gm = (1 + m * pub.n) % pub.n_squared;
  mpz_class rn;
  mpz_powm(rn.get_mpz_t(), r.get_mpz_t(), pub.n.get_mpz_t(), pub.n_squared.get_mpz_t());
  return Ciphertext{(gm * rn) % pub.n_squared, pub.key_id};
}

Ciphertext encrypt(const mpz_class& m, const PublicKey& pub, RandomSource& rng) {
  return encrypt(m, random_randomizer(pub, rng), pub);
}

mpz_class decrypt(const Ciphertext& c, const Keypair& keypair) {
  if (c.key_id != keypair.pub.key_id) {
    throw Error(ErrorCode::kWrongKey,
                "ciphertext key " + c.key_id + " vs " + keypair.pub.key_id);
  }
  const PublicKey& pub = keypair.pub;
  if (c.value < 1 || c.value >= pub.n_squared) {
    throw Error(ErrorCode::kInvalidArgument, "ciphertext outside [1, n^2)");
  }
  mpz_class u;
  mpz_powm(u.get_mpz_t(), c.value.get_mpz_t(), keypair.sec.lambda.get_mpz_t(),
           pub.n_squared.get_mpz_t());
  return (l_function(u, pub.n) * keypair.sec.mu) % pub.n;
}

Ciphertext add(const Ciphertext& c1, const Ciphertext& c2, const PublicKey& pub) {
  check_same_key(c1, pub);
  check_same_key(c2, pub);
  return Ciphertext{(c1.value * c2.value) % pub.n_squared, pub.key_id};
}

Ciphertext scalar_mul(const Ciphertext& c, const mpz_class& k, const PublicKey& pub) {
  check_same_key(c, pub);
  if (k < 0) throw Error(ErrorCode::kInvalidArgument, "scalar must be non-negative");
  Ciphertext out{0, pub.key_id};
  mpz_powm(out.value.get_mpz_t(), c.value.get_mpz_t(), k.get_mpz_t(),
           pub.n_squared.get_mpz_t());
  return out;
}

Ciphertext encrypted_aggregate(const std::vector<Ciphertext>& cts,
                               const PublicKey& pub) {
  Ciphertext acc{1, pub.key_id};
  for (const auto& c : cts) acc = add(acc, c, pub);
  return acc;
}

Ciphertext encrypted_bill(const std::vector<Ciphertext>& usage_cts,
                          const RateSchedule& rates, const PublicKey& pub,
                          std::uint64_t usage_bound) {
  if (usage_cts.size() != rates.rates.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(usage_cts.size()) + " usage vs " +
                    std::to_string(rates.rates.size()) + " rates");
  }
  mpz_class worst = 0;
  for (std::uint64_t rate : rates.rates) {
    worst += mpz_class(std::to_string(rate)) * mpz_class(std::to_string(usage_bound));
  }
  if (worst >= pub.n) {
    throw Error(ErrorCode::kOverflow, "bill could wrap modulo n");
  }
  Ciphertext acc{1, pub.key_id};
  for (std::size_t h = 0; h < usage_cts.size(); ++h) {
    const mpz_class rate(std::to_string(rates.rates[h]));
    acc = add(acc, scalar_mul(usage_cts[h], rate, pub), pub);
  }
  return acc;
}

std::string format_ciphertext(const Ciphertext& c) {
  return c.key_id + ":" + c.value.get_str(16);
}

Ciphertext parse_ciphertext(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos || colon == 0) {
    throw Error(ErrorCode::kInvalidArgument, "expected <key_id>:<hex>");
  }
  std::string hex = text.substr(colon + 1);
  while (!hex.empty() && (hex.back() == '\n' || hex.back() == '\r' || hex.back() == ' ')) {
    hex.pop_back();
  }
  Ciphertext c;
  c.key_id = text.substr(0, colon);
  if (hex.empty() || c.value.set_str(hex, 16) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "bad ciphertext hex");
  }
  return c;
}

namespace testing {

Keypair keypair_from_primes(const mpz_class& p, const mpz_class& q) {
  if (mpz_probab_prime_p(p.get_mpz_t(), kPrimalityReps) == 0 ||
      mpz_probab_prime_p(q.get_mpz_t(), kPrimalityReps) == 0) {
    throw Error(ErrorCode::kInvalidArgument, "p and q must be prime");
  }
  if (!valid_prime_pair(p, q)) {
    throw Error(ErrorCode::kInvalidArgument,
                "need p != q and gcd(n, (p-1)(q-1)) = 1");
  }
  return derive_keypair(p, q);
}

}  // namespace testing

}  // namespace meterguard::he
