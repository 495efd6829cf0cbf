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

#include <gmpxx.h>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "meterguard/random.hpp"

// Paillier cryptosystem with g = n + 1.
//
// Big-integer arithmetic is not constant time. This is an analytics engine,
// not a hardened crypto product; do not expose decryption to untrusted
// timing observers.
namespace meterguard::he {

struct PublicKey {
  mpz_class n;
  mpz_class n_squared;
  mpz_class g;
  // First 16 hex chars of SHA-256 over the decimal modulus.
  std::string key_id;

  static PublicKey from_modulus(const mpz_class& n);
};

struct SecretKey {
  mpz_class lambda;  // lcm(p - 1, q - 1)
  mpz_class mu;      // L(g^lambda mod n^2)^-1 mod n
};

struct Keypair {
  PublicKey pub;
  SecretKey sec;
};

struct Ciphertext {
  mpz_class value;
  std::string key_id;
};

inline constexpr std::size_t kDefaultKeyBits = 2048;
inline constexpr std::size_t kTestKeyBits = 512;

// Two random primes of bits/2 bits each; n has exactly `bits` bits. Throws
// kInvalidArgument for bits < 64 and kPrimeGenerationFailure after bounded
// retries.
Keypair keygen(std::size_t bits, RandomSource& rng);

// Uniform in [1, n) with gcd(r, n) = 1.
mpz_class random_randomizer(const PublicKey& pub, RandomSource& rng);

// c = g^m * r^n mod n^2. Throws kPlaintextOutOfRange unless 0 <= m < n, and
// kBadRandomizer unless 1 <= r < n with gcd(r, n) = 1.
Ciphertext encrypt(const mpz_class& m, const mpz_class& r, const PublicKey& pub);
Ciphertext encrypt(const mpz_class& m, const PublicKey& pub, RandomSource& rng);

// m = L(c^lambda mod n^2) * mu mod n. Throws kWrongKey on key id mismatch.
mpz_class decrypt(const Ciphertext& c, const Keypair& keypair);

// Decrypts to (m1 + m2) mod n.
Ciphertext add(const Ciphertext& c1, const Ciphertext& c2, const PublicKey& pub);
// Decrypts to (k * m) mod n.
Ciphertext scalar_mul(const Ciphertext& c, const mpz_class& k, const PublicKey& pub);

// Fold of add; the empty fold is the r = 1 encryption of zero.
Ciphertext encrypted_aggregate(const std::vector<Ciphertext>& cts,
                               const PublicKey& pub);

// Per-interval prices: micro-currency per milli-kWh.
struct RateSchedule {
  std::vector<std::uint64_t> rates;
};

// Default upper bound on one interval's usage in milli-kWh (5 kWh).
inline constexpr std::uint64_t kDefaultUsageBound = 5'000;

// Sum_h rates[h] * usage[h] under encryption; only the folded total is
// returned. Throws kOverflow when sum_h rates[h] * usage_bound could reach n,
// kLengthMismatch when lengths differ.
Ciphertext encrypted_bill(const std::vector<Ciphertext>& usage_cts,
                          const RateSchedule& rates, const PublicKey& pub,
                          std::uint64_t usage_bound = kDefaultUsageBound);

// Ciphertext text form: "<key_id>:<lowercase hex value>".
std::string format_ciphertext(const Ciphertext& c);
Ciphertext parse_ciphertext(const std::string& text);

// Key files hold decimal big integers under named fields.
void save_public_key(const PublicKey& pub, const std::string& path);
PublicKey load_public_key(const std::string& path);
// Written with mode 0600.
void save_secret_key(const Keypair& keypair, const std::string& path);
Keypair load_secret_key(const std::string& path);

namespace testing {

// Builds a keypair from caller-chosen primes. Test-only: never used by the
// CLI. Throws kInvalidArgument if p == q, either is not prime, or
// gcd(n, (p-1)(q-1)) != 1.
Keypair keypair_from_primes(const mpz_class& p, const mpz_class& q);

}  // namespace testing

}  // namespace meterguard::he
